#pragma once

#include <vector>

#include "fft.hpp"
#include "sonic/modem.hpp"

namespace sonic::modem::detail {

// header: u32 length + crc32 of it, BPSK on the first 64 data carriers
inline constexpr int kHeaderBits = 64;
inline constexpr std::uint32_t kMaxBurstBytes = 1u << 22;

// Known sequences and symbol synthesis shared by both directions.
struct Tables {
    explicit Tables(const ModulationProfile& p);

    ModulationProfile prof;
    int first = 0;
    std::vector<int> pilots, data;
    std::vector<cd> known;  // preamble and reference symbol, all carriers
    std::vector<double> pilot_vals;

    // Writes cyclic_prefix_len + fft_size samples (unnormalised).
    void synth(const std::vector<cd>& carriers, RealFft& fft, double* out) const;
    std::vector<cd> data_symbol(const std::uint8_t* bits, std::size_t nbits, std::size_t& pos) const;
    std::vector<cd> header_symbol(std::uint32_t len) const;
    std::vector<double> preamble_waveform() const;
};

}  // namespace sonic::modem::detail
