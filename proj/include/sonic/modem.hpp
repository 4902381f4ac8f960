#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sonic::modem {

using Bytes = std::vector<std::uint8_t>;
using cd = std::complex<double>;

enum class Constellation { Bpsk = 1, Qpsk = 2 };

struct ModulationProfile {
    int sample_rate = 44100;
    int fft_size = 512;  // subcarrier spacing = sample_rate / fft_size
    int n_subcarriers = 92;
    double center_freq = 9200.0;
    int cyclic_prefix_len = 64;
    Constellation constellation = Constellation::Qpsk;
    int n_pilots = 8;
    // a known reference symbol follows every this many data symbols (0 = never)
    int reference_interval = 4;
    double peak_amplitude = 0.89;  // fraction of full scale
    double tail_silence_s = 0.020;
    double sync_threshold = 0.6;
    int timing_backoff = 8;  // samples of cyclic prefix used ahead of the FFT window
    std::uint32_t pn_seed = 0x50C1Cu;

    double subcarrier_spacing() const { return double(sample_rate) / fft_size; }
    int first_bin() const;
    int symbol_len() const { return fft_size + cyclic_prefix_len; }
    int preamble_len() const { return cyclic_prefix_len + 2 * fft_size; }
    int tail_len() const;
    int bits_per_point() const { return static_cast<int>(constellation); }
    std::vector<int> pilot_indices() const;  // subcarrier indices 0..n_subcarriers-1
    std::vector<int> data_indices() const;
    int bits_per_symbol() const;
    double band_low_hz() const;
    double band_high_hz() const;

    // Throws std::invalid_argument when the profile cannot work.
    void validate() const;
};

struct PcmChunk {
    std::vector<std::int16_t> samples;
    int sample_rate = 44100;
};

// Burst layout for n channel bytes.
struct BurstLayout {
    int data_symbols = 0;
    int reference_symbols = 0;
    long preamble_samples = 0;
    long header_samples = 0;
    long payload_samples = 0;  // data + reference symbols
    long tail_samples = 0;
    long total() const { return preamble_samples + header_samples + payload_samples + tail_samples; }
};

BurstLayout burst_layout(std::size_t n_bytes, const ModulationProfile& p);

PcmChunk modulate(const Bytes& channel_bytes, const ModulationProfile& p = {});

// Analytic net bit rate: data bits per symbol over symbol time, reference overhead included.
double effective_throughput(const ModulationProfile& p = {});

struct SyncReport {
    double corr_peak = 0.0;
    double snr_db = 0.0;
    std::int64_t start_sample = 0;  // first sample of the preamble
    std::int64_t end_sample = 0;    // one past the last data symbol
};

struct Burst {
    Bytes data;
    SyncReport sync;
};

// Streaming demodulator. Output depends only on the concatenated samples, not on
// how they were chunked.
class Demodulator {
public:
    explicit Demodulator(const ModulationProfile& p = {});
    ~Demodulator();
    Demodulator(const Demodulator&) = delete;
    Demodulator& operator=(const Demodulator&) = delete;

    std::vector<Burst> push(const std::int16_t* samples, std::size_t n);
    std::vector<Burst> push(const PcmChunk& c) { return push(c.samples.data(), c.samples.size()); }
    // End of stream: process whatever is left.
    std::vector<Burst> finish();

    std::int64_t samples_seen() const;
    // Every burst that starts before this sample index has already been returned.
    std::int64_t settled() const;
    std::int64_t bursts_detected() const;
    // NO_SYNC: the stream was consumed and nothing was detected.
    bool no_sync() const;
    // Header symbols that failed their check after a correlation hit.
    std::int64_t false_syncs() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct DemodResult {
    std::vector<Burst> bursts;
    bool no_sync = false;
};

DemodResult demodulate(const std::vector<PcmChunk>& stream, const ModulationProfile& p = {});
DemodResult demodulate(const PcmChunk& pcm, const ModulationProfile& p = {});

// ---- WAV (RIFF, mono, 16-bit PCM) ----
enum class WavErrc { Io, Unsupported, Malformed };

class WavError : public std::runtime_error {
public:
    WavError(WavErrc c, const std::string& what) : std::runtime_error(what), code_(c) {}
    WavErrc code() const { return code_; }

private:
    WavErrc code_;
};

Bytes wav_bytes(const PcmChunk& pcm);
PcmChunk parse_wav(const Bytes& bytes);
void write_wav(const PcmChunk& pcm, const std::string& path);
PcmChunk read_wav(const std::string& path);

}  // namespace sonic::modem
