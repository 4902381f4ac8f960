#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fft.hpp"
#include "ofdm_internal.hpp"
#include "sonic/modem.hpp"

namespace sonic::modem {

int ModulationProfile::first_bin() const {
    double centre_bin = center_freq / subcarrier_spacing();
    return static_cast<int>(std::lround(centre_bin - (n_subcarriers - 1) / 2.0));
}

int ModulationProfile::tail_len() const {
    return static_cast<int>(std::lround(tail_silence_s * sample_rate));
}

std::vector<int> ModulationProfile::pilot_indices() const {
    std::vector<int> v;
    for (int i = 0; i < n_pilots; ++i) v.push_back((2 * i + 1) * n_subcarriers / (2 * n_pilots));
    return v;
}

std::vector<int> ModulationProfile::data_indices() const {
    auto pil = pilot_indices();
    std::vector<int> v;
    for (int i = 0; i < n_subcarriers; ++i)
        if (std::find(pil.begin(), pil.end(), i) == pil.end()) v.push_back(i);
    return v;
}

int ModulationProfile::bits_per_symbol() const {
    return static_cast<int>(data_indices().size()) * bits_per_point();
}

double ModulationProfile::band_low_hz() const { return (first_bin() - 0.5) * subcarrier_spacing(); }

double ModulationProfile::band_high_hz() const {
    return (first_bin() + n_subcarriers - 0.5) * subcarrier_spacing();
}

void ModulationProfile::validate() const {
    auto bad = [](const char* w) { throw std::invalid_argument(std::string("modulation profile: ") + w); };
    if (sample_rate <= 0 || fft_size < 16 || (fft_size & (fft_size - 1))) bad("fft_size must be a power of two");
    if (cyclic_prefix_len < 0 || cyclic_prefix_len >= fft_size) bad("cyclic prefix out of range");
    if (n_pilots < 1 || n_pilots * 2 > n_subcarriers) bad("pilot count out of range");
    if (first_bin() < 1 || first_bin() + n_subcarriers >= fft_size / 2) bad("band does not fit below Nyquist");
    if (static_cast<int>(data_indices().size()) < detail::kHeaderBits) bad("too few data carriers for the header");
    if (band_low_hz() <= 300.0 || band_high_hz() >= 15000.0) bad("band outside the 300-15000 Hz audio passband");
    if (timing_backoff < 0 || timing_backoff > cyclic_prefix_len) bad("timing backoff exceeds the cyclic prefix");
    if (reference_interval < 0) bad("negative reference interval");
    if (peak_amplitude <= 0 || peak_amplitude > 1) bad("peak amplitude out of range");
}

BurstLayout burst_layout(std::size_t n_bytes, const ModulationProfile& p) {
    BurstLayout l;
    int bps = p.bits_per_symbol();
    l.data_symbols = static_cast<int>((n_bytes * 8 + bps - 1) / bps);
    l.reference_symbols =
        p.reference_interval > 0 && l.data_symbols > 0 ? (l.data_symbols - 1) / p.reference_interval : 0;
    l.preamble_samples = p.preamble_len();
    l.header_samples = p.symbol_len();
    l.payload_samples = long(p.symbol_len()) * (l.data_symbols + l.reference_symbols);
    l.tail_samples = p.tail_len();
    return l;
}

double effective_throughput(const ModulationProfile& p) {
    double sym_t = double(p.symbol_len()) / p.sample_rate;
    double r = p.reference_interval;
    double share = p.reference_interval > 0 ? r / (r + 1.0) : 1.0;
    return p.bits_per_symbol() * share / sym_t;
}

namespace detail {

Tables::Tables(const ModulationProfile& p) : prof(p) {
    p.validate();
    first = p.first_bin();
    pilots = p.pilot_indices();
    data = p.data_indices();
    std::mt19937 rng(p.pn_seed);
    const double r = 1.0 / std::sqrt(2.0);
    known.resize(p.n_subcarriers);
    for (auto& v : known) {
        unsigned b = rng();
        v = cd((b & 1) ? -r : r, (b & 2) ? -r : r);
    }
    pilot_vals.resize(pilots.size());
    for (auto& v : pilot_vals) v = (rng() & 1) ? -1.0 : 1.0;
}

void Tables::synth(const std::vector<cd>& carriers, RealFft& fft, double* out) const {
    const int n = prof.fft_size;
    auto* X = fft.freq();
    std::fill(X, X + n / 2 + 1, cd(0, 0));
    for (int i = 0; i < prof.n_subcarriers; ++i) X[first + i] = carriers[i];
    fft.inverse();
    const double* x = fft.time();
    const int cp = prof.cyclic_prefix_len;
    std::copy(x + n - cp, x + n, out);
    std::copy(x, x + n, out + cp);
}

std::vector<cd> Tables::data_symbol(const std::uint8_t* bits, std::size_t nbits, std::size_t& pos) const {
    std::vector<cd> c(prof.n_subcarriers, cd(0, 0));
    for (std::size_t j = 0; j < pilots.size(); ++j) c[pilots[j]] = pilot_vals[j];
    const double r = 1.0 / std::sqrt(2.0);
    auto bit = [&](std::size_t i) { return i < nbits ? bits[i] : std::uint8_t(0); };
    for (int idx : data) {
        if (prof.constellation == Constellation::Qpsk) {
            c[idx] = cd(bit(pos) ? -r : r, bit(pos + 1) ? -r : r);
            pos += 2;
        } else {
            c[idx] = bit(pos) ? -1.0 : 1.0;
            pos += 1;
        }
    }
    return c;
}

std::vector<cd> Tables::header_symbol(std::uint32_t len) const {
    std::uint8_t hdr[8];
    for (int i = 0; i < 4; ++i) hdr[i] = (len >> (8 * i)) & 0xff;
    std::uint32_t crc = static_cast<std::uint32_t>(::crc32_z(0, hdr, 4));
    for (int i = 0; i < 4; ++i) hdr[4 + i] = (crc >> (8 * i)) & 0xff;
    std::vector<cd> c(prof.n_subcarriers, cd(1, 0));
    for (std::size_t j = 0; j < pilots.size(); ++j) c[pilots[j]] = pilot_vals[j];
    for (int i = 0; i < kHeaderBits; ++i) {
        int b = (hdr[i / 8] >> (7 - i % 8)) & 1;
        c[data[i]] = b ? -1.0 : 1.0;
    }
    return c;
}

std::vector<double> Tables::preamble_waveform() const {
    RealFft fft(prof.fft_size);
    const int n = prof.fft_size, cp = prof.cyclic_prefix_len;
    std::vector<double> sym(n + cp);
    synth(known, fft, sym.data());
    std::vector<double> out(prof.preamble_len());
    std::copy(sym.begin(), sym.end(), out.begin());
    std::copy(sym.begin() + cp, sym.end(), out.begin() + n + cp);
    return out;
}

}  // namespace detail

PcmChunk modulate(const Bytes& bytes, const ModulationProfile& p) {
    detail::Tables t(p);
    BurstLayout l = burst_layout(bytes.size(), p);
    const int sl = p.symbol_len();
    std::vector<double> sig(l.total(), 0.0);

    auto pre = t.preamble_waveform();
    std::copy(pre.begin(), pre.end(), sig.begin());
    long at = l.preamble_samples;

    detail::RealFft fft(p.fft_size);
    t.synth(t.header_symbol(static_cast<std::uint32_t>(bytes.size())), fft, &sig[at]);
    at += sl;

    std::vector<std::uint8_t> bits(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        for (int b = 0; b < 8; ++b) bits[8 * i + b] = (bytes[i] >> (7 - b)) & 1;
    std::size_t pos = 0;
    for (int d = 0; d < l.data_symbols; ++d) {
        if (d > 0 && p.reference_interval > 0 && d % p.reference_interval == 0) {
            t.synth(t.known, fft, &sig[at]);
            at += sl;
        }
        t.synth(t.data_symbol(bits.data(), bits.size(), pos), fft, &sig[at]);
        at += sl;
    }

    double peak = 0;
    for (double v : sig) peak = std::max(peak, std::abs(v));
    double scale = peak > 0 ? p.peak_amplitude * 32767.0 / peak : 0.0;
    PcmChunk out;
    out.sample_rate = p.sample_rate;
    out.samples.resize(sig.size());
    for (std::size_t i = 0; i < sig.size(); ++i)
        out.samples[i] = static_cast<std::int16_t>(std::lround(sig[i] * scale));
    return out;
}

}  // namespace sonic::modem
