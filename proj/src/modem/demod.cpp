#include <zlib.h>

#include <algorithm>
#include <cmath>

#include "ofdm_internal.hpp"
#include "sonic/modem.hpp"

namespace sonic::modem {

namespace {

constexpr int kPeakWindow = 600;      // samples searched for the peak after a threshold crossing
constexpr double kSilenceMeanSquare = 1e-8;   // mean-square gate, about -80 dBFS

int next_pow2(int x) {
    int n = 1;
    while (n < x) n <<= 1;
    return n;
}

}  // namespace

struct Demodulator::Impl {
    explicit Impl(const ModulationProfile& p)
        : t(p), prof(p), L(p.preamble_len()), M(next_pow2(3 * p.preamble_len())),
          corr(M), sym(p.fft_size) {
        tmpl = t.preamble_waveform();
        double e = 0;
        for (double v : tmpl) e += v * v;
        tnorm = std::sqrt(e);
        for (auto& v : tmpl) v /= tnorm;
        double* x = corr.time();
        std::fill(x, x + M, 0.0);
        std::copy(tmpl.begin(), tmpl.end(), x);
        corr.forward();
        tspec.assign(corr.freq(), corr.freq() + M / 2 + 1);
        for (auto& c : tspec) c = std::conj(c);
    }

    detail::Tables t;
    ModulationProfile prof;
    const int L, M;
    detail::RealFft corr, sym;
    std::vector<double> tmpl;
    double tnorm = 1;
    std::vector<cd> tspec;

    std::vector<float> buf;
    std::int64_t base = 0;   // absolute index of buf[0]
    std::int64_t total = 0;  // samples received
    std::int64_t search = 0;
    bool in_burst = false;
    std::int64_t t0 = 0;
    double peak = 0;

    std::int64_t detected = 0;
    std::int64_t false_hits = 0;
    bool finished = false;

    float at(std::int64_t i) const { return buf[static_cast<std::size_t>(i - base)]; }

    // Normalised cross-correlation for positions s .. s+count-1 (count <= M-L+1).
    std::vector<double> correlate(std::int64_t s, int count) {
        double* x = corr.time();
        int have = static_cast<int>(std::min<std::int64_t>(M, total - s));
        for (int i = 0; i < have; ++i) x[i] = at(s + i);
        std::fill(x + have, x + M, 0.0);
        std::vector<double> prefix(have + 1, 0.0);
        for (int i = 0; i < have; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
        corr.forward();
        cd* X = corr.freq();
        for (int k = 0; k <= M / 2; ++k) X[k] *= tspec[k];
        corr.inverse();
        std::vector<double> rho(count, 0.0);
        for (int j = 0; j < count; ++j) {
            double e = prefix[j + L] - prefix[j];
            if (e / L < kSilenceMeanSquare) continue;
            rho[j] = corr.time()[j] / M / std::sqrt(e);
        }
        return rho;
    }

    std::vector<cd> spectrum(std::int64_t start) {
        double* x = sym.time();
        for (int i = 0; i < prof.fft_size; ++i) x[i] = at(start + i);
        sym.forward();
        const cd* Y = sym.freq();
        return std::vector<cd>(Y + t.first, Y + t.first + prof.n_subcarriers);
    }

    // Equalise and remove the common phase error measured on the pilots.
    std::vector<cd> equalise(const std::vector<cd>& Y, const std::vector<cd>& H) {
        std::vector<cd> Z(Y.size());
        for (std::size_t i = 0; i < Y.size(); ++i) Z[i] = std::abs(H[i]) > 1e-12 ? Y[i] / H[i] : cd(0, 0);
        cd acc(0, 0);
        for (std::size_t j = 0; j < t.pilots.size(); ++j) acc += Z[t.pilots[j]] * t.pilot_vals[j];
        if (std::abs(acc) > 0) {
            cd rot = std::conj(acc) / std::abs(acc);
            for (auto& z : Z) z *= rot;
        }
        return Z;
    }

    std::int64_t fft_start(std::int64_t symbol_start) const {
        return symbol_start + prof.cyclic_prefix_len - prof.timing_backoff;
    }

    enum class Step { NeedMore, Progress, Done };

    Step try_burst(std::vector<Burst>& out, bool final) {
        const int N = prof.fft_size, sl = prof.symbol_len();
        std::int64_t hdr_start = t0 + L;
        if (total < hdr_start + sl) return final ? Step::Done : Step::NeedMore;

        auto Y1 = spectrum(fft_start(t0));
        auto Y2 = spectrum(fft_start(t0) + N);
        std::vector<cd> H(prof.n_subcarriers);
        for (int i = 0; i < prof.n_subcarriers; ++i) H[i] = (Y1[i] + Y2[i]) / (2.0 * t.known[i]);

        auto Zh = equalise(spectrum(fft_start(hdr_start)), H);
        std::uint8_t hdr[8] = {};
        for (int i = 0; i < detail::kHeaderBits; ++i)
            if (Zh[t.data[i]].real() < 0) hdr[i / 8] |= 0x80 >> (i % 8);
        std::uint32_t len = hdr[0] | (hdr[1] << 8) | (hdr[2] << 16) | (std::uint32_t(hdr[3]) << 24);
        std::uint32_t crc = hdr[4] | (hdr[5] << 8) | (hdr[6] << 16) | (std::uint32_t(hdr[7]) << 24);
        if (crc != static_cast<std::uint32_t>(::crc32_z(0, hdr, 4)) || len > detail::kMaxBurstBytes) {
            ++false_hits;
            in_burst = false;
            search = t0 + 1;
            return Step::Progress;
        }

        BurstLayout lay = burst_layout(len, prof);
        std::int64_t end = hdr_start + sl + lay.payload_samples;
        if (total < end) {
            if (!final) return Step::NeedMore;
            // truncated burst at end of stream: nothing usable
            in_burst = false;
            search = total;
            return Step::Done;
        }

        std::vector<std::uint8_t> bits;
        bits.reserve(std::size_t(lay.data_symbols) * prof.bits_per_symbol());
        double err = 0;
        std::size_t npts = 0;
        std::int64_t s = hdr_start + sl;
        const double r = 1.0 / std::sqrt(2.0);
        for (int d = 0; d < lay.data_symbols; ++d) {
            if (d > 0 && prof.reference_interval > 0 && d % prof.reference_interval == 0) {
                auto Yr = spectrum(fft_start(s));
                for (int i = 0; i < prof.n_subcarriers; ++i) H[i] = 0.5 * (H[i] + Yr[i] / t.known[i]);
                s += sl;
            }
            auto Z = equalise(spectrum(fft_start(s)), H);
            s += sl;
            for (int idx : t.data) {
                cd z = Z[idx];
                if (prof.constellation == Constellation::Qpsk) {
                    bool b0 = z.real() < 0, b1 = z.imag() < 0;
                    bits.push_back(b0);
                    bits.push_back(b1);
                    err += std::norm(z - cd(b0 ? -r : r, b1 ? -r : r));
                } else {
                    bool b0 = z.real() < 0;
                    bits.push_back(b0);
                    err += std::norm(z - cd(b0 ? -1.0 : 1.0, 0));
                }
                ++npts;
            }
        }

        Burst b;
        b.data.assign(len, 0);
        for (std::size_t i = 0; i < std::size_t(len) * 8; ++i)
            if (bits[i]) b.data[i / 8] |= 0x80 >> (i % 8);
        b.sync.corr_peak = peak;
        double mse = npts ? err / npts : 0.0;
        b.sync.snr_db = mse > 1e-6 ? std::min(60.0, -10.0 * std::log10(mse)) : 60.0;
        b.sync.start_sample = t0;
        b.sync.end_sample = end;
        out.push_back(std::move(b));
        ++detected;
        in_burst = false;
        search = end;
        return Step::Progress;
    }

    Step try_search(bool final) {
        const int block = M - L + 1;
        std::int64_t avail = total - search;
        int count = block;
        if (avail < M) {
            if (!final) return Step::NeedMore;
            if (avail < L) return Step::Done;
            count = static_cast<int>(avail - L + 1);
        }
        auto rho = correlate(search, count);
        const double thr = prof.sync_threshold;
        int j = 0;
        while (j < count && rho[j] < thr) ++j;
        if (j == count) {
            search += count;
            return Step::Progress;
        }
        std::int64_t t1 = search + j;
        search = t1;  // nothing before t1 crossed the threshold
        std::int64_t need = t1 + kPeakWindow - 1 + L;
        int wcount = kPeakWindow;
        if (total < need) {
            if (!final) return Step::NeedMore;
            wcount = static_cast<int>(total - L - t1 + 1);
        }
        auto w = correlate(t1, wcount);
        int best = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
        t0 = t1 + best;
        peak = w[best];
        in_burst = true;
        return Step::Progress;
    }

    std::vector<Burst> run(bool final) {
        std::vector<Burst> out;
        for (;;) {
            Step st = in_burst ? try_burst(out, final) : try_search(final);
            if (st != Step::Progress) break;
        }
        // keep only what a pending search or burst can still look at
        std::int64_t keep = in_burst ? t0 : search;
        keep = std::min(keep, total);
        if (keep - base > (1 << 16)) {
            buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(keep - base));
            base = keep;
        }
        return out;
    }
};

Demodulator::Demodulator(const ModulationProfile& p) : impl_(std::make_unique<Impl>(p)) {}
Demodulator::~Demodulator() = default;

std::vector<Burst> Demodulator::push(const std::int16_t* s, std::size_t n) {
    auto& im = *impl_;
    im.buf.reserve(im.buf.size() + n);
    for (std::size_t i = 0; i < n; ++i) im.buf.push_back(s[i] / 32768.0f);
    im.total += static_cast<std::int64_t>(n);
    return im.run(false);
}

std::vector<Burst> Demodulator::finish() {
    auto out = impl_->run(true);
    impl_->finished = true;
    return out;
}

std::int64_t Demodulator::samples_seen() const { return impl_->total; }
std::int64_t Demodulator::settled() const { return impl_->in_burst ? impl_->t0 : impl_->search; }
std::int64_t Demodulator::bursts_detected() const { return impl_->detected; }
std::int64_t Demodulator::false_syncs() const { return impl_->false_hits; }
bool Demodulator::no_sync() const { return impl_->finished && impl_->detected == 0; }

DemodResult demodulate(const std::vector<PcmChunk>& stream, const ModulationProfile& p) {
    Demodulator d(p);
    DemodResult r;
    for (const auto& c : stream) {
        if (c.sample_rate != p.sample_rate) throw std::invalid_argument("pcm sample rate does not match profile");
        auto b = d.push(c);
        r.bursts.insert(r.bursts.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
    }
    auto b = d.finish();
    r.bursts.insert(r.bursts.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
    r.no_sync = d.no_sync();
    return r;
}

DemodResult demodulate(const PcmChunk& pcm, const ModulationProfile& p) {
    return demodulate(std::vector<PcmChunk>{pcm}, p);
}

}  // namespace sonic::modem
