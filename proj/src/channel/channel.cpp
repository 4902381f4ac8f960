#include "sonic/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sonic::channel {

namespace {

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace

double frame_loss_prob(double rssi, const LossModel& m) {
    double logistic = 1.0 / (1.0 + std::exp(m.slope * (rssi - m.p50_rssi)));
    return m.floor + (1.0 - m.floor) * logistic;
}

GilbertElliott gilbert_elliott(double p, double burst_mean) {
    GilbertElliott ge;
    ge.p_bad = std::clamp(p, 0.0, 1.0);
    if (ge.p_bad <= 0.0) {
        ge.r = 1.0;
        return ge;
    }
    if (ge.p_bad >= 1.0) {
        ge.q = 1.0;
        return ge;
    }
    // Mean dwell 1/r = burst_mean when that is reachable; above p = 1 - 1/b the
    // chain cannot hold the bad state that briefly and degrades to iid losses.
    ge.r = std::min(1.0 / std::max(1.0, burst_mean), 1.0 - ge.p_bad);
    ge.q = ge.p_bad * ge.r / (1.0 - ge.p_bad);
    return ge;
}

std::vector<bool> survival_mask(std::size_t n, const ChannelConditions& c, const LossModel& m) {
    double p = frame_loss_prob(c.rssi_dbm, m);
    std::vector<bool> keep(n, true);
    if (n == 0) return keep;
    if (p >= 1.0) return std::vector<bool>(n, false);
    if (p <= 0.0) return keep;
    auto ge = gilbert_elliott(p, c.burst_mean_frames);
    std::mt19937_64 rng(c.seed);
    bool bad = uniform01(rng) < p;
    keep[0] = !bad;
    for (std::size_t i = 1; i < n; ++i) {
        double u = uniform01(rng);
        bad = bad ? u < 1.0 - ge.r : u < ge.q;
        keep[i] = !bad;
    }
    return keep;
}

double snr_for_rssi(double rssi) { return std::clamp(rssi + 120.0, 0.0, 40.0); }

modem::PcmChunk apply_audio_channel(const modem::PcmChunk& pcm, const ChannelConditions& c,
                                    const AudioOptions& opt) {
    modem::PcmChunk out;
    out.sample_rate = pcm.sample_rate;
    out.samples.resize(pcm.samples.size());
    if (pcm.samples.empty()) return out;

    std::mt19937_64 rng(c.seed);
    const double sigma = 32767.0 / std::sqrt(2.0) * std::pow(10.0, -snr_for_rssi(c.rssi_dbm) / 20.0);
    std::normal_distribution<double> noise(0.0, sigma);

    // dropout intervals, drawn up front from their own stream
    std::vector<std::pair<std::size_t, std::size_t>> drops;
    if (opt.dropouts_per_s > 0) {
        std::mt19937_64 drng(c.seed ^ 0x9E3779B97F4A7C15ull);
        std::exponential_distribution<double> gap(opt.dropouts_per_s);
        std::exponential_distribution<double> len(1.0 / std::max(1e-6, opt.dropout_mean_s));
        double t = gap(drng);
        double dur = double(pcm.samples.size()) / pcm.sample_rate;
        while (t < dur) {
            double l = len(drng);
            drops.emplace_back(static_cast<std::size_t>(t * pcm.sample_rate),
                               static_cast<std::size_t>((t + l) * pcm.sample_rate));
            t += l + gap(drng);
        }
    }

    std::size_t d = 0;
    for (std::size_t i = 0; i < pcm.samples.size(); ++i) {
        while (d < drops.size() && drops[d].second <= i) ++d;
        bool muted = d < drops.size() && i >= drops[d].first;
        double v = (muted ? 0.0 : pcm.samples[i]) + noise(rng);
        out.samples[i] = static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
    }
    return out;
}

}  // namespace sonic::channel
