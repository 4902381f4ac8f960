#pragma once

#include <cstdint>
#include <vector>

#include "sonic/modem.hpp"

namespace sonic::channel {

struct LossModel {
    double p50_rssi = -92.0;
    double slope = 1.0;  // per dB
    double floor = 0.01;
};

struct ChannelConditions {
    double rssi_dbm = -60.0;
    std::uint64_t seed = 0;
    double burst_mean_frames = 2.0;
};

// p = floor + (1 - floor) * logistic(-slope * (rssi - p50))
double frame_loss_prob(double rssi_dbm, const LossModel& m = {});

// Gilbert-Elliott parameters for a target stationary loss p and mean bad dwell.
struct GilbertElliott {
    double p_bad = 0;     // stationary probability of the bad state
    double q = 0;         // good -> bad
    double r = 0;         // bad -> good
    double mean_dwell() const { return r > 0 ? 1.0 / r : 0.0; }
};
GilbertElliott gilbert_elliott(double p, double burst_mean_frames);

// true = frame survives. Each frame consumes one uniform, and the state
// thresholds grow with p, so for a fixed seed a lower rssi drops a superset.
std::vector<bool> survival_mask(std::size_t n, const ChannelConditions& c, const LossModel& m = {});

template <class T>
std::vector<T> apply_frame_channel(const std::vector<T>& frames, const ChannelConditions& c,
                                   const LossModel& m = {}) {
    auto keep = survival_mask(frames.size(), c, m);
    std::vector<T> out;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (keep[i]) out.push_back(frames[i]);
    return out;
}

struct AudioOptions {
    double dropouts_per_s = 0.0;   // Poisson rate of signal dropouts
    double dropout_mean_s = 0.05;  // exponential dropout length
};

// snr_db = clamp(rssi + 120, 0, 40)
double snr_for_rssi(double rssi_dbm);

// Adds white Gaussian noise whose level is fixed relative to a full-scale sine
// (not to the signal), so a quiet transmission degrades like a weak carrier.
modem::PcmChunk apply_audio_channel(const modem::PcmChunk& pcm, const ChannelConditions& c,
                                    const AudioOptions& opt = {});

}  // namespace sonic::channel
