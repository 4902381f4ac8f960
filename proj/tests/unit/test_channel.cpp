#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "sonic/channel.hpp"
#include "sonic/fec.hpp"
#include "sonic/modem.hpp"

using namespace sonic::channel;
using sonic::testing::Gen;

namespace {

double drop_rate(std::size_t n, const ChannelConditions& c, const LossModel& m = {}) {
    auto k = survival_mask(n, c, m);
    return double(std::count(k.begin(), k.end(), false)) / n;
}

// Mean length of runs of dropped frames.
double mean_run(const std::vector<bool>& keep) {
    std::size_t runs = 0, lost = 0;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (!keep[i]) {
            ++lost;
            if (i == 0 || keep[i - 1]) ++runs;
        }
    return runs ? double(lost) / runs : 0.0;
}

}  // namespace

TEST_CASE("loss probability anchors") {
    LossModel m;
    CHECK(frame_loss_prob(-92, m) == doctest::Approx(0.505));
    CHECK(frame_loss_prob(-50, m) <= 0.02);
    CHECK(frame_loss_prob(-105, m) >= 0.97);
    // values frozen from the closed form with slope 1.0
    CHECK(frame_loss_prob(-95, m) == doctest::Approx(0.01 + 0.99 / (1 + std::exp(-3.0))));
    CHECK(frame_loss_prob(-85, m) == doctest::Approx(0.0109).epsilon(0.01));
}

TEST_CASE("loss probability is monotone non-increasing") {
    Gen g(1);
    for (int t = 0; t < 50; ++t) {
        LossModel m{g.range(-100, -80) * 1.0, 0.05 + g.uniform(), g.uniform() * 0.1};
        double prev = 2;
        for (double r = -130; r <= -20; r += 0.25) {
            double p = frame_loss_prob(r, m);
            CHECK(p <= prev);
            CHECK(p >= m.floor);
            prev = p;
        }
    }
}

TEST_CASE("extreme probabilities") {
    std::vector<int> frames(100);
    LossModel never{-92, 1.0, 0.0};
    LossModel always{-92, 1.0, 1.0};
    CHECK(apply_frame_channel(frames, {1e6, 1, 2.0}, never).size() == 100);  // logistic underflows to 0
    CHECK(apply_frame_channel(frames, {-60, 1, 2.0}, always).empty());
    CHECK(apply_frame_channel(std::vector<int>{}, {-60, 1, 2.0}).empty());
}

TEST_CASE("empirical drop rate matches the model") {
    for (double rssi : {-100.0, -95.0, -92.0, -90.0, -88.0, -85.0, -70.0}) {
        double p = frame_loss_prob(rssi);
        double sum = 0;
        const int seeds = 20;
        for (int s = 0; s < seeds; ++s) {
            double d = drop_rate(10000, {rssi, std::uint64_t(s), 2.0});
            sum += d;
        }
        CHECK(std::abs(sum / seeds - p) < 0.01);
        CHECK(std::abs(drop_rate(10000, {rssi, 7, 2.0}) - p) < 0.02);
    }
}

TEST_CASE("burst length follows burst_mean_frames") {
    for (double b : {1.0, 2.0, 4.0}) {
        ChannelConditions c{-92, 3, b};
        auto k = survival_mask(200000, c);
        // at p = 0.505 a one-frame dwell is out of reach, so b = 1 stretches to 1/(1-p)
        double expect = gilbert_elliott(frame_loss_prob(-92), b).mean_dwell();
        CHECK(expect == doctest::Approx(std::max(b, 1 / (1 - 0.505))));
        CHECK(mean_run(k) == doctest::Approx(expect).epsilon(0.05));
    }
    // above p = 1 - 1/b the bad state cannot be left quickly enough
    auto ge = gilbert_elliott(0.95, 2.0);
    CHECK(ge.mean_dwell() == doctest::Approx(20.0));
    auto ge2 = gilbert_elliott(0.3, 2.0);
    CHECK(ge2.mean_dwell() == doctest::Approx(2.0));
    CHECK(ge2.q / (ge2.q + ge2.r) == doctest::Approx(0.3));
}

TEST_CASE("determinism and rssi monotonicity under a fixed seed") {
    Gen g(2);
    for (int t = 0; t < 100; ++t) {
        std::uint64_t seed = g.next();
        double b = 1.0 + g.uniform() * 4;
        CHECK(survival_mask(500, {-91, seed, b}) == survival_mask(500, {-91, seed, b}));
        auto prev = survival_mask(500, {-110, seed, b});
        for (double r = -109; r <= -60; r += 1) {
            auto cur = survival_mask(500, {r, seed, b});
            for (std::size_t i = 0; i < cur.size(); ++i)
                if (prev[i]) REQUIRE(cur[i]);  // survivors at lower rssi still survive
            prev = cur;
        }
    }
}

TEST_CASE("audio channel snr map") {
    CHECK(snr_for_rssi(-60) == 40);
    CHECK(snr_for_rssi(-100) == 20);
    CHECK(snr_for_rssi(-115) == 5);
    CHECK(snr_for_rssi(-130) == 0);
}

TEST_CASE("audio channel keeps length and is deterministic") {
    sonic::modem::PcmChunk e;
    CHECK(apply_audio_channel(e, {-80, 1, 2}).samples.empty());
    sonic::modem::PcmChunk s;
    s.samples.assign(44100, 0);
    auto a = apply_audio_channel(s, {-80, 5, 2});
    CHECK(a.samples.size() == s.samples.size());
    CHECK(a.samples == apply_audio_channel(s, {-80, 5, 2}).samples);
    // noise level is absolute: 40 dB below a full-scale sine
    double p = 0;
    for (auto v : apply_audio_channel(s, {-60, 5, 2}).samples) p += double(v) * v;
    double rms = std::sqrt(p / s.samples.size());
    CHECK(rms == doctest::Approx(32767 / std::sqrt(2.0) / 100).epsilon(0.02));
}

TEST_CASE("audio dropouts mute the signal") {
    sonic::modem::PcmChunk s;
    s.samples.assign(44100 * 4, 10000);
    AudioOptions o{2.0, 0.1};
    auto a = apply_audio_channel(s, {-60, 11, 2}, o);
    std::size_t muted = 0;
    for (auto v : a.samples) muted += std::abs(v) < 2000;
    CHECK(muted > 0);
    CHECK(muted < s.samples.size());
}

TEST_CASE("audio channel at -60 dBm leaves a protected frame intact") {
    Gen g(3);
    for (int t = 0; t < 5; ++t) {
        sonic::format::Frame f{static_cast<std::uint16_t>(t), g.bytes(500)};
        auto pcm = sonic::modem::modulate(sonic::fec::protect(sonic::format::serialize_frame(f)));
        auto noisy = apply_audio_channel(pcm, {-60, std::uint64_t(t), 2});
        auto r = sonic::modem::demodulate(noisy);
        REQUIRE(r.bursts.size() == 1);
        auto back = sonic::fec::recover_frame(r.bursts[0].data);
        REQUIRE(back);
        CHECK(*back == f);
    }
}

TEST_CASE("audio channel at -115 dBm: no sync or heavy loss") {
    Gen g(4);
    int recovered = 0, total = 0;
    for (int t = 0; t < 10; ++t) {
        sonic::format::Frame f{static_cast<std::uint16_t>(t), g.bytes(500)};
        auto pcm = sonic::modem::modulate(sonic::fec::protect(sonic::format::serialize_frame(f)));
        auto noisy = apply_audio_channel(pcm, {-115, std::uint64_t(t), 2});
        auto r = sonic::modem::demodulate(noisy);
        ++total;
        for (auto& b : r.bursts) recovered += sonic::fec::recover_frame(b.data).has_value();
    }
    CHECK(recovered <= total / 2);
}
