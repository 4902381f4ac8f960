#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "gen.hpp"
#include "sonic/modem.hpp"

using namespace sonic::modem;
using sonic::testing::Gen;

namespace {

std::vector<std::int16_t> add_noise(const std::vector<std::int16_t>& x, double snr_db, Gen& g) {
    double p = 0;
    std::size_t active = 0;
    for (auto v : x)
        if (v != 0) {
            p += double(v) * v;
            ++active;
        }
    p /= std::max<std::size_t>(active, 1);
    double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0));
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<std::int16_t> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = static_cast<std::int16_t>(std::clamp(std::lround(x[i] + n(g.engine())), -32768L, 32767L));
    return y;
}

// Naive DFT power at bin k of a length-n block.
double dft_power(const std::vector<std::int16_t>& x, std::size_t off, std::size_t n, std::size_t k) {
    std::complex<double> acc(0, 0);
    for (std::size_t i = 0; i < n; ++i)
        acc += double(x[off + i]) * std::polar(1.0, -2 * M_PI * double(k) * double(i) / double(n));
    return std::norm(acc);
}

}  // namespace

TEST_CASE("default profile geometry") {
    ModulationProfile p;
    CHECK(p.subcarrier_spacing() == doctest::Approx(86.1328));
    CHECK(p.first_bin() == 61);
    CHECK(p.pilot_indices() == std::vector<int>{5, 17, 28, 40, 51, 63, 74, 86});
    CHECK(p.data_indices().size() == 84);
    CHECK(p.bits_per_symbol() == 168);
    double centre = (p.band_low_hz() + p.band_high_hz()) / 2;
    CHECK(centre == doctest::Approx(9200).epsilon(0.01));
    CHECK(p.band_low_hz() > 300);
    CHECK(p.band_high_hz() < 15000);
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("effective throughput") {
    ModulationProfile p;
    // 168 bits per 576-sample symbol, 4 of every 5 symbols carry data
    double expect = 168.0 * 44100.0 / 576.0 * 4.0 / 5.0;
    CHECK(effective_throughput(p) == doctest::Approx(expect));
    CHECK(effective_throughput(p) == doctest::Approx(10000).epsilon(0.2));
    ModulationProfile b = p;
    b.constellation = Constellation::Bpsk;
    CHECK(effective_throughput(b) * 2 == effective_throughput(p));
}

TEST_CASE("modulate empty input is preamble, header and tail") {
    ModulationProfile p;
    auto pcm = modulate({}, p);
    CHECK(pcm.samples.size() == std::size_t(p.preamble_len() + p.symbol_len() + p.tail_len()));
    CHECK(p.tail_len() == 882);
    for (int i = 0; i < p.tail_len(); ++i) CHECK(pcm.samples[pcm.samples.size() - 1 - i] == 0);
    auto r = demodulate(pcm, p);
    REQUIRE(r.bursts.size() == 1);
    CHECK(r.bursts[0].data.empty());
}

TEST_CASE("peak amplitude headroom") {
    Gen g(1);
    auto pcm = modulate(g.bytes(3000));
    int peak = 0;
    for (auto s : pcm.samples) peak = std::max(peak, std::abs(int(s)));
    CHECK(peak <= std::lround(0.89 * 32767));
    CHECK(peak >= std::lround(0.89 * 32767) - 1);
}

TEST_CASE("measured rate matches analytic rate") {
    ModulationProfile p;
    double rate = effective_throughput(p);
    // about 60 s of payload audio
    std::size_t n = static_cast<std::size_t>(rate * 60 / 8);
    auto l = burst_layout(n, p);
    auto pcm = modulate(std::vector<std::uint8_t>(n, 0x5A), p);
    REQUIRE(pcm.samples.size() == std::size_t(l.total()));
    double secs = double(l.payload_samples) / p.sample_rate;
    double measured = n * 8 / secs;
    CHECK(measured == doctest::Approx(rate).epsilon(0.05));
}

TEST_CASE("band occupancy") {
    Gen g(2);
    ModulationProfile p;
    auto pcm = modulate(g.bytes(4000), p);
    const std::size_t n = 4096;
    double in = 0, all = 0;
    // averaged periodogram over whole blocks of the burst
    for (std::size_t off = 0; off + n <= pcm.samples.size(); off += n) {
        for (std::size_t k = 1; k < n / 2; ++k) {
            double f = double(k) * p.sample_rate / n;
            double pw = dft_power(pcm.samples, off, n, k);
            all += pw;
            if (f >= p.band_low_hz() && f <= p.band_high_hz()) in += pw;
        }
        if (off > 3 * n) break;  // four blocks are plenty
    }
    MESSAGE("in-band power fraction " << in / all);
    CHECK(in / all >= 0.95);
}

TEST_CASE("noiseless round trip") {
    Gen g(3);
    for (std::size_t n : {1u, 20u, 21u, 168u, 500u, 1194u, 5000u}) {
        auto x = g.bytes(n);
        auto r = demodulate(modulate(x));
        REQUIRE(r.bursts.size() == 1);
        CHECK(r.bursts[0].data == x);
        CHECK(r.bursts[0].sync.corr_peak > 0.99);
        CHECK(r.bursts[0].sync.snr_db > 25);
    }
}

TEST_CASE("bpsk profile round trip") {
    Gen g(4);
    ModulationProfile p;
    p.constellation = Constellation::Bpsk;
    auto x = g.bytes(700);
    auto r = demodulate(modulate(x, p), p);
    REQUIRE(r.bursts.size() == 1);
    CHECK(r.bursts[0].data == x);
}

TEST_CASE("silence gives NO_SYNC") {
    PcmChunk s;
    s.samples.assign(44100, 0);
    auto r = demodulate(s);
    CHECK(r.bursts.empty());
    CHECK(r.no_sync);
    auto e = demodulate(PcmChunk{});
    CHECK(e.no_sync);
}

TEST_CASE("several bursts back to back, chunk invariance") {
    Gen g(5);
    std::vector<std::vector<std::uint8_t>> xs;
    std::vector<std::int16_t> stream(3000, 0);
    for (int i = 0; i < 6; ++i) {
        xs.push_back(g.bytes(g.range(0, 1500)));
        auto pcm = modulate(xs.back());
        stream.insert(stream.end(), pcm.samples.begin(), pcm.samples.end());
        if (i == 2) stream.insert(stream.end(), 30000, 0);
    }
    stream.insert(stream.end(), 100, 0);

    std::vector<std::vector<std::uint8_t>> ref;
    {
        auto r = demodulate(PcmChunk{stream, 44100});
        for (auto& b : r.bursts) ref.push_back(b.data);
    }
    CHECK(ref == xs);

    for (int trial = 0; trial < 8; ++trial) {
        Demodulator d;
        std::vector<Burst> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            std::size_t n = std::min<std::size_t>(stream.size() - pos, g.range(1, trial < 4 ? 50 : 20000));
            auto b = d.push(stream.data() + pos, n);
            got.insert(got.end(), b.begin(), b.end());
            pos += n;
        }
        auto b = d.finish();
        got.insert(got.end(), b.begin(), b.end());
        REQUIRE(got.size() == ref.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].data == ref[i]);
    }
}

TEST_CASE("leading noise below -20 dBFS does not change output") {
    Gen g(6);
    auto x = g.bytes(800);
    auto pcm = modulate(x);
    for (double lead_s : {0.0, 0.3, 1.1, 2.0}) {
        std::normal_distribution<double> n(0.0, 0.1 * 32767 / 3);  // peaks stay under -20 dBFS
        std::vector<std::int16_t> s;
        for (int i = 0; i < int(lead_s * 44100); ++i)
            s.push_back(static_cast<std::int16_t>(std::clamp(n(g.engine()), -3276.0, 3276.0)));
        s.insert(s.end(), pcm.samples.begin(), pcm.samples.end());
        auto r = demodulate(PcmChunk{s, 44100});
        REQUIRE(r.bursts.size() == 1);
        CHECK(r.bursts[0].data == x);
    }
}

TEST_CASE("30 dB awgn") {
    Gen g(7);
    int ok = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        auto x = g.bytes(g.range(50, 600));
        auto pcm = modulate(x);
        auto r = demodulate(PcmChunk{add_noise(pcm.samples, 30.0, g), 44100});
        ok += r.bursts.size() == 1 && r.bursts[0].data == x;
    }
    CHECK(ok >= trials * 99 / 100);
}

TEST_CASE("wav layout and round trip") {
    PcmChunk s;
    s.samples.assign(44100, 0);
    auto b = wav_bytes(s);
    CHECK(b.size() == 44 + 88200);
    CHECK(std::memcmp(b.data(), "RIFF", 4) == 0);

    Gen g(8);
    PcmChunk r;
    for (int i = 0; i < 5000; ++i) r.samples.push_back(static_cast<std::int16_t>(g.next()));
    auto path = (std::filesystem::temp_directory_path() / "sonic_wav_rt.wav").string();
    write_wav(r, path);
    auto back = read_wav(path);
    CHECK(back.samples == r.samples);
    CHECK(back.sample_rate == 44100);
    std::remove(path.c_str());
}

TEST_CASE("wav variants") {
    PcmChunk s;
    s.samples = {1, 2, 3};
    auto b = wav_bytes(s);
    auto stereo = b;
    stereo[22] = 2;
    try {
        parse_wav(stereo);
        FAIL("stereo accepted");
    } catch (const WavError& e) {
        CHECK(e.code() == WavErrc::Unsupported);
    }
    // an unknown chunk before data is skipped
    auto extra = b;
    std::vector<std::uint8_t> list = {'L', 'I', 'S', 'T', 3, 0, 0, 0, 'a', 'b', 'c', 0};
    extra.insert(extra.begin() + 36, list.begin(), list.end());
    CHECK(parse_wav(extra).samples == s.samples);
    CHECK_THROWS_AS(parse_wav({1, 2, 3}), WavError);
    try {
        read_wav("/nonexistent/file.wav");
    } catch (const WavError& e) {
        CHECK(e.code() == WavErrc::Io);
    }
}
