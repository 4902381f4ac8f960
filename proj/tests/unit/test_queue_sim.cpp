#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "gen.hpp"
#include "sonic/queue_sim.hpp"
#include "sonic/server.hpp"

using namespace sonic;
using namespace sonic::sim;
using sonic::testing::Gen;
using nlohmann::json;

namespace {

constexpr double kDay = 86400;

// Random trace with explicit durations, spread over one day and the following window.
Trace random_trace(Gen& g, int n) {
    Trace t;
    t.seed = g.next();
    for (int i = 0; i < n; ++i) {
        TraceItem it;
        it.arrival = g.uniform() * (kDay + 5 * 3600);
        if (g.coin(0.3)) it.ready = it.arrival + g.uniform() * 600;
        it.kind = g.coin(0.1) ? ItemKind::Push : g.coin(0.6) ? ItemKind::Gpt : ItemKind::Url;
        it.duration = g.coin(0.5) ? 1 + g.uniform() * 10 : 30 + g.uniform() * 900;
        it.skip = g.coin(0.1);
        it.cache_eligible = false;
        t.items.push_back(it);
    }
    std::stable_sort(t.items.begin(), t.items.end(),
                     [](const TraceItem& a, const TraceItem& b) { return a.arrival < b.arrival; });
    return t;
}

SimConfig random_config(Gen& g) {
    SimConfig c;
    c.n_freqs = int(g.range(1, 4));
    if (g.coin()) c.window = {int(g.range(0, 1439)), int(g.range(0, 1439))};
    if (c.window.start_min == c.window.end_min) c.window.end_min = (c.window.start_min + 60) % 1440;
    c.svc.overhead_s = double(g.range(0, 5));
    if (g.coin(0.3)) c.svc.keepalive_s = 0.4;
    return c;
}

double ready_at(const TraceItem& it) { return it.ready >= 0 ? it.ready : it.arrival; }

}  // namespace

TEST_CASE("workload generation") {
    WorkloadParams p;
    auto t = generate_workload(p, 7);
    int users_items = 0, push = 0;
    for (auto& it : t.items) (it.kind == ItemKind::Push ? push : users_items)++;
    CHECK(users_items <= 150);
    CHECK(push == 10);
    for (auto& it : t.items)
        if (it.kind == ItemKind::Push) CHECK(it.arrival == doctest::Approx(9.5 * 3600));
    CHECK(std::is_sorted(t.items.begin(), t.items.end(),
                         [](const TraceItem& a, const TraceItem& b) { return a.arrival < b.arrival; }));

    auto again = generate_workload(p, 7);
    REQUIRE(again.items.size() == t.items.size());
    for (std::size_t i = 0; i < t.items.size(); ++i) {
        CHECK(again.items[i].arrival == t.items[i].arrival);
        CHECK(again.items[i].kind == t.items[i].kind);
    }

    p.gpt_fraction = 1;
    p.url_fraction = 0;
    p.push_events.clear();
    for (auto& it : generate_workload(p, 3).items) CHECK(it.kind == ItemKind::Gpt);

    // arrivals only land in hours with weight
    WorkloadParams q;
    q.hourly.fill(0);
    q.hourly[13] = 1;
    q.push_events.clear();
    for (auto& it : generate_workload(q, 5).items) {
        CHECK(it.arrival >= 13 * 3600);
        CHECK(it.arrival < 14 * 3600);
    }

    WorkloadParams bad;
    bad.gpt_fraction = 0.7;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.cache_hit_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.requests_per_user_day = 11;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("kind mix follows the configured fraction") {
    WorkloadParams p;
    p.n_users = 400;
    p.push_events.clear();
    auto t = generate_workload(p, 11);
    double gpt = 0;
    for (auto& it : t.items) gpt += it.kind == ItemKind::Gpt;
    double frac = gpt / double(t.items.size());
    // 4000 draws: 4 standard deviations is about 0.03
    CHECK(std::abs(frac - 0.628) < 0.03);
}

TEST_CASE("hand-computed single frequency schedule") {
    Trace t;
    t.t_begin = 0;
    t.t_end = kDay + 5 * 3600;
    auto item = [](double arrival, double duration, ItemKind k = ItemKind::Url) {
        TraceItem it;
        it.arrival = arrival;
        it.duration = duration;
        it.kind = k;
        it.cache_eligible = false;
        return it;
    };
    t.items = {item(10 * 3600, 100), item(11 * 3600, 50, ItemKind::Push), item(12 * 3600, 20),
               item(22 * 3600 + 30, 10)};
    SimConfig c;
    auto r = simulate(t, c);
    // listener requests first at window open, then the late one, then the push
    CHECK(r.start[0] == 22 * 3600);
    CHECK(r.start[2] == 22 * 3600 + 103);
    CHECK(r.start[3] == 22 * 3600 + 126);
    CHECK(r.start[1] == 22 * 3600 + 139);
    CHECK(r.served == 4);
    CHECK(r.unserved == 0);
    // at 21:59 three are waiting
    auto s = std::find_if(r.series.begin(), r.series.end(), [](auto& q) { return q.t == 21 * 3600 + 59 * 60; });
    REQUIRE(s != r.series.end());
    CHECK(s->size == 3);
    CHECK(r.peak == 3);
    CHECK(r.series.size() == std::size_t((t.t_end - t.t_begin) / 60) + 1);

    // a transmission that cannot finish before 05:00 is held back
    t.items = {item(4 * 3600 + 59 * 60 + 40 + kDay, 30)};
    r = simulate(t, c);
    CHECK(r.unserved == 1);
    CHECK(r.start[0] == -1);
}

TEST_CASE("conservation on random runs") {
    Gen g(101);
    for (int round = 0; round < 200; ++round) {
        auto t = random_trace(g, int(g.range(0, 80)));
        auto c = random_config(g);
        c.cache_hit_rate = g.uniform();
        for (auto& it : t.items) it.cache_eligible = g.coin();
        auto r = simulate(t, c);
        CHECK(r.enqueued == int(t.items.size()));
        CHECK(r.enqueued == r.served + r.unserved + r.skipped);
        CHECK(r.served == r.served_url + r.served_gpt + r.served_push);
        CHECK(r.peak >= 0);
        for (auto& q : r.series) CHECK(q.size <= r.peak);
    }
    for (int seed = 1; seed <= 5; ++seed) {
        WorkloadParams p;
        p.n_users = int(seed * 20);
        SimConfig c;
        c.n_freqs = seed;
        c.cache_hit_rate = 0.3;
        auto r = simulate(generate_workload(p, seed), c);
        CHECK(r.enqueued == r.served + r.unserved + r.skipped);
    }
}

TEST_CASE("no frequency idles while it has sendable work") {
    Gen g(202);
    for (int round = 0; round < 150; ++round) {
        auto t = random_trace(g, int(g.range(1, 60)));
        auto c = random_config(g);
        c.n_freqs = 1;
        c.svc.keepalive_s = 0;
        t.t_begin = 0;
        t.t_end = kDay + 5 * 3600;
        auto r = simulate(t, c);
        // Walk the starts in order; after each transmission ends the next start
        // must be the earliest moment any waiting item could legally go.
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < t.items.size(); ++i)
            if (r.start[i] >= 0) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.start[a] < r.start[b]; });
        for (std::size_t k = 1; k < order.size(); ++k) {
            auto prev = order[k - 1];
            double free_at = r.start[prev] + t.items[prev].duration + c.svc.overhead_s;
            double next = r.start[order[k]];
            CHECK(next >= free_at - 1e-9);
            if (next <= free_at + 1e-9) continue;
            // idle gap: the head of the queue (earliest ready, listener requests
            // before pushes) could not go out before the window closed
            int head = -1;
            double head_s = 0;
            for (int push = 0; push < 2 && head < 0; ++push) {
                for (std::size_t i = 0; i < t.items.size(); ++i) {
                    const auto& it = t.items[i];
                    if (it.skip || (it.kind == ItemKind::Push) != bool(push)) continue;
                    if (r.start[i] >= 0 && r.start[i] < next) continue;
                    if (head < 0 || ready_at(it) < ready_at(t.items[std::size_t(head)])) head = int(i);
                }
                if (head >= 0 && std::max(free_at, ready_at(t.items[std::size_t(head)])) >= next) {
                    // not ready during the gap; a push may still have been
                    if (!push) head = -1;
                }
            }
            if (head < 0) continue;
            const auto& h = t.items[std::size_t(head)];
            head_s = std::max(free_at, ready_at(h));
            if (head_s >= next) continue;
            bool fits = c.window.contains(head_s, c.clock) && head_s + h.duration <= c.window.window_end(head_s, c.clock);
            CHECK_MESSAGE(!fits, "round " << round << " idle with item " << head << " sendable at " << head_s);
        }
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            if (r.start[i] < 0) continue;
            CHECK(c.window.contains(r.start[i], c.clock));
            CHECK(r.start[i] + t.items[i].duration <= c.window.window_end(r.start[i], c.clock) + 1e-9);
            CHECK(r.start[i] >= ready_at(t.items[i]));
        }
    }
}

TEST_CASE("fcfs within each class on one frequency") {
    Gen g(303);
    for (int round = 0; round < 100; ++round) {
        auto t = random_trace(g, int(g.range(2, 60)));
        SimConfig c;
        auto r = simulate(t, c);
        for (std::size_t a = 0; a < t.items.size(); ++a)
            for (std::size_t b = 0; b < t.items.size(); ++b) {
                bool same_class = (t.items[a].kind == ItemKind::Push) == (t.items[b].kind == ItemKind::Push);
                if (!same_class || r.start[a] < 0 || r.start[b] < 0) continue;
                if (ready_at(t.items[a]) < ready_at(t.items[b])) CHECK(r.start[a] < r.start[b]);
            }
    }
}

TEST_CASE("more frequencies never leave more unserved") {
    for (int seed = 1; seed <= 40; ++seed) {
        WorkloadParams p;
        p.n_users = 20 + (seed * 37) % 120;
        auto t = generate_workload(p, seed);
        SimConfig c;
        c.cache_hit_rate = 0.3;
        c.svc.url_median_bytes = 300000;
        int prev = 1 << 30;
        for (int f = 1; f <= 5; ++f) {
            c.n_freqs = f;
            auto r = simulate(t, c);
            CHECK(r.unserved <= prev);
            prev = r.unserved;
        }
    }
}

TEST_CASE("longer service never leaves fewer unserved") {
    for (int seed = 1; seed <= 40; ++seed) {
        WorkloadParams p;
        p.n_users = 10 + (seed * 53) % 150;
        auto t = generate_workload(p, seed);
        SimConfig c;
        c.n_freqs = 1 + seed % 3;
        c.cache_hit_rate = 0.3;
        c.svc.url_median_bytes = 300000;
        int prev = -1;
        for (double scale : {0.5, 1.0, 1.5, 2.0, 3.0}) {
            c.svc.scale = scale;
            auto r = simulate(t, c);
            CHECK(r.unserved >= prev);
            prev = r.unserved;
        }
    }
}

TEST_CASE("doubling service time need not double the backlog") {
    // one-minute window, sizes 6,6,6,6,6,48: five go and one is left; doubled,
    // the five small ones fill the window exactly and still only one is left
    Trace t;
    t.t_begin = 0;
    t.t_end = 60;
    for (double d : {6, 6, 6, 6, 6, 48}) {
        TraceItem it;
        it.duration = d;
        it.cache_eligible = false;
        t.items.push_back(it);
    }
    SimConfig c;
    c.window = {0, 1};
    c.svc.overhead_s = 0;
    auto base = simulate(t, c);
    c.svc.scale = 2;
    auto doubled = simulate(t, c);
    CHECK(base.unserved == 1);
    CHECK(doubled.unserved == 1);
    CHECK(doubled.start[4] == 48);
}

TEST_CASE("cache hits skip airtime and are reproducible") {
    WorkloadParams p;
    p.n_users = 30;
    auto t = generate_workload(p, 9);
    SimConfig c;
    c.cache_hit_rate = 0;
    auto none = simulate(t, c);
    CHECK(none.skipped == 0);
    c.cache_hit_rate = 1;
    auto all = simulate(t, c);
    CHECK(all.skipped == all.enqueued - 10);  // pushes are never cached
    c.cache_hit_rate = 0.3;
    auto a = simulate(t, c), b = simulate(t, c);
    CHECK(a.skipped == b.skipped);
    CHECK(a.start == b.start);
    double frac = double(a.skipped) / double(a.enqueued - 10);
    CHECK(frac > 0.2);
    CHECK(frac < 0.4);
}

TEST_CASE("result serialization") {
    WorkloadParams p;
    auto r = simulate(generate_workload(p, 1), SimConfig{});
    auto j = r.to_json();
    CHECK(j["peak"] == r.peak);
    CHECK(j["series"].size() == r.series.size());
    auto csv = r.series_csv();
    CHECK(csv.rfind("minute,t,queue\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == long(r.series.size()) + 1);
}

TEST_CASE("calibration file") {
    auto path = std::filesystem::temp_directory_path() / "sonic_cal_test.toml";
    {
        std::ofstream o(path);
        o << "[workload]\nn_users = 15\ngpt_fraction = 0.5\nurl_fraction = 0.5\n"
             "push = [{hour = 8.0, count = 4}]\n"
             "[service]\nurl_median_bytes = 123456.0\nurl_sigma = 0.1\n"
             "[window]\nstart = \"21:30\"\nend = \"04:15\"\n";
    }
    auto c = load_calibration(path.string());
    CHECK(c.workload.gpt_fraction == 0.5);
    REQUIRE(c.workload.push_events.size() == 1);
    CHECK(c.workload.push_events[0].count == 4);
    CHECK(c.svc.url_median_bytes == 123456.0);
    CHECK(c.svc.gpt_median_bytes == 1500);
    CHECK(c.window.start_min == 21 * 60 + 30);
    CHECK(c.window.end_min == 4 * 60 + 15);
    {
        std::ofstream o(path);
        o << "[workload]\ngpt_fraction = 0.9\n";
    }
    CHECK_THROWS(load_calibration(path.string()));
    std::filesystem::remove(path);
    auto shipped = load_calibration(SONIC_SOURCE_DIR "/calibration.toml");
    CHECK(shipped.workload.n_users == 15);
}

// ---- replay ----

namespace {

struct SizedRenderer : server::ContentRenderer {
    Gen g{77};
    server::RenderOutput render(server::RequestKind kind, const std::string& subject, std::uint32_t id,
                                double now) override {
        std::size_t n = kind == server::RequestKind::Gpt ? std::size_t(g.range(50, 400)) : std::size_t(g.range(800, 3000));
        server::RenderOutput out;
        out.file = render::make_text_file(g.ascii(n), subject, id, std::int64_t(now));
        return out;
    }
};

std::vector<json> run_session(int n_requests, std::uint64_t seed) {
    SizedRenderer renderer;
    std::vector<json> log;
    server::ServerConfig cfg;
    cfg.window = {22 * 60, 23 * 60};  // short window so some are left over
    cfg.quota_per_day = 100;
    server::Server srv(cfg, renderer, [&](const json& e) { log.push_back(e); });
    Gen g(seed);
    double t0 = 21 * 3600;
    srv.step(t0);
    std::vector<double> times;
    for (int i = 0; i < n_requests; ++i) times.push_back(t0 + g.uniform() * 7200);
    std::sort(times.begin(), times.end());
    for (double t : times) {
        srv.step(t);
        std::string body = g.coin(0.6) ? "gpt question " + std::to_string(g.range(0, 5))
                                       : "url site" + std::to_string(g.range(0, 5)) + ".org";
        srv.submit({"user" + std::to_string(g.range(0, 3)), body}, t);
        srv.step(t);
    }
    srv.step(t0 + 9 * 3600);
    return log;
}

}  // namespace

TEST_CASE("replay agrees with the server's own bookkeeping") {
    auto log = run_session(10, 5);
    auto r = replay_log(log);
    CHECK(r.enqueued == 10);
    CHECK(r.enqueued == r.served + r.unserved + r.skipped);
    // the server reports its queue depths on every event; outside the
    // rendering instant, waiting = screenshot + player queues
    std::map<std::uint32_t, std::string> last;
    for (auto& e : log) {
        if (e["event"] != "state") continue;
        last[e["id"].get<std::uint32_t>()] = e["to"];
    }
    int done = 0;
    for (auto& [id, s] : last) done += s == "DONE";
    CHECK(done == r.served);
    // every sample matches a direct count over the log
    auto lt = trace_from_log(log);
    for (auto& q : r.series) {
        int waiting = 0;
        for (std::size_t i = 0; i < lt.trace.items.size(); ++i) {
            const auto& it = lt.trace.items[i];
            if (it.kind == ItemKind::Hub) continue;
            double leave = lt.start[i] >= 0 ? lt.start[i] : it.skip ? it.ready : 1e300;
            waiting += it.arrival <= q.t && q.t < leave;
        }
        CHECK(q.size == waiting);
    }
}

TEST_CASE("simulate reproduces a logged session") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        auto log = run_session(30, seed);
        auto lt = trace_from_log(log);
        auto replayed = replay_log(log);
        auto simulated = simulate(lt.trace, lt.config);
        CHECK(simulated.peak == replayed.peak);
        CHECK(simulated.served == replayed.served);
        CHECK(simulated.unserved == replayed.unserved);
        REQUIRE(simulated.start.size() == replayed.start.size());
        for (std::size_t i = 0; i < simulated.start.size(); ++i)
            CHECK(simulated.start[i] == doctest::Approx(replayed.start[i]).epsilon(1e-12));
    }
}

TEST_CASE("log edge cases") {
    auto r = replay_log({});
    CHECK(r.peak == 0);
    CHECK(r.enqueued == 0);
    CHECK(r.series.empty());
    CHECK_THROWS_AS(trace_from_log({json{{"event", "state"}}}), LogError);
    CHECK_THROWS_AS(trace_from_log({json{{"event", "state"}, {"ts", 1.0}, {"id", 4}, {"from", "QUEUED"}, {"to", "DONE"}}}),
                    LogError);
    auto path = std::filesystem::temp_directory_path() / "sonic_bad.jsonl";
    {
        std::ofstream o(path);
        o << "{\"event\":\"keepalive\",\"ts\":1}\nnot json\n";
    }
    CHECK_THROWS_AS(read_log(path.string()), LogError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_log("/nonexistent/x.jsonl"), LogError);
}
