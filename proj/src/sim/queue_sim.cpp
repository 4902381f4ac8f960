#include "sonic/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <toml.hpp>

namespace sonic::sim {

using nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double ready_of(const TraceItem& it) { return it.ready >= 0 ? it.ready : it.arrival; }
}  // namespace

const char* to_string(ItemKind k) {
    switch (k) {
        case ItemKind::Url: return "url";
        case ItemKind::Gpt: return "gpt";
        case ItemKind::Push: return "push";
        case ItemKind::Hub: return "hub";
    }
    return "?";
}

WorkloadParams::WorkloadParams() {
    // people ask during the day and mostly sleep through the window
    hourly = {1, 0.5, 0.5, 0.5, 0.5, 1, 2, 4, 6, 7, 7, 7, 8, 7, 6, 6, 6, 7, 8, 8, 7, 5, 5, 3};
}

void WorkloadParams::validate() const {
    if (n_users < 0) throw std::invalid_argument("n_users must be >= 0");
    if (requests_per_user_day < 0 || requests_per_user_day > quota)
        throw std::invalid_argument("requests_per_user_day must be within the daily quota");
    if (gpt_fraction < 0 || url_fraction < 0 || std::abs(gpt_fraction + url_fraction - 1.0) > 1e-9)
        throw std::invalid_argument("gpt_fraction and url_fraction must sum to 1");
    if (cache_hit_rate < 0 || cache_hit_rate > 1) throw std::invalid_argument("cache_hit_rate must be in [0,1]");
    double total = 0;
    for (double h : hourly) {
        if (h < 0) throw std::invalid_argument("hourly weights must be >= 0");
        total += h;
    }
    if (total <= 0 && n_users > 0) throw std::invalid_argument("hourly weights are all zero");
    for (const auto& e : push_events)
        if (e.hour < 0 || e.hour >= 24 || e.count < 0) throw std::invalid_argument("bad push event");
}

Trace generate_workload(const WorkloadParams& p, std::uint64_t seed) {
    p.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::discrete_distribution<int> hour(p.hourly.begin(), p.hourly.end());
    LocalClock clk;
    Trace t;
    t.seed = seed;
    int per_user = std::min(p.requests_per_user_day, p.quota);
    for (int user = 0; user < p.n_users; ++user)
        for (int i = 0; i < per_user; ++i) {
            TraceItem it;
            int h = hour(rng);
            it.arrival = clk.at(p.day, (h + u01(rng)) * 3600.0);
            it.kind = u01(rng) < p.gpt_fraction ? ItemKind::Gpt : ItemKind::Url;
            t.items.push_back(it);
        }
    for (const auto& e : p.push_events)
        for (int i = 0; i < e.count; ++i) {
            TraceItem it;
            it.arrival = clk.at(p.day, e.hour * 3600.0);
            it.kind = ItemKind::Push;
            it.cache_eligible = false;
            t.items.push_back(it);
        }
    std::stable_sort(t.items.begin(), t.items.end(),
                     [](const TraceItem& a, const TraceItem& b) { return a.arrival < b.arrival; });
    for (std::size_t i = 0; i < t.items.size(); ++i) t.items[i].id = std::uint32_t(i + 1);
    t.t_begin = clk.at(p.day, 0);
    t.t_end = 0;  // end of the window opening on this day, resolved by simulate
    return t;
}

SimResult measure(const Trace& trace, const std::vector<double>& start) {
    SimResult r;
    r.start = start;
    std::vector<std::pair<double, double>> spans;  // [arrival, leave)
    for (std::size_t i = 0; i < trace.items.size(); ++i) {
        const auto& it = trace.items[i];
        if (it.kind == ItemKind::Hub) continue;
        ++r.enqueued;
        double leave;
        if (start[i] >= 0) {
            leave = start[i];
            ++r.served;
            if (it.kind == ItemKind::Url) ++r.served_url;
            if (it.kind == ItemKind::Gpt) ++r.served_gpt;
            if (it.kind == ItemKind::Push) ++r.served_push;
        } else if (it.skip) {
            leave = ready_of(it);
            ++r.skipped;
        } else {
            leave = kInf;
            ++r.unserved;
        }
        spans.push_back({it.arrival, leave});
    }
    // sweep arrivals and departures against the minute grid
    std::vector<double> in, out;
    for (auto& [a, l] : spans) {
        if (l <= a) continue;  // never waited
        in.push_back(a);
        out.push_back(l);
    }
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());
    std::size_t ia = 0, io = 0;
    for (double t = trace.t_begin; t <= trace.t_end + 1e-9; t += 60.0) {
        while (ia < in.size() && in[ia] <= t) ++ia;
        while (io < out.size() && out[io] <= t) ++io;
        int size = int(ia) - int(io);
        r.series.push_back({t, size});
        if (size > r.peak) {
            r.peak = size;
            r.peak_t = t;
        }
    }
    return r;
}

SimResult simulate(const Trace& input, const SimConfig& cfg) {
    if (cfg.n_freqs < 1) throw std::invalid_argument("n_freqs must be >= 1");
    cfg.window.validate();
    const auto& win = cfg.window;
    const auto& clk = cfg.clock;
    const auto& svc = cfg.svc;

    Trace tr = input;
    if (tr.t_end <= 0) {
        std::int64_t day = clk.day(tr.t_begin);
        tr.t_end = win.window_end(clk.at(day, win.start_min * 60.0), clk);
    }

    // every item consumes the same draws whatever the parameters, so runs that
    // differ only in rates or scale see the same sizes
    std::mt19937_64 rng(tr.seed ^ 0x9E3779B97F4A7C15ull);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& it : tr.items) {
        double cache_u = u01(rng), size_z = z(rng);
        if (it.kind != ItemKind::Hub && it.cache_eligible && it.kind != ItemKind::Push && cache_u < cfg.cache_hit_rate) {
            it.skip = true;
        }
        if (it.duration < 0) {
            bool text = it.kind == ItemKind::Gpt || it.kind == ItemKind::Hub;
            double median = text ? svc.gpt_median_bytes : svc.url_median_bytes;
            double sigma = text ? svc.gpt_sigma : svc.url_sigma;
            it.duration = median * std::exp(sigma * size_z) / svc.rate_bytes_per_s;
        }
        it.duration *= svc.scale;
    }
    const double overhead = svc.overhead_s * svc.scale;
    const bool keepalives = svc.keepalive_s > 0;

    std::vector<double> start(tr.items.size(), -1.0);
    // round-robin arrival split; hub indexes go out on every frequency
    std::vector<std::vector<std::size_t>> reg(cfg.n_freqs), push(cfg.n_freqs), hub(cfg.n_freqs);
    int rr = 0;
    for (std::size_t i = 0; i < tr.items.size(); ++i) {
        const auto& it = tr.items[i];
        if (it.kind == ItemKind::Hub) {
            for (auto& h : hub) h.push_back(i);
            continue;
        }
        int f = rr++ % cfg.n_freqs;
        if (it.skip) continue;
        (it.kind == ItemKind::Push ? push : reg)[f].push_back(i);
    }

    for (int f = 0; f < cfg.n_freqs; ++f) {
        std::deque<std::size_t> queues[3];  // hub, listener requests, pushes
        for (auto* v : {&hub[f], &reg[f], &push[f]}) {
            std::stable_sort(v->begin(), v->end(),
                             [&](std::size_t a, std::size_t b) { return ready_of(tr.items[a]) < ready_of(tr.items[b]); });
        }
        queues[0].assign(hub[f].begin(), hub[f].end());
        queues[1].assign(reg[f].begin(), reg[f].end());
        queues[2].assign(push[f].begin(), push[f].end());

        double cursor = tr.t_begin, busy = tr.t_begin, next_ka = tr.t_begin + svc.keepalive_interval_s;
        while (true) {
            double tau = std::max(cursor, busy);
            if (tau > tr.t_end) break;
            if (!win.contains(tau, clk)) {
                double ws = win.window_start(tau, clk);
                if (ws > tr.t_end) break;
                cursor = ws;
                next_ka = ws + svc.keepalive_interval_s;
                continue;
            }
            double we = win.window_end(tau, clk);
            int qi = -1;
            double s = kInf;
            for (int q = 0; q < 3; ++q) {
                if (queues[q].empty()) continue;
                double at = std::max(tau, ready_of(tr.items[queues[q].front()]));
                if (at < s) {
                    s = at;
                    qi = q;
                }
            }
            double k = keepalives ? std::max(next_ka, tau) : kInf;
            if (qi >= 0 && s <= k) {
                const auto& it = tr.items[queues[qi].front()];
                if (win.contains(s, clk) && s + it.duration <= win.window_end(s, clk)) {
                    if (s > tr.t_end) break;
                    start[queues[qi].front()] = s;
                    queues[qi].pop_front();
                    double end = s + it.duration;
                    busy = end + overhead;
                    next_ka = end + svc.keepalive_interval_s;
                    cursor = s;
                    continue;
                }
            }
            if (keepalives) {
                if (k > tr.t_end) break;
                if (k + svc.keepalive_s > we) {
                    cursor = we;
                    continue;
                }
                busy = k + svc.keepalive_s;
                next_ka = k + svc.keepalive_interval_s;
                cursor = k;
                continue;
            }
            if (qi < 0) break;
            // the head cannot go out in this window: wait for the next one
            cursor = win.contains(s, clk) ? win.window_end(s, clk) : s;
        }
    }
    return measure(tr, start);
}

json SimResult::to_json() const {
    json s = json::array();
    for (const auto& q : series) s.push_back({q.t, q.size});
    return {{"peak", peak},       {"peak_t", peak_t},         {"enqueued", enqueued},
            {"served", served},   {"unserved", unserved},     {"skipped", skipped},
            {"served_url", served_url}, {"served_gpt", served_gpt}, {"served_push", served_push},
            {"series", s}};
}

std::string SimResult::series_csv() const {
    std::ostringstream o;
    o << "minute,t,queue\n";
    for (std::size_t i = 0; i < series.size(); ++i) o << i << ',' << std::fixed << series[i].t << ',' << series[i].size << '\n';
    return o.str();
}

// ---- log replay ----

std::vector<json> read_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LogError("cannot open " + path);
    std::vector<json> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw LogError("line " + std::to_string(n) + ": not a JSON object");
        out.push_back(std::move(j));
    }
    return out;
}

LogTrace trace_from_log(const std::vector<json>& events) {
    LogTrace lt;
    if (events.empty()) return lt;
    std::map<std::uint32_t, std::size_t> index;
    double t_first = kInf, t_last = -kInf;
    bool have_config = false;
    try {
        for (const auto& e : events) {
            double ts = e.at("ts").get<double>();
            t_first = std::min(t_first, ts);
            t_last = std::max(t_last, ts);
            std::string ev = e.at("event");
            if (ev == "config" && !have_config) {
                have_config = true;
                lt.config.window = {e.at("window_start").get<int>(), e.at("window_end").get<int>()};
                lt.config.clock.utc_offset_s = e.at("utc_offset_s").get<int>();
                lt.config.svc.overhead_s = e.at("gap_s").get<double>();
                lt.config.svc.keepalive_interval_s = e.at("keepalive_interval_s").get<double>();
                lt.config.svc.keepalive_s = e.at("keepalive_s").get<double>();
                lt.trace.t_begin = ts;
            } else if (ev == "hub") {
                TraceItem it;
                it.kind = ItemKind::Hub;
                it.arrival = it.ready = ts;
                it.duration = e.at("duration").get<double>();
                it.cache_eligible = false;
                lt.trace.items.push_back(it);
                lt.start.push_back(ts);
            } else if (ev == "state") {
                std::uint32_t id = e.at("id").get<std::uint32_t>();
                std::string to = e.at("to");
                if (e.at("from").is_null()) {
                    TraceItem it;
                    it.id = id;
                    it.arrival = ts;
                    it.ready = kInf;  // set once encoded
                    it.cache_eligible = false;
                    it.kind = e.value("push", false) ? ItemKind::Push
                              : e.at("kind") == "gpt"  ? ItemKind::Gpt
                                                       : ItemKind::Url;
                    index[id] = lt.trace.items.size();
                    lt.trace.items.push_back(it);
                    lt.start.push_back(-1);
                    continue;
                }
                auto f = index.find(id);
                if (f == index.end()) throw LogError("transition for unknown request " + std::to_string(id));
                auto& it = lt.trace.items[f->second];
                if (to == "ENCODED") {
                    it.ready = ts;
                    if (e.contains("duration")) it.duration = e["duration"].get<double>();
                } else if (to == "FAILED") {
                    it.ready = ts;
                    it.skip = true;
                } else if (to == "PLAYING") {
                    it.duration = e.at("duration").get<double>();
                    lt.start[f->second] = ts;
                }
            }
        }
    } catch (const json::exception& ex) {
        throw LogError(std::string("malformed event: ") + ex.what());
    }
    if (!have_config) lt.trace.t_begin = t_first;
    lt.trace.t_end = t_last;
    // still waiting for the renderer when the log ends
    for (auto& it : lt.trace.items)
        if (it.ready == kInf) it.ready = t_last;
    return lt;
}

SimResult replay_log(const std::vector<json>& events) {
    if (events.empty()) return {};
    auto lt = trace_from_log(events);
    return measure(lt.trace, lt.start);
}

// ---- calibration ----

Calibration load_calibration(const std::string& path) {
    Calibration c;
    toml::table tbl;
    try {
        tbl = toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        throw std::runtime_error(path + ": " + std::string(e.description()));
    }
    auto& w = c.workload;
    if (auto t = tbl["workload"]) {
        w.n_users = t["n_users"].value_or(w.n_users);
        w.requests_per_user_day = t["requests_per_user_day"].value_or(w.requests_per_user_day);
        w.quota = t["quota"].value_or(w.quota);
        w.gpt_fraction = t["gpt_fraction"].value_or(w.gpt_fraction);
        w.url_fraction = t["url_fraction"].value_or(w.url_fraction);
        w.cache_hit_rate = t["cache_hit_rate"].value_or(w.cache_hit_rate);
        if (auto* arr = t["hourly"].as_array()) {
            if (arr->size() != 24) throw std::runtime_error(path + ": workload.hourly needs 24 values");
            for (std::size_t i = 0; i < 24; ++i) w.hourly[i] = arr->get(i)->value_or(0.0);
        }
        if (auto* arr = t["push"].as_array()) {
            w.push_events.clear();
            for (auto& node : *arr) {
                auto* e = node.as_table();
                if (!e) throw std::runtime_error(path + ": workload.push entries must be tables");
                w.push_events.push_back({(*e)["hour"].value_or(9.5), (*e)["count"].value_or(0)});
            }
        }
    }
    auto& s = c.svc;
    if (auto t = tbl["service"]) {
        s.rate_bytes_per_s = t["rate_bytes_per_s"].value_or(s.rate_bytes_per_s);
        s.url_median_bytes = t["url_median_bytes"].value_or(s.url_median_bytes);
        s.url_sigma = t["url_sigma"].value_or(s.url_sigma);
        s.gpt_median_bytes = t["gpt_median_bytes"].value_or(s.gpt_median_bytes);
        s.gpt_sigma = t["gpt_sigma"].value_or(s.gpt_sigma);
        s.overhead_s = t["overhead_s"].value_or(s.overhead_s);
    }
    if (auto t = tbl["window"]) {
        c.window.start_min = sched::parse_hhmm(t["start"].value_or(std::string("22:00")));
        c.window.end_min = sched::parse_hhmm(t["end"].value_or(std::string("05:00")));
    }
    w.validate();
    c.window.validate();
    return c;
}

std::vector<SweepPoint> default_sweep() { return {{15, 1}, {30, 1}, {105, 2}, {150, 3}, {150, 4}, {300, 10}}; }

}  // namespace sonic::sim
