#include "sonic/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

namespace sonic::config {

namespace {

class Section {
public:
    Section(const toml::table& root, const std::string& name, const std::string& origin)
        : name_(name), origin_(origin) {
        if (auto* n = root.get(name)) {
            t_ = n->as_table();
            if (!t_) fail("", "must be a table");
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        known_.insert(key);
        if (!t_) return;
        auto* n = t_->get(key);
        if (!n) return;
        if constexpr (std::is_same_v<T, std::string>) {
            auto v = n->value<std::string>();
            if (!v) fail(key, "expected a string");
            out = *v;
        } else if constexpr (std::is_same_v<T, double>) {
            auto v = n->value<double>();
            if (!v) fail(key, "expected a number");
            out = *v;
        } else if constexpr (std::is_same_v<T, std::optional<int>>) {
            auto v = n->value<std::int64_t>();
            if (!v) fail(key, "expected an integer");
            out = int(*v);
        } else {
            auto v = n->value<std::int64_t>();
            if (!v) fail(key, "expected an integer");
            if (std::is_unsigned_v<T> && *v < 0) fail(key, "must be >= 0");
            out = T(*v);
        }
    }

    // Rejects keys nobody asked for, which are almost always typos.
    void finish() {
        if (!t_) return;
        for (auto& [k, v] : *t_)
            if (!known_.count(std::string(k.str()))) fail(std::string(k.str()), "unknown key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& why) const {
        throw ConfigError(origin_ + ": " + name_ + (key.empty() ? "" : "." + key) + ": " + why);
    }

private:
    const toml::table* t_ = nullptr;
    std::string name_, origin_;
    std::set<std::string> known_;
};

Config from_table(const toml::table& root, const std::string& origin) {
    static const std::set<std::string> sections = {"fec",    "modem",   "channel", "window", "server",
                                                   "client", "workload", "service"};
    for (auto& [k, v] : root)
        if (!sections.count(std::string(k.str())))
            throw ConfigError(origin + ": unknown section [" + std::string(k.str()) + "]");

    Config c;
    {
        Section s(root, "fec", origin);
        std::string inner = "conv_r12_k9", outer = "rs_255_223";
        s.get("inner", inner);
        s.get("outer", outer);
        s.get("interleaver_depth", c.link.fec.interleaver_depth);
        s.finish();
        try {
            c.link.fec.inner = fec::parse_inner(inner);
            c.link.fec.outer = fec::parse_outer(outer);
        } catch (const std::invalid_argument& e) {
            s.fail("", e.what());
        }
        if (c.link.fec.interleaver_depth < 1) s.fail("interleaver_depth", "must be >= 1");
    }
    {
        Section s(root, "modem", origin);
        auto& p = c.link.profile;
        std::string constellation = "qpsk";
        s.get("sample_rate", p.sample_rate);
        s.get("fft_size", p.fft_size);
        s.get("n_subcarriers", p.n_subcarriers);
        s.get("center_freq", p.center_freq);
        s.get("cyclic_prefix_len", p.cyclic_prefix_len);
        s.get("constellation", constellation);
        s.get("n_pilots", p.n_pilots);
        s.get("reference_interval", p.reference_interval);
        s.get("peak_amplitude", p.peak_amplitude);
        s.get("sync_threshold", p.sync_threshold);
        s.finish();
        if (constellation == "qpsk") p.constellation = modem::Constellation::Qpsk;
        else if (constellation == "bpsk") p.constellation = modem::Constellation::Bpsk;
        else s.fail("constellation", "expected \"qpsk\" or \"bpsk\"");
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            s.fail("", e.what());
        }
    }
    {
        Section s(root, "channel", origin);
        s.get("p50_rssi", c.loss.p50_rssi);
        s.get("slope", c.loss.slope);
        s.get("floor", c.loss.floor);
        s.get("burst_mean_frames", c.burst_mean_frames);
        s.finish();
        if (c.loss.slope <= 0) s.fail("slope", "must be > 0");
        if (c.loss.floor < 0 || c.loss.floor >= 1) s.fail("floor", "must be in [0,1)");
        if (c.burst_mean_frames < 1) s.fail("burst_mean_frames", "must be >= 1");
    }
    {
        Section s(root, "window", origin);
        std::string start = "22:00", end = "05:00";
        s.get("start", start);
        s.get("end", end);
        s.finish();
        try {
            c.window = {sched::parse_hhmm(start), sched::parse_hhmm(end)};
            c.window.validate();
        } catch (const std::invalid_argument& e) {
            s.fail("", e.what());
        }
    }
    {
        Section s(root, "server", origin);
        auto& v = c.server;
        s.get("listen", v.listen);
        s.get("port", v.port);
        s.get("db", v.db);
        s.get("event_log", v.event_log);
        s.get("uplink_file", v.uplink_file);
        s.get("audio", v.audio);
        s.get("utc_offset_s", v.utc_offset_s);
        s.get("quota_per_day", v.quota_per_day);
        s.get("queue_bound", v.queue_bound);
        s.get("keepalive_interval_s", v.keepalive_interval_s);
        s.get("gap_s", v.gap_s);
        s.get("hub_top_n", v.hub_top_n);
        s.get("hub_span_days", v.hub_span_days);
        s.get("push_links", v.push_links);
        s.get("browser", v.browser);
        s.get("nav_timeout_s", v.nav_timeout_s);
        s.get("llm", v.llm);
        s.get("llm_cap", v.llm_cap);
        s.get("tick_s", v.tick_s);
        s.finish();
        if (v.port < 0 || v.port > 65535) s.fail("port", "out of range");
        if (v.quota_per_day < 0) s.fail("quota_per_day", "must be >= 0");
        if (v.queue_bound < 1) s.fail("queue_bound", "must be >= 1");
        if (v.keepalive_interval_s <= 0) s.fail("keepalive_interval_s", "must be > 0");
        if (v.gap_s < 0) s.fail("gap_s", "must be >= 0");
        if (v.tick_s <= 0) s.fail("tick_s", "must be > 0");
        if (v.audio != "stdout" && v.audio.rfind("wav:", 0) != 0) s.fail("audio", "expected \"stdout\" or \"wav:<dir>\"");
    }
    {
        Section s(root, "client", origin);
        auto& v = c.client;
        s.get("listen", v.listen);
        s.get("port", v.port);
        s.get("db", v.db);
        s.get("uplink_url", v.uplink_url);
        s.get("sender_id", v.sender_id);
        s.get("static_dir", v.static_dir);
        s.get("end_silence_s", v.end_silence_s);
        s.get("partial_threshold", v.partial_threshold);
        s.get("evict_after_s", v.evict_after_s);
        s.finish();
        if (v.port < 0 || v.port > 65535) s.fail("port", "out of range");
        if (v.end_silence_s <= 0) s.fail("end_silence_s", "must be > 0");
        if (v.partial_threshold < 0 || v.partial_threshold > 100) s.fail("partial_threshold", "must be in [0,100]");
    }
    return c;
}

}  // namespace

Config parse_config(const std::string& toml_text, const std::string& origin) {
    try {
        return from_table(toml::parse(toml_text, origin), origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream o;
        o << origin << ":" << e.source().begin.line << ": " << e.description();
        throw ConfigError(o.str());
    }
}

Config load_config(const std::string& path) {
    try {
        return from_table(toml::parse_file(path), path);
    } catch (const toml::parse_error& e) {
        std::ostringstream o;
        o << path << ":" << e.source().begin.line << ": " << e.description();
        throw ConfigError(o.str());
    }
}

}  // namespace sonic::config
