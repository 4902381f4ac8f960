#include <algorithm>

#include "sonic/server.hpp"

namespace sonic::server {

namespace {
std::string cache_key(RequestKind kind, const std::string& subject) {
    return std::string(to_string(kind)) + " " + subject;
}
}  // namespace

std::shared_ptr<const Encoded> Cache::lookup(RequestKind kind, const std::string& subject, std::int64_t window) {
    if (window != window_) {
        entries_.clear();  // rollover invalidates everything
        window_ = window;
    }
    auto it = entries_.find(cache_key(kind, subject));
    if (it == entries_.end() || it->second.window != window) return nullptr;
    return it->second.enc;
}

void Cache::insert(RequestKind kind, const std::string& subject, std::int64_t window,
                   std::shared_ptr<const Encoded> e) {
    if (window != window_) {
        entries_.clear();
        window_ = window;
    }
    entries_[cache_key(kind, subject)] = {std::move(e), window};
}

void Popularity::record(RequestKind kind, const std::string& subject, double t) {
    Hit h{t, kind, subject};
    // keep time order even if a restart replays older hits
    auto pos = std::upper_bound(hits_.begin(), hits_.end(), t, [](double v, const Hit& x) { return v < x.t; });
    hits_.insert(pos, std::move(h));
}

std::vector<HubEntry> Popularity::top(double now, std::size_t n, double span_s) const {
    std::map<std::pair<std::string, RequestKind>, std::int64_t> counts;
    for (const auto& h : hits_)
        if (h.t >= now - span_s && h.t <= now) ++counts[{h.subject, h.kind}];
    std::vector<HubEntry> out;
    for (auto& [k, c] : counts) out.push_back({k.first, k.second, c});
    std::sort(out.begin(), out.end(), [](const HubEntry& a, const HubEntry& b) {
        if (a.count != b.count) return a.count > b.count;
        if (a.subject != b.subject) return a.subject < b.subject;
        return a.kind < b.kind;
    });
    if (out.size() > n) out.resize(n);
    return out;
}

void Popularity::prune(double before) {
    while (!hits_.empty() && hits_.front().t < before) hits_.pop_front();
}

std::string hub_index_json(const std::vector<HubEntry>& entries, double now) {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back({{"subject", e.subject}, {"kind", to_string(e.kind)}, {"count", e.count}});
    return json{{"generated_at", now}, {"entries", arr}}.dump();
}

}  // namespace sonic::server
