#include <algorithm>
#include <cctype>
#include <cmath>

#include "sonic/server.hpp"

namespace sonic::server {

const char* to_string(RequestKind k) { return k == RequestKind::Url ? "url" : "gpt"; }

const char* to_string(RequestState s) {
    switch (s) {
        case RequestState::Queued: return "QUEUED";
        case RequestState::Rendering: return "RENDERING";
        case RequestState::Encoded: return "ENCODED";
        case RequestState::Playing: return "PLAYING";
        case RequestState::Done: return "DONE";
        case RequestState::Failed: return "FAILED";
    }
    return "?";
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::UnknownType: return "UNKNOWN_TYPE";
        case RejectReason::EmptyBody: return "EMPTY_BODY";
        case RejectReason::Quota: return "QUOTA";
        case RejectReason::Overload: return "OVERLOAD";
    }
    return "?";
}

std::optional<RequestState> parse_state(const std::string& s) {
    for (auto st : {RequestState::Queued, RequestState::Rendering, RequestState::Encoded, RequestState::Playing,
                    RequestState::Done, RequestState::Failed})
        if (s == to_string(st)) return st;
    return std::nullopt;
}

bool valid_transition(RequestState a, RequestState b) {
    using S = RequestState;
    if (b == S::Failed) return a != S::Done && a != S::Failed;
    switch (a) {
        case S::Queued: return b == S::Rendering || b == S::Encoded;
        case S::Rendering: return b == S::Encoded;
        case S::Encoded: return b == S::Playing;
        case S::Playing: return b == S::Done;
        default: return false;
    }
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::string normalize_url(const std::string& in) {
    std::string u = trim(in);
    std::string scheme = "https";
    auto p = u.find("://");
    if (p != std::string::npos) {
        scheme = lower(u.substr(0, p));
        u = u.substr(p + 3);
    }
    auto slash = u.find_first_of("/?#");
    std::string host = lower(u.substr(0, slash));
    std::string rest = slash == std::string::npos ? "" : u.substr(slash);
    if (rest.empty() || rest[0] != '/') rest = "/" + rest;
    return scheme + "://" + host + rest;
}

std::variant<ParsedBody, RejectReason> parse_body(const std::string& raw) {
    std::string s = trim(raw);
    if (s.empty()) return RejectReason::EmptyBody;
    auto sp = s.find_first_of(" \t");
    // SMS keyboards like to capitalise the first word
    std::string type = lower(s.substr(0, sp));
    std::string rest = sp == std::string::npos ? "" : trim(s.substr(sp));
    ParsedBody out;
    if (type == "url")
        out.kind = RequestKind::Url;
    else if (type == "gpt")
        out.kind = RequestKind::Gpt;
    else
        return RejectReason::UnknownType;
    if (rest.empty()) return RejectReason::EmptyBody;
    out.subject = out.kind == RequestKind::Url ? normalize_url(rest) : rest;
    if (out.kind == RequestKind::Url) {
        auto h = out.subject.find("://") + 3;
        if (out.subject.find('/', h) == h) return RejectReason::EmptyBody;  // no host
    }
    return out;
}

json to_json(const RequestRecord& r) {
    json j = {{"id", r.id},
              {"kind", to_string(r.kind)},
              {"subject", r.subject},
              {"sender", r.sender},
              {"state", to_string(r.state)},
              {"enqueue_time", r.enqueue_time},
              {"cached", r.cached},
              {"push", r.push}};
    if (r.play_start >= 0) j["play_start"] = r.play_start;
    if (r.play_end >= 0) j["play_end"] = r.play_end;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

json to_json(const Status& s) {
    json j = {{"window_open", s.window_open},
              {"queues",
               {{"screenshot", s.screenshot_queue},
                {"player", s.player_queue},
                {"push_pending", s.push_pending},
                {"push", s.push_queue}}},
              {"cache_entries", s.cache_entries},
              {"keepalives", s.keepalives}};
    j["current"] = s.current ? to_json(*s.current) : json(nullptr);
    return j;
}

}  // namespace sonic::server
