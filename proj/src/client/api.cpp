#include <chrono>

#include <httplib.h>
#include <json.hpp>

#include "sonic/client.hpp"

namespace sonic::client {

using nlohmann::json;

namespace {

const char* type_name(format::ContentType t) { return t == format::ContentType::Webpage ? "WEBPAGE" : "LLM_TEXT"; }

json summary_json(const ItemSummary& s) {
    return {{"id", s.id},
            {"request_id", s.request_id},
            {"content_type", type_name(s.content_type)},
            {"source", s.source},
            {"loss_percent", s.loss_percent},
            {"status", to_string(s.status)},
            {"received_at", s.received_at},
            {"last_accessed", s.last_accessed}};
}

json item_json(const ReceivedItem& it) {
    json links = json::array();
    for (const auto& l : it.links) links.push_back({{"x", l.x}, {"y", l.y}, {"w", l.w}, {"h", l.h}, {"url", l.target_url}});
    json j = {{"id", it.id},
              {"request_id", it.meta.request_id},
              {"content_type", type_name(it.meta.content_type)},
              {"source", it.meta.source},
              {"created_at", it.meta.created_at},
              {"truncated", (it.meta.flags & format::kFlagTruncated) != 0},
              {"width", it.meta.image_width},
              {"height", it.meta.image_height},
              {"loss_percent", it.loss_percent},
              {"pixel_loss_percent", it.pixel_loss_percent},
              {"complete", it.complete},
              {"status", to_string(it.status)},
              {"received_at", it.received_at},
              {"last_accessed", it.last_accessed},
              {"links", links}};
    if (it.meta.content_type == format::ContentType::LlmText) j["text"] = it.text;
    return j;
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code) { send_json(res, {{"error", code}}, status); }

std::optional<json> parse_body(const httplib::Request& req) {
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

}  // namespace

void install_api(httplib::Server& srv, ItemStore& store, SharedState& state, ApiOptions opt) {
    auto clock = opt.clock ? opt.clock : [] {
        return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count();
    };

    srv.Get("/items", [&store](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        for (const auto& s : store.list_items()) arr.push_back(summary_json(s));
        send_json(res, arr);
    });

    srv.Get(R"(/items/(\d+)/image)", [&store, clock](const httplib::Request& req, httplib::Response& res) {
        auto png = store.image_png(std::stoll(req.matches[1]), clock());
        if (!png || png->empty()) return send_error(res, 404, "NOT_FOUND");
        res.set_content(std::string(png->begin(), png->end()), "image/png");
    });

    srv.Get(R"(/items/(\d+)/meta)", [&store, clock](const httplib::Request& req, httplib::Response& res) {
        auto it = store.get_item(std::stoll(req.matches[1]), clock());
        if (!it) return send_error(res, 404, "NOT_FOUND");
        send_json(res, item_json(*it));
    });

    srv.Post("/click", [&store, clock](const httplib::Request& req, httplib::Response& res) {
        auto j = parse_body(req);
        if (!j || !j->contains("id") || !j->contains("x") || !j->contains("y") || !j->contains("screen_width"))
            return send_error(res, 400, "BAD_REQUEST");
        try {
            auto it = store.get_item((*j)["id"].get<std::int64_t>(), clock());
            if (!it) return send_error(res, 404, "NOT_FOUND");
            if (it->meta.content_type != format::ContentType::Webpage) return send_error(res, 400, "NOT_WEBPAGE");
            auto target = map_click(it->links, (*j)["x"].get<double>(), (*j)["y"].get<double>(),
                                    (*j)["screen_width"].get<double>());
            send_json(res, {{"target", target ? json(*target) : json(nullptr)}});
        } catch (const json::exception&) {
            send_error(res, 400, "BAD_REQUEST");
        }
    });

    srv.Post("/request", [opt](const httplib::Request& req, httplib::Response& res) {
        auto j = parse_body(req);
        if (!j || !j->contains("body") || !(*j)["body"].is_string()) return send_error(res, 400, "BAD_REQUEST");
        if (opt.uplink_url.empty()) return send_error(res, 502, "UPLINK_UNREACHABLE");
        httplib::Client cli(opt.uplink_url);
        cli.set_connection_timeout(5);
        cli.set_read_timeout(10);
        json fwd = {{"sender", opt.sender_id}, {"body", (*j)["body"]}};
        auto r = cli.Post("/uplink", fwd.dump(), "application/json");
        if (!r) return send_error(res, 502, "UPLINK_UNREACHABLE");
        res.status = r->status;
        res.set_content(r->body, "application/json");
    });

    srv.Get("/online", [&state, clock](const httplib::Request&, httplib::Response& res) {
        std::int64_t last = state.last_keepalive.load();
        bool online = last > 0 && clock() - last <= kOnlineFor;
        send_json(res, {{"online", online}, {"last_keepalive", last}});
    });

    // most recent knowledge-hub index, or an empty one
    srv.Get("/hub", [&store, clock](const httplib::Request&, httplib::Response& res) {
        for (const auto& s : store.list_items()) {
            if (s.source != format::kHubSource || s.status != Completion::Complete) continue;
            auto it = store.get_item(s.id, clock());
            if (!it) continue;
            auto j = json::parse(it->text, nullptr, false);
            if (!j.is_discarded()) return send_json(res, j);
        }
        send_json(res, {{"entries", json::array()}});
    });

    if (!opt.static_dir.empty()) srv.set_mount_point("/", opt.static_dir);
}

}  // namespace sonic::client
