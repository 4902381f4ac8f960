#include <httplib.h>
#include <json.hpp>

#include "sonic/render.hpp"

namespace sonic::render {

using nlohmann::json;

namespace {

// "http://host:port/prefix" -> ("http://host:port", "/prefix")
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto p = url.find("://");
    auto slash = url.find('/', p == std::string::npos ? 0 : p + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

void set_timeouts(httplib::Client& c, double s) {
    auto sec = static_cast<time_t>(s);
    auto usec = static_cast<time_t>((s - double(sec)) * 1e6);
    c.set_connection_timeout(std::min<time_t>(sec, 10), usec);
    c.set_read_timeout(sec, usec);
    c.set_write_timeout(sec, usec);
}

class WebDriverSession {
public:
    WebDriverSession(const std::string& endpoint, double timeout_s)
        : ep_(split_endpoint(endpoint)), cli_(ep_.first) {
        set_timeouts(cli_, timeout_s);
        json caps = {{"capabilities", {{"alwaysMatch", json::object()}}}};
        json v = call("POST", "/session", caps, RenderErrc::CaptureFailed);
        id_ = v.value("sessionId", "");
        if (id_.empty()) throw RenderError(RenderErrc::CaptureFailed, "WebDriver returned no session id");
    }
    ~WebDriverSession() {
        if (!id_.empty()) cli_.Delete(ep_.second + "/session/" + id_);
    }
    WebDriverSession(const WebDriverSession&) = delete;
    WebDriverSession& operator=(const WebDriverSession&) = delete;

    json cmd(const std::string& method, const std::string& path, const json& body = json::object(),
             RenderErrc on_error = RenderErrc::CaptureFailed) {
        return call(method, "/session/" + id_ + path, body, on_error);
    }

private:
    json call(const std::string& method, const std::string& path, const json& body, RenderErrc on_error) {
        std::string full = ep_.second + path;
        httplib::Result r = method == "GET" ? cli_.Get(full)
                                            : cli_.Post(full, body.dump(), "application/json");
        if (!r) {
            auto err = r.error();
            if (err == httplib::Error::Read && on_error == RenderErrc::NavigationTimeout)
                throw RenderError(RenderErrc::NavigationTimeout, "navigation timed out");
            throw RenderError(RenderErrc::CaptureFailed, "WebDriver endpoint: " + httplib::to_string(err));
        }
        json j = json::parse(r->body, nullptr, false);
        if (j.is_discarded() || !j.contains("value"))
            throw RenderError(RenderErrc::CaptureFailed, "WebDriver sent a malformed reply");
        const json& v = j["value"];
        if (r->status >= 400 || (v.is_object() && v.contains("error"))) {
            std::string e = v.is_object() ? v.value("error", "") : "";
            std::string msg = v.is_object() ? v.value("message", "") : "";
            throw RenderError(classify(e, msg, on_error), "WebDriver " + e + ": " + msg);
        }
        return v;
    }

    static RenderErrc classify(const std::string& e, const std::string& msg, RenderErrc fallback) {
        if (fallback != RenderErrc::NavigationTimeout) return fallback;
        if (e == "timeout") return RenderErrc::NavigationTimeout;
        // unreachable hosts surface as browser error pages
        for (const char* m : {"net::ERR_", "dnsNotFound", "connectionFailure", "Reached error page"})
            if (msg.find(m) != std::string::npos) return RenderErrc::NavigationTimeout;
        return RenderErrc::CaptureFailed;
    }

    std::pair<std::string, std::string> ep_;
    httplib::Client cli_;
    std::string id_;
};

const char* kLayoutScript = R"(
var d = document.documentElement, b = document.body;
var h = Math.max(d ? d.scrollHeight : 0, b ? b.scrollHeight : 0);
var out = [];
document.querySelectorAll('a[href]').forEach(function (a) {
  var r = a.getBoundingClientRect();
  if (r.width > 0 && r.height > 0)
    out.push({x: r.left + window.scrollX, y: r.top + window.scrollY, w: r.width, h: r.height, href: a.href});
});
return {height: h, inner_w: window.innerWidth, outer_w: window.outerWidth,
        inner_h: window.innerHeight, outer_h: window.outerHeight, anchors: out};
)";

}  // namespace

WebDriverBrowser::WebDriverBrowser(std::string endpoint, double nav_timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(nav_timeout_s) {}

RawCapture WebDriverBrowser::load(const std::string& url) {
    WebDriverSession s(endpoint_, timeout_s_ + 10);
    s.cmd("POST", "/timeouts", {{"pageLoad", static_cast<long>(timeout_s_ * 1000)}});
    s.cmd("POST", "/window/rect", {{"width", kViewportWidth}, {"height", kViewportHeight}});
    s.cmd("POST", "/url", {{"url", url}}, RenderErrc::NavigationTimeout);

    json script = {{"script", kLayoutScript}, {"args", json::array()}};
    json lay = s.cmd("POST", "/execute/sync", script);
    // window/rect sizes the outer window; correct for chrome and scrollbars so the
    // layout viewport is 375 px wide and tall enough for the whole page
    int chrome_w = lay.value("outer_w", kViewportWidth) - lay.value("inner_w", kViewportWidth);
    int chrome_h = lay.value("outer_h", kViewportHeight) - lay.value("inner_h", kViewportHeight);
    int page_h = std::max(kViewportHeight, lay.value("height", kViewportHeight));
    int max_css = int(format::kMaxImageHeight) * kViewportWidth / int(format::kImageWidth) + 1;
    s.cmd("POST", "/window/rect",
          {{"width", kViewportWidth + std::max(0, chrome_w)}, {"height", std::min(page_h, max_css) + std::max(0, chrome_h)}});
    if (std::min(page_h, max_css) != kViewportHeight) lay = s.cmd("POST", "/execute/sync", script);

    json shot = s.cmd("GET", "/screenshot");
    if (!shot.is_string()) throw RenderError(RenderErrc::CaptureFailed, "screenshot is not a string");
    RawCapture out;
    try {
        out.screenshot = decode_png(base64_decode(shot.get<std::string>()));
    } catch (const RenderError& e) {
        throw RenderError(RenderErrc::CaptureFailed, std::string("screenshot: ") + e.what());
    }
    for (const auto& a : lay.value("anchors", json::array())) {
        Anchor an;
        an.x = a.value("x", 0.0);
        an.y = a.value("y", 0.0);
        an.w = a.value("w", 0.0);
        an.h = a.value("h", 0.0);
        an.href = a.value("href", "");
        out.anchors.push_back(std::move(an));
    }
    return out;
}

HttpLlm::HttpLlm(std::string url, std::string key, std::string model, double timeout_s)
    : url_(std::move(url)), key_(std::move(key)), model_(std::move(model)), timeout_s_(timeout_s) {}

std::string HttpLlm::complete(const std::string& prompt) {
    auto [base, path] = split_endpoint(url_);
    httplib::Client cli(base);
    set_timeouts(cli, timeout_s_);
    httplib::Headers h;
    if (!key_.empty()) h.emplace("Authorization", "Bearer " + key_);
    json body = {{"model", model_}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto r = cli.Post(path.empty() ? "/" : path, h, body.dump(), "application/json");
    if (!r) throw RenderError(RenderErrc::LlmUnavailable, "llm endpoint: " + httplib::to_string(r.error()));
    if (r->status / 100 != 2)
        throw RenderError(RenderErrc::LlmUnavailable, "llm endpoint returned HTTP " + std::to_string(r->status));
    json j = json::parse(r->body, nullptr, false);
    if (j.is_discarded()) throw RenderError(RenderErrc::LlmUnavailable, "llm reply is not JSON");
    try {
        if (j.contains("choices")) return j["choices"].at(0).at("message").at("content").get<std::string>();
        if (j.contains("text")) return j["text"].get<std::string>();
    } catch (const json::exception& e) {
        throw RenderError(RenderErrc::LlmUnavailable, std::string("llm reply: ") + e.what());
    }
    throw RenderError(RenderErrc::LlmUnavailable, "llm reply has no completion text");
}

}  // namespace sonic::render
