#include <cmath>
#include <random>

#include "sonic/render.hpp"

namespace sonic::render {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string host_of(const std::string& url) {
    auto p = url.find("://");
    if (p == std::string::npos) return {};
    auto rest = url.substr(p + 3);
    auto end = rest.find_first_of("/?#:");
    std::string h = end == std::string::npos ? rest : rest.substr(0, end);
    for (auto& c : h) c = char(std::tolower(static_cast<unsigned char>(c)));
    return h;
}

void fill(Raster& r, int x0, int y0, int w, int h, std::uint8_t cr, std::uint8_t cg, std::uint8_t cb) {
    int x1 = std::min(r.width, x0 + w), y1 = std::min(r.height, y0 + h);
    for (int y = std::max(0, y0); y < y1; ++y)
        for (int x = std::max(0, x0); x < x1; ++x) {
            auto* p = r.px(x, y);
            p[0] = cr, p[1] = cg, p[2] = cb;
        }
}

// A row of word-like blocks between x0 and x1.
void text_line(Raster& r, int x0, int x1, int y, int h, std::mt19937_64& rng, std::uint8_t shade,
               std::uint8_t tint_b = 0) {
    int x = x0;
    while (x < x1) {
        int w = 6 + int(rng() % 40);
        if (x + w > x1) break;
        // glyph texture: vertical strokes rather than a solid bar
        for (int gx = x; gx < x + w; gx += 1 + int(rng() % 3)) fill(r, gx, y, 1, h, shade, shade, std::uint8_t(shade + tint_b));
        x += w + 4;
    }
}

}  // namespace

PageCapture capture_page(const std::string& url, Browser& browser) {
    RawCapture raw = browser.load(url);
    if (raw.screenshot.width <= 0 || raw.screenshot.height <= 0)
        throw RenderError(RenderErrc::CaptureFailed, "browser returned an empty screenshot");
    PageCapture cap;
    cap.source_url = url;
    cap.image = resize_to_width(raw.screenshot, int(format::kImageWidth));
    if (cap.image.height > int(format::kMaxImageHeight)) {
        cap.image = crop_rows(cap.image, 0, int(format::kMaxImageHeight));
        cap.truncated = true;
    }
    cap.links = build_click_map(raw.anchors, url, cap.image.height);
    return cap;
}

void SyntheticBrowser::set_layout(const std::string& url, Layout l) {
    for (auto& [u, lay] : fixed_)
        if (u == url) {
            lay = std::move(l);
            return;
        }
    fixed_.emplace_back(url, std::move(l));
}

SyntheticBrowser::Layout SyntheticBrowser::default_layout(const std::string& url) {
    Layout l;
    if (url == "about:blank") {
        l.text_lines = 0;
        return l;
    }
    std::mt19937_64 rng(fnv1a(url));
    l.css_height = 1200 + int(rng() % 4000);
    int n = 6 + int(rng() % 20);
    for (int i = 0; i < n; ++i) {
        Anchor a;
        a.x = 16 + double(rng() % 120);
        a.y = double(rng() % std::uint64_t(l.css_height - 40));
        a.w = 40 + double(rng() % std::uint64_t(359 - 40 - int(a.x)));
        a.h = 18 + double(rng() % 24);
        switch (rng() % 8) {
            case 0: a.href = "#section-" + std::to_string(i); break;
            case 1: a.href = "https://external.example/" + std::to_string(rng() % 1000); break;
            default: a.href = "/article/" + std::to_string(rng() % 100000);
        }
        l.anchors.push_back(a);
    }
    l.anchors.push_back({16, 8, 80, 24, "javascript:void(0)"});
    return l;
}

RawCapture SyntheticBrowser::load(const std::string& url) {
    const Layout* lay = nullptr;
    for (auto& [u, l] : fixed_)
        if (u == url) lay = &l;
    Layout def;
    if (!lay) {
        if (url != "about:blank") {
            std::string host = host_of(url);
            if (host.empty()) throw RenderError(RenderErrc::CaptureFailed, "not an http(s) url: " + url);
            if (host.size() >= 8 && host.compare(host.size() - 8, 8, ".invalid") == 0)
                throw RenderError(RenderErrc::NavigationTimeout, "navigation timed out: " + url);
        }
        def = default_layout(url);
        lay = &def;
    }

    RawCapture out;
    out.anchors = lay->anchors;
    Raster& r = out.screenshot;
    r = Raster(kViewportWidth, std::max(1, lay->css_height), 255);
    std::mt19937_64 rng(fnv1a(url) ^ 0x5bd1e995);
    int lines = lay->text_lines < 0 ? (r.height - 16) / 22 : lay->text_lines;
    for (int i = 0; i < lines; ++i) {
        int y = 12 + 22 * i;
        if (y + 12 > r.height) break;
        if (i % 9 == 0) {
            // heading
            text_line(r, 16, 16 + 120 + int(rng() % 200), y, 13, rng, 20);
            continue;
        }
        text_line(r, 16, kViewportWidth - 16, y + 2, 9, rng, 60);
    }
    for (const auto& a : lay->anchors) {
        int x = int(a.x), y = int(a.y), w = int(std::ceil(a.w)), h = int(std::ceil(a.h));
        fill(r, x, y, w, h, 232, 240, 254);
        text_line(r, x + 2, x + w - 2, y + std::max(1, h / 2 - 4), std::min(8, h), rng, 30, 170);
    }
    return out;
}

std::unique_ptr<Browser> make_browser(const std::string& spec, double nav_timeout_s) {
    if (spec.empty() || spec == "synthetic") return std::make_unique<SyntheticBrowser>();
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0)
        return std::make_unique<WebDriverBrowser>(spec, nav_timeout_s);
    throw RenderError(RenderErrc::InvalidInput, "browser must be 'synthetic' or a WebDriver url: " + spec);
}

}  // namespace sonic::render
