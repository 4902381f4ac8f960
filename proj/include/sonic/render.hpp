#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonic/format.hpp"

namespace sonic::render {

using format::Bytes;
using format::ClickMapEntry;

inline constexpr int kViewportWidth = 375;
inline constexpr int kViewportHeight = 667;
inline constexpr int kDefaultStripHeight = 64;
inline constexpr int kDefaultQuality = 10;
inline constexpr std::size_t kDefaultLlmCap = 4000;

// Packed 8-bit RGB, row-major.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Raster() = default;
    Raster(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), rgb(std::size_t(w) * h * 3, fill) {}

    std::uint8_t* px(int x, int y) { return rgb.data() + (std::size_t(y) * width + x) * 3; }
    const std::uint8_t* px(int x, int y) const { return rgb.data() + (std::size_t(y) * width + x) * 3; }
    bool operator==(const Raster&) const = default;
};

// Rows [y0, y0 + h).
Raster crop_rows(const Raster& img, int y0, int h);
void paste_rows(Raster& dst, const Raster& src, int y0);

// Box-filter resample to a new width, height scaled to keep the aspect ratio.
Raster resize_to_width(const Raster& img, int new_width);

enum class RenderErrc { NavigationTimeout, CaptureFailed, LlmUnavailable, Codec, InvalidInput };
const char* to_string(RenderErrc e);

class RenderError : public std::runtime_error {
public:
    RenderError(RenderErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    RenderErrc code() const { return code_; }

private:
    RenderErrc code_;
};

Bytes encode_png(const Raster& img);
Raster decode_png(const Bytes& png);
Bytes encode_jpeg(const Raster& img, int quality);
Raster decode_jpeg(const Bytes& jpg);

std::string base64_encode(const Bytes& b);
Bytes base64_decode(const std::string& s);  // throws RenderError(InvalidInput)

struct StripSet {
    int strip_height = kDefaultStripHeight;
    format::Codec codec = format::Codec::Jpeg;
    std::vector<Bytes> strips;

    Bytes concat() const;
    std::vector<std::uint32_t> sizes() const;
};

// Strips are top-down bands of strip_height rows; the last may be shorter.
StripSet compress_strips(const Raster& img, int quality = kDefaultQuality,
                         int strip_height = kDefaultStripHeight);
Raster decode_strip(const Bytes& data, format::Codec codec, int width, int height);
Raster decompress_strips(const StripSet& s, int width, int height);
// Rows covered by strip i of an image of the given height.
inline int strip_rows(int i, int height, int strip_height) {
    int y0 = i * strip_height;
    return std::max(0, std::min(strip_height, height - y0));
}

// ---- links ----

// An anchor box in viewport (CSS) pixels, as reported by the browser.
struct Anchor {
    double x = 0, y = 0, w = 0, h = 0;
    std::string href;
};

// floor(x*s), floor(y*s), ceil(w*s), ceil(h*s) with s = 320/375.
ClickMapEntry scale_anchor(const Anchor& a);

// Keeps http(s) targets, resolves relative ones against base, drops fragments-only,
// javascript:, mailto: and the like. Empty string when rejected.
std::string resolve_link(const std::string& base, const std::string& href);

// Scales anchors to the stored image, clips to it, drops degenerate boxes.
std::vector<ClickMapEntry> build_click_map(const std::vector<Anchor>& anchors,
                                           const std::string& base_url, int image_height);

double score_link(const ClickMapEntry& e);
// Top k by score, ties by smaller y then smaller x; one entry per target url.
std::vector<ClickMapEntry> select_push_links(const std::vector<ClickMapEntry>& links,
                                             std::size_t k = 3);

// ---- capture ----

struct RawCapture {
    Raster screenshot;  // full page at viewport width (any pixel ratio)
    std::vector<Anchor> anchors;
};

class Browser {
public:
    virtual ~Browser() = default;
    virtual RawCapture load(const std::string& url) = 0;
};

struct PageCapture {
    Raster image;  // width 320, height <= 10000
    std::vector<ClickMapEntry> links;
    std::string source_url;
    bool truncated = false;
};

PageCapture capture_page(const std::string& url, Browser& browser);

// Draws a deterministic text-like page for a url. Hosts under .invalid time out.
// Fixed layouts can be registered for tests.
class SyntheticBrowser : public Browser {
public:
    struct Layout {
        int css_height = kViewportHeight;
        std::vector<Anchor> anchors;
        int text_lines = -1;  // -1 fills the page
    };

    void set_layout(const std::string& url, Layout l);
    RawCapture load(const std::string& url) override;
    static Layout default_layout(const std::string& url);

private:
    std::vector<std::pair<std::string, Layout>> fixed_;
};

// W3C WebDriver client (geckodriver, chromedriver, selenium server).
class WebDriverBrowser : public Browser {
public:
    explicit WebDriverBrowser(std::string endpoint, double nav_timeout_s = 30.0);
    RawCapture load(const std::string& url) override;

private:
    std::string endpoint_;
    double timeout_s_;
};

std::unique_ptr<Browser> make_browser(const std::string& spec, double nav_timeout_s = 30.0);

// ---- llm ----

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

// "Q: <prompt>\n" followed by filler, padded to answer_bytes when set.
class StubLlm : public LlmClient {
public:
    explicit StubLlm(std::size_t answer_bytes = 0) : answer_bytes_(answer_bytes) {}
    std::string complete(const std::string& prompt) override;

private:
    std::size_t answer_bytes_;
};

// OpenAI-style chat completions endpoint.
class HttpLlm : public LlmClient {
public:
    HttpLlm(std::string url, std::string key, std::string model = "gpt-4o-mini",
            double timeout_s = 60.0);
    std::string complete(const std::string& prompt) override;

private:
    std::string url_, key_, model_;
    double timeout_s_;
};

// "stub" or an http(s) url; key from SONIC_LLM_KEY when not given.
std::unique_ptr<LlmClient> make_llm(const std::string& spec, const std::string& key = "");

// Longest prefix of at most cap bytes that does not split a UTF-8 sequence.
std::string truncate_utf8(const std::string& s, std::size_t cap);

std::string render_llm(const std::string& prompt, LlmClient& llm, std::size_t cap = kDefaultLlmCap);

// ---- packaging ----

format::SonicFile make_webpage_file(const PageCapture& cap, std::uint32_t request_id,
                                    std::int64_t created_at, int quality = kDefaultQuality,
                                    int strip_height = kDefaultStripHeight);
format::SonicFile make_text_file(const std::string& text, const std::string& source,
                                 std::uint32_t request_id, std::int64_t created_at);

}  // namespace sonic::render
