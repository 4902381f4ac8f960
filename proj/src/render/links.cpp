#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "sonic/render.hpp"

namespace sonic::render {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// scheme://authority, and the path with query (no fragment)
struct Split {
    std::string scheme, authority, path;
};

bool split_url(const std::string& u, Split& out) {
    auto p = u.find("://");
    if (p == std::string::npos) return false;
    out.scheme = lower(u.substr(0, p));
    auto rest = u.substr(p + 3);
    auto slash = rest.find_first_of("/?#");
    out.authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    if (auto h = out.path.find('#'); h != std::string::npos) out.path.resize(h);
    if (out.path.empty() || out.path[0] != '/') out.path.insert(out.path.begin(), '/');
    return !out.authority.empty();
}

std::string strip_fragment(std::string s) {
    if (auto h = s.find('#'); h != std::string::npos) s.resize(h);
    return s;
}

// Collapses "." and ".." segments.
std::string normalize_path(const std::string& path) {
    std::string query;
    std::string p = path;
    if (auto q = p.find('?'); q != std::string::npos) {
        query = p.substr(q);
        p.resize(q);
    }
    std::vector<std::string> segs;
    std::size_t i = 1;
    bool trailing = !p.empty() && p.back() == '/';
    for (const char* dots : {"/.", "/.."})
        if (p.size() >= std::strlen(dots) && p.compare(p.size() - std::strlen(dots), std::string::npos, dots) == 0)
            trailing = true;
    while (i <= p.size()) {
        auto j = p.find('/', i);
        if (j == std::string::npos) j = p.size();
        std::string s = p.substr(i, j - i);
        if (s == "..") {
            if (!segs.empty()) segs.pop_back();
        } else if (!s.empty() && s != ".") {
            segs.push_back(s);
        }
        i = j + 1;
    }
    std::string out;
    for (auto& s : segs) out += "/" + s;
    if (out.empty() || (trailing && !segs.empty())) out += "/";
    return out + query;
}

}  // namespace

ClickMapEntry scale_anchor(const Anchor& a) {
    ClickMapEntry e;
    auto clamp16 = [](double v) { return static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0)); };
    e.x = clamp16(std::floor(a.x * format::kImageWidth / kViewportWidth));
    e.y = clamp16(std::floor(a.y * format::kImageWidth / kViewportWidth));
    e.w = clamp16(std::ceil(a.w * format::kImageWidth / kViewportWidth));
    e.h = clamp16(std::ceil(a.h * format::kImageWidth / kViewportWidth));
    e.target_url = a.href;
    return e;
}

std::string resolve_link(const std::string& base, const std::string& href_in) {
    std::string href = trim(href_in);
    if (href.empty() || href[0] == '#') return {};

    // explicit scheme
    auto colon = href.find(':');
    auto first_sep = href.find_first_of("/?#");
    if (colon != std::string::npos && (first_sep == std::string::npos || colon < first_sep)) {
        std::string scheme = lower(href.substr(0, colon));
        if (scheme != "http" && scheme != "https") return {};
        Split s;
        if (!split_url(href, s)) return {};
        return s.scheme + "://" + lower(s.authority) + normalize_path(s.path);
    }

    Split b;
    if (!split_url(base, b)) return {};
    if (b.scheme != "http" && b.scheme != "https") return {};
    href = strip_fragment(href);
    if (href.empty()) return {};
    if (href.rfind("//", 0) == 0) {
        Split s;
        if (!split_url(b.scheme + ":" + href, s)) return {};
        return s.scheme + "://" + lower(s.authority) + normalize_path(s.path);
    }
    std::string path;
    if (href[0] == '/') {
        path = href;
    } else if (href[0] == '?') {
        auto bp = b.path.substr(0, b.path.find('?'));
        path = bp + href;
    } else {
        auto bp = b.path.substr(0, b.path.find('?'));
        path = bp.substr(0, bp.rfind('/') + 1) + href;
    }
    return b.scheme + "://" + lower(b.authority) + normalize_path(path);
}

std::vector<ClickMapEntry> build_click_map(const std::vector<Anchor>& anchors,
                                           const std::string& base_url, int image_height) {
    std::vector<ClickMapEntry> out;
    for (const auto& a : anchors) {
        std::string url = resolve_link(base_url, a.href);
        if (url.empty() || url.size() > format::kMaxString) continue;
        if (a.w <= 0 || a.h <= 0 || a.x + a.w <= 0 || a.y + a.h <= 0) continue;
        Anchor c = a;
        c.href = url;
        // clip boxes that start left of or above the page
        if (c.x < 0) c.w += c.x, c.x = 0;
        if (c.y < 0) c.h += c.y, c.y = 0;
        ClickMapEntry e = scale_anchor(c);
        if (e.x >= format::kImageWidth || int(e.y) >= image_height) continue;
        e.w = static_cast<std::uint16_t>(std::min<int>(e.w, int(format::kImageWidth) - e.x));
        e.h = static_cast<std::uint16_t>(std::min<int>(e.h, image_height - e.y));
        if (e.w == 0 || e.h == 0) continue;
        out.push_back(std::move(e));
    }
    return out;
}

double score_link(const ClickMapEntry& e) {
    return 0.68 * double(e.w) * double(e.h) - 0.32 * double(e.y);
}

std::vector<ClickMapEntry> select_push_links(const std::vector<ClickMapEntry>& links, std::size_t k) {
    auto better = [](const ClickMapEntry& a, const ClickMapEntry& b) {
        double sa = score_link(a), sb = score_link(b);
        if (sa != sb) return sa > sb;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        if (a.w != b.w) return a.w < b.w;
        if (a.h != b.h) return a.h < b.h;
        return a.target_url < b.target_url;
    };
    // one candidate per url: its best-ranked box
    std::unordered_map<std::string, std::size_t> best;
    std::vector<ClickMapEntry> uniq;
    for (const auto& l : links) {
        auto it = best.find(l.target_url);
        if (it == best.end()) {
            best.emplace(l.target_url, uniq.size());
            uniq.push_back(l);
        } else if (better(l, uniq[it->second])) {
            uniq[it->second] = l;
        }
    }
    std::sort(uniq.begin(), uniq.end(), better);
    if (uniq.size() > k) uniq.resize(k);
    return uniq;
}

}  // namespace sonic::render
