#include <algorithm>
#include <map>
#include <numeric>

#include "sonic/client.hpp"

namespace sonic::client {

const char* to_string(Completion c) {
    switch (c) {
        case Completion::Complete: return "COMPLETE";
        case Completion::PartialViewable: return "PARTIAL_VIEWABLE";
        case Completion::Failed: return "FAILED";
    }
    return "?";
}

std::size_t MissingMask::count() const { return std::size_t(std::count(bits.begin(), bits.end(), 1)); }

Raster conceal(const Raster& img, const MissingMask& mask) {
    if (mask.width != img.width || mask.height != img.height)
        throw std::invalid_argument("mask and image dimensions differ");
    Raster out = img;
    for (int y = 0; y < out.height; ++y) {
        bool seen = false;  // a received pixel exists to the left in this row
        for (int x = 0; x < out.width; ++x) {
            if (!mask.at(x, y)) {
                seen = true;
                continue;
            }
            std::uint8_t* p = out.px(x, y);
            const std::uint8_t* src;
            static const std::uint8_t grey[3] = {128, 128, 128};
            if (seen)
                src = out.px(x - 1, y);  // already carries the nearest received value
            else if (y > 0)
                src = out.px(x, y - 1);
            else
                src = grey;
            std::copy(src, src + 3, p);
        }
    }
    return out;
}

Completion classify_completion(const ReceivedItem& item, double threshold) {
    if (item.loss_percent <= 0.0) return Completion::Complete;
    if (item.meta.content_type == format::ContentType::LlmText) return Completion::Failed;
    return item.loss_percent <= threshold ? Completion::PartialViewable : Completion::Failed;
}

DecodedPage decode_page(const SonicMetadata& meta, const format::Reassembly& r) {
    const int w = meta.image_width, h = meta.image_height, sh = meta.strip_height;
    DecodedPage d;
    d.image = Raster(w, h);
    d.mask = MissingMask(w, h, true);
    if (w == 0 || h == 0 || sh == 0) return d;
    std::size_t n = meta.strip_sizes.size();
    std::uint64_t total = std::accumulate(meta.strip_sizes.begin(), meta.strip_sizes.end(), std::uint64_t(0));
    // inconsistent strip table: nothing can be placed, everything is concealed
    bool usable = n == std::size_t((h + sh - 1) / sh) && total == r.payload.size();
    std::size_t off = 0;
    for (std::size_t i = 0; usable && i < n; ++i) {
        std::size_t len = meta.strip_sizes[i];
        int y0 = int(i) * sh, rows = render::strip_rows(int(i), h, sh);
        bool intact = std::none_of(r.missing.begin() + off, r.missing.begin() + off + len, [](bool m) { return m; });
        if (intact) {
            try {
                Bytes part(r.payload.begin() + off, r.payload.begin() + off + len);
                render::paste_rows(d.image, render::decode_strip(part, meta.codec, w, rows), y0);
                std::fill(d.mask.bits.begin() + std::size_t(y0) * w, d.mask.bits.begin() + std::size_t(y0 + rows) * w, 0);
            } catch (const render::RenderError&) {
                // a strip that passed CRC but does not decode stays missing
            }
        }
        off += len;
    }
    d.image = conceal(d.image, d.mask);
    return d;
}

std::optional<ReceivedItem> assemble(const std::vector<format::Frame>& frames, std::int64_t now, double threshold) {
    std::map<std::uint16_t, const format::Frame*> by_seq;
    for (const auto& f : frames)
        if (!f.is_keepalive()) by_seq[f.seq] = &f;  // duplicates: last wins

    // metadata occupies seq 0..k-1; parse the contiguous prefix until it is complete
    Bytes md;
    std::optional<format::ParsedMetadata> pm;
    std::uint16_t k = 0;
    for (auto it = by_seq.begin(); it != by_seq.end() && it->first == k; ++it) {
        md.insert(md.end(), it->second->payload.begin(), it->second->payload.end());
        ++k;
        try {
            auto p = format::parse_metadata(md);
            if (p.end_offset == md.size()) {
                pm = std::move(p);
                break;
            }
            break;  // extra bytes after SDTA: not a metadata prefix
        } catch (const format::FormatError& e) {
            if (e.code() != format::FormatErrc::Truncated) break;
        }
    }
    if (!pm) return std::nullopt;

    std::vector<format::Frame> body;
    for (auto& [seq, f] : by_seq)
        if (seq >= k) body.push_back(*f);
    auto r = format::reassemble(pm->meta, body, k);

    ReceivedItem item;
    item.meta = pm->meta;
    item.links = pm->links;
    item.loss_percent = r.loss_percent;
    item.received_at = item.last_accessed = now;
    if (item.meta.content_type == format::ContentType::Webpage) {
        auto page = decode_page(item.meta, r);
        item.image = std::move(page.image);
        std::size_t px = page.mask.bits.size();
        item.pixel_loss_percent = px ? 100.0 * double(page.mask.count()) / double(px) : 0.0;
    } else {
        item.text.assign(r.payload.begin(), r.payload.end());
    }
    item.complete = r.loss_percent == 0.0;
    item.status = classify_completion(item, threshold);
    return item;
}

std::optional<std::string> map_click(const std::vector<ClickMapEntry>& links, double xs, double ys, double screen_width) {
    if (screen_width <= 0) return std::nullopt;
    double s = screen_width / double(format::kImageWidth);
    double x = xs / s, y = ys / s;
    const ClickMapEntry* hit = nullptr;
    for (const auto& l : links) {
        if (x < l.x || x >= double(l.x) + l.w || y < l.y || y >= double(l.y) + l.h) continue;
        if (!hit || l.y < hit->y) hit = &l;
    }
    if (!hit) return std::nullopt;
    return hit->target_url;
}

}  // namespace sonic::client
