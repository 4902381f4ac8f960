#include "sonic/render.hpp"

namespace sonic::render {

format::SonicFile make_webpage_file(const PageCapture& cap, std::uint32_t request_id,
                                    std::int64_t created_at, int quality, int strip_height) {
    StripSet strips = compress_strips(cap.image, quality, strip_height);
    format::SonicFile f;
    auto& m = f.meta;
    m.request_id = request_id;
    m.content_type = format::ContentType::Webpage;
    m.flags = cap.truncated ? format::kFlagTruncated : 0;
    m.codec = strips.codec;
    m.image_width = static_cast<std::uint16_t>(cap.image.width);
    m.image_height = static_cast<std::uint16_t>(cap.image.height);
    m.strip_height = static_cast<std::uint16_t>(strip_height);
    m.created_at = created_at;
    m.source = truncate_utf8(cap.source_url, format::kMaxString);
    m.strip_sizes = strips.sizes();
    f.payload = strips.concat();
    m.payload_length = static_cast<std::uint32_t>(f.payload.size());
    m.frame_count = format::frames_for(f.payload.size());
    f.links = cap.links;
    return f;
}

format::SonicFile make_text_file(const std::string& text, const std::string& source,
                                 std::uint32_t request_id, std::int64_t created_at) {
    format::SonicFile f;
    auto& m = f.meta;
    m.request_id = request_id;
    m.content_type = format::ContentType::LlmText;
    m.codec = format::Codec::Raw;
    m.created_at = created_at;
    m.source = truncate_utf8(source, 256);
    f.payload.assign(text.begin(), text.end());
    m.payload_length = static_cast<std::uint32_t>(f.payload.size());
    m.frame_count = format::frames_for(f.payload.size());
    return f;
}

}  // namespace sonic::render
