#include "sonic/format.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>

namespace sonic::format {

namespace {

const std::uint8_t kMagicFrame[4] = {'C', '1', '3', '7'};
const std::uint8_t kMagicMeta[4] = {'M', 'D', 'T', 'A'};
const std::uint8_t kMagicLinks[4] = {'L', 'N', 'K', 'S'};
const std::uint8_t kMagicData[4] = {'S', 'D', 'T', 'A'};

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}
    void raw(const std::uint8_t* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(v & 0xff);
        out_.push_back(v >> 8);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back((v >> (8 * i)) & 0xff);
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back((v >> (8 * i)) & 0xff);
    }
    void str(const std::string& s) {
        if (s.size() > kMaxString)
            throw FormatError(FormatErrc::InvalidField, "string field longer than 1024 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }

private:
    Bytes& out_;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n, FormatErrc short_err)
        : p_(p), n_(n), short_err_(short_err) {}

    std::size_t pos() const { return pos_; }
    std::size_t left() const { return n_ - pos_; }

    void need(std::size_t k) const {
        if (left() < k) throw FormatError(short_err_, "input truncated");
    }
    bool magic(const std::uint8_t m[4]) {
        if (left() < 4 || std::memcmp(p_ + pos_, m, 4) != 0) return false;
        pos_ += 4;
        return true;
    }
    std::uint8_t u8() {
        need(1);
        return p_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = p_[pos_] | (p_[pos_ + 1] << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::string str() {
        std::uint16_t len = u16();
        if (len > kMaxString) throw FormatError(FormatErrc::InvalidField, "string field too long");
        need(len);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
        pos_ += len;
        return s;
    }
    const std::uint8_t* at() const { return p_ + pos_; }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
    FormatErrc short_err_;
};

// A partial marker at end of input is truncation; absent or wrong is malformed.
void expect_marker(Reader& r, const std::uint8_t m[4], const char* what) {
    if (r.magic(m)) return;
    std::size_t k = r.left();
    if (k > 0 && k < 4 && std::memcmp(r.at(), m, k) == 0)
        throw FormatError(FormatErrc::Truncated, "input truncated");
    throw FormatError(FormatErrc::MalformedLinks, what);
}

}  // namespace

const char* to_string(FormatErrc e) {
    switch (e) {
        case FormatErrc::MissingMagic: return "MISSING_MAGIC";
        case FormatErrc::Truncated: return "TRUNCATED";
        case FormatErrc::MalformedLinks: return "MALFORMED_LINKS";
        case FormatErrc::UnsupportedVersion: return "UNSUPPORTED_VERSION";
        case FormatErrc::InvalidField: return "INVALID_FIELD";
        case FormatErrc::BadMagic: return "BAD_MAGIC";
        case FormatErrc::BadCrc: return "BAD_CRC";
        case FormatErrc::PayloadTooLarge: return "PAYLOAD_TOO_LARGE";
    }
    return "?";
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc) {
    // zlib's crc32 is the reflected 0x04C11DB7 variant with init/xorout 0xFFFFFFFF
    return static_cast<std::uint32_t>(::crc32_z(crc, data, n));
}

std::uint32_t frames_for(std::size_t payload_length) {
    return static_cast<std::uint32_t>((payload_length + kFramePayloadMax - 1) / kFramePayloadMax);
}

Bytes serialize_metadata(const SonicMetadata& m, const std::vector<ClickMapEntry>& links) {
    if (links.size() > 0xFFFF)
        throw FormatError(FormatErrc::InvalidField, "more than 65535 click-map entries");
    if (m.strip_sizes.size() > 0xFFFF)
        throw FormatError(FormatErrc::InvalidField, "more than 65535 strips");
    Bytes out;
    out.reserve(64 + m.source.size() + 4 * m.strip_sizes.size() + links.size() * 40);
    Writer w(out);
    w.raw(kMagicMeta, 4);
    w.u16(kFormatVersion);
    w.u32(m.request_id);
    w.u8(static_cast<std::uint8_t>(m.content_type));
    w.u8(m.flags);
    w.u8(static_cast<std::uint8_t>(m.codec));
    w.u8(0);
    w.u32(m.payload_length);
    w.u32(m.frame_count);
    w.u16(m.image_width);
    w.u16(m.image_height);
    w.u16(m.strip_height);
    w.u64(static_cast<std::uint64_t>(m.created_at));
    w.str(m.source);
    w.u16(static_cast<std::uint16_t>(m.strip_sizes.size()));
    for (auto s : m.strip_sizes) w.u32(s);

    w.raw(kMagicLinks, 4);
    w.u16(static_cast<std::uint16_t>(links.size()));
    for (const auto& e : links) {
        w.u16(e.x);
        w.u16(e.y);
        w.u16(e.w);
        w.u16(e.h);
        w.str(e.target_url);
    }
    w.raw(kMagicData, 4);
    return out;
}

ParsedMetadata parse_metadata(const std::uint8_t* data, std::size_t n) {
    Reader r(data, n, FormatErrc::Truncated);
    if (!r.magic(kMagicMeta)) {
        if (n >= 4 || n == 0 || std::memcmp(data, kMagicMeta, n) != 0)
            throw FormatError(FormatErrc::MissingMagic, "no MDTA marker");
        throw FormatError(FormatErrc::Truncated, "input truncated");
    }
    ParsedMetadata out;
    auto& m = out.meta;
    std::uint16_t version = r.u16();
    if (version != kFormatVersion)
        throw FormatError(FormatErrc::UnsupportedVersion,
                          "format version " + std::to_string(version));
    m.request_id = r.u32();
    std::uint8_t ct = r.u8();
    if (ct != 1 && ct != 2) throw FormatError(FormatErrc::InvalidField, "bad content type");
    m.content_type = static_cast<ContentType>(ct);
    m.flags = r.u8();
    std::uint8_t codec = r.u8();
    if (codec > 2) throw FormatError(FormatErrc::InvalidField, "bad codec tag");
    m.codec = static_cast<Codec>(codec);
    r.u8();
    m.payload_length = r.u32();
    m.frame_count = r.u32();
    m.image_width = r.u16();
    m.image_height = r.u16();
    m.strip_height = r.u16();
    m.created_at = static_cast<std::int64_t>(r.u64());
    m.source = r.str();
    std::uint16_t strips = r.u16();
    r.need(4u * strips);
    m.strip_sizes.resize(strips);
    for (auto& s : m.strip_sizes) s = r.u32();

    if (m.frame_count != frames_for(m.payload_length))
        throw FormatError(FormatErrc::InvalidField, "frame_count inconsistent with payload_length");

    expect_marker(r, kMagicLinks, "no LNKS marker");
    std::uint16_t count = r.u16();
    out.links.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        ClickMapEntry e;
        e.x = r.u16();
        e.y = r.u16();
        e.w = r.u16();
        e.h = r.u16();
        e.target_url = r.str();
        out.links.push_back(std::move(e));
    }
    expect_marker(r, kMagicData, "no SDTA marker after links");
    out.end_offset = r.pos();
    return out;
}

std::vector<Frame> frame_payload(const Bytes& payload, std::uint16_t first_seq) {
    std::size_t n = frames_for(payload.size());
    if (std::size_t(first_seq) + n > kMaxFrames)
        throw FormatError(FormatErrc::PayloadTooLarge, "payload needs more than 65534 frames");
    std::vector<Frame> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t off = i * kFramePayloadMax;
        std::size_t len = std::min(kFramePayloadMax, payload.size() - off);
        Frame f;
        f.seq = static_cast<std::uint16_t>(first_seq + i);
        f.payload.assign(payload.begin() + off, payload.begin() + off + len);
        frames.push_back(std::move(f));
    }
    return frames;
}

Bytes serialize_frame(const Frame& f) {
    if (f.payload.size() > kFramePayloadMax)
        throw FormatError(FormatErrc::PayloadTooLarge, "frame payload over 500 bytes");
    Bytes out;
    out.reserve(kFrameOverhead + f.payload.size());
    Writer w(out);
    w.raw(kMagicFrame, 4);
    w.u16(f.seq);
    w.u16(static_cast<std::uint16_t>(f.payload.size()));
    w.raw(f.payload.data(), f.payload.size());
    w.u32(crc32(out.data() + 4, out.size() - 4));
    return out;
}

Frame parse_frame(const std::uint8_t* data, std::size_t n) {
    if (n < 4) throw FormatError(FormatErrc::Truncated, "frame shorter than magic");
    if (std::memcmp(data, kMagicFrame, 4) != 0) throw FormatError(FormatErrc::BadMagic, "no C137 marker");
    if (n < kFrameOverhead) throw FormatError(FormatErrc::Truncated, "frame header truncated");
    std::uint16_t len = data[6] | (data[7] << 8);
    // An impossible length is as good as a checksum failure: the header is damaged.
    if (len > kFramePayloadMax) throw FormatError(FormatErrc::BadCrc, "length field out of range");
    if (n < kFrameOverhead + len) throw FormatError(FormatErrc::Truncated, "frame payload truncated");
    const std::uint8_t* c = data + 8 + len;
    std::uint32_t stored = c[0] | (c[1] << 8) | (c[2] << 16) | (std::uint32_t(c[3]) << 24);
    if (crc32(data + 4, 4 + len) != stored) throw FormatError(FormatErrc::BadCrc, "crc mismatch");
    Frame f;
    f.seq = data[4] | (data[5] << 8);
    f.payload.assign(data + 8, data + 8 + len);
    return f;
}

Frame keepalive_frame() { return Frame{kKeepaliveSeq, {}}; }

Reassembly reassemble(const SonicMetadata& meta, const std::vector<Frame>& frames,
                      std::uint16_t first_seq) {
    Reassembly r;
    r.payload.assign(meta.payload_length, 0);
    r.missing.assign(meta.payload_length, true);
    std::vector<bool> got(meta.frame_count, false);
    for (const auto& f : frames) {
        if (f.seq < first_seq) continue;
        std::size_t idx = f.seq - first_seq;
        if (idx >= meta.frame_count) continue;
        std::size_t off = idx * kFramePayloadMax;
        std::size_t expect = std::min<std::size_t>(kFramePayloadMax, meta.payload_length - off);
        if (f.payload.size() != expect) continue;
        std::copy(f.payload.begin(), f.payload.end(), r.payload.begin() + off);
        std::fill(r.missing.begin() + off, r.missing.begin() + off + expect, false);
        got[idx] = true;
    }
    r.received = static_cast<std::uint32_t>(std::count(got.begin(), got.end(), true));
    r.loss_percent = meta.frame_count == 0
                         ? 0.0
                         : 100.0 * (meta.frame_count - r.received) / meta.frame_count;
    return r;
}

std::uint16_t metadata_frame_count(const SonicFile& file) {
    return static_cast<std::uint16_t>(frames_for(serialize_metadata(file.meta, file.links).size()));
}

std::vector<Frame> file_frames(const SonicFile& file) {
    Bytes md = serialize_metadata(file.meta, file.links);
    auto frames = frame_payload(md, 0);
    auto body = frame_payload(file.payload, static_cast<std::uint16_t>(frames.size()));
    frames.insert(frames.end(), std::make_move_iterator(body.begin()),
                  std::make_move_iterator(body.end()));
    return frames;
}

Bytes serialize_file(const SonicFile& file) {
    Bytes out = serialize_metadata(file.meta, file.links);
    std::uint16_t k = static_cast<std::uint16_t>(frames_for(out.size()));
    for (const auto& f : frame_payload(file.payload, k)) {
        Bytes b = serialize_frame(f);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

SonicFile parse_file(const Bytes& bytes) {
    auto pm = parse_metadata(bytes);
    SonicFile file{pm.meta, pm.links, {}};
    std::uint16_t k = static_cast<std::uint16_t>(frames_for(pm.end_offset));
    std::vector<Frame> frames;
    std::size_t pos = pm.end_offset;
    while (pos < bytes.size()) {
        Frame f = parse_frame(bytes.data() + pos, bytes.size() - pos);
        pos += kFrameOverhead + f.payload.size();
        frames.push_back(std::move(f));
    }
    auto r = reassemble(pm.meta, frames, k);
    if (r.received != pm.meta.frame_count)
        throw FormatError(FormatErrc::Truncated, "payload frames missing");
    file.payload = std::move(r.payload);
    return file;
}

}  // namespace sonic::format
