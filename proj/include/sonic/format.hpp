#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sonic::format {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kFramePayloadMax = 500;
inline constexpr std::uint16_t kKeepaliveSeq = 0xFFFF;
inline constexpr std::size_t kMaxFrames = 65534;
inline constexpr std::size_t kFrameOverhead = 12;  // magic + seq + len + crc
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kMaxString = 1024;
inline constexpr std::uint32_t kMaxImageHeight = 10000;
inline constexpr std::uint32_t kImageWidth = 320;
// source tag of the popularity index broadcast as an LLM_TEXT item
inline constexpr const char* kHubSource = "sonic:hub";

enum class ContentType : std::uint8_t { Webpage = 1, LlmText = 2 };

enum class Codec : std::uint8_t { Raw = 0, Jpeg = 1, Webp = 2 };

enum MetaFlags : std::uint8_t { kFlagTruncated = 1 };

struct SonicMetadata {
    std::uint32_t request_id = 0;
    ContentType content_type = ContentType::LlmText;
    std::uint8_t flags = 0;
    Codec codec = Codec::Raw;
    std::uint32_t payload_length = 0;
    std::uint32_t frame_count = 0;
    std::uint16_t image_width = 0;
    std::uint16_t image_height = 0;
    std::uint16_t strip_height = 0;
    std::int64_t created_at = 0;
    std::string source;
    // compressed byte length of each image strip, in payload order
    std::vector<std::uint32_t> strip_sizes;

    bool operator==(const SonicMetadata&) const = default;
};

struct ClickMapEntry {
    std::uint16_t x = 0, y = 0, w = 0, h = 0;
    std::string target_url;

    bool operator==(const ClickMapEntry&) const = default;
};

struct Frame {
    std::uint16_t seq = 0;
    Bytes payload;

    bool is_keepalive() const { return seq == kKeepaliveSeq && payload.empty(); }
    bool operator==(const Frame&) const = default;
};

enum class FormatErrc {
    MissingMagic,
    Truncated,
    MalformedLinks,
    UnsupportedVersion,
    InvalidField,
    BadMagic,
    BadCrc,
    PayloadTooLarge,
};

const char* to_string(FormatErrc e);

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    FormatErrc code() const { return code_; }

private:
    FormatErrc code_;
};

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0);
inline std::uint32_t crc32(const Bytes& b) { return crc32(b.data(), b.size()); }

std::uint32_t frames_for(std::size_t payload_length);

// Throws FormatError(InvalidField) for too many links or an oversized string.
Bytes serialize_metadata(const SonicMetadata& meta, const std::vector<ClickMapEntry>& links);

struct ParsedMetadata {
    SonicMetadata meta;
    std::vector<ClickMapEntry> links;
    std::size_t end_offset = 0;  // one past the "SDTA" marker
};

ParsedMetadata parse_metadata(const std::uint8_t* data, std::size_t n);
inline ParsedMetadata parse_metadata(const Bytes& b) { return parse_metadata(b.data(), b.size()); }

// Splits into <=500-byte frames numbered from first_seq.
std::vector<Frame> frame_payload(const Bytes& payload, std::uint16_t first_seq = 0);

Bytes serialize_frame(const Frame& f);
Frame parse_frame(const std::uint8_t* data, std::size_t n);
inline Frame parse_frame(const Bytes& b) { return parse_frame(b.data(), b.size()); }
Frame keepalive_frame();

struct Reassembly {
    Bytes payload;
    std::vector<bool> missing;  // per byte
    std::uint32_t received = 0;
    double loss_percent = 0.0;
};

// Frames are numbered first_seq.. for payload frame 0.. ; others are ignored.
Reassembly reassemble(const SonicMetadata& meta, const std::vector<Frame>& frames,
                      std::uint16_t first_seq = 0);

struct SonicFile {
    SonicMetadata meta;
    std::vector<ClickMapEntry> links;
    Bytes payload;

    bool operator==(const SonicFile&) const = default;
};

// All frames of a transmission: metadata frames seq 0..k-1 then payload frames.
std::vector<Frame> file_frames(const SonicFile& file);
// Number of metadata frames that precede the payload.
std::uint16_t metadata_frame_count(const SonicFile& file);

// Flat byte form: metadata section followed by serialized payload frames.
Bytes serialize_file(const SonicFile& file);
SonicFile parse_file(const Bytes& bytes);

}  // namespace sonic::format
