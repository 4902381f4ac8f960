#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sonic/format.hpp"
#include "sonic/pipeline.hpp"
#include "sonic/render.hpp"

namespace httplib {
class Server;
}

namespace sonic::client {

using format::Bytes;
using format::ClickMapEntry;
using format::SonicMetadata;
using render::Raster;

inline constexpr double kDefaultPartialThreshold = 50.0;  // percent
inline constexpr std::int64_t kEvictAfter = 24 * 3600;
inline constexpr std::int64_t kOnlineFor = 15;

enum class Completion { Complete, PartialViewable, Failed };
const char* to_string(Completion c);

struct MissingMask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> bits;  // 1 = missing

    MissingMask() = default;
    MissingMask(int w, int h, bool v = false) : width(w), height(h), bits(std::size_t(w) * h, v) {}
    bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) { bits[std::size_t(y) * width + x] = v; }
    std::size_t count() const;
};

// Row-wise left-to-right fill: a missing pixel takes the nearest received pixel to its
// left; with none, the (already filled) pixel above; at the top row, mid-grey.
Raster conceal(const Raster& img, const MissingMask& mask);

struct ReceivedItem {
    std::int64_t id = 0;  // store key, 0 until stored
    SonicMetadata meta;
    std::vector<ClickMapEntry> links;
    Raster image;      // WEBPAGE, after concealment
    std::string text;  // LLM_TEXT
    double loss_percent = 0;
    double pixel_loss_percent = 0;
    bool complete = false;
    Completion status = Completion::Failed;
    std::int64_t received_at = 0;
    std::int64_t last_accessed = 0;
};

Completion classify_completion(const ReceivedItem& item, double partial_threshold = kDefaultPartialThreshold);

struct DecodedPage {
    Raster image;  // concealed
    MissingMask mask;
};

// Decodes strips out of a (possibly partial) payload; a strip with any missing byte,
// or one that fails to decode, becomes a missing band.
DecodedPage decode_page(const SonicMetadata& meta, const format::Reassembly& r);

// Builds an item from the frames of one transmission. nullopt when the metadata
// frames are not all present (the transmission cannot be attributed).
std::optional<ReceivedItem> assemble(const std::vector<format::Frame>& frames, std::int64_t now,
                                     double partial_threshold = kDefaultPartialThreshold);

// Scales a screen tap by 320/screen_width and hit-tests the click map; the box with
// the smallest y wins, then the first listed.
std::optional<std::string> map_click(const std::vector<ClickMapEntry>& links, double x_screen, double y_screen,
                                     double screen_width);

struct ReceiverOptions {
    pipeline::LinkConfig link;
    double end_silence_s = 3.0;
    double partial_threshold = kDefaultPartialThreshold;
    std::function<std::int64_t()> clock;  // unix seconds; system clock when empty
};

struct ReceiverStats {
    std::int64_t frames_ok = 0;
    std::int64_t frames_lost = 0;  // bursts whose FEC or CRC failed
    std::int64_t keepalives = 0;
    std::int64_t items = 0;
    std::int64_t unattributed = 0;  // transmissions dropped for metadata loss
};

// PCM in, items out. Transmissions end at the next transmission's first frame, a
// keepalive, or end_silence_s without bursts.
class Receiver {
public:
    explicit Receiver(ReceiverOptions opt = {});
    ~Receiver();

    std::vector<ReceivedItem> push(const std::int16_t* samples, std::size_t n);
    std::vector<ReceivedItem> push(const modem::PcmChunk& c) { return push(c.samples.data(), c.samples.size()); }
    std::vector<ReceivedItem> finish();

    const ReceiverStats& stats() const { return stats_; }
    std::int64_t last_keepalive() const { return last_keepalive_; }  // unix seconds, 0 = never
    bool online(std::int64_t now) const { return last_keepalive_ > 0 && now - last_keepalive_ <= kOnlineFor; }

private:
    std::int64_t now() const;
    void close(std::vector<ReceivedItem>& out);
    std::vector<ReceivedItem> handle(std::vector<modem::Burst> bursts, bool final);

    ReceiverOptions opt_;
    std::unique_ptr<modem::Demodulator> demod_;
    ReceiverStats stats_;
    std::int64_t last_keepalive_ = 0;
    std::vector<format::Frame> session_;
    bool open_ = false;
    int last_seq_ = -1;
    std::int64_t last_end_ = 0;
};

// ---- storage ----

struct ItemSummary {
    std::int64_t id = 0;
    std::uint32_t request_id = 0;
    format::ContentType content_type = format::ContentType::LlmText;
    std::string source;
    double loss_percent = 0;
    Completion status = Completion::Failed;
    std::int64_t received_at = 0;
    std::int64_t last_accessed = 0;
};

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// SQLite-backed; safe to share between the ingest thread and the API thread.
class ItemStore {
public:
    explicit ItemStore(const std::string& path = ":memory:");
    ~ItemStore();
    ItemStore(const ItemStore&) = delete;
    ItemStore& operator=(const ItemStore&) = delete;

    std::int64_t store(const ReceivedItem& item);
    // Removes items not accessed for more than max_idle seconds; returns how many.
    std::size_t evict(std::int64_t now, std::int64_t max_idle = kEvictAfter);
    std::vector<ItemSummary> list_items() const;
    // Reads bump last_accessed.
    std::optional<ReceivedItem> get_item(std::int64_t id, std::int64_t now);
    std::optional<Bytes> image_png(std::int64_t id, std::int64_t now);
    std::size_t size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- local HTTP API ----

struct ApiOptions {
    std::string uplink_url;  // server base url, e.g. http://127.0.0.1:8080
    std::string sender_id = "client";
    std::function<std::int64_t()> clock;
    std::string static_dir;  // served at / when set
};

struct SharedState {
    std::atomic<std::int64_t> last_keepalive{0};
};

// GET /items, GET /items/{id}/image, GET /items/{id}/meta, POST /click,
// POST /request, GET /online, GET /hub.
void install_api(httplib::Server& srv, ItemStore& store, SharedState& state, ApiOptions opt);

}  // namespace sonic::client
