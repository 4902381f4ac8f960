#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sonic/format.hpp"
#include "sonic/pipeline.hpp"
#include "sonic/render.hpp"
#include "sonic/window.hpp"

namespace httplib {
class Server;
}

namespace sonic::server {

using nlohmann::json;
using sched::LocalClock;
using sched::TransmissionWindow;
using sched::parse_hhmm;
using sched::system_utc_offset;

enum class RequestKind { Url, Gpt };
enum class RequestState { Queued, Rendering, Encoded, Playing, Done, Failed };
enum class RejectReason { UnknownType, EmptyBody, Quota, Overload };

const char* to_string(RequestKind k);  // "url" / "gpt"
const char* to_string(RequestState s);
const char* to_string(RejectReason r);
std::optional<RequestState> parse_state(const std::string& s);

// True when moving from a to b follows QUEUED -> RENDERING -> ENCODED -> PLAYING -> DONE,
// FAILED from any state before DONE, or QUEUED -> ENCODED for a cache hit.
bool valid_transition(RequestState a, RequestState b);

struct UplinkMessage {
    std::string sender_id;
    std::string body;  // "<type> <body>"
};

struct ParsedBody {
    RequestKind kind = RequestKind::Url;
    std::string subject;
};

// Grammar only: no quota, no queue bound.
std::variant<ParsedBody, RejectReason> parse_body(const std::string& body);

// Scheme defaults to https; scheme and host are lowercased; an empty path becomes "/".
std::string normalize_url(const std::string& url);

// ---- records ----

struct RequestRecord {
    std::uint32_t id = 0;
    RequestKind kind = RequestKind::Url;
    std::string subject;
    std::string sender;
    RequestState state = RequestState::Queued;
    double enqueue_time = 0;
    double play_start = -1;
    double play_end = -1;
    bool cached = false;
    bool push = false;
    std::string error;
};

using SubmitResult = std::variant<RequestRecord, RejectReason>;

// ---- rendering ----

struct RenderOutput {
    format::SonicFile file;
    std::vector<std::string> push_links;  // candidate urls, best first
};

class ContentRenderer {
public:
    virtual ~ContentRenderer() = default;
    // Throws render::RenderError (or anything derived from std::exception) on failure.
    virtual RenderOutput render(RequestKind kind, const std::string& subject, std::uint32_t request_id,
                                double now) = 0;
};

// Browser + LLM backed renderer.
class LiveRenderer : public ContentRenderer {
public:
    LiveRenderer(render::Browser& browser, render::LlmClient& llm, std::size_t push_links = 3,
                 std::size_t llm_cap = render::kDefaultLlmCap);
    RenderOutput render(RequestKind kind, const std::string& subject, std::uint32_t request_id,
                        double now) override;

private:
    render::Browser& browser_;
    render::LlmClient& llm_;
    std::size_t push_links_, llm_cap_;
};

struct Encoded {
    format::SonicFile file;
    modem::PcmChunk audio;
    double duration_s = 0;
    std::vector<std::string> push_links;
};

// Window-scoped cache keyed by kind and normalized subject.
class Cache {
public:
    std::shared_ptr<const Encoded> lookup(RequestKind kind, const std::string& subject, std::int64_t window);
    void insert(RequestKind kind, const std::string& subject, std::int64_t window,
                std::shared_ptr<const Encoded> e);
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::shared_ptr<const Encoded> enc;
        std::int64_t window;
    };
    std::map<std::string, Entry> entries_;
    std::int64_t window_ = INT64_MIN;
};

// ---- popularity ----

struct HubEntry {
    std::string subject;
    RequestKind kind = RequestKind::Url;
    std::int64_t count = 0;
};

// Request counts per subject over a rolling window.
class Popularity {
public:
    void record(RequestKind kind, const std::string& subject, double t);
    // Top n in [now - span_s, now], by count then subject.
    std::vector<HubEntry> top(double now, std::size_t n = 20, double span_s = 7 * 86400.0) const;
    void prune(double before);

private:
    struct Hit {
        double t;
        RequestKind kind;
        std::string subject;
    };
    std::deque<Hit> hits_;  // time order
};

std::string hub_index_json(const std::vector<HubEntry>& entries, double now);

// ---- persistence ----

class ServerStoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// SQLite file holding the request log and popularity history.
class ServerStore {
public:
    explicit ServerStore(const std::string& path = ":memory:");
    ~ServerStore();
    ServerStore(const ServerStore&) = delete;
    ServerStore& operator=(const ServerStore&) = delete;

    void save(const RequestRecord& r, std::int64_t local_day);
    std::vector<RequestRecord> load_requests() const;
    // accepted non-push requests per (sender, local day)
    std::map<std::pair<std::string, std::int64_t>, int> quota_counts() const;
    void record_hit(RequestKind kind, const std::string& subject, double t);
    Popularity load_popularity(double since) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- events ----

// One JSON object per state transition or broadcast action.
using EventSink = std::function<void(const json&)>;

// Appends one line per event; flushes each line.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path);
    ~JsonlWriter();
    void operator()(const json& ev);

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

// ---- scheduler / head-end ----

struct ServerConfig {
    TransmissionWindow window;
    LocalClock clock;
    int quota_per_day = 10;
    std::size_t queue_bound = 10000;
    double keepalive_interval_s = 5.0;
    double gap_s = 3.0;  // silence after each transmission
    std::size_t hub_top_n = 20;
    double hub_span_s = 7 * 86400.0;
    pipeline::LinkConfig link;
};

struct AirEvent {
    enum Kind { Request, Keepalive, Hub } kind = Request;
    std::uint32_t id = 0;  // request id, 0 otherwise
    double start = 0;
    double duration_s = 0;
};

struct Status {
    bool window_open = false;
    std::size_t screenshot_queue = 0;
    std::size_t player_queue = 0;
    std::size_t push_pending = 0;
    std::size_t push_queue = 0;
    std::optional<RequestRecord> current;
    std::size_t cache_entries = 0;
    std::int64_t keepalives = 0;
};

json to_json(const Status& s);
json to_json(const RequestRecord& r);

// The head-end state machine. Three actors drive it: the ingester calls submit,
// the render worker calls render_next, the player calls advance_to. Time comes
// from the callers, so a script can run a whole night instantly.
class Server {
public:
    Server(ServerConfig cfg, ContentRenderer& renderer, EventSink events = {}, ServerStore* store = nullptr);

    SubmitResult submit(const UplinkMessage& msg, double now);

    // Renders or cache-resolves the head of the screenshot queue; with that queue
    // empty, renders one pending push link. False when there was nothing to do.
    bool render_next(double now);

    // Plays whatever the schedule allows up to now.
    void advance_to(double now);

    // render_next until idle, then advance_to.
    void step(double now);

    // Receives the audio of every transmission, keepalives included; gaps are not sent.
    void set_on_air(std::function<void(const modem::PcmChunk&, const AirEvent&)> f);

    Status status(double now) const;
    std::vector<RequestRecord> requests() const;
    std::optional<RequestRecord> request(std::uint32_t id) const;
    std::vector<HubEntry> hub(double now) const;
    std::size_t renders() const { return renders_; }
    const ServerConfig& config() const { return cfg_; }

private:
    void emit(json ev, double t);
    void transition(RequestRecord& r, RequestState to, double t, json extra = {});
    void persist(const RequestRecord& r);
    std::shared_ptr<const Encoded> encode(RenderOutput out);
    json queue_depths() const;
    void start_play(std::uint32_t id, std::shared_ptr<const Encoded> e, double t);
    void play_hub(double t);
    void air(const modem::PcmChunk& pcm, const AirEvent& ev);

    ServerConfig cfg_;
    ContentRenderer& renderer_;
    EventSink events_;
    ServerStore* store_;
    std::function<void(const modem::PcmChunk&, const AirEvent&)> on_air_;

    mutable std::recursive_mutex mu_;
    std::mutex render_mu_;  // one render at a time
    std::map<std::uint32_t, RequestRecord> records_;
    std::uint32_t next_id_ = 1;
    std::map<std::pair<std::string, std::int64_t>, int> quota_;
    std::deque<std::uint32_t> screenshot_q_;
    struct Ready {
        std::uint32_t id;
        std::shared_ptr<const Encoded> enc;
        double ready;
    };
    std::deque<Ready> player_q_;
    std::deque<std::uint32_t> push_pending_;
    std::deque<Ready> push_q_;
    std::map<std::int64_t, std::set<std::string>> pushed_;  // window -> urls already pushed
    Cache cache_;
    Popularity popularity_;
    std::size_t renders_ = 0;

    // player
    double cursor_ = -1;
    std::optional<std::uint32_t> playing_;
    double busy_until_ = 0;
    double next_keepalive_ = 0;
    std::int64_t hub_window_ = INT64_MIN;  // last window whose index went out
    std::int64_t keepalives_ = 0;
    modem::PcmChunk keepalive_audio_;
};

// POST /uplink {sender, body}; GET /status.
void install_http(httplib::Server& srv, Server& server, std::function<double()> clock);

// Follows a text file (or FIFO) of "<sender>\t<type> <body>" lines, like an SMS inbox.
class LineTailer {
public:
    explicit LineTailer(std::string path) : path_(std::move(path)) {}
    // New complete lines since the last call.
    std::vector<UplinkMessage> poll();
    static std::optional<UplinkMessage> parse_line(const std::string& line);

private:
    std::string path_;
    std::uint64_t offset_ = 0;
    std::string partial_;
};

// ---- audio out ----

class AudioSink {
public:
    virtual ~AudioSink() = default;
    virtual void write(const modem::PcmChunk& pcm, const AirEvent& ev) = 0;
};

// One WAV per transmission (gap silence appended), named by start time and kind.
class WavDirSink : public AudioSink {
public:
    WavDirSink(std::string dir, double gap_s = 3.0);
    void write(const modem::PcmChunk& pcm, const AirEvent& ev) override;
    const std::vector<std::string>& written() const { return written_; }

private:
    std::string dir_;
    double gap_s_;
    std::vector<std::string> written_;
};

// Raw s16le on a stream; silence fills the time between transmissions.
class PcmStreamSink : public AudioSink {
public:
    PcmStreamSink(std::FILE* out, int sample_rate = 44100) : out_(out), rate_(sample_rate) {}
    void write(const modem::PcmChunk& pcm, const AirEvent& ev) override;
    // Pads with silence up to time t.
    void fill_to(double t);

private:
    std::FILE* out_;
    int rate_;
    double written_until_ = -1;
};

std::unique_ptr<AudioSink> make_sink(const std::string& spec, double gap_s = 3.0);  // "wav:<dir>" or "stdout"

}  // namespace sonic::server
