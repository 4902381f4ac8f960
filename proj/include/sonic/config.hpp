#pragma once

// sonic.toml: one file shared by the server, the client and the tools.

#include <optional>
#include <stdexcept>
#include <string>

#include "sonic/channel.hpp"
#include "sonic/pipeline.hpp"
#include "sonic/window.hpp"

namespace sonic::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerSettings {
    std::string listen = "127.0.0.1";
    int port = 8080;
    std::string db = "sonic-server.db";
    std::string event_log = "sonic-events.jsonl";
    std::string uplink_file;  // optional "sender<TAB>body" line file to tail
    std::string audio = "wav:air";
    std::optional<int> utc_offset_s;  // local time zone of the host when absent
    int quota_per_day = 10;
    std::size_t queue_bound = 10000;
    double keepalive_interval_s = 5;
    double gap_s = 3;
    std::size_t hub_top_n = 20;
    double hub_span_days = 7;
    std::size_t push_links = 3;
    std::string browser = "synthetic";  // or a WebDriver endpoint url
    double nav_timeout_s = 30;
    std::string llm = "stub";  // or a chat-completions url
    std::size_t llm_cap = 4000;
    double tick_s = 0.5;  // scheduler polling period
};

struct ClientSettings {
    std::string listen = "127.0.0.1";
    int port = 8081;
    std::string db = "sonic-client.db";
    std::string uplink_url = "http://127.0.0.1:8080";
    std::string sender_id = "client";
    std::string static_dir;
    double end_silence_s = 3;
    double partial_threshold = 50;
    std::int64_t evict_after_s = 24 * 3600;
};

struct Config {
    pipeline::LinkConfig link;
    channel::LossModel loss;
    double burst_mean_frames = 2.0;
    sched::TransmissionWindow window;
    ServerSettings server;
    ClientSettings client;
};

// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
Config load_config(const std::string& path);
Config parse_config(const std::string& toml_text, const std::string& origin = "<string>");

}  // namespace sonic::config
