#pragma once

// Discrete-event model of the broadcast queue: FCFS per frequency, service only
// inside the daily window, pushes behind listener requests.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonic/window.hpp"

namespace sonic::sim {

using sched::LocalClock;
using sched::TransmissionWindow;

enum class ItemKind { Url, Gpt, Push, Hub };
const char* to_string(ItemKind k);

struct PushEvent {
    double hour = 9.5;  // local time of day
    int count = 10;
};

struct WorkloadParams {
    int n_users = 15;
    int requests_per_user_day = 10;  // at most the daily quota
    int quota = 10;
    double gpt_fraction = 0.628;
    double url_fraction = 0.372;
    // relative request rate for each local hour
    std::array<double, 24> hourly{};
    double cache_hit_rate = 0.30;
    std::vector<PushEvent> push_events = {{9.5, 10}};
    std::int64_t day = 0;  // local day the trace covers

    WorkloadParams();
    // Throws std::invalid_argument.
    void validate() const;
};

struct TraceItem {
    double arrival = 0;
    double ready = -1;     // earliest start; arrival when negative
    ItemKind kind = ItemKind::Url;
    double duration = -1;  // air time in seconds; drawn from the service model when negative
    bool skip = false;     // leaves the queue at ready without airtime (cache hit, failure)
    bool cache_eligible = true;
    std::uint32_t id = 0;
};

struct Trace {
    std::vector<TraceItem> items;  // arrival order
    double t_begin = 0;            // first scheduling instant; series starts here
    double t_end = 0;              // results are read at this instant
    std::uint64_t seed = 0;
};

Trace generate_workload(const WorkloadParams& p, std::uint64_t seed);

struct ServiceModel {
    double rate_bytes_per_s = 1250;
    double url_median_bytes = 60000;
    double url_sigma = 0.5;
    double gpt_median_bytes = 1500;
    double gpt_sigma = 0.5;
    double overhead_s = 3;         // preamble and inter-transmission gap
    double scale = 1.0;            // multiplies every service time
    double keepalive_s = 0;        // air time of an idle keepalive; 0 leaves them out
    double keepalive_interval_s = 5;
};

struct QueueSample {
    double t = 0;
    int size = 0;
};

struct SimResult {
    std::vector<QueueSample> series;  // one sample per minute from t_begin
    int peak = 0;
    double peak_t = 0;
    int enqueued = 0;   // hub items excluded
    int served = 0;     // started before t_end
    int unserved = 0;   // never started
    int skipped = 0;
    int served_url = 0, served_gpt = 0, served_push = 0;
    std::vector<double> start;  // per trace item, -1 when not started

    nlohmann::json to_json() const;
    std::string series_csv() const;
};

struct SimConfig {
    int n_freqs = 1;
    TransmissionWindow window;
    LocalClock clock;
    ServiceModel svc;
    double cache_hit_rate = 0.0;
};

SimResult simulate(const Trace& trace, const SimConfig& cfg);

// Queue series computed from arrival, ready and start times alone.
SimResult measure(const Trace& trace, const std::vector<double>& start);

// ---- server event log ----

class LogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LogTrace {
    Trace trace;
    SimConfig config;               // window, clock and overheads found in the log
    std::vector<double> start;      // observed starts, per trace item
};

// Reads the server's JSON event log (one object per line).
LogTrace trace_from_log(const std::vector<nlohmann::json>& events);
std::vector<nlohmann::json> read_log(const std::string& path);

// Result computed from the logged timestamps.
SimResult replay_log(const std::vector<nlohmann::json>& events);

// ---- calibration ----

struct Calibration {
    WorkloadParams workload;
    ServiceModel svc;
    TransmissionWindow window;
};

Calibration load_calibration(const std::string& path);

struct SweepPoint {
    int users = 0;
    int freqs = 0;
};

std::vector<SweepPoint> default_sweep();

}  // namespace sonic::sim
