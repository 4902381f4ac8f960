#pragma once

// Local time of day and the daily transmission window.

#include <cstdint>
#include <string>

namespace sonic::sched {

// Timestamps are unix seconds; local time is a fixed offset from UTC.
struct LocalClock {
    int utc_offset_s = 0;
    std::int64_t day(double t) const;           // local calendar day number
    double second_of_day(double t) const;       // [0, 86400)
    double at(std::int64_t day, double sod) const;  // inverse
};

int system_utc_offset();

struct TransmissionWindow {
    int start_min = 22 * 60;
    int end_min = 5 * 60;  // may wrap past midnight

    // Throws std::invalid_argument for a zero-length window.
    void validate() const;
    double length_s() const;
    bool contains(double t, const LocalClock& c) const;
    // Start of the window containing t, or the next one.
    double window_start(double t, const LocalClock& c) const;
    // End of the window containing t, or of the next one.
    double window_end(double t, const LocalClock& c) const;
    // Identifies the window containing t, or the next one when closed; work done
    // before a window opens belongs to it.
    std::int64_t window_id(double t, const LocalClock& c) const;
};

// "HH:MM" -> minutes
int parse_hhmm(const std::string& s);

}  // namespace sonic::sched
