#include <cmath>
#include <cstdio>
#include <ctime>
#include <stdexcept>

#include "sonic/window.hpp"

namespace sonic::sched {

std::int64_t LocalClock::day(double t) const { return std::int64_t(std::floor((t + utc_offset_s) / 86400.0)); }

double LocalClock::second_of_day(double t) const { return t + utc_offset_s - double(day(t)) * 86400.0; }

double LocalClock::at(std::int64_t d, double sod) const { return double(d) * 86400.0 + sod - utc_offset_s; }

int system_utc_offset() {
    std::time_t now = std::time(nullptr);
    std::tm lt{};
    localtime_r(&now, &lt);
    return int(lt.tm_gmtoff);
}

void TransmissionWindow::validate() const {
    if (start_min < 0 || start_min >= 1440 || end_min < 0 || end_min >= 1440)
        throw std::invalid_argument("window times must be within a day");
    if (start_min == end_min) throw std::invalid_argument("window length must be positive");
}

double TransmissionWindow::length_s() const {
    int m = end_min > start_min ? end_min - start_min : end_min + 1440 - start_min;
    return m * 60.0;
}

bool TransmissionWindow::contains(double t, const LocalClock& c) const {
    double sod = c.second_of_day(t), s = start_min * 60.0, e = end_min * 60.0;
    return s < e ? (sod >= s && sod < e) : (sod >= s || sod < e);
}

double TransmissionWindow::window_start(double t, const LocalClock& c) const {
    std::int64_t d = c.day(t);
    double sod = c.second_of_day(t), s = start_min * 60.0, e = end_min * 60.0;
    if (contains(t, c)) return (s > e && sod < e) ? c.at(d - 1, s) : c.at(d, s);
    return sod < s ? c.at(d, s) : c.at(d + 1, s);
}

double TransmissionWindow::window_end(double t, const LocalClock& c) const { return window_start(t, c) + length_s(); }

std::int64_t TransmissionWindow::window_id(double t, const LocalClock& c) const { return c.day(window_start(t, c)); }

int parse_hhmm(const std::string& s) {
    int h = -1, m = -1;
    char colon = 0;
    if (std::sscanf(s.c_str(), "%d%c%d", &h, &colon, &m) != 3 || colon != ':' || h < 0 || h > 23 || m < 0 || m > 59)
        throw std::invalid_argument("expected HH:MM, got '" + s + "'");
    return h * 60 + m;
}

}  // namespace sonic::sched
