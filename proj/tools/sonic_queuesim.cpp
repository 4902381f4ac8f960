// Queue simulator front end: single runs, the users/frequencies sweep, and
// replay of a server event log.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sonic/queue_sim.hpp"

using namespace sonic;
using nlohmann::json;

namespace {

sim::SimConfig sim_config(const sim::Calibration& cal, int freqs) {
    sim::SimConfig c;
    c.n_freqs = freqs;
    c.window = cal.window;
    c.svc = cal.svc;
    c.cache_hit_rate = cal.workload.cache_hit_rate;
    return c;
}

json run(const sim::Calibration& cal, int users, int freqs, std::uint64_t seed, std::string* csv) {
    auto w = cal.workload;
    w.n_users = users;
    auto r = sim::simulate(sim::generate_workload(w, seed), sim_config(cal, freqs));
    auto j = r.to_json();
    j["users"] = users;
    j["freqs"] = freqs;
    j["seed"] = seed;
    j["drained"] = r.unserved == 0 && (r.series.empty() || r.series.back().size == 0);
    if (csv) {
        for (std::size_t i = 0; i < r.series.size(); ++i)
            *csv += std::to_string(users) + ',' + std::to_string(freqs) + ',' + std::to_string(seed) + ',' +
                    std::to_string(i) + ',' + std::to_string(r.series[i].size) + '\n';
    }
    return j;
}

void write(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream o(path);
    if (!o) throw std::runtime_error("cannot write " + path);
    o << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Broadcast queue simulator"};
    int users = 15, freqs = 1, seeds = 1;
    std::uint64_t seed = 1;
    std::string out = "-", csv_path, calibration = "calibration.toml", replay;
    bool sweep = false;
    app.add_option("--users", users, "Active users")->check(CLI::NonNegativeNumber);
    app.add_option("--freqs", freqs, "Carrier frequencies")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "First random seed");
    app.add_option("--seeds", seeds, "Number of consecutive seeds to run")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "JSON result file ('-' for stdout)");
    app.add_option("--csv", csv_path, "Queue size per minute as CSV");
    app.add_option("--calibration", calibration, "Workload and service calibration");
    app.add_flag("--sweep", sweep, "Run the standard users/frequencies grid");
    app.add_option("--replay", replay, "Server event log to replay and cross-check")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);
    try {
        if (!replay.empty()) {
            auto events = sim::read_log(replay);
            auto replayed = sim::replay_log(events);
            auto lt = sim::trace_from_log(events);
            auto simulated = sim::simulate(lt.trace, lt.config);
            json j = {{"replay", replayed.to_json()}, {"simulate", simulated.to_json()},
                      {"peak_identical", replayed.peak == simulated.peak}};
            write(out, j.dump(2) + "\n");
            if (!csv_path.empty()) write(csv_path, replayed.series_csv());
            return replayed.peak == simulated.peak ? 0 : 3;
        }
        sim::Calibration cal;
        if (std::filesystem::exists(calibration)) cal = sim::load_calibration(calibration);
        else if (app.count("--calibration")) throw std::runtime_error("no such file: " + calibration);
        std::string csv = "users,freqs,seed,minute,queue\n";
        json results = json::array();
        std::vector<sim::SweepPoint> points = sweep ? sim::default_sweep() : std::vector<sim::SweepPoint>{{users, freqs}};
        for (auto& p : points)
            for (int k = 0; k < seeds; ++k)
                results.push_back(run(cal, p.users, p.freqs, seed + std::uint64_t(k), csv_path.empty() ? nullptr : &csv));
        if (results.size() == 1) {
            write(out, results[0].dump(2) + "\n");
        } else {
            // the per-minute series make sweeps bulky; they go to the CSV
            for (auto& r : results) r.erase("series");
            write(out, results.dump(2) + "\n");
        }
        if (!csv_path.empty()) write(csv_path, csv);
    } catch (const std::exception& e) {
        std::cerr << "sonic-queuesim: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
