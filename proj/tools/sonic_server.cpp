// Head-end: uplink over HTTP (and optionally a tailed line file), render and
// encode worker, and the player writing audio to a WAV directory or stdout.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "common.hpp"
#include "sonic/server.hpp"

using namespace sonic;

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SONIC head-end server"};
    std::string config_path, listen, db, events, uplink_file, audio, llm, browser;
    int port = -1;
    std::optional<int> utc_offset;
    bool from_start = false;
    app.add_option("--config", config_path, "Configuration file (default ./sonic.toml)");
    app.add_option("--listen", listen, "HTTP listen address");
    app.add_option("--port", port, "HTTP port");
    app.add_option("--db", db, "SQLite file for requests and popularity");
    app.add_option("--events", events, "JSON event log (appended)");
    app.add_option("--uplink-file", uplink_file, "Tail \"sender<TAB>body\" lines from this file");
    app.add_flag("--uplink-from-start", from_start, "Also submit lines already in the uplink file");
    app.add_option("--audio", audio, "\"stdout\" (raw PCM) or \"wav:<dir>\"");
    app.add_option("--llm", llm, "\"stub\" or a chat-completions url");
    app.add_option("--browser", browser, "\"synthetic\" or a WebDriver endpoint");
    app.add_option("--utc-offset", utc_offset, "Local time offset from UTC in seconds");
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = tools::load_config_or_default(config_path);
        auto& s = cfg.server;
        if (!listen.empty()) s.listen = listen;
        if (port >= 0) s.port = port;
        if (!db.empty()) s.db = db;
        if (!events.empty()) s.event_log = events;
        if (!uplink_file.empty()) s.uplink_file = uplink_file;
        if (!audio.empty()) s.audio = audio;
        if (!llm.empty()) s.llm = llm;
        if (!browser.empty()) s.browser = browser;
        if (utc_offset) s.utc_offset_s = utc_offset;

        server::ServerConfig sc;
        sc.window = cfg.window;
        sc.clock.utc_offset_s = s.utc_offset_s ? *s.utc_offset_s : sched::system_utc_offset();
        sc.quota_per_day = s.quota_per_day;
        sc.queue_bound = s.queue_bound;
        sc.keepalive_interval_s = s.keepalive_interval_s;
        sc.gap_s = s.gap_s;
        sc.hub_top_n = s.hub_top_n;
        sc.hub_span_s = s.hub_span_days * 86400;
        sc.link = cfg.link;

        std::unique_ptr<render::Browser> br;
        if (s.browser == "synthetic") br = std::make_unique<render::SyntheticBrowser>();
        else br = std::make_unique<render::WebDriverBrowser>(s.browser, s.nav_timeout_s);
        auto llm_client = render::make_llm(s.llm);
        server::LiveRenderer renderer(*br, *llm_client, s.push_links, s.llm_cap);

        server::ServerStore store(s.db);
        server::JsonlWriter writer(s.event_log);
        auto sink = server::make_sink(s.audio, sc.gap_s);
        server::Server srv(sc, renderer, writer, &store);
        srv.set_on_air([&](const modem::PcmChunk& pcm, const server::AirEvent& ev) { sink->write(pcm, ev); });

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);

        httplib::Server http;
        server::install_http(http, srv, tools::unix_now);
        if (!http.bind_to_port(s.listen, s.port)) throw std::runtime_error("cannot listen on " + s.listen + ":" + std::to_string(s.port));
        std::thread http_thread([&] { http.listen_after_bind(); });
        std::cerr << "sonic-server on http://" << s.listen << ':' << s.port << ", window "
                  << cfg.window.start_min / 60 << ':' << cfg.window.start_min % 60 << '-' << cfg.window.end_min / 60
                  << ':' << cfg.window.end_min % 60 << " local, audio " << s.audio << '\n';

        auto tick = std::chrono::duration<double>(s.tick_s);
        std::thread worker([&] {
            while (!g_stop) {
                if (!srv.render_next(tools::unix_now())) std::this_thread::sleep_for(tick);
            }
        });

        std::optional<server::LineTailer> tailer;
        if (!s.uplink_file.empty()) {
            tailer.emplace(s.uplink_file);
            if (!from_start) tailer->poll();
        }
        while (!g_stop) {
            if (tailer)
                for (auto& m : tailer->poll()) {
                    auto r = srv.submit(m, tools::unix_now());
                    if (auto* why = std::get_if<server::RejectReason>(&r))
                        std::cerr << "rejected from " << m.sender_id << ": " << server::to_string(*why) << '\n';
                }
            srv.advance_to(tools::unix_now());
            std::this_thread::sleep_for(tick);
        }
        http.stop();
        http_thread.join();
        worker.join();
    } catch (const std::exception& e) {
        std::cerr << "sonic-server: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
