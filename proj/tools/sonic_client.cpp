// Receiver: decodes PCM from WAV files, stdin or a named pipe into the local
// item store and serves the local API used by the UI.

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "common.hpp"
#include "sonic/client.hpp"

using namespace sonic;

namespace {
httplib::Server* g_http = nullptr;
void on_signal(int) {
    if (g_http) g_http->stop();
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SONIC client: decode, store and serve received items"};
    std::string config_path, listen, db, uplink, static_dir, fifo;
    std::vector<std::string> wavs;
    bool pcm_stdin = false, no_api = false;
    int port = -1, rate = 44100;
    app.add_option("--config", config_path, "Configuration file (default ./sonic.toml)");
    app.add_option("--wav", wavs, "WAV files to decode, in order")->check(CLI::ExistingFile);
    app.add_flag("--pcm-stdin", pcm_stdin, "Decode raw 16-bit PCM from standard input");
    app.add_option("--pcm-fifo", fifo, "Decode raw 16-bit PCM from a named pipe (reopened on EOF)");
    app.add_option("--rate", rate, "Sample rate of raw PCM input");
    app.add_option("--listen", listen, "API listen address");
    app.add_option("--port", port, "API port");
    app.add_option("--db", db, "SQLite item store");
    app.add_option("--uplink", uplink, "Server base url for POST /request");
    app.add_option("--static", static_dir, "Serve this directory at /");
    app.add_flag("--no-api", no_api, "Decode the inputs and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = tools::load_config_or_default(config_path);
        auto& c = cfg.client;
        if (!listen.empty()) c.listen = listen;
        if (port >= 0) c.port = port;
        if (!db.empty()) c.db = db;
        if (!uplink.empty()) c.uplink_url = uplink;
        if (!static_dir.empty()) c.static_dir = static_dir;

        client::ItemStore store(c.db);
        client::SharedState shared;
        client::Receiver rx({.link = cfg.link, .end_silence_s = c.end_silence_s, .partial_threshold = c.partial_threshold});
        auto keep = [&](const std::vector<client::ReceivedItem>& items) {
            for (auto& it : items) {
                auto id = store.store(it);
                std::cerr << "item " << id << ": " << it.meta.source << " " << client::to_string(it.status) << " loss "
                          << it.loss_percent << "%\n";
            }
            shared.last_keepalive = rx.last_keepalive();
            store.evict(std::int64_t(tools::unix_now()), c.evict_after_s);
        };

        std::thread ingest([&] {
            try {
                for (auto& w : wavs) keep(rx.push(modem::read_wav(w)));
                if (pcm_stdin) tools::read_pcm_stream(stdin, rate, [&](const modem::PcmChunk& ch) { keep(rx.push(ch)); });
                if (!fifo.empty()) {
                    while (true) {
                        std::FILE* f = std::fopen(fifo.c_str(), "rb");
                        if (!f) throw std::runtime_error("cannot open " + fifo);
                        tools::read_pcm_stream(f, rate, [&](const modem::PcmChunk& ch) { keep(rx.push(ch)); });
                        std::fclose(f);
                        if (no_api) break;
                    }
                }
                keep(rx.finish());
            } catch (const std::exception& e) {
                std::cerr << "ingest stopped: " << e.what() << '\n';
            }
        });
        if (no_api) {
            ingest.join();
            return 0;
        }

        httplib::Server http;
        client::install_api(http, store, shared,
                            {.uplink_url = c.uplink_url, .sender_id = c.sender_id, .clock = {}, .static_dir = c.static_dir});
        g_http = &http;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        if (!http.bind_to_port(c.listen, c.port)) throw std::runtime_error("cannot listen on " + c.listen + ":" + std::to_string(c.port));
        std::cerr << "sonic-client api on http://" << c.listen << ':' << c.port << '\n';
        http.listen_after_bind();
        // the ingest thread may be blocked on a pipe; nothing left to flush
        ingest.detach();
    } catch (const std::exception& e) {
        std::cerr << "sonic-client: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
