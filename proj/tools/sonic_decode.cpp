// Decodes SONIC audio into items: one JSON line per item, files in --out-dir.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "common.hpp"
#include "sonic/client.hpp"

using namespace sonic;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"Decode SONIC audio (WAV files or raw PCM on stdin)"};
    std::vector<std::string> wavs;
    std::string out_dir, config_path;
    bool pcm_stdin = false;
    int rate = 44100;
    app.add_option("wav", wavs, "WAV files, decoded as one continuous stream")->check(CLI::ExistingFile);
    app.add_flag("--pcm-stdin", pcm_stdin, "Read raw 16-bit PCM from standard input");
    app.add_option("--rate", rate, "Sample rate of raw PCM input");
    app.add_option("--out-dir", out_dir, "Write each item as <n>.png or <n>.txt plus <n>.json");
    app.add_option("--config", config_path, "Configuration file (default ./sonic.toml)");
    CLI11_PARSE(app, argc, argv);
    if (wavs.empty() == !pcm_stdin) {
        std::cerr << "give WAV files or --pcm-stdin\n";
        return 2;
    }
    try {
        auto cfg = tools::load_config_or_default(config_path);
        client::Receiver rx({.link = cfg.link,
                             .end_silence_s = cfg.client.end_silence_s,
                             .partial_threshold = cfg.client.partial_threshold});
        if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
        int n = 0;
        auto emit = [&](const std::vector<client::ReceivedItem>& items) {
            for (auto& it : items) {
                ++n;
                bool page = it.meta.content_type == format::ContentType::Webpage;
                json j = {{"n", n},
                          {"request_id", it.meta.request_id},
                          {"content_type", page ? "WEBPAGE" : "LLM_TEXT"},
                          {"source", it.meta.source},
                          {"status", client::to_string(it.status)},
                          {"loss_percent", it.loss_percent},
                          {"links", it.links.size()}};
                if (page) j["pixel_loss_percent"] = it.pixel_loss_percent;
                std::cout << j.dump() << std::endl;
                if (out_dir.empty()) continue;
                auto base = std::filesystem::path(out_dir) / std::to_string(n);
                if (page) {
                    auto png = render::encode_png(it.image);
                    std::ofstream(base.string() + ".png", std::ios::binary)
                        .write(reinterpret_cast<const char*>(png.data()), std::streamsize(png.size()));
                } else {
                    std::ofstream(base.string() + ".txt", std::ios::binary) << it.text;
                }
                json links = json::array();
                for (auto& l : it.links) links.push_back({{"x", l.x}, {"y", l.y}, {"w", l.w}, {"h", l.h}, {"url", l.target_url}});
                j["links"] = links;
                std::ofstream(base.string() + ".json") << j.dump(2) << '\n';
            }
        };
        if (pcm_stdin) {
            tools::read_pcm_stream(stdin, rate, [&](const modem::PcmChunk& c) { emit(rx.push(c)); });
        } else {
            for (auto& w : wavs) emit(rx.push(modem::read_wav(w)));
        }
        emit(rx.finish());
        auto& s = rx.stats();
        std::cerr << json{{"items", s.items}, {"frames_ok", s.frames_ok}, {"frames_lost", s.frames_lost},
                          {"keepalives", s.keepalives}, {"unattributed", s.unattributed}}
                         .dump()
                  << '\n';
    } catch (const std::exception& e) {
        std::cerr << "sonic-decode: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
