// Renders a url, an LLM prompt or a text file into a SONIC transmission.

#include <fstream>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>
#include <json.hpp>

#include "common.hpp"
#include "sonic/render.hpp"

using namespace sonic;

int main(int argc, char** argv) {
    CLI::App app{"Encode a page, an LLM answer or a text file as SONIC audio"};
    std::string url, prompt, text_file, out, sonic_out, config_path, browser = "synthetic", llm = "stub";
    bool pcm_stdout = false;
    std::uint32_t id = 1;
    auto* src = app.add_option_group("source");
    src->add_option("--url", url, "Web page to capture");
    src->add_option("--gpt", prompt, "Prompt for the LLM");
    src->add_option("--text-file", text_file, "Send this file as LLM_TEXT")->check(CLI::ExistingFile);
    src->require_option(1);
    app.add_option("--out", out, "Write a WAV file");
    app.add_flag("--pcm-stdout", pcm_stdout, "Write raw 16-bit PCM to standard output");
    app.add_option("--sonic", sonic_out, "Also write the serialized SONIC file");
    app.add_option("--config", config_path, "Configuration file (default ./sonic.toml)");
    app.add_option("--browser", browser, "\"synthetic\" or a WebDriver endpoint");
    app.add_option("--llm", llm, "\"stub\" or a chat-completions url");
    app.add_option("--id", id, "Request id written into the metadata");
    CLI11_PARSE(app, argc, argv);
    if (out.empty() && !pcm_stdout && sonic_out.empty()) {
        std::cerr << "nothing to do: give --out, --pcm-stdout or --sonic\n";
        return 2;
    }
    try {
        auto cfg = tools::load_config_or_default(config_path);
        auto now = std::int64_t(tools::unix_now());
        format::SonicFile file;
        if (!url.empty()) {
            std::unique_ptr<render::Browser> b;
            if (browser == "synthetic") b = std::make_unique<render::SyntheticBrowser>();
            else b = std::make_unique<render::WebDriverBrowser>(browser, cfg.server.nav_timeout_s);
            file = render::make_webpage_file(render::capture_page(url, *b), id, now);
        } else if (!prompt.empty()) {
            auto client = render::make_llm(llm);
            file = render::make_text_file(render::render_llm(prompt, *client, cfg.server.llm_cap), "gpt " + prompt, id, now);
        } else {
            std::ifstream in(text_file, std::ios::binary);
            std::string text((std::istreambuf_iterator<char>(in)), {});
            file = render::make_text_file(text, text_file, id, now);
        }
        if (!sonic_out.empty()) {
            auto bytes = format::serialize_file(file);
            std::ofstream(sonic_out, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                             std::streamsize(bytes.size()));
        }
        auto pcm = pipeline::file_audio(file, cfg.link);
        if (!out.empty()) modem::write_wav(pcm, out);
        if (pcm_stdout) std::fwrite(pcm.samples.data(), 2, pcm.samples.size(), stdout);
        nlohmann::json summary = {{"request_id", id},
                                  {"content_type", file.meta.content_type == format::ContentType::Webpage ? "WEBPAGE" : "LLM_TEXT"},
                                  {"payload_bytes", file.payload.size()},
                                  {"frames", format::file_frames(file).size()},
                                  {"links", file.links.size()},
                                  {"duration_s", double(pcm.samples.size()) / pcm.sample_rate}};
        std::cerr << summary.dump() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "sonic-encode: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
