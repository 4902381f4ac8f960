#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

#include "sonic/config.hpp"

namespace sonic::tools {

// An explicit path must exist; otherwise ./sonic.toml is used when present.
inline config::Config load_config_or_default(const std::string& path) {
    if (!path.empty()) return config::load_config(path);
    if (std::filesystem::exists("sonic.toml")) return config::load_config("sonic.toml");
    return config::parse_config("");
}

inline double unix_now() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

// Raw little-endian 16-bit PCM from a stream, in chunks.
template <class F>
void read_pcm_stream(std::FILE* in, int sample_rate, F&& on_chunk) {
    std::vector<std::int16_t> buf(std::size_t(sample_rate) / 10);
    while (true) {
        std::size_t n = std::fread(buf.data(), 2, buf.size(), in);
        if (n == 0) break;
        modem::PcmChunk c;
        c.sample_rate = sample_rate;
        c.samples.assign(buf.begin(), buf.begin() + std::ptrdiff_t(n));
        on_chunk(c);
    }
}

}  // namespace sonic::tools
