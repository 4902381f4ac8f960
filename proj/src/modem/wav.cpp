#include <cstring>
#include <fstream>
#include <iterator>

#include "sonic/modem.hpp"

namespace sonic::modem {

namespace {

void put_u16(Bytes& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
}

void put_u32(Bytes& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

std::uint16_t get_u16(const std::uint8_t* p) { return p[0] | (p[1] << 8); }
std::uint32_t get_u32(const std::uint8_t* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

Bytes wav_bytes(const PcmChunk& pcm) {
    std::uint32_t data_len = static_cast<std::uint32_t>(pcm.samples.size() * 2);
    Bytes b;
    b.reserve(44 + data_len);
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    put_u32(b, 36 + data_len);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(b, 16);
    put_u16(b, 1);  // PCM
    put_u16(b, 1);  // mono
    put_u32(b, pcm.sample_rate);
    put_u32(b, pcm.sample_rate * 2);
    put_u16(b, 2);
    put_u16(b, 16);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    put_u32(b, data_len);
    for (auto s : pcm.samples) put_u16(b, static_cast<std::uint16_t>(s));
    return b;
}

PcmChunk parse_wav(const Bytes& b) {
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
        throw WavError(WavErrc::Malformed, "not a RIFF/WAVE file");
    bool have_fmt = false;
    PcmChunk out;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::uint8_t* h = b.data() + pos;
        std::uint32_t len = get_u32(h + 4);
        std::size_t body = pos + 8;
        if (std::memcmp(h, "fmt ", 4) == 0) {
            if (len < 16 || body + 16 > b.size()) throw WavError(WavErrc::Malformed, "short fmt chunk");
            std::uint16_t fmt = get_u16(b.data() + body);
            std::uint16_t channels = get_u16(b.data() + body + 2);
            std::uint16_t bits = get_u16(b.data() + body + 14);
            // WAVE_FORMAT_EXTENSIBLE is accepted only when it still describes plain PCM
            if (fmt == 0xFFFE && len >= 40 && body + 26 <= b.size()) fmt = get_u16(b.data() + body + 24);
            if (fmt != 1) throw WavError(WavErrc::Unsupported, "only integer PCM is supported");
            if (channels != 1) throw WavError(WavErrc::Unsupported, "only mono is supported");
            if (bits != 16) throw WavError(WavErrc::Unsupported, "only 16-bit samples are supported");
            out.sample_rate = static_cast<int>(get_u32(b.data() + body + 4));
            have_fmt = true;
        } else if (std::memcmp(h, "data", 4) == 0) {
            if (!have_fmt) throw WavError(WavErrc::Malformed, "data chunk before fmt chunk");
            std::size_t n = std::min<std::size_t>(len, b.size() - body) / 2;
            out.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                out.samples[i] = static_cast<std::int16_t>(get_u16(b.data() + body + 2 * i));
            return out;
        }
        pos = body + len + (len & 1);
    }
    throw WavError(WavErrc::Malformed, have_fmt ? "no data chunk" : "no fmt chunk");
}

void write_wav(const PcmChunk& pcm, const std::string& path) {
    Bytes b = wav_bytes(pcm);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw WavError(WavErrc::Io, "cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!f) throw WavError(WavErrc::Io, "write failed: " + path);
}

PcmChunk read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw WavError(WavErrc::Io, "cannot open " + path);
    Bytes b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_wav(b);
}

}  // namespace sonic::modem
