#include "sonic/pipeline.hpp"

namespace sonic::pipeline {

modem::PcmChunk frame_audio(const format::Frame& f, const LinkConfig& cfg) {
    return modem::modulate(fec::protect(format::serialize_frame(f), cfg.fec), cfg.profile);
}

void append(modem::PcmChunk& dst, const modem::PcmChunk& src) {
    dst.samples.insert(dst.samples.end(), src.samples.begin(), src.samples.end());
}

modem::PcmChunk file_audio(const format::SonicFile& file, const LinkConfig& cfg) {
    modem::PcmChunk out;
    out.sample_rate = cfg.profile.sample_rate;
    for (const auto& f : format::file_frames(file)) append(out, frame_audio(f, cfg));
    return out;
}

modem::PcmChunk silence(double seconds, int sample_rate) {
    modem::PcmChunk c;
    c.sample_rate = sample_rate;
    c.samples.assign(static_cast<std::size_t>(seconds * sample_rate + 0.5), 0);
    return c;
}

std::vector<std::optional<format::Frame>> decode_audio(const modem::PcmChunk& pcm, const LinkConfig& cfg) {
    std::vector<std::optional<format::Frame>> out;
    for (const auto& b : modem::demodulate(pcm, cfg.profile).bursts) out.push_back(fec::recover_frame(b.data, cfg.fec));
    return out;
}

}  // namespace sonic::pipeline
