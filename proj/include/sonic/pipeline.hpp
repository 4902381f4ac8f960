#pragma once

// Glue between the format, FEC and modem layers: one protected frame per burst.

#include <optional>
#include <vector>

#include "sonic/fec.hpp"
#include "sonic/format.hpp"
#include "sonic/modem.hpp"

namespace sonic::pipeline {

struct LinkConfig {
    fec::FecConfig fec;
    modem::ModulationProfile profile;
};

modem::PcmChunk frame_audio(const format::Frame& f, const LinkConfig& cfg = {});

// All frames of the file as consecutive bursts.
modem::PcmChunk file_audio(const format::SonicFile& file, const LinkConfig& cfg = {});

modem::PcmChunk silence(double seconds, int sample_rate = 44100);
void append(modem::PcmChunk& dst, const modem::PcmChunk& src);

// Demodulates and FEC-decodes every burst; nullopt entries are lost frames.
std::vector<std::optional<format::Frame>> decode_audio(const modem::PcmChunk& pcm, const LinkConfig& cfg = {});

}  // namespace sonic::pipeline
