// Passes SONIC audio through the simulated FM channel at a given RSSI.

#include <iostream>

#include <CLI11.hpp>

#include "common.hpp"
#include "sonic/channel.hpp"

using namespace sonic;

int main(int argc, char** argv) {
    CLI::App app{"Degrade SONIC audio as an FM receiver at the given RSSI would"};
    double rssi = -60;
    std::uint64_t seed = 0;
    std::string in, out, config_path;
    std::string mode = "frame";
    double dropouts = 0, dropout_len = 0.05;
    app.add_option("--rssi", rssi, "Received signal strength in dBm")->required();
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--in", in, "Input WAV")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output WAV")->required();
    app.add_option("--mode", mode,
                   "frame: silence whole bursts per the loss model; audio: add noise for the RSSI")
        ->check(CLI::IsMember({"frame", "audio"}));
    app.add_option("--dropouts", dropouts, "Signal dropouts per second");
    app.add_option("--dropout-len", dropout_len, "Mean dropout length in seconds");
    app.add_option("--config", config_path, "Configuration file (default ./sonic.toml)");
    CLI11_PARSE(app, argc, argv);
    try {
        auto cfg = tools::load_config_or_default(config_path);
        channel::ChannelConditions c{rssi, seed, cfg.burst_mean_frames};
        auto pcm = modem::read_wav(in);
        if (mode == "audio") {
            channel::AudioOptions opt;
            opt.dropouts_per_s = dropouts;
            opt.dropout_mean_s = dropout_len;
            modem::write_wav(channel::apply_audio_channel(pcm, c, opt), out);
            std::cerr << "rssi " << rssi << " dBm, snr " << channel::snr_for_rssi(rssi) << " dB\n";
            return 0;
        }
        auto bursts = modem::demodulate(pcm, cfg.link.profile).bursts;
        auto keep = channel::survival_mask(bursts.size(), c, cfg.loss);
        std::size_t dropped = 0;
        for (std::size_t i = 0; i < bursts.size(); ++i) {
            if (keep[i]) continue;
            ++dropped;
            auto b = std::size_t(std::max<std::int64_t>(0, bursts[i].sync.start_sample));
            auto e = std::min(pcm.samples.size(), std::size_t(bursts[i].sync.end_sample));
            std::fill(pcm.samples.begin() + std::ptrdiff_t(b), pcm.samples.begin() + std::ptrdiff_t(e), 0);
        }
        modem::write_wav(pcm, out);
        std::cerr << "rssi " << rssi << " dBm: dropped " << dropped << " of " << bursts.size()
                  << " bursts (model loss " << channel::frame_loss_prob(rssi, cfg.loss) << ")\n";
    } catch (const std::exception& e) {
        std::cerr << "sonic-simulate: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
