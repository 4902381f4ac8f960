#include <chrono>

#include "sonic/client.hpp"

namespace sonic::client {

Receiver::Receiver(ReceiverOptions opt)
    : opt_(std::move(opt)), demod_(std::make_unique<modem::Demodulator>(opt_.link.profile)) {}

Receiver::~Receiver() = default;

std::int64_t Receiver::now() const {
    if (opt_.clock) return opt_.clock();
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

void Receiver::close(std::vector<ReceivedItem>& out) {
    if (!open_) return;
    auto item = assemble(session_, now(), opt_.partial_threshold);
    if (item) {
        ++stats_.items;
        out.push_back(std::move(*item));
    } else {
        ++stats_.unattributed;
    }
    session_.clear();
    open_ = false;
    last_seq_ = -1;
}

std::vector<ReceivedItem> Receiver::handle(std::vector<modem::Burst> bursts, bool final) {
    std::vector<ReceivedItem> out;
    for (auto& b : bursts) {
        auto f = fec::recover_frame(b.data, opt_.link.fec);
        if (!f) {
            ++stats_.frames_lost;
            if (open_) last_end_ = b.sync.end_sample;
            continue;
        }
        ++stats_.frames_ok;
        if (f->is_keepalive()) {
            ++stats_.keepalives;
            last_keepalive_ = now();
            close(out);
            continue;
        }
        if (open_ && int(f->seq) <= last_seq_) close(out);
        session_.push_back(std::move(*f));
        open_ = true;
        last_seq_ = session_.back().seq;
        last_end_ = b.sync.end_sample;
    }
    auto gap = std::int64_t(opt_.end_silence_s * opt_.link.profile.sample_rate);
    if (final || (open_ && demod_->settled() - last_end_ > gap)) close(out);
    return out;
}

std::vector<ReceivedItem> Receiver::push(const std::int16_t* samples, std::size_t n) {
    return handle(demod_->push(samples, n), false);
}

std::vector<ReceivedItem> Receiver::finish() { return handle(demod_->finish(), true); }

}  // namespace sonic::client
