#include <algorithm>
#include <cmath>
#include <limits>

#include "sonic/server.hpp"

namespace sonic::server {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const std::string kPushSender = "push";
}  // namespace

Server::Server(ServerConfig cfg, ContentRenderer& renderer, EventSink events, ServerStore* store)
    : cfg_(std::move(cfg)), renderer_(renderer), events_(std::move(events)), store_(store) {
    cfg_.window.validate();
    keepalive_audio_ = pipeline::frame_audio(format::keepalive_frame(), cfg_.link);
    if (!store_) return;
    // resume: terminal records stay as they are, unfinished ones go back to the queue
    for (auto& r : store_->load_requests()) {
        next_id_ = std::max(next_id_, r.id + 1);
        if (r.state == RequestState::Playing) {
            r.state = RequestState::Failed;
            r.error = "interrupted";
            persist(r);
        } else if (r.state != RequestState::Done && r.state != RequestState::Failed) {
            r.state = RequestState::Queued;
            r.cached = false;
            persist(r);
            (r.push ? push_pending_ : screenshot_q_).push_back(r.id);
        }
        records_[r.id] = r;
    }
    quota_ = store_->quota_counts();
    popularity_ = store_->load_popularity(-kInf);
}

void Server::set_on_air(std::function<void(const modem::PcmChunk&, const AirEvent&)> f) {
    std::lock_guard lk(mu_);
    on_air_ = std::move(f);
}

json Server::queue_depths() const {
    return {{"screenshot", screenshot_q_.size()},
            {"player", player_q_.size()},
            {"push_pending", push_pending_.size()},
            {"push", push_q_.size()}};
}

void Server::emit(json ev, double t) {
    if (!events_) return;
    ev["ts"] = t;
    events_(ev);
}

void Server::persist(const RequestRecord& r) {
    if (store_) store_->save(r, cfg_.clock.day(r.enqueue_time));
}

void Server::transition(RequestRecord& r, RequestState to, double t, json extra) {
    if (!valid_transition(r.state, to))
        throw std::logic_error(std::string("bad transition ") + to_string(r.state) + " -> " + to_string(to));
    json ev = {{"event", "state"},     {"id", r.id},         {"kind", to_string(r.kind)},
               {"subject", r.subject}, {"from", to_string(r.state)}, {"to", to_string(to)},
               {"cached", r.cached},   {"push", r.push},     {"queues", queue_depths()}};
    for (auto& [k, v] : extra.items()) ev[k] = v;
    r.state = to;
    persist(r);
    emit(std::move(ev), t);
}

SubmitResult Server::submit(const UplinkMessage& msg, double now) {
    std::lock_guard lk(mu_);
    auto parsed = parse_body(msg.body);
    auto reject = [&](RejectReason why) -> SubmitResult {
        emit({{"event", "rejected"}, {"sender", msg.sender_id}, {"body", msg.body}, {"reason", to_string(why)}}, now);
        return why;
    };
    if (auto* why = std::get_if<RejectReason>(&parsed)) return reject(*why);
    auto& body = std::get<ParsedBody>(parsed);
    auto qkey = std::make_pair(msg.sender_id, cfg_.clock.day(now));
    if (quota_[qkey] >= cfg_.quota_per_day) return reject(RejectReason::Quota);
    if (screenshot_q_.size() >= cfg_.queue_bound) return reject(RejectReason::Overload);

    ++quota_[qkey];
    RequestRecord r;
    r.id = next_id_++;
    r.kind = body.kind;
    r.subject = body.subject;
    r.sender = msg.sender_id;
    r.enqueue_time = now;
    popularity_.record(r.kind, r.subject, now);
    if (store_) store_->record_hit(r.kind, r.subject, now);
    screenshot_q_.push_back(r.id);
    records_[r.id] = r;
    persist(r);
    emit({{"event", "state"},
          {"id", r.id},
          {"kind", to_string(r.kind)},
          {"subject", r.subject},
          {"sender", r.sender},
          {"from", nullptr},
          {"to", "QUEUED"},
          {"cached", false},
          {"push", false},
          {"queues", queue_depths()}},
         now);
    return r;
}

std::shared_ptr<const Encoded> Server::encode(RenderOutput out) {
    auto e = std::make_shared<Encoded>();
    e->audio = pipeline::file_audio(out.file, cfg_.link);
    e->duration_s = double(e->audio.samples.size()) / e->audio.sample_rate;
    e->file = std::move(out.file);
    e->push_links = std::move(out.push_links);
    return e;
}

bool Server::render_next(double now) {
    std::lock_guard rl(render_mu_);
    std::unique_lock lk(mu_);
    std::uint32_t id;
    if (!screenshot_q_.empty()) {
        id = screenshot_q_.front();
        screenshot_q_.pop_front();
    } else if (!push_pending_.empty()) {
        // pushes are rendered only when no listener request is waiting
        id = push_pending_.front();
        push_pending_.pop_front();
    } else {
        return false;
    }
    auto& rec = records_.at(id);
    std::int64_t wid = cfg_.window.window_id(now, cfg_.clock);
    auto& dest = rec.push ? push_q_ : player_q_;

    if (auto hit = cache_.lookup(rec.kind, rec.subject, wid)) {
        rec.cached = true;
        dest.push_back({id, hit, now});
        transition(rec, RequestState::Encoded, now, {{"duration", hit->duration_s}});
        return true;
    }
    transition(rec, RequestState::Rendering, now);
    RequestKind kind = rec.kind;
    std::string subject = rec.subject;
    lk.unlock();

    std::shared_ptr<const Encoded> enc;
    std::string error;
    try {
        enc = encode(renderer_.render(kind, subject, id, now));
    } catch (const std::exception& e) {
        error = e.what();
    }

    lk.lock();
    auto& r = records_.at(id);
    ++renders_;
    if (!enc) {
        r.error = error;
        transition(r, RequestState::Failed, now, {{"error", error}});
        return true;
    }
    cache_.insert(kind, subject, wid, enc);
    dest.push_back({id, enc, now});
    transition(r, RequestState::Encoded, now, {{"duration", enc->duration_s}});

    if (kind == RequestKind::Url && !r.push) {
        auto& seen = pushed_[wid];
        for (const auto& url : enc->push_links) {
            std::string u = normalize_url(url);
            if (u == subject || seen.count(u) || cache_.lookup(RequestKind::Url, u, wid)) continue;
            if (push_pending_.size() >= cfg_.queue_bound) {
                emit({{"event", "push_dropped"}, {"subject", u}}, now);
                continue;
            }
            seen.insert(u);
            RequestRecord p;
            p.id = next_id_++;
            p.kind = RequestKind::Url;
            p.subject = u;
            p.sender = kPushSender;
            p.push = true;
            p.enqueue_time = now;
            push_pending_.push_back(p.id);
            records_[p.id] = p;
            persist(p);
            emit({{"event", "state"},
                  {"id", p.id},
                  {"kind", "url"},
                  {"subject", u},
                  {"sender", kPushSender},
                  {"from", nullptr},
                  {"to", "QUEUED"},
                  {"cached", false},
                  {"push", true},
                  {"parent", id},
                  {"queues", queue_depths()}},
                 now);
        }
    }
    return true;
}

void Server::air(const modem::PcmChunk& pcm, const AirEvent& ev) {
    if (on_air_) on_air_(pcm, ev);
}

void Server::start_play(std::uint32_t id, std::shared_ptr<const Encoded> e, double t) {
    auto& r = records_.at(id);
    r.play_start = t;
    r.play_end = t + e->duration_s;
    playing_ = id;
    busy_until_ = r.play_end + cfg_.gap_s;
    next_keepalive_ = r.play_end + cfg_.keepalive_interval_s;
    cursor_ = t;
    transition(r, RequestState::Playing, t, {{"duration", e->duration_s}});
    air(e->audio, {AirEvent::Request, id, t, e->duration_s});
}

void Server::advance_to(double T) {
    std::lock_guard lk(mu_);
    if (cursor_ < 0) {
        cursor_ = T;
        busy_until_ = T;
        next_keepalive_ = T + cfg_.keepalive_interval_s;
        if (events_) {
            emit({{"event", "config"},
                  {"window_start", cfg_.window.start_min},
                  {"window_end", cfg_.window.end_min},
                  {"utc_offset_s", cfg_.clock.utc_offset_s},
                  {"gap_s", cfg_.gap_s},
                  {"keepalive_interval_s", cfg_.keepalive_interval_s},
                  {"keepalive_s", double(keepalive_audio_.samples.size()) / keepalive_audio_.sample_rate}},
                 T);
        }
    }
    const auto& win = cfg_.window;
    const auto& clk = cfg_.clock;
    const double ka_dur = double(keepalive_audio_.samples.size()) / keepalive_audio_.sample_rate;

    while (true) {
        if (playing_) {
            auto& r = records_.at(*playing_);
            if (r.play_end > T) break;
            transition(r, RequestState::Done, r.play_end);
            playing_.reset();
        }
        double tau = std::max(cursor_, busy_until_);
        if (tau > T) break;
        if (!win.contains(tau, clk)) {
            double ws = win.window_start(tau, clk);
            if (ws > T) {
                cursor_ = T;
                break;
            }
            cursor_ = ws;
            next_keepalive_ = ws + cfg_.keepalive_interval_s;
            continue;
        }
        double we = win.window_end(tau, clk);
        std::int64_t wid = win.window_id(tau, clk);

        if (hub_window_ != wid) {
            hub_window_ = wid;
            auto entries = popularity_.top(tau, cfg_.hub_top_n, cfg_.hub_span_s);
            if (!entries.empty()) {
                auto file = render::make_text_file(hub_index_json(entries, tau), format::kHubSource, 0,
                                                   std::int64_t(tau));
                auto audio = pipeline::file_audio(file, cfg_.link);
                double dur = double(audio.samples.size()) / audio.sample_rate;
                if (tau + dur <= we) {
                    emit({{"event", "hub"}, {"entries", entries.size()}, {"duration", dur}}, tau);
                    busy_until_ = tau + dur + cfg_.gap_s;
                    next_keepalive_ = tau + dur + cfg_.keepalive_interval_s;
                    cursor_ = tau;
                    air(audio, {AirEvent::Hub, 0, tau, dur});
                    continue;
                }
            }
        }

        // earliest eligible transmission: listener requests before pushes
        std::deque<Ready>* q = nullptr;
        double s = kInf;
        for (auto* cand : {&player_q_, &push_q_}) {
            if (cand->empty()) continue;
            double at = std::max(tau, cand->front().ready);
            if (at < s) {
                s = at;
                q = cand;
            }
        }
        double k = std::max(next_keepalive_, tau);
        if (q && s <= k && s + q->front().enc->duration_s <= win.window_end(s, clk) && win.contains(s, clk)) {
            if (s > T) {
                cursor_ = T;
                break;
            }
            Ready item = q->front();
            q->pop_front();
            start_play(item.id, item.enc, s);
            continue;
        }
        // idle, or the head does not fit before the window closes
        if (k > T) {
            cursor_ = T;
            break;
        }
        if (k + ka_dur > we) {
            if (we > T) {
                cursor_ = T;
                break;
            }
            cursor_ = we;
            continue;
        }
        ++keepalives_;
        emit({{"event", "keepalive"}, {"duration", ka_dur}}, k);
        busy_until_ = k + ka_dur;
        next_keepalive_ = k + cfg_.keepalive_interval_s;
        cursor_ = k;
        air(keepalive_audio_, {AirEvent::Keepalive, 0, k, ka_dur});
    }
    popularity_.prune(T - cfg_.hub_span_s);
}

void Server::step(double now) {
    while (render_next(now)) {
    }
    advance_to(now);
}

Status Server::status(double now) const {
    std::lock_guard lk(mu_);
    Status s;
    s.window_open = cfg_.window.contains(now, cfg_.clock);
    s.screenshot_queue = screenshot_q_.size();
    s.player_queue = player_q_.size();
    s.push_pending = push_pending_.size();
    s.push_queue = push_q_.size();
    if (playing_) s.current = records_.at(*playing_);
    s.cache_entries = cache_.size();
    s.keepalives = keepalives_;
    return s;
}

std::vector<RequestRecord> Server::requests() const {
    std::lock_guard lk(mu_);
    std::vector<RequestRecord> out;
    for (auto& [id, r] : records_) out.push_back(r);
    return out;
}

std::optional<RequestRecord> Server::request(std::uint32_t id) const {
    std::lock_guard lk(mu_);
    auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::vector<HubEntry> Server::hub(double now) const {
    std::lock_guard lk(mu_);
    return popularity_.top(now, cfg_.hub_top_n, cfg_.hub_span_s);
}

}  // namespace sonic::server
