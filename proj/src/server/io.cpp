#include <cstdio>
#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "sonic/server.hpp"

namespace sonic::server {

struct JsonlWriter::Impl {
    std::mutex mu;
    std::ofstream out;
};

JsonlWriter::JsonlWriter(const std::string& path) : impl_(std::make_shared<Impl>()) {
    impl_->out.open(path, std::ios::app);
    if (!impl_->out) throw std::runtime_error("cannot open event log " + path);
}

JsonlWriter::~JsonlWriter() = default;

void JsonlWriter::operator()(const json& ev) {
    std::lock_guard lk(impl_->mu);
    impl_->out << ev.dump() << '\n';
    impl_->out.flush();
}

// ---- http ----

void install_http(httplib::Server& srv, Server& server, std::function<double()> clock) {
    srv.Post("/uplink", [&server, clock](const httplib::Request& req, httplib::Response& res) {
        auto j = json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("body") || !j["body"].is_string()) {
            res.status = 400;
            res.set_content(R"({"accepted":false,"reason":"BAD_REQUEST"})", "application/json");
            return;
        }
        std::string sender = j.contains("sender") && j["sender"].is_string() ? j["sender"].get<std::string>() : "";
        auto r = server.submit({sender, j["body"].get<std::string>()}, clock());
        if (auto* rec = std::get_if<RequestRecord>(&r)) {
            res.set_content(json{{"accepted", true}, {"id", rec->id}, {"subject", rec->subject}}.dump(),
                            "application/json");
            return;
        }
        auto why = std::get<RejectReason>(r);
        res.status = why == RejectReason::Quota ? 429 : why == RejectReason::Overload ? 503 : 400;
        res.set_content(json{{"accepted", false}, {"reason", to_string(why)}}.dump(), "application/json");
    });
    srv.Get("/status", [&server, clock](const httplib::Request&, httplib::Response& res) {
        res.set_content(to_json(server.status(clock())).dump(), "application/json");
    });
    srv.Get(R"(/requests/(\d+))", [&server](const httplib::Request& req, httplib::Response& res) {
        auto r = server.request(std::uint32_t(std::stoul(req.matches[1])));
        if (!r) {
            res.status = 404;
            return;
        }
        res.set_content(to_json(*r).dump(), "application/json");
    });
}

// ---- line tailer ----

std::optional<UplinkMessage> LineTailer::parse_line(const std::string& raw) {
    std::string line = raw;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) return std::nullopt;
    return UplinkMessage{line.substr(0, tab), line.substr(tab + 1)};
}

std::vector<UplinkMessage> LineTailer::poll() {
    std::vector<UplinkMessage> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return out;
    in.seekg(0, std::ios::end);
    auto size = std::uint64_t(in.tellg());
    if (size < offset_) offset_ = 0;  // truncated or rotated
    in.seekg(std::streamoff(offset_));
    std::string chunk(size - offset_, '\0');
    in.read(chunk.data(), std::streamsize(chunk.size()));
    chunk.resize(std::size_t(in.gcount()));
    offset_ += chunk.size();
    partial_ += chunk;
    std::size_t pos;
    while ((pos = partial_.find('\n')) != std::string::npos) {
        if (auto m = parse_line(partial_.substr(0, pos))) out.push_back(*m);
        partial_.erase(0, pos + 1);
    }
    return out;
}

// ---- sinks ----

WavDirSink::WavDirSink(std::string dir, double gap_s) : dir_(std::move(dir)), gap_s_(gap_s) {
    std::filesystem::create_directories(dir_);
}

void WavDirSink::write(const modem::PcmChunk& pcm, const AirEvent& ev) {
    static const char* names[] = {"req", "keepalive", "hub"};
    char name[96];
    std::snprintf(name, sizeof name, "%015.3f_%s_%u.wav", ev.start, names[ev.kind], ev.id);
    auto path = (std::filesystem::path(dir_) / name).string();
    modem::PcmChunk out = pcm;
    pipeline::append(out, pipeline::silence(gap_s_, pcm.sample_rate));
    modem::write_wav(out, path);
    written_.push_back(path);
}

void PcmStreamSink::fill_to(double t) {
    if (written_until_ < 0) written_until_ = t;
    auto n = std::int64_t((t - written_until_) * rate_);
    if (n <= 0) return;
    std::vector<std::int16_t> zeros(std::size_t(std::min<std::int64_t>(n, rate_)), 0);
    for (std::int64_t left = n; left > 0;) {
        auto k = std::min<std::int64_t>(left, std::int64_t(zeros.size()));
        std::fwrite(zeros.data(), 2, std::size_t(k), out_);
        left -= k;
    }
    written_until_ += double(n) / rate_;
    std::fflush(out_);
}

void PcmStreamSink::write(const modem::PcmChunk& pcm, const AirEvent& ev) {
    fill_to(ev.start);
    // samples are written little-endian, the host order on every supported target
    std::fwrite(pcm.samples.data(), 2, pcm.samples.size(), out_);
    std::fflush(out_);
    written_until_ = std::max(written_until_, ev.start) + double(pcm.samples.size()) / rate_;
}

std::unique_ptr<AudioSink> make_sink(const std::string& spec, double gap_s) {
    if (spec == "stdout") return std::make_unique<PcmStreamSink>(stdout);
    if (spec.rfind("wav:", 0) == 0) return std::make_unique<WavDirSink>(spec.substr(4), gap_s);
    throw std::invalid_argument("audio sink must be 'stdout' or 'wav:<dir>', got '" + spec + "'");
}

// ---- live renderer ----

namespace {
std::string host_of(const std::string& normalized) {
    auto h = normalized.find("://") + 3;
    return normalized.substr(h, normalized.find('/', h) - h);
}
}  // namespace

LiveRenderer::LiveRenderer(render::Browser& browser, render::LlmClient& llm, std::size_t push_links,
                           std::size_t llm_cap)
    : browser_(browser), llm_(llm), push_links_(push_links), llm_cap_(llm_cap) {}

RenderOutput LiveRenderer::render(RequestKind kind, const std::string& subject, std::uint32_t id, double now) {
    RenderOutput out;
    if (kind == RequestKind::Gpt) {
        out.file = render::make_text_file(render::render_llm(subject, llm_, llm_cap_), "gpt " + subject, id,
                                          std::int64_t(now));
        return out;
    }
    auto cap = render::capture_page(subject, browser_);
    // only links that stay on the requested site are pushed
    std::vector<format::ClickMapEntry> internal;
    std::string host = host_of(normalize_url(subject));
    for (const auto& l : cap.links)
        if (host_of(normalize_url(l.target_url)) == host) internal.push_back(l);
    for (const auto& l : render::select_push_links(internal, push_links_)) out.push_links.push_back(l.target_url);
    out.file = render::make_webpage_file(cap, id, std::int64_t(now));
    return out;
}

}  // namespace sonic::server
