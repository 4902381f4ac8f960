#include <doctest.h>

#include <algorithm>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gen.hpp"
#include "sonic/channel.hpp"
#include "sonic/client.hpp"

using namespace sonic;
using namespace sonic::client;
using sonic::testing::Gen;
using nlohmann::json;

namespace {

// Direct restatement of the fill rule: the nearest received pixel on the left,
// else the filled pixel above, else mid-grey.
std::array<std::uint8_t, 3> oracle_px(const Raster& img, const MissingMask& m, int x, int y) {
    if (!m.at(x, y)) return {img.px(x, y)[0], img.px(x, y)[1], img.px(x, y)[2]};
    for (int xl = x - 1; xl >= 0; --xl)
        if (!m.at(xl, y)) return {img.px(xl, y)[0], img.px(xl, y)[1], img.px(xl, y)[2]};
    if (y > 0) return oracle_px(img, m, x, y - 1);
    return {128, 128, 128};
}

Raster random_raster(Gen& g, int w, int h) {
    Raster r(w, h);
    for (auto& v : r.rgb) v = std::uint8_t(g.next());
    return r;
}

format::SonicFile page_file(const std::string& url = "https://news.example/", std::uint32_t id = 7) {
    render::SyntheticBrowser b;
    return render::make_webpage_file(render::capture_page(url, b), id, 1700000000);
}

std::vector<format::Frame> drop(const std::vector<format::Frame>& fs, const std::vector<bool>& keep) {
    std::vector<format::Frame> out;
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (keep[i]) out.push_back(fs[i]);
    return out;
}

struct Served {
    httplib::Server srv;
    int port = 0;
    std::thread t;
    void start() {
        port = srv.bind_to_any_port("127.0.0.1");
        t = std::thread([this] { srv.listen_after_bind(); });
        srv.wait_until_ready();
    }
    ~Served() {
        srv.stop();
        if (t.joinable()) t.join();
    }
};

}  // namespace

TEST_CASE("conceal matches the fill rule on every 4x4 mask") {
    Gen g(11);
    Raster img = random_raster(g, 4, 4);
    for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
        MissingMask m(4, 4);
        for (int i = 0; i < 16; ++i) m.bits[i] = (bits >> i) & 1;
        Raster out = conceal(img, m);
        bool ok = true;
        for (int y = 0; y < 4 && ok; ++y)
            for (int x = 0; x < 4 && ok; ++x) {
                auto e = oracle_px(img, m, x, y);
                ok = std::equal(e.begin(), e.end(), out.px(x, y));
            }
        if (!ok) FAIL("mismatch for mask " << bits);
    }
}

TEST_CASE("conceal properties on random rasters") {
    Gen g(5);
    for (int iter = 0; iter < 200; ++iter) {
        int w = int(g.range(1, 40)), h = int(g.range(1, 30));
        Raster img = random_raster(g, w, h);
        MissingMask m(w, h);
        double p = g.uniform();
        for (auto& b : m.bits) b = g.coin(p);
        Raster out = conceal(img, m);
        // received pixels untouched
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (!m.at(x, y)) REQUIRE(std::equal(out.px(x, y), out.px(x, y) + 3, img.px(x, y)));
        // idempotent
        REQUIRE(conceal(out, MissingMask(w, h)).rgb == out.rgb);
        // filling again with the same mask changes nothing either
        REQUIRE(conceal(out, m).rgb == out.rgb);
    }
}

TEST_CASE("conceal examples") {
    Raster r(3, 1);
    std::uint8_t A[3] = {10, 20, 30}, C[3] = {200, 100, 50};
    std::copy(A, A + 3, r.px(0, 0));
    std::copy(C, C + 3, r.px(2, 0));
    MissingMask m(3, 1);
    m.set(1, 0);
    auto out = conceal(r, m);
    CHECK(std::equal(A, A + 3, out.px(1, 0)));
    CHECK(std::equal(C, C + 3, out.px(2, 0)));

    CHECK(conceal(r, MissingMask(3, 1)).rgb == r.rgb);

    // a lost band replicates the last received row
    Gen g(3);
    Raster img = random_raster(g, 8, 6);
    MissingMask band(8, 6);
    for (int y = 2; y < 5; ++y)
        for (int x = 0; x < 8; ++x) band.set(x, y);
    auto filled = conceal(img, band);
    for (int y = 2; y < 5; ++y)
        for (int x = 0; x < 8; ++x) CHECK(std::equal(filled.px(x, y), filled.px(x, y) + 3, img.px(x, 1)));

    // whole image lost: mid-grey everywhere
    auto grey = conceal(img, MissingMask(8, 6, true));
    CHECK(std::all_of(grey.rgb.begin(), grey.rgb.end(), [](std::uint8_t v) { return v == 128; }));
    CHECK_THROWS_AS(conceal(img, MissingMask(7, 6)), std::invalid_argument);
}

TEST_CASE("map_click scales taps by screen width") {
    std::vector<ClickMapEntry> links = {{10, 100, 50, 20, "https://a.example/"},
                                        {40, 110, 50, 20, "https://b.example/"},
                                        {200, 300, 30, 10, "https://c.example/"}};
    CHECK(map_click(links, 20, 105, 320) == std::optional<std::string>("https://a.example/"));
    CHECK(map_click(links, 40, 210, 640) == std::optional<std::string>("https://a.example/"));
    // overlap: smaller y wins
    CHECK(map_click(links, 45, 115, 320) == std::optional<std::string>("https://a.example/"));
    CHECK(map_click(links, 80, 125, 320) == std::optional<std::string>("https://b.example/"));
    CHECK_FALSE(map_click(links, 5, 5, 320));
    CHECK_FALSE(map_click(links, 20, 105, 0));

    // the same logical tap resolves identically at any width
    Gen g(9);
    for (int i = 0; i < 2000; ++i) {
        double x = double(g.range(0, 319)) + 0.5, y = double(g.range(0, 400)) + 0.5;
        double w = double(g.range(200, 1600));
        CHECK(map_click(links, x, y, 320) == map_click(links, x * w / 320, y * w / 320, w));
    }
}

TEST_CASE("completion classes") {
    ReceivedItem it;
    it.meta.content_type = format::ContentType::LlmText;
    it.loss_percent = 0;
    CHECK(classify_completion(it) == Completion::Complete);
    it.loss_percent = 12.5;  // one frame of eight
    CHECK(classify_completion(it) == Completion::Failed);
    it.meta.content_type = format::ContentType::Webpage;
    it.loss_percent = 10;
    CHECK(classify_completion(it) == Completion::PartialViewable);
    it.loss_percent = 50;
    CHECK(classify_completion(it) == Completion::PartialViewable);
    it.loss_percent = 50.1;
    CHECK(classify_completion(it) == Completion::Failed);
    CHECK(classify_completion(it, 60) == Completion::PartialViewable);
    it.loss_percent = 0;
    CHECK(classify_completion(it) == Completion::Complete);
    CHECK(std::string(to_string(Completion::PartialViewable)) == "PARTIAL_VIEWABLE");
}

TEST_CASE("assemble from frames") {
    auto file = page_file();
    auto frames = format::file_frames(file);
    auto k = format::metadata_frame_count(file);

    SUBCASE("all frames") {
        auto it = assemble(frames, 100);
        REQUIRE(it);
        CHECK(it->meta == file.meta);
        CHECK(it->links == file.links);
        CHECK(it->complete);
        CHECK(it->status == Completion::Complete);
        CHECK(it->pixel_loss_percent == 0.0);
        render::StripSet s{file.meta.strip_height, file.meta.codec, {}};
        std::size_t off = 0;
        for (auto n : file.meta.strip_sizes) {
            s.strips.emplace_back(file.payload.begin() + off, file.payload.begin() + off + n);
            off += n;
        }
        CHECK(it->image.rgb == render::decompress_strips(s, file.meta.image_width, file.meta.image_height).rgb);
    }
    SUBCASE("shuffled with duplicates") {
        auto f2 = frames;
        f2.insert(f2.end(), frames.begin(), frames.begin() + 3);
        std::reverse(f2.begin(), f2.end());
        auto it = assemble(f2, 100);
        REQUIRE(it);
        CHECK(it->complete);
    }
    SUBCASE("metadata loss cannot be attributed") {
        auto f2 = frames;
        f2.erase(f2.begin());
        CHECK_FALSE(assemble(f2, 100));
        if (k > 1) {
            f2 = frames;
            f2.erase(f2.begin() + k - 1);
            CHECK_FALSE(assemble(f2, 100));
        }
    }
    SUBCASE("one payload frame lost masks its strips") {
        auto f2 = frames;
        f2.erase(f2.begin() + k + 1);
        auto it = assemble(f2, 100);
        REQUIRE(it);
        CHECK_FALSE(it->complete);
        CHECK(it->loss_percent > 0);
        CHECK(it->pixel_loss_percent > 0);
        CHECK(it->pixel_loss_percent < 100);
        CHECK(it->status == Completion::PartialViewable);
    }
    SUBCASE("text item") {
        auto tf = render::make_text_file(std::string(1800, 'x') + "end", "gpt what is malaria", 9, 5);
        auto tfr = format::file_frames(tf);
        auto it = assemble(tfr, 1);
        REQUIRE(it);
        CHECK(it->text == std::string(tf.payload.begin(), tf.payload.end()));
        CHECK(it->status == Completion::Complete);
        tfr.pop_back();
        it = assemble(tfr, 1);
        REQUIRE(it);
        CHECK(it->status == Completion::Failed);
    }
}

TEST_CASE("loss accounting agrees with reassemble") {
    auto file = page_file("https://joint.example/", 3);
    auto frames = format::file_frames(file);
    auto k = format::metadata_frame_count(file);
    Gen g(21);
    for (int iter = 0; iter < 60; ++iter) {
        std::vector<bool> keep(frames.size());
        double p = g.uniform() * 0.6;
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i < k || !g.coin(p);
        auto sub = drop(frames, keep);
        auto it = assemble(sub, 0);
        REQUIRE(it);
        std::vector<format::Frame> payload(sub.begin() + k, sub.end());
        auto r = format::reassemble(file.meta, payload, k);
        CHECK(it->loss_percent == r.loss_percent);
        CHECK(it->complete == (r.loss_percent == 0.0));
    }
}

TEST_CASE("loss at -85 dBm stays low") {
    auto file = page_file("https://radio.example/", 4);
    auto frames = format::file_frames(file);
    std::vector<double> losses;
    int unattributed = 0;
    for (std::uint64_t seed = 0; seed < 41; ++seed) {
        auto keep = channel::survival_mask(frames.size(), {-85.0, seed, 2.0});
        auto it = assemble(drop(frames, keep), 0);
        if (!it) {
            ++unattributed;
            continue;
        }
        losses.push_back(it->loss_percent);
    }
    REQUIRE(losses.size() > 30);
    std::nth_element(losses.begin(), losses.begin() + losses.size() / 2, losses.end());
    CHECK(losses[losses.size() / 2] < 20.0);
    CHECK(unattributed < 5);
}

TEST_CASE("url pages survive loss better than text answers") {
    auto page = format::file_frames(page_file("https://resilience.example/", 1));
    auto text = format::file_frames(render::make_text_file(std::string(3000, 'a'), "gpt q", 2, 0));
    for (double rssi : {-88.0, -90.0, -92.0}) {
        int page_ok = 0, text_ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            channel::ChannelConditions c{rssi, seed, 2.0};
            auto a = assemble(drop(page, channel::survival_mask(page.size(), c)), 0);
            auto b = assemble(drop(text, channel::survival_mask(text.size(), c)), 0);
            page_ok += a && a->status != Completion::Failed;
            text_ok += b && b->status != Completion::Failed;
        }
        CAPTURE(rssi);
        CHECK(page_ok >= text_ok);
    }
}

TEST_CASE("receiver: clean audio round trip") {
    std::int64_t t = 1000;
    Receiver rx({.clock = [&] { return t; }});
    auto tf = render::make_text_file("the quick brown fox jumps over the lazy dog", "gpt fox", 42, 77);
    auto pcm = pipeline::file_audio(tf);
    pipeline::append(pcm, pipeline::silence(0.5));
    auto items = rx.push(pcm);
    CHECK(items.empty());  // still inside the silence window
    auto more = rx.push(pipeline::silence(3.5));
    REQUIRE(more.size() == 1);
    CHECK(more[0].text == "the quick brown fox jumps over the lazy dog");
    CHECK(more[0].meta == tf.meta);
    CHECK(more[0].status == Completion::Complete);
    CHECK(more[0].received_at == 1000);
    CHECK(rx.finish().empty());
    CHECK(rx.stats().items == 1);
    CHECK(rx.stats().frames_lost == 0);
}

TEST_CASE("receiver: back-to-back transmissions split on sequence restart") {
    Receiver rx;
    auto a = render::make_text_file("first answer", "gpt a", 1, 0);
    auto b = render::make_text_file("second answer", "gpt b", 2, 0);
    auto pcm = pipeline::file_audio(a);
    pipeline::append(pcm, pipeline::file_audio(b));
    auto items = rx.push(pcm);
    auto rest = rx.finish();
    items.insert(items.end(), rest.begin(), rest.end());
    REQUIRE(items.size() == 2);
    CHECK(items[0].text == "first answer");
    CHECK(items[1].text == "second answer");
}

TEST_CASE("receiver: keepalives close a transmission and mark the server online") {
    std::int64_t t = 500;
    Receiver rx({.clock = [&] { return t; }});
    CHECK_FALSE(rx.online(t));
    auto ka = pipeline::frame_audio(format::keepalive_frame());
    auto pcm = ka;
    pipeline::append(pcm, pipeline::silence(0.2));
    pipeline::append(pcm, ka);
    CHECK(rx.push(pcm).empty());
    CHECK(rx.finish().empty());
    CHECK(rx.stats().keepalives == 2);
    CHECK(rx.stats().items == 0);
    CHECK(rx.online(t));
    CHECK(rx.online(t + 15));
    CHECK_FALSE(rx.online(t + 16));

    Receiver rx2;
    auto tf = render::make_text_file("answer", "gpt x", 3, 0);
    auto p2 = pipeline::file_audio(tf);
    pipeline::append(p2, ka);
    auto items = rx2.push(p2);
    REQUIRE(items.size() == 1);  // closed by the keepalive, not by silence
    CHECK(items[0].text == "answer");
}

TEST_CASE("receiver: chunking does not change the result") {
    auto tf = render::make_text_file("chunked delivery works", "gpt c", 5, 0);
    auto pcm = pipeline::file_audio(tf);
    pipeline::append(pcm, pipeline::silence(4));
    Gen g(2);
    for (int iter = 0; iter < 3; ++iter) {
        Receiver rx;
        std::vector<ReceivedItem> items;
        std::size_t pos = 0;
        while (pos < pcm.samples.size()) {
            std::size_t n = std::min<std::size_t>(pcm.samples.size() - pos, std::size_t(g.range(1, 20000)));
            auto got = rx.push(pcm.samples.data() + pos, n);
            items.insert(items.end(), got.begin(), got.end());
            pos += n;
        }
        REQUIRE(items.size() == 1);
        CHECK(items[0].text == "chunked delivery works");
    }
}

TEST_CASE("receiver: lost metadata is counted, not emitted") {
    auto tf = render::make_text_file(std::string(900, 'z'), "gpt m", 6, 0);
    auto frames = format::file_frames(tf);
    modem::PcmChunk pcm;
    pcm.sample_rate = 44100;
    // a burst whose bytes are garbage stands in for the lost first frame
    Gen g(4);
    auto garbage = fec::protect(format::serialize_frame(frames[0]));
    for (auto& b : garbage) b = std::uint8_t(g.next());
    pipeline::append(pcm, modem::modulate(garbage));
    for (std::size_t i = 1; i < frames.size(); ++i) pipeline::append(pcm, pipeline::frame_audio(frames[i]));
    Receiver rx;
    auto items = rx.push(pcm);
    auto rest = rx.finish();
    CHECK(items.empty());
    CHECK(rest.empty());
    CHECK(rx.stats().frames_lost == 1);
    CHECK(rx.stats().unattributed == 1);
}

TEST_CASE("store keeps, bumps and evicts") {
    ItemStore st;
    auto tf = render::make_text_file("hello", "gpt hi", 1, 0);
    auto it = assemble(format::file_frames(tf), 1000);
    REQUIRE(it);
    auto id = st.store(*it);
    CHECK(st.size() == 1);

    // accessed at t, evict at t+23h: retained
    auto got = st.get_item(id, 5000);
    REQUIRE(got);
    CHECK(got->text == "hello");
    CHECK(got->last_accessed == 5000);
    CHECK(st.evict(5000 + 23 * 3600) == 0);
    // get bumps last_accessed
    st.get_item(id, 5000 + 23 * 3600);
    CHECK(st.evict(5000 + 46 * 3600) == 0);
    CHECK(st.list_items().at(0).last_accessed == 5000 + 23 * 3600);

    // never accessed: gone 25h after arrival
    auto id2 = st.store(*it);
    CHECK(st.evict(1000 + 25 * 3600) == 1);
    CHECK_FALSE(st.get_item(id2, 0));
    CHECK(st.size() == 1);

    auto page = assemble(format::file_frames(page_file()), 10);
    REQUIRE(page);
    auto pid = st.store(*page);
    auto back = st.get_item(pid, 10);
    REQUIRE(back);
    CHECK(back->image.rgb == page->image.rgb);
    CHECK(back->links == page->links);
    CHECK(back->meta == page->meta);
    auto png = st.image_png(pid, 10);
    REQUIRE(png);
    CHECK(render::decode_png(*png).rgb == page->image.rgb);
    CHECK_FALSE(st.image_png(id, 10));  // text item has no image
}

TEST_CASE("store persists to a file") {
    auto path = std::string("/tmp/sonic_store_test.db");
    std::remove(path.c_str());
    auto it = assemble(format::file_frames(render::make_text_file("kept", "gpt k", 1, 0)), 3);
    REQUIRE(it);
    std::int64_t id;
    {
        ItemStore st(path);
        id = st.store(*it);
    }
    ItemStore st(path);
    auto got = st.get_item(id, 4);
    REQUIRE(got);
    CHECK(got->text == "kept");
    std::remove(path.c_str());
}

TEST_CASE("local api") {
    std::int64_t now = 10000;
    ItemStore st;
    SharedState state;

    // fake head-end uplink
    Served up;
    json last_uplink;
    up.srv.Post("/uplink", [&](const httplib::Request& req, httplib::Response& res) {
        last_uplink = json::parse(req.body);
        res.set_content(R"({"accepted":true,"id":17})", "application/json");
    });
    up.start();

    Served api;
    install_api(api.srv, st, state,
                {.uplink_url = "http://127.0.0.1:" + std::to_string(up.port), .sender_id = "+256700000001",
                 .clock = [&] { return now; }});
    api.start();
    httplib::Client cli("127.0.0.1", api.port);

    auto page = assemble(format::file_frames(page_file()), now);
    REQUIRE(page);
    REQUIRE_FALSE(page->links.empty());
    auto pid = st.store(*page);
    auto hub_text = json{{"entries", json::array({{{"subject", "https://bbc.co.uk/"}, {"count", 5}}})}}.dump();
    auto hub = assemble(format::file_frames(render::make_text_file(hub_text, format::kHubSource, 0, now)), now);
    st.store(*hub);

    auto r = cli.Get("/items");
    REQUIRE(r);
    auto items = json::parse(r->body);
    CHECK(items.size() == 2);

    r = cli.Get("/items/" + std::to_string(pid) + "/meta");
    REQUIRE(r);
    CHECK(r->status == 200);
    auto meta = json::parse(r->body);
    CHECK(meta["status"] == "COMPLETE");
    CHECK(meta["links"].size() == page->links.size());

    r = cli.Get("/items/" + std::to_string(pid) + "/image");
    REQUIRE(r);
    CHECK(r->get_header_value("Content-Type") == "image/png");
    CHECK(render::decode_png(format::Bytes(r->body.begin(), r->body.end())).rgb == page->image.rgb);
    CHECK(cli.Get("/items/999/meta")->status == 404);

    const auto& l = page->links[0];
    json click = {{"id", pid}, {"x", (l.x + 1) * 2}, {"y", (l.y + 1) * 2}, {"screen_width", 640}};
    r = cli.Post("/click", click.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["target"] == map_click(page->links, l.x + 1, l.y + 1, 320).value());
    click = {{"id", pid}, {"x", 1}, {"y", 99999}, {"screen_width", 320}};
    CHECK(json::parse(cli.Post("/click", click.dump(), "application/json")->body)["target"].is_null());
    CHECK(cli.Post("/click", "nonsense", "application/json")->status == 400);

    r = cli.Post("/request", R"({"body":"url bbc.co.uk"})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(last_uplink["sender"] == "+256700000001");
    CHECK(last_uplink["body"] == "url bbc.co.uk");

    CHECK(json::parse(cli.Get("/online")->body)["online"] == false);
    state.last_keepalive = now - 3;
    CHECK(json::parse(cli.Get("/online")->body)["online"] == true);
    now += 20;
    CHECK(json::parse(cli.Get("/online")->body)["online"] == false);

    r = cli.Get("/hub");
    REQUIRE(r);
    CHECK(json::parse(r->body)["entries"].size() == 1);
}

TEST_CASE("request fails cleanly when the uplink is down") {
    ItemStore st;
    SharedState state;
    Served api;
    install_api(api.srv, st, state, {.uplink_url = "http://127.0.0.1:1"});
    api.start();
    httplib::Client cli("127.0.0.1", api.port);
    auto r = cli.Post("/request", R"({"body":"url x.org"})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 502);
    CHECK(json::parse(r->body)["error"] == "UPLINK_UNREACHABLE");
    CHECK(json::parse(cli.Get("/hub")->body)["entries"].empty());
}
