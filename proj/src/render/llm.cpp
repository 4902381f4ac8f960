#include <cstdlib>
#include <random>

#include "sonic/render.hpp"

namespace sonic::render {

std::string truncate_utf8(const std::string& s, std::size_t cap) {
    if (s.size() <= cap) return s;
    std::size_t i = cap;
    // s[i] is the first byte dropped; if it continues a sequence, drop the lead too
    while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
    return s.substr(0, i);
}

std::string StubLlm::complete(const std::string& prompt) {
    std::string out = "Q: " + prompt + "\n";
    if (answer_bytes_ == 0) return out + "A: (stub) no model is configured.\n";
    static const char* words[] = {"the",   "water", "clinic",  "fever",     "rain",  "market",
                                  "price", "road",  "school",  "café",      "naïve", "→",
                                  "health", "local", "season", "treatment", "crop",  "news"};
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : prompt) h = (h ^ c) * 1099511628211ull;
    std::mt19937_64 rng(h);
    out += "A:";
    while (out.size() < answer_bytes_) {
        out += ' ';
        out += words[rng() % (sizeof words / sizeof *words)];
        if (rng() % 12 == 0) out += '.';
    }
    return truncate_utf8(out, answer_bytes_);
}

std::string render_llm(const std::string& prompt, LlmClient& llm, std::size_t cap) {
    return truncate_utf8(llm.complete(prompt), cap);
}

std::unique_ptr<LlmClient> make_llm(const std::string& spec, const std::string& key) {
    if (spec.empty() || spec == "stub") return std::make_unique<StubLlm>();
    if (spec.rfind("stub:", 0) == 0) return std::make_unique<StubLlm>(std::stoul(spec.substr(5)));
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        std::string k = key;
        if (k.empty())
            if (const char* e = std::getenv("SONIC_LLM_KEY")) k = e;
        return std::make_unique<HttpLlm>(spec, k);
    }
    throw RenderError(RenderErrc::InvalidInput, "llm must be 'stub', 'stub:<bytes>' or an http(s) url: " + spec);
}

}  // namespace sonic::render
