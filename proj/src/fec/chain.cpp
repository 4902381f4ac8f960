#include <stdexcept>

#include "sonic/fec.hpp"

namespace sonic::fec {

Inner parse_inner(const std::string& s) {
    if (s == "conv_r12_k9" || s == "v29") return Inner::ConvR12K9;
    if (s == "none") return Inner::None;
    throw std::invalid_argument("unknown inner code: " + s);
}

Outer parse_outer(const std::string& s) {
    if (s == "rs_255_223" || s == "rs8") return Outer::Rs255_223;
    if (s == "none") return Outer::None;
    throw std::invalid_argument("unknown outer code: " + s);
}

// Row-wise into depth x ceil(n/depth), read column-wise, skipping the unused
// cells of the last row.
Bytes interleave(const Bytes& data, int depth) {
    if (depth <= 1 || data.empty()) return data;
    std::size_t n = data.size();
    std::size_t cols = (n + depth - 1) / depth;
    Bytes out;
    out.reserve(n);
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < static_cast<std::size_t>(depth); ++r) {
            std::size_t idx = r * cols + c;
            if (idx < n) out.push_back(data[idx]);
        }
    return out;
}

Bytes deinterleave(const Bytes& data, int depth) {
    if (depth <= 1 || data.empty()) return data;
    std::size_t n = data.size();
    std::size_t cols = (n + depth - 1) / depth;
    Bytes out(n);
    std::size_t k = 0;
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < static_cast<std::size_t>(depth); ++r) {
            std::size_t idx = r * cols + c;
            if (idx < n) out[idx] = data[k++];
        }
    return out;
}

std::size_t protected_size(std::size_t n, const FecConfig& cfg) {
    std::size_t m = cfg.outer == Outer::Rs255_223 ? rs_encoded_size(n) : n;
    return cfg.inner == Inner::ConvR12K9 ? 2 * m + 2 : m;
}

Bytes protect(const Bytes& frame_bytes, const FecConfig& cfg) {
    Bytes x = cfg.outer == Outer::Rs255_223 ? rs_encode(frame_bytes) : frame_bytes;
    x = interleave(x, cfg.interleaver_depth);
    if (cfg.inner == Inner::ConvR12K9) x = pack_bits(conv_encode(unpack_bits(x)));
    return x;
}

namespace {

// Outer length m -> payload length n, or -1 when no n encodes to m.
long outer_inverse(std::size_t m) {
    if (m == 0) return 0;
    std::size_t blocks = (m + kRsN - 1) / kRsN;
    if (m < blocks * kRsParity) return -1;
    std::size_t n = m - blocks * kRsParity;
    return rs_encoded_size(n) == m ? static_cast<long>(n) : -1;
}

}  // namespace

std::optional<Bytes> recover_bytes(const Bytes& ch, const FecConfig& cfg) {
    Bytes x;
    if (cfg.inner == Inner::ConvR12K9) {
        if (ch.size() < 2 || ch.size() % 2 != 0) return std::nullopt;
        x = pack_bits(viterbi_decode(unpack_bits(ch)));
    } else {
        x = ch;
    }
    x = deinterleave(x, cfg.interleaver_depth);
    if (cfg.outer == Outer::Rs255_223) {
        if (outer_inverse(x.size()) < 0) return std::nullopt;
        auto d = rs_decode(x);
        if (!d) return std::nullopt;
        return std::move(d->data);
    }
    return x;
}

std::optional<format::Frame> recover_frame(const Bytes& ch, const FecConfig& cfg) {
    auto b = recover_bytes(ch, cfg);
    if (!b) return std::nullopt;
    try {
        auto f = format::parse_frame(*b);
        if (b->size() != format::kFrameOverhead + f.payload.size()) return std::nullopt;
        return f;
    } catch (const format::FormatError&) {
        return std::nullopt;
    }
}

}  // namespace sonic::fec
