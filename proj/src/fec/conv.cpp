#include <algorithm>
#include <array>
#include <stdexcept>

#include "sonic/fec.hpp"

namespace sonic::fec {

namespace {

constexpr int kStates = 256;

inline unsigned parity(unsigned x) { return __builtin_parity(x); }

// Two output bits for a 9-bit register value, A in bit 1, B in bit 0.
struct SymTable {
    std::array<std::uint8_t, 512> sym{};
    SymTable() {
        for (unsigned r = 0; r < 512; ++r) sym[r] = (parity(r & kPolyA) << 1) | parity(r & kPolyB);
    }
};

const SymTable& syms() {
    static const SymTable t;
    return t;
}

}  // namespace

Bits conv_encode(const Bits& bits) {
    const auto& t = syms();
    Bits out;
    out.reserve(2 * (bits.size() + kConvK - 1));
    unsigned sr = 0;
    auto push = [&](unsigned b) {
        sr = ((sr << 1) | (b & 1)) & 0x1ff;
        std::uint8_t s = t.sym[sr];
        out.push_back(s >> 1);
        out.push_back(s & 1);
    };
    for (auto b : bits) push(b);
    for (int i = 0; i < kConvK - 1; ++i) push(0);
    return out;
}

// Both generators tap the newest and the oldest register bit, so flipping
// either end of the register inverts both outputs. The two branches entering
// a state pair therefore carry complementary symbols and one metric covers a
// whole butterfly. Loops are kept branch-free so they vectorise.
Bits viterbi_decode(const Bits& in) {
    if (in.size() % 2 != 0) throw std::invalid_argument("viterbi input length must be even");
    std::size_t steps = in.size() / 2;
    if (steps < static_cast<std::size_t>(kConvK - 1))
        throw std::invalid_argument("viterbi input shorter than the tail");
    const auto& t = syms();
    constexpr int H = kStates / 2;

    // branch metric of the butterfly's "s" branch for each received symbol
    alignas(32) std::uint16_t bm[4][H];
    for (unsigned rx = 0; rx < 4; ++rx)
        for (int i = 0; i < H; ++i) bm[rx][i] = __builtin_popcount(t.sym[2 * i] ^ rx);

    alignas(32) std::uint16_t cur[kStates], ev[H], od[H];
    std::fill(cur, cur + kStates, std::uint16_t(1000));  // unreachable start states
    cur[0] = 0;
    std::vector<std::uint8_t> dec(steps * kStates);

    for (std::size_t k = 0; k < steps; ++k) {
        const std::uint16_t* m = bm[(in[2 * k] << 1) | in[2 * k + 1]];
        std::uint8_t* de = &dec[k * kStates];
        std::uint8_t* dodd = de + H;
        for (int i = 0; i < H; ++i) {
            std::uint16_t a = cur[i], b = cur[i + H];
            std::uint16_t s = m[i], c = 2 - m[i];
            std::uint16_t x0 = a + s, x1 = b + c, y0 = a + c, y1 = b + s;
            de[i] = x1 < x0;
            dodd[i] = y1 < y0;
            ev[i] = x1 < x0 ? x1 : x0;
            od[i] = y1 < y0 ? y1 : y0;
        }
        for (int i = 0; i < H; ++i) {
            cur[2 * i] = ev[i];
            cur[2 * i + 1] = od[i];
        }
        if ((k & 1023) == 1023) {
            std::uint16_t mn = *std::min_element(cur, cur + kStates);
            for (int i = 0; i < kStates; ++i) cur[i] -= mn;
        }
    }

    // trace back from the zero state; decisions for state 2i / 2i+1 sit at i / H+i
    Bits out(steps);
    unsigned state = 0;
    for (std::size_t k = steps; k-- > 0;) {
        out[k] = state & 1;
        bool d = dec[k * kStates + (state & 1) * H + (state >> 1)];
        state = (state >> 1) | (d ? 128u : 0u);
    }
    out.resize(steps - (kConvK - 1));
    return out;
}

Bits unpack_bits(const Bytes& bytes) {
    Bits out(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        for (int b = 0; b < 8; ++b) out[8 * i + b] = (bytes[i] >> (7 - b)) & 1;
    return out;
}

Bytes pack_bits(const Bits& bits) {
    Bytes out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out[i / 8] |= 0x80 >> (i % 8);
    return out;
}

}  // namespace sonic::fec
