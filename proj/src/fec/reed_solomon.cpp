// RS(255,223) over GF(2^8), conventional (not dual) basis.
// Field generator 0x187, first consecutive root 112, primitive element power 11.

#include <algorithm>
#include <array>
#include <cstring>
#include <stdexcept>

#include "sonic/fec.hpp"

namespace sonic::fec {

namespace {

constexpr int NN = kRsN;
constexpr int NROOTS = kRsParity;
constexpr int FCR = 112;
constexpr int PRIM = 11;
constexpr int A0 = NN;  // log of zero

struct Tables {
    std::array<std::uint8_t, 256> alpha_to{};
    std::array<std::uint8_t, 256> index_of{};
    std::array<std::uint8_t, NROOTS + 1> genpoly{};  // log form
    int iprim = 0;

    Tables() {
        int sr = 1;
        index_of[0] = A0;
        alpha_to[A0] = 0;
        for (int i = 0; i < NN; ++i) {
            index_of[sr] = static_cast<std::uint8_t>(i);
            alpha_to[i] = static_cast<std::uint8_t>(sr);
            sr <<= 1;
            if (sr & 256) sr ^= 0x187;
            sr &= 255;
        }
        for (iprim = 1; iprim % PRIM != 0; iprim += NN) {
        }
        iprim /= PRIM;

        std::array<int, NROOTS + 1> g{};
        g[0] = 1;
        for (int i = 0, root = FCR * PRIM; i < NROOTS; ++i, root += PRIM) {
            g[i + 1] = 1;
            for (int j = i; j > 0; --j) {
                if (g[j] != 0)
                    g[j] = g[j - 1] ^ alpha_to[modnn(index_of[g[j]] + root)];
                else
                    g[j] = g[j - 1];
            }
            g[0] = alpha_to[modnn(index_of[g[0]] + root)];
        }
        for (int i = 0; i <= NROOTS; ++i) genpoly[i] = index_of[g[i]];
    }

    static int modnn(int x) {
        while (x >= NN) {
            x -= NN;
            x = (x >> 8) + (x & NN);
        }
        return x;
    }
};

const Tables& T() {
    static const Tables t;
    return t;
}

inline int modnn(int x) { return Tables::modnn(x); }

}  // namespace

Bytes rs_parity(const std::uint8_t* data, std::size_t len) {
    if (len > static_cast<std::size_t>(kRsK)) throw std::invalid_argument("rs block longer than 223");
    const auto& t = T();
    Bytes parity(NROOTS, 0);
    for (std::size_t i = 0; i < len; ++i) {
        int feedback = t.index_of[data[i] ^ parity[0]];
        if (feedback != A0) {
            for (int j = 1; j < NROOTS; ++j)
                parity[j] ^= t.alpha_to[modnn(feedback + t.genpoly[NROOTS - j])];
        }
        std::memmove(parity.data(), parity.data() + 1, NROOTS - 1);
        parity[NROOTS - 1] = feedback != A0 ? t.alpha_to[modnn(feedback + t.genpoly[0])] : 0;
    }
    return parity;
}

int rs_correct(std::uint8_t* data, std::size_t len) {
    if (len <= static_cast<std::size_t>(NROOTS) || len > static_cast<std::size_t>(NN))
        throw std::invalid_argument("rs block length out of range");
    const auto& t = T();
    const int pad = NN - static_cast<int>(len);

    int s[NROOTS];
    for (int i = 0; i < NROOTS; ++i) s[i] = data[0];
    for (std::size_t j = 1; j < len; ++j)
        for (int i = 0; i < NROOTS; ++i)
            s[i] = s[i] == 0 ? data[j]
                             : data[j] ^ t.alpha_to[modnn(t.index_of[s[i]] + (FCR + i) * PRIM)];

    bool clean = true;
    for (int i = 0; i < NROOTS; ++i) {
        if (s[i]) clean = false;
        s[i] = t.index_of[s[i]];
    }
    if (clean) return 0;

    // Berlekamp-Massey
    int lambda[NROOTS + 1] = {}, b[NROOTS + 1], tt[NROOTS + 1];
    lambda[0] = 1;
    for (int i = 0; i <= NROOTS; ++i) b[i] = t.index_of[lambda[i]];
    int el = 0;
    for (int r = 1; r <= NROOTS; ++r) {
        int discr = 0;
        for (int i = 0; i < r; ++i)
            if (lambda[i] != 0 && s[r - i - 1] != A0)
                discr ^= t.alpha_to[modnn(t.index_of[lambda[i]] + s[r - i - 1])];
        discr = t.index_of[discr];
        if (discr == A0) {
            std::memmove(&b[1], b, NROOTS * sizeof(int));
            b[0] = A0;
            continue;
        }
        tt[0] = lambda[0];
        for (int i = 0; i < NROOTS; ++i)
            tt[i + 1] = b[i] != A0 ? lambda[i + 1] ^ t.alpha_to[modnn(discr + b[i])] : lambda[i + 1];
        if (2 * el <= r - 1) {
            el = r - el;
            for (int i = 0; i <= NROOTS; ++i)
                b[i] = lambda[i] == 0 ? A0 : modnn(t.index_of[lambda[i]] - discr + NN);
        } else {
            std::memmove(&b[1], b, NROOTS * sizeof(int));
            b[0] = A0;
        }
        std::memcpy(lambda, tt, sizeof(lambda));
    }

    int deg_lambda = 0;
    for (int i = 0; i <= NROOTS; ++i) {
        lambda[i] = t.index_of[lambda[i]];
        if (lambda[i] != A0) deg_lambda = i;
    }
    if (deg_lambda == 0) return -1;

    // Chien search
    int reg[NROOTS + 1], root[NROOTS], loc[NROOTS];
    std::memcpy(&reg[1], &lambda[1], NROOTS * sizeof(int));
    int count = 0;
    for (int i = 1, k = t.iprim - 1; i <= NN; ++i, k = modnn(k + t.iprim)) {
        int q = 1;
        for (int j = deg_lambda; j > 0; --j)
            if (reg[j] != A0) {
                reg[j] = modnn(reg[j] + j);
                q ^= t.alpha_to[reg[j]];
            }
        if (q != 0) continue;
        root[count] = i;
        loc[count] = k;
        if (++count == deg_lambda) break;
    }
    if (count != deg_lambda) return -1;

    // Forney
    int omega[NROOTS + 1];
    int deg_omega = deg_lambda - 1;
    for (int i = 0; i <= deg_omega; ++i) {
        int tmp = 0;
        for (int j = i; j >= 0; --j)
            if (s[i - j] != A0 && lambda[j] != A0) tmp ^= t.alpha_to[modnn(s[i - j] + lambda[j])];
        omega[i] = t.index_of[tmp];
    }
    int fixes[NROOTS];
    int fix_pos[NROOTS];
    int nfix = 0;
    for (int j = count - 1; j >= 0; --j) {
        int num1 = 0;
        for (int i = deg_omega; i >= 0; --i)
            if (omega[i] != A0) num1 ^= t.alpha_to[modnn(omega[i] + i * root[j])];
        int num2 = t.alpha_to[modnn(root[j] * (FCR - 1) + NN)];
        int den = 0;
        for (int i = std::min(deg_lambda, NROOTS - 1) & ~1; i >= 0; i -= 2)
            if (lambda[i + 1] != A0) den ^= t.alpha_to[modnn(lambda[i + 1] + i * root[j])];
        if (den == 0) return -1;
        if (num1 == 0) continue;
        if (loc[j] < pad) return -1;  // correction lands in the virtual zero padding
        fixes[nfix] = t.alpha_to[modnn(t.index_of[num1] + t.index_of[num2] + NN - t.index_of[den])];
        fix_pos[nfix++] = loc[j] - pad;
    }
    for (int i = 0; i < nfix; ++i) data[fix_pos[i]] ^= static_cast<std::uint8_t>(fixes[i]);
    return count;
}

std::size_t rs_encoded_size(std::size_t n) {
    return n + kRsParity * ((n + kRsK - 1) / kRsK);
}

Bytes rs_encode(const Bytes& data) {
    Bytes out;
    out.reserve(rs_encoded_size(data.size()));
    for (std::size_t off = 0; off < data.size(); off += kRsK) {
        std::size_t len = std::min<std::size_t>(kRsK, data.size() - off);
        out.insert(out.end(), data.begin() + off, data.begin() + off + len);
        Bytes p = rs_parity(data.data() + off, len);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::optional<RsDecoded> rs_decode(const Bytes& cw) {
    std::size_t blocks = (cw.size() + kRsN - 1) / kRsN;
    if (cw.size() != 0 && cw.size() - kRsParity * blocks < 1 + (blocks - 1) * kRsK)
        throw std::invalid_argument("rs codeword length inconsistent with block structure");
    RsDecoded out;
    out.data.reserve(cw.size());
    Bytes block;
    for (std::size_t off = 0; off < cw.size(); off += kRsN) {
        std::size_t len = std::min<std::size_t>(kRsN, cw.size() - off);
        block.assign(cw.begin() + off, cw.begin() + off + len);
        int c = rs_correct(block.data(), block.size());
        if (c < 0) return std::nullopt;
        out.corrected += c;
        out.data.insert(out.data.end(), block.begin(), block.end() - kRsParity);
    }
    return out;
}

}  // namespace sonic::fec
