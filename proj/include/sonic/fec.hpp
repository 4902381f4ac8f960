#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sonic/format.hpp"

namespace sonic::fec {

using Bytes = std::vector<std::uint8_t>;
using Bits = std::vector<std::uint8_t>;  // one bit (0/1) per element

enum class Inner { ConvR12K9, None };
enum class Outer { Rs255_223, None };

struct FecConfig {
    Inner inner = Inner::ConvR12K9;
    Outer outer = Outer::Rs255_223;
    int interleaver_depth = 4;
};

Inner parse_inner(const std::string& s);
Outer parse_outer(const std::string& s);

// ---- Reed-Solomon (255,223), GF(2^8) poly 0x187, fcr 112, prim 11 ----
inline constexpr int kRsN = 255;
inline constexpr int kRsK = 223;
inline constexpr int kRsParity = 32;

std::size_t rs_encoded_size(std::size_t n);
Bytes rs_encode(const Bytes& data);

struct RsDecoded {
    Bytes data;
    int corrected = 0;
};

// nullopt is DECODE_FAILURE. Throws std::invalid_argument on an impossible length.
std::optional<RsDecoded> rs_decode(const Bytes& codeword);

// Single shortened block: data.size() <= 223. Returns 32 parity bytes.
Bytes rs_parity(const std::uint8_t* data, std::size_t len);
// Corrects block in place (len includes the 32 parity bytes). -1 on failure.
int rs_correct(std::uint8_t* block, std::size_t len);

// ---- convolutional code, K=9 rate 1/2, polynomials 0x1af / 0x11d ----
inline constexpr int kConvK = 9;
inline constexpr unsigned kPolyA = 0x1af;
inline constexpr unsigned kPolyB = 0x11d;

Bits conv_encode(const Bits& bits);
// Hard-decision, zero-terminated. Input length must be even and >= 16.
Bits viterbi_decode(const Bits& bits);

// ---- block interleaver ----
Bytes interleave(const Bytes& data, int depth);
Bytes deinterleave(const Bytes& data, int depth);

Bits unpack_bits(const Bytes& bytes);  // MSB first
Bytes pack_bits(const Bits& bits);     // MSB first, zero padded

// ---- full chain ----
std::size_t protected_size(std::size_t n, const FecConfig& cfg = {});
Bytes protect(const Bytes& frame_bytes, const FecConfig& cfg = {});
// Inverse of protect; nullopt when the outer code gives up or the length is inconsistent.
std::optional<Bytes> recover_bytes(const Bytes& channel_bytes, const FecConfig& cfg = {});
// recover_bytes followed by frame parsing; nullopt (LOSS) on any failure including CRC.
std::optional<format::Frame> recover_frame(const Bytes& channel_bytes, const FecConfig& cfg = {});

}  // namespace sonic::fec
