#pragma once

// Fixed-function baseline hasher: histogram reduced modulo a length-dependent
// power of two, compared by the maximum circular bin difference. The distance
// lower-bounds the edit distance when no bin wraps past the modulus.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>

#include "akash/bytes.hpp"
#include "akash/errors.hpp"
#include "akash/features.hpp"

namespace akash {

struct SahashDigest {
    std::array<std::uint32_t, kFeatureDim> reduced{};
    std::uint32_t modulus = 0;
    std::uint64_t file_length = 0;
};

// m = 2^max(8, ceil(log2(l)/2)). The exponent is the smallest t with 4^t >= l.
inline std::uint32_t sahash_modulus(std::uint64_t l) {
    if (l == 0) throw EmptyFileError();
    int t = 0;
    std::uint64_t p = 1;
    while (p < l) {
        p <<= 2;
        ++t;
    }
    if (t < 8) t = 8;
    return std::uint32_t(1) << t;
}

inline SahashDigest sahash_digest(const FeatureVector& x) {
    if (x.file_length == 0) throw EmptyFileError();
    SahashDigest d;
    d.modulus = sahash_modulus(x.file_length);
    d.file_length = x.file_length;
    for (std::size_t i = 0; i < kFeatureDim; ++i) d.reduced[i] = x.counts[i] % d.modulus;
    return d;
}

inline std::uint32_t sahash_distance(const SahashDigest& a, const SahashDigest& b) {
    if (a.modulus != b.modulus) throw IncompatibleDigestsError();
    const std::uint32_t m = a.modulus;
    std::uint32_t worst = 0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        std::uint32_t diff = a.reduced[i] > b.reduced[i] ? a.reduced[i] - b.reduced[i]
                                                         : b.reduced[i] - a.reduced[i];
        std::uint32_t circ = diff < m - diff ? diff : m - diff;
        if (circ > worst) worst = circ;
    }
    return worst;
}

struct ThresholdConfig {
    double tau_delta = 0.0;
    std::uint32_t tau_uneva = 80;
};

inline bool sahash_similar(std::uint32_t digest_dist, std::uint32_t uneva_dist,
                           std::uint32_t tau_digest, std::uint32_t tau_uneva) {
    return digest_dist <= tau_digest && uneva_dist <= tau_uneva;
}

inline std::string sahash_to_text(const SahashDigest& d) {
    std::array<std::uint8_t, kFeatureDim * 4> raw{};
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        raw[4 * i] = std::uint8_t(d.reduced[i]);
        raw[4 * i + 1] = std::uint8_t(d.reduced[i] >> 8);
        raw[4 * i + 2] = std::uint8_t(d.reduced[i] >> 16);
        raw[4 * i + 3] = std::uint8_t(d.reduced[i] >> 24);
    }
    return "sahash:v1:" + std::to_string(d.modulus) + ":" + base64_encode(raw.data(), raw.size());
}

inline SahashDigest sahash_from_text(const std::string& text) {
    const std::string prefix = "sahash:v1:";
    if (text.rfind(prefix, 0) != 0) throw FormatError("missing sahash:v1 prefix", 0);
    auto colon = text.find(':', prefix.size());
    if (colon == std::string::npos) throw FormatError("missing modulus separator", prefix.size());
    SahashDigest d;
    d.modulus = std::uint32_t(std::stoul(text.substr(prefix.size(), colon - prefix.size())));
    auto raw = base64_decode(text.substr(colon + 1));
    if (raw.size() != kFeatureDim * 4) throw FormatError("digest payload has wrong size", colon + 1);
    for (std::size_t i = 0; i < kFeatureDim; ++i)
        d.reduced[i] = std::uint32_t(raw[4 * i]) | (std::uint32_t(raw[4 * i + 1]) << 8) |
                       (std::uint32_t(raw[4 * i + 2]) << 16) | (std::uint32_t(raw[4 * i + 3]) << 24);
    return d;
}

}  // namespace akash
