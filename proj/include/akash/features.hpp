#pragma once

// Byte-level feature extraction: the 512-bin double histogram (raw bytes
// concatenated with circularly shifted bytes), the uneva repeat statistic,
// and the log squashing applied before the kernel map.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "akash/bytes.hpp"
#include "akash/errors.hpp"

namespace akash {

inline constexpr std::size_t kFeatureDim = 512;

struct FeatureVector {
    std::array<std::uint32_t, kFeatureDim> counts{};
    std::uint64_t file_length = 0;
};

// Per byte value, the number of adjacent repeated occurrences.
struct UnevaVector {
    std::array<std::uint32_t, 256> runs{};
};

inline std::uint8_t rotate_right(std::uint8_t b, int bits) {
    return std::uint8_t(((b >> bits) | (b << (8 - bits))) & 0xff);
}

inline FeatureVector extract_features(const FileBytes& f, int shift_bits = 4) {
    if (f.empty()) throw EmptyFileError();
    if (shift_bits < 1 || shift_bits > 7)
        throw RangeError("shift_bits must be in [1,7]");
    FeatureVector x;
    x.file_length = f.size();
    for (std::uint8_t b : f) {
        ++x.counts[b];
        ++x.counts[256 + rotate_right(b, shift_bits)];
    }
    return x;
}

inline UnevaVector compute_uneva(const FileBytes& f) {
    if (f.empty()) throw EmptyFileError();
    UnevaVector u;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (f[i] == f[i - 1]) ++u.runs[f[i]];
    return u;
}

inline std::uint32_t uneva_distance(const UnevaVector& a, const UnevaVector& b) {
    std::uint32_t d = 0;
    for (int v = 0; v < 256; ++v) {
        std::uint32_t diff = a.runs[v] > b.runs[v] ? a.runs[v] - b.runs[v]
                                                   : b.runs[v] - a.runs[v];
        if (diff > d) d = diff;
    }
    return d;
}

// ln(1+count) squashing; raw counts scale with file size and would overflow
// the exp/cos arguments of the kernel map.
inline std::vector<double> transform_counts(const FeatureVector& x) {
    std::vector<double> out(kFeatureDim);
    for (std::size_t i = 0; i < kFeatureDim; ++i)
        out[i] = std::log1p(double(x.counts[i]));
    return out;
}

// Fixed kernel bandwidth for byte-histogram inputs. Unit-bandwidth random
// Fourier features are only sensitive to distances of order 1; log-count
// vectors of small perturbations sit within a few units of each other while
// unrelated files are tens of units apart, so dividing by this constant puts
// perturbed pairs inside the kernel's sensitive range and unrelated files
// outside it.
inline constexpr double kInputBandwidth = 4.0;

// Standard network input row for a file: squashed histogram divided by the
// kernel bandwidth. Used identically at training and digest time.
inline std::vector<double> input_row(const FileBytes& f, int shift_bits = 4) {
    auto z = transform_counts(extract_features(f, shift_bits));
    for (auto& v : z) v /= kInputBandwidth;
    return z;
}

}  // namespace akash
