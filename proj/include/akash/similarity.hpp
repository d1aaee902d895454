#pragma once

// Digest construction and pair scoring. The score is the equilibrium utility
// of the minimax game, symmetrized over both orderings, gated by the uneva
// distance to suppress false positives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "akash/errors.hpp"
#include "akash/features.hpp"
#include "akash/matrix.hpp"
#include "akash/model.hpp"
#include "akash/sahash.hpp"  // ThresholdConfig
#include "akash/serialize.hpp"

namespace akash {

struct Digest {
    std::vector<double> h_G;  // E, probability vector
    std::vector<double> h_D;  // E, probability vector
    UnevaVector uneva;
    Fingerprint model_fingerprint{};
    std::uint64_t file_length = 0;
};

struct SimilarityScore {
    double delta = 0.0;
    std::uint32_t uneva_dist = 0;
    bool similar = false;
    ThresholdConfig thresholds;
};

// Squared L2 distance between the mean embeddings of two batches; this is the
// differentiable training loss.
inline double mmd_batch(const Matrix& embA, const Matrix& embB) {
    if (!embA.same_shape(embB)) throw ShapeError("mmd_batch batches differ in shape");
    auto muA = column_means(embA);
    auto muB = column_means(embB);
    double acc = 0.0;
    for (std::size_t c = 0; c < muA.size(); ++c) {
        double d = muA[c] - muB[c];
        acc += d * d;
    }
    return acc;
}

inline Matrix infer_forward(const NetworkParams& params, const RandomFeatureBank& bank,
                            const Matrix& batch) {
    return forward(const_cast<NetworkParams&>(params), bank, batch, nullptr);
}

inline Digest make_digest(const TrainedModel& model, const FileBytes& f) {
    if (f.empty()) throw EmptyFileError();
    auto features = input_row(f, model.config.shift_bits);
    Matrix batch(1, features.size());
    std::copy(features.begin(), features.end(), batch.row(0));

    Digest dg;
    Matrix hG = infer_forward(model.params_G, model.bank_G, batch);
    Matrix hD = infer_forward(model.params_D, model.bank_D, batch);
    dg.h_G.assign(hG.row(0), hG.row(0) + hG.cols);
    dg.h_D.assign(hD.row(0), hD.row(0) + hD.cols);
    round_f32(dg.h_G);
    round_f32(dg.h_D);
    dg.uneva = compute_uneva(f);
    dg.model_fingerprint = model_fingerprint(model);
    dg.file_length = f.size();
    return dg;
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline SimilarityScore pair_score(const Digest& a, const Digest& b, const ThresholdConfig& cfg) {
    if (a.model_fingerprint != b.model_fingerprint) throw ModelMismatchError();
    if (a.h_G.size() != b.h_G.size()) throw ShapeError("digest embedding sizes differ");
    SimilarityScore sc;
    sc.delta = 0.5 * (l2_distance(a.h_G, b.h_D) + l2_distance(b.h_G, a.h_D));
    sc.uneva_dist = uneva_distance(a.uneva, b.uneva);
    sc.thresholds = cfg;
    sc.similar = sc.delta <= cfg.tau_delta && sc.uneva_dist <= cfg.tau_uneva;
    return sc;
}

// Largest tau_delta whose false-positive rate on the negative pairs stays at
// or below target_fp. Candidate thresholds are the observed deltas.
inline ThresholdConfig calibrate_threshold(const std::vector<double>& positive_deltas,
                                           const std::vector<double>& negative_deltas,
                                           double target_fp,
                                           std::uint32_t tau_uneva = 80) {
    if (positive_deltas.size() < 20 || negative_deltas.size() < 20)
        throw InsufficientDataError("calibration needs at least 20 pairs per class");
    std::vector<double> candidates = positive_deltas;
    candidates.insert(candidates.end(), negative_deltas.begin(), negative_deltas.end());
    std::sort(candidates.begin(), candidates.end());
    std::vector<double> neg_sorted = negative_deltas;
    std::sort(neg_sorted.begin(), neg_sorted.end());
    auto fp_rate = [&](double tau) {
        auto it = std::upper_bound(neg_sorted.begin(), neg_sorted.end(), tau);
        return double(it - neg_sorted.begin()) / double(neg_sorted.size());
    };
    double best = 0.0;
    for (double tau : candidates)
        if (fp_rate(tau) <= target_fp && tau > best) best = tau;
    return ThresholdConfig{best, tau_uneva};
}

// --- Digest serialization (AKDG records) ---

enum class DigestEncoding : std::uint8_t { Float32 = 0, QuantizedU8 = 1 };

namespace detail {

inline void write_embedding(ByteWriter& w, const std::vector<double>& h, DigestEncoding enc) {
    if (enc == DigestEncoding::Float32) {
        w.f32_array(h);
        return;
    }
    double lo = *std::min_element(h.begin(), h.end());
    double hi = *std::max_element(h.begin(), h.end());
    double scale = (hi - lo) / 255.0;
    if (scale == 0.0) scale = 1.0;
    w.f32(lo);
    w.f32(scale);
    for (double v : h) {
        int q = int(std::lround((v - lo) / scale));
        w.u8(std::uint8_t(std::clamp(q, 0, 255)));
    }
}

inline std::vector<double> read_embedding(ByteReader& r, std::size_t E, DigestEncoding enc) {
    std::vector<double> h(E);
    if (enc == DigestEncoding::Float32) {
        r.f32_array(h, E);
        return h;
    }
    double lo = r.f32();
    double scale = r.f32();
    for (std::size_t i = 0; i < E; ++i) h[i] = lo + scale * double(r.u8());
    return h;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_digest(const Digest& d,
                                                  DigestEncoding enc = DigestEncoding::Float32) {
    detail::ByteWriter w;
    w.bytes("AKDG", 4);
    w.u32(1);
    w.bytes(d.model_fingerprint.data(), d.model_fingerprint.size());
    w.u64(d.file_length);
    w.u8(std::uint8_t(enc));
    w.u32(std::uint32_t(d.h_G.size()));
    detail::write_embedding(w, d.h_G, enc);
    detail::write_embedding(w, d.h_D, enc);
    for (auto c : d.uneva.runs) w.u32(c);
    return std::move(w.out);
}

inline Digest deserialize_digest(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r{bytes.data(), bytes.size()};
    if (r.str(4) != "AKDG") throw FormatError("bad magic, expected AKDG", 0);
    std::uint32_t version = r.u32();
    if (version != 1) throw FormatError("unsupported digest version", 4);
    Digest d;
    for (auto& b : d.model_fingerprint) b = r.u8();
    d.file_length = r.u64();
    auto enc_raw = r.u8();
    if (enc_raw > 1) throw FormatError("unknown encoding flag", r.pos - 1);
    auto enc = DigestEncoding(enc_raw);
    std::uint32_t E = r.u32();
    d.h_G = detail::read_embedding(r, E, enc);
    d.h_D = detail::read_embedding(r, E, enc);
    for (auto& c : d.uneva.runs) c = r.u32();
    if (r.pos != r.size) throw FormatError("trailing bytes after digest payload", r.pos);
    return d;
}

inline std::string digest_to_text(const Digest& d, DigestEncoding enc = DigestEncoding::Float32) {
    return base64_encode(serialize_digest(d, enc));
}

inline Digest digest_from_text(const std::string& text) {
    return deserialize_digest(base64_decode(text));
}

}  // namespace akash
