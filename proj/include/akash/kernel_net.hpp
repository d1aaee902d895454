#pragma once

// One player network: frozen random kernel feature map, batch normalization,
// inverted dropout, dense layer, softmax. Forward and backward are written by
// hand; the backward pass goes through the batch statistics.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "akash/errors.hpp"
#include "akash/matrix.hpp"

namespace akash {

enum class FeatureMapKind : std::uint8_t {
    Fourier = 0,           // Gaussian weights, uniform phases, cos activation
    LaplaceExponential = 1,  // Exponential(1) weights, exp(-w.z)/s activation
    LaplaceLevy = 2,         // one-sided stable (alpha=1/2) weights
};

struct RandomFeatureBank {
    FeatureMapKind kind = FeatureMapKind::Fourier;
    std::size_t s = 0;  // feature count
    std::size_t d = 0;  // input dim
    Matrix W;           // s x d
    std::vector<double> phases;  // s, Fourier only
    std::uint64_t seed = 0;
};

inline RandomFeatureBank sample_feature_bank(FeatureMapKind kind, std::size_t s, std::size_t d,
                                             std::uint64_t seed) {
    RandomFeatureBank bank;
    bank.kind = kind;
    bank.s = s;
    bank.d = d;
    bank.seed = seed;
    bank.W = Matrix(s, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    switch (kind) {
        case FeatureMapKind::Fourier: {
            std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
            for (double& w : bank.W.data) w = gauss(rng);
            bank.phases.resize(s);
            for (double& p : bank.phases) p = uni(rng);
            break;
        }
        case FeatureMapKind::LaplaceExponential: {
            std::exponential_distribution<double> expo(1.0);
            for (double& w : bank.W.data) w = expo(rng);
            break;
        }
        case FeatureMapKind::LaplaceLevy: {
            // One-sided stable alpha=1/2: 1/Z^2 with Z standard normal.
            for (double& w : bank.W.data) {
                double z = gauss(rng);
                while (z == 0.0) z = gauss(rng);
                w = 1.0 / (z * z);
            }
            break;
        }
    }
    // Banks live in model files as float32.
    round_f32(bank.W.data);
    round_f32(bank.phases);
    return bank;
}

inline constexpr double kLaplaceExpClamp = 30.0;

inline void feature_map_row(const double* z, const RandomFeatureBank& bank, double* out) {
    if (bank.kind == FeatureMapKind::Fourier) {
        const double scale = std::sqrt(2.0 / double(bank.s));
        for (std::size_t j = 0; j < bank.s; ++j) {
            const double* w = bank.W.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < bank.d; ++k) dot += w[k] * z[k];
            out[j] = scale * std::cos(dot + bank.phases[j]);
        }
    } else {
        for (std::size_t j = 0; j < bank.s; ++j) {
            const double* w = bank.W.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < bank.d; ++k) dot += w[k] * z[k];
            double arg = -dot;
            if (arg > kLaplaceExpClamp) arg = kLaplaceExpClamp;
            out[j] = std::exp(arg) / double(bank.s);
        }
    }
}

inline std::vector<double> feature_map(const std::vector<double>& z, const RandomFeatureBank& bank) {
    if (z.size() != bank.d) throw ShapeError("input dim does not match bank");
    for (double v : z)
        if (!std::isfinite(v)) throw NumericsError("feature_map input");
    std::vector<double> out(bank.s);
    feature_map_row(z.data(), bank, out.data());
    return out;
}

struct NetworkParams {
    std::vector<double> bn_scale;     // gamma, s
    std::vector<double> bn_shift;     // beta, s
    std::vector<double> bn_running_mean;  // s
    std::vector<double> bn_running_var;   // s
    Matrix W2;                        // E x s
    std::vector<double> b2;           // E
    std::size_t s = 0;
    std::size_t E = 0;
};

inline NetworkParams init_params(const RandomFeatureBank& bank, std::size_t E,
                                 std::uint64_t seed) {
    if (E < 2) throw RangeError("embedding size must be >= 2");
    NetworkParams p;
    p.s = bank.s;
    p.E = E;
    p.bn_scale.assign(bank.s, 1.0);
    p.bn_shift.assign(bank.s, 0.0);
    p.bn_running_mean.assign(bank.s, 0.0);
    p.bn_running_var.assign(bank.s, 1.0);
    p.W2 = Matrix(E, bank.s);
    p.b2.assign(E, 0.0);
    const double limit = std::sqrt(6.0 / double(bank.s + E));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (double& w : p.W2.data) w = round_f32(uni(rng));
    return p;
}

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

struct TrainMode {
    double keep_prob = 0.75;
    std::uint64_t dropout_seed = 0;
};

struct ForwardCache {
    Matrix input;        // B x d
    Matrix features;     // u, B x s
    Matrix normalized;   // x-hat, B x s
    Matrix post_dropout; // v after dropout, B x s
    std::vector<double> batch_mean;    // s
    std::vector<double> batch_inv_std; // 1/sqrt(var+eps), s
    std::vector<std::uint8_t> dropout_mask;  // B*s, empty when no dropout
    double keep_prob = 1.0;
    Matrix embeddings;   // h, B x E
    bool train = false;
};

// mode == nullptr means inference (running stats, no dropout).
inline Matrix forward(NetworkParams& params, const RandomFeatureBank& bank, const Matrix& batch,
                      const TrainMode* mode, ForwardCache* cache = nullptr) {
    if (batch.cols != bank.d) throw ShapeError("batch width does not match bank input dim");
    if (mode && batch.rows < 2) throw BatchTooSmallError();
    if (!batch.all_finite()) throw NumericsError("forward input batch");
    const std::size_t B = batch.rows, s = bank.s, E = params.E;

    Matrix u(B, s);
    for (std::size_t r = 0; r < B; ++r) feature_map_row(batch.row(r), bank, u.row(r));

    std::vector<double> mean(s), inv_std(s);
    if (mode) {
        std::vector<double> var(s, 0.0);
        for (std::size_t c = 0; c < s; ++c) {
            double m = 0.0;
            for (std::size_t r = 0; r < B; ++r) m += u(r, c);
            mean[c] = m / double(B);
        }
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t c = 0; c < s; ++c) {
                double d = u(r, c) - mean[c];
                var[c] += d * d;
            }
        for (std::size_t c = 0; c < s; ++c) {
            var[c] /= double(B);
            inv_std[c] = 1.0 / std::sqrt(var[c] + kBnEpsilon);
            params.bn_running_mean[c] =
                kBnMomentum * params.bn_running_mean[c] + (1.0 - kBnMomentum) * mean[c];
            params.bn_running_var[c] =
                kBnMomentum * params.bn_running_var[c] + (1.0 - kBnMomentum) * var[c];
        }
    } else {
        for (std::size_t c = 0; c < s; ++c) {
            mean[c] = params.bn_running_mean[c];
            inv_std[c] = 1.0 / std::sqrt(params.bn_running_var[c] + kBnEpsilon);
        }
    }

    Matrix xhat(B, s), v(B, s);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < s; ++c) {
            xhat(r, c) = (u(r, c) - mean[c]) * inv_std[c];
            v(r, c) = params.bn_scale[c] * xhat(r, c) + params.bn_shift[c];
        }

    std::vector<std::uint8_t> mask;
    double keep = 1.0;
    if (mode && mode->keep_prob < 1.0) {
        keep = mode->keep_prob;
        mask.resize(B * s);
        std::mt19937_64 rng(mode->dropout_seed);
        std::bernoulli_distribution bern(keep);
        for (std::size_t i = 0; i < B * s; ++i) {
            mask[i] = bern(rng) ? 1 : 0;
            v.data[i] = mask[i] ? v.data[i] / keep : 0.0;
        }
    }

    Matrix h(B, E);
    for (std::size_t r = 0; r < B; ++r) {
        double max_logit = -1e300;
        std::vector<double> logits(E);
        for (std::size_t e = 0; e < E; ++e) {
            const double* w = params.W2.row(e);
            double dot = params.b2[e];
            for (std::size_t c = 0; c < s; ++c) dot += w[c] * v(r, c);
            logits[e] = dot;
            if (dot > max_logit) max_logit = dot;
        }
        double sum = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            double ex = std::exp(logits[e] - max_logit);
            h(r, e) = ex;
            sum += ex;
        }
        for (std::size_t e = 0; e < E; ++e) h(r, e) /= sum;
    }
    if (!h.all_finite()) throw NumericsError("forward embeddings");

    if (cache) {
        cache->input = batch;
        cache->features = std::move(u);
        cache->normalized = std::move(xhat);
        cache->post_dropout = std::move(v);
        cache->batch_mean = std::move(mean);
        cache->batch_inv_std = std::move(inv_std);
        cache->dropout_mask = std::move(mask);
        cache->keep_prob = keep;
        cache->embeddings = h;
        cache->train = mode != nullptr;
    }
    return h;
}

struct ParamGrads {
    std::vector<double> bn_scale;
    std::vector<double> bn_shift;
    Matrix W2;
    std::vector<double> b2;
};

inline ParamGrads backward(const ForwardCache& cache, const NetworkParams& params,
                           const Matrix& grad_embeddings) {
    const std::size_t B = cache.embeddings.rows, s = params.s, E = params.E;
    if (!grad_embeddings.same_shape(cache.embeddings))
        throw CacheMismatchError();
    if (cache.features.cols != s) throw CacheMismatchError();

    // Softmax backward: dlogits = h * (dh - sum(dh * h)).
    Matrix dlogits(B, E);
    for (std::size_t r = 0; r < B; ++r) {
        double dot = 0.0;
        for (std::size_t e = 0; e < E; ++e) dot += grad_embeddings(r, e) * cache.embeddings(r, e);
        for (std::size_t e = 0; e < E; ++e)
            dlogits(r, e) = cache.embeddings(r, e) * (grad_embeddings(r, e) - dot);
    }

    ParamGrads g;
    g.W2 = Matrix(E, s);
    g.b2.assign(E, 0.0);
    Matrix dv(B, s);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t e = 0; e < E; ++e) {
            const double dl = dlogits(r, e);
            g.b2[e] += dl;
            const double* vr = cache.post_dropout.row(r);
            double* gw = g.W2.row(e);
            const double* w = params.W2.row(e);
            for (std::size_t c = 0; c < s; ++c) {
                gw[c] += dl * vr[c];
                dv(r, c) += dl * w[c];
            }
        }

    if (!cache.dropout_mask.empty()) {
        for (std::size_t i = 0; i < B * s; ++i)
            dv.data[i] = cache.dropout_mask[i] ? dv.data[i] / cache.keep_prob : 0.0;
    }

    g.bn_scale.assign(s, 0.0);
    g.bn_shift.assign(s, 0.0);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < s; ++c) {
            g.bn_scale[c] += dv(r, c) * cache.normalized(r, c);
            g.bn_shift[c] += dv(r, c);
        }

    return g;
}

// Gradient w.r.t. the feature-map output u (needed only for testing the full
// batch-norm backward; parameters upstream of u are frozen).
inline Matrix backward_input_features(const ForwardCache& cache, const NetworkParams& params,
                                      const Matrix& grad_embeddings) {
    const std::size_t B = cache.embeddings.rows, s = params.s, E = params.E;
    Matrix dlogits(B, E);
    for (std::size_t r = 0; r < B; ++r) {
        double dot = 0.0;
        for (std::size_t e = 0; e < E; ++e) dot += grad_embeddings(r, e) * cache.embeddings(r, e);
        for (std::size_t e = 0; e < E; ++e)
            dlogits(r, e) = cache.embeddings(r, e) * (grad_embeddings(r, e) - dot);
    }
    Matrix dv(B, s);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t e = 0; e < E; ++e) {
            const double dl = dlogits(r, e);
            const double* w = params.W2.row(e);
            for (std::size_t c = 0; c < s; ++c) dv(r, c) += dl * w[c];
        }
    if (!cache.dropout_mask.empty())
        for (std::size_t i = 0; i < B * s; ++i)
            dv.data[i] = cache.dropout_mask[i] ? dv.data[i] / cache.keep_prob : 0.0;

    Matrix du(B, s);
    if (!cache.train) {
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t c = 0; c < s; ++c)
                du(r, c) = dv(r, c) * params.bn_scale[c] * cache.batch_inv_std[c];
        return du;
    }
    // Full batch-norm backward through the batch statistics.
    for (std::size_t c = 0; c < s; ++c) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t r = 0; r < B; ++r) {
            double dxhat = dv(r, c) * params.bn_scale[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * cache.normalized(r, c);
        }
        for (std::size_t r = 0; r < B; ++r) {
            double dxhat = dv(r, c) * params.bn_scale[c];
            du(r, c) = cache.batch_inv_std[c] *
                       (dxhat - sum_dxhat / double(B) -
                        cache.normalized(r, c) * sum_dxhat_xhat / double(B));
        }
    }
    return du;
}

}  // namespace akash
