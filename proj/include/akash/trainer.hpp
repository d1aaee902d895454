#pragma once

// Perturbation-consistent minimax training. Each stage runs two rounds; the
// network fed the perturbed batch plays the adversary and takes an ascent
// step, the other descends. Roles and data swap between rounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "akash/errors.hpp"
#include "akash/features.hpp"
#include "akash/model.hpp"
#include "akash/perturb.hpp"
#include "akash/serialize.hpp"
#include "akash/similarity.hpp"

namespace akash {

struct AdamState {
    std::vector<double> m_bn_scale, v_bn_scale;
    std::vector<double> m_bn_shift, v_bn_shift;
    Matrix m_W2, v_W2;
    std::vector<double> m_b2, v_b2;
    std::uint64_t step = 0;

    static AdamState zeros_like(const NetworkParams& p) {
        AdamState st;
        st.m_bn_scale.assign(p.s, 0.0);
        st.v_bn_scale.assign(p.s, 0.0);
        st.m_bn_shift.assign(p.s, 0.0);
        st.v_bn_shift.assign(p.s, 0.0);
        st.m_W2 = Matrix(p.E, p.s);
        st.v_W2 = Matrix(p.E, p.s);
        st.m_b2.assign(p.E, 0.0);
        st.v_b2.assign(p.E, 0.0);
        return st;
    }
};

namespace detail {

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, double lr, double b1,
                        double b2, double eps, double bc1, double bc2, double sign) {
    if (param.size() != grad.size()) throw ShapeError("adam parameter/gradient size mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = sign * grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace detail

inline void adam_step(NetworkParams& params, const ParamGrads& grads, AdamState& state, double lr,
                      bool ascend, double beta1 = 0.9, double beta2 = 0.999,
                      double epsilon = 1e-8) {
    if (grads.W2.rows != params.W2.rows || grads.W2.cols != params.W2.cols)
        throw ShapeError("adam W2 gradient shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(beta2, double(state.step));
    const double sign = ascend ? -1.0 : 1.0;
    detail::adam_update(params.bn_scale, grads.bn_scale, state.m_bn_scale, state.v_bn_scale, lr,
                        beta1, beta2, epsilon, bc1, bc2, sign);
    detail::adam_update(params.bn_shift, grads.bn_shift, state.m_bn_shift, state.v_bn_shift, lr,
                        beta1, beta2, epsilon, bc1, bc2, sign);
    detail::adam_update(params.W2.data, grads.W2.data, state.m_W2.data, state.v_W2.data, lr, beta1,
                        beta2, epsilon, bc1, bc2, sign);
    detail::adam_update(params.b2, grads.b2, state.m_b2, state.v_b2, lr, beta1, beta2, epsilon,
                        bc1, bc2, sign);
}

struct TrainerState {
    RandomFeatureBank bank_G;
    RandomFeatureBank bank_D;
    NetworkParams params_G;
    NetworkParams params_D;
    AdamState adam_G;
    AdamState adam_D;
    TrainConfig config;
};

namespace detail {

// d mmd / d embA = (2/B)(muA - muB) per row, and the negative for embB.
inline std::pair<Matrix, Matrix> mmd_embedding_grads(const Matrix& embA, const Matrix& embB) {
    auto muA = column_means(embA);
    auto muB = column_means(embB);
    Matrix gA(embA.rows, embA.cols), gB(embB.rows, embB.cols);
    const double scale = 2.0 / double(embA.rows);
    for (std::size_t r = 0; r < embA.rows; ++r)
        for (std::size_t c = 0; c < embA.cols; ++c) {
            double g = scale * (muA[c] - muB[c]);
            gA(r, c) = g;
            gB(r, c) = -g;
        }
    return {std::move(gA), std::move(gB)};
}

}  // namespace detail

// One stage = two rounds over a matched (clean, perturbed) feature batch.
inline std::pair<double, double> run_stage(TrainerState& st, const Matrix& batch_x,
                                           const Matrix& batch_xp, std::uint64_t stage_seed) {
    if (!batch_x.same_shape(batch_xp)) throw ShapeError("clean/perturbed batches differ");
    if (batch_x.rows < 2) throw BatchTooSmallError();
    std::mt19937_64 seeder(stage_seed);
    const TrainConfig& c = st.config;
    const double lr = c.learning_rate;

    NetworkParams backup_G = st.params_G;
    NetworkParams backup_D = st.params_D;
    double delta1, delta2;
    try {
        // Round 1: G holds the clean data (generator), D holds the perturbed
        // data (adversary).
        TrainMode mode_G1{c.keep_prob, seeder()};
        TrainMode mode_D1{c.keep_prob, seeder()};
        ForwardCache cache_G, cache_D;
        Matrix hG = forward(st.params_G, st.bank_G, batch_x, &mode_G1, &cache_G);
        Matrix hD = forward(st.params_D, st.bank_D, batch_xp, &mode_D1, &cache_D);
        delta1 = mmd_batch(hG, hD);
        auto [gG, gD] = detail::mmd_embedding_grads(hG, hD);
        ParamGrads grads_G = backward(cache_G, st.params_G, gG);
        ParamGrads grads_D = backward(cache_D, st.params_D, gD);
        adam_step(st.params_G, grads_G, st.adam_G, lr, /*ascend=*/false, c.adam_beta1,
                  c.adam_beta2, c.adam_epsilon);
        adam_step(st.params_D, grads_D, st.adam_D, lr, /*ascend=*/true, c.adam_beta1,
                  c.adam_beta2, c.adam_epsilon);

        // Round 2: roles and data swap.
        backup_G = st.params_G;
        backup_D = st.params_D;
        TrainMode mode_D2{c.keep_prob, seeder()};
        TrainMode mode_G2{c.keep_prob, seeder()};
        ForwardCache cache_D2, cache_G2;
        Matrix hD2 = forward(st.params_D, st.bank_D, batch_x, &mode_D2, &cache_D2);
        Matrix hG2 = forward(st.params_G, st.bank_G, batch_xp, &mode_G2, &cache_G2);
        delta2 = mmd_batch(hD2, hG2);
        auto [gD2, gG2] = detail::mmd_embedding_grads(hD2, hG2);
        ParamGrads grads_D2 = backward(cache_D2, st.params_D, gD2);
        ParamGrads grads_G2 = backward(cache_G2, st.params_G, gG2);
        adam_step(st.params_D, grads_D2, st.adam_D, lr, /*ascend=*/false, c.adam_beta1,
                  c.adam_beta2, c.adam_epsilon);
        adam_step(st.params_G, grads_G2, st.adam_G, lr, /*ascend=*/true, c.adam_beta1,
                  c.adam_beta2, c.adam_epsilon);
    } catch (const NumericsError&) {
        st.params_G = backup_G;
        st.params_D = backup_D;
        throw;
    }
    return {delta1, delta2};
}

using ProgressSink = std::function<void(std::size_t epoch, const EpochLoss&)>;

inline TrainerState init_trainer(const TrainConfig& cfg, std::size_t input_dim = kFeatureDim) {
    TrainerState st;
    st.config = cfg;
    std::mt19937_64 seeder(cfg.master_seed);
    std::uint64_t bank_seed_G = seeder();
    std::uint64_t bank_seed_D = cfg.share_bank ? bank_seed_G : seeder();
    st.bank_G = sample_feature_bank(cfg.feature_map, cfg.s, input_dim, bank_seed_G);
    st.bank_D = cfg.share_bank ? st.bank_G
                               : sample_feature_bank(cfg.feature_map, cfg.s, input_dim, bank_seed_D);
    // With a shared feature bank the two players also share their initial
    // parameters: the game then starts at its symmetric point (zero gap) and
    // training keeps the networks functionally close, which is what makes the
    // cross-network distance an input-sensitive similarity score. Independent
    // random inits leave a residual G/D offset that drowns the signal.
    std::uint64_t init_seed_G = seeder();
    std::uint64_t init_seed_D = cfg.share_bank ? init_seed_G : seeder();
    st.params_G = init_params(st.bank_G, cfg.E, init_seed_G);
    st.params_D = init_params(st.bank_D, cfg.E, init_seed_D);
    st.adam_G = AdamState::zeros_like(st.params_G);
    st.adam_D = AdamState::zeros_like(st.params_D);
    return st;
}

// Training over precomputed (clean, perturbed) feature rows.
inline TrainedModel train_features(const std::vector<std::vector<double>>& feats_x,
                                   const std::vector<std::vector<double>>& feats_xp,
                                   const TrainConfig& cfg, const ProgressSink& progress = {}) {
    if (feats_x.size() != feats_xp.size()) throw ShapeError("pair lists differ in length");
    TrainConfig effective = cfg;
    if (feats_x.size() < effective.batch_size) {
        if (feats_x.size() < 2)
            throw InsufficientDataError("need at least 2 training pairs");
        effective.batch_size = feats_x.size();  // auto-shrink, caller is warned via config echo
    }
    const std::size_t d = feats_x.empty() ? kFeatureDim : feats_x.front().size();
    TrainerState st = init_trainer(effective, d);

    std::mt19937_64 epoch_rng(effective.master_seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(feats_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainedModel model;
    model.config = effective;
    const std::size_t B = effective.batch_size;
    for (std::size_t epoch = 0; epoch < effective.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), epoch_rng);
        double sum1 = 0.0, sum2 = 0.0;
        std::size_t stages = 0;
        // Last partial batch is dropped; batch statistics need full batches.
        for (std::size_t base = 0; base + B <= order.size(); base += B) {
            Matrix bx(B, d), bxp(B, d);
            for (std::size_t i = 0; i < B; ++i) {
                const auto& fx = feats_x[order[base + i]];
                const auto& fxp = feats_xp[order[base + i]];
                std::copy(fx.begin(), fx.end(), bx.row(i));
                std::copy(fxp.begin(), fxp.end(), bxp.row(i));
            }
            auto [d1, d2] = run_stage(st, bx, bxp, epoch_rng());
            sum1 += d1;
            sum2 += d2;
            ++stages;
        }
        EpochLoss loss{stages ? sum1 / double(stages) : 0.0,
                       stages ? sum2 / double(stages) : 0.0};
        model.loss_history.push_back(loss);
        if (progress) progress(epoch, loss);

        if (effective.early_stop_rel_change > 0.0 &&
            model.loss_history.size() > effective.early_stop_window) {
            const auto& hist = model.loss_history;
            double now = hist.back().delta_round1_mean;
            double then = hist[hist.size() - 1 - effective.early_stop_window].delta_round1_mean;
            double denom = std::max(std::abs(then), 1e-12);
            if (std::abs(now - then) / denom < effective.early_stop_rel_change) break;
        }
    }

    model.bank_G = std::move(st.bank_G);
    model.bank_D = effective.share_bank ? model.bank_G : std::move(st.bank_D);
    model.params_G = std::move(st.params_G);
    model.params_D = std::move(st.params_D);
    finalize_model(model);
    return model;
}

inline TrainedModel train(const std::vector<std::pair<FileBytes, FileBytes>>& corpus_pairs,
                          const TrainConfig& cfg, const ProgressSink& progress = {}) {
    std::vector<std::vector<double>> fx, fxp;
    fx.reserve(corpus_pairs.size());
    fxp.reserve(corpus_pairs.size());
    for (const auto& [a, b] : corpus_pairs) {
        fx.push_back(input_row(a, cfg.shift_bits));
        fxp.push_back(input_row(b, cfg.shift_bits));
    }
    return train_features(fx, fxp, cfg, progress);
}

}  // namespace akash
