#pragma once

#include <cstdint>
#include <vector>

#include "akash/kernel_net.hpp"

namespace akash {

struct TrainConfig {
    std::size_t batch_size = 1000;
    double learning_rate = 5e-4;
    std::size_t epochs = 5000;
    double keep_prob = 0.75;
    std::size_t s = 512;
    std::size_t E = 512;
    std::size_t rho_max = 500;
    std::uint64_t master_seed = 0;
    FeatureMapKind feature_map = FeatureMapKind::Fourier;
    bool share_bank = true;
    int shift_bits = 4;
    // Adam
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Optional early stop: relative mean-delta change below this over the
    // trailing window ends training; 0 disables.
    double early_stop_rel_change = 0.0;
    std::size_t early_stop_window = 50;
};

struct EpochLoss {
    double delta_round1_mean = 0.0;
    double delta_round2_mean = 0.0;
};

struct TrainedModel {
    RandomFeatureBank bank_G;
    RandomFeatureBank bank_D;  // equal to bank_G when config.share_bank
    NetworkParams params_G;
    NetworkParams params_D;
    TrainConfig config;
    std::vector<EpochLoss> loss_history;
};

}  // namespace akash
