// Flat key-value experiment configuration: parsing, canonical serialization
// and the digest that ties checkpoints and result directories to the exact
// configuration that produced them.
#pragma once

#include <cstdint>
#include <string>

#include "setdet/datagen.hpp"
#include "setdet/geometry.hpp"
#include "setdet/losses.hpp"
#include "setdet/model.hpp"

namespace setdet {

struct TrainConfig {
    // schedule
    int epochs = 12;
    double lr = 1e-4;
    int lr_drop_epoch = 10;  // 1-based; lr is multiplied by the factor from this epoch on
    double lr_drop_factor = 0.1;
    double weight_decay = 1e-4;
    int batch_size = 16;

    // denoising
    int dn_groups = 5;
    double lambda1 = 0.4;
    double lambda2 = 0.4;
    double gamma = 0.2;
    bool use_mask = true;

    // model
    int hidden_dim = 64;
    int ffn_dim = 128;
    int decoder_layers = 3;
    int heads = 1;
    int num_queries = 16;

    // dataset
    int classes = 8;
    int kmax = 5;
    int grid = 8;
    int n_train = 2000;
    int n_val = 200;
    uint64_t data_seed = 12345;

    // matching cost weights
    double cost_class = 2.0;
    double cost_l1 = 5.0;
    double cost_giou = 2.0;

    uint64_t seed = 1;

    NoiseConfig noise() const { return {lambda1, lambda2, gamma}; }
    DatasetConfig dataset() const {
        return {n_train, n_val, classes, kmax, grid, hidden_dim, data_seed};
    }
    ModelConfig model() const {
        return {classes, hidden_dim, ffn_dim, decoder_layers, heads, num_queries};
    }
    MatchWeights match_weights() const { return {cost_class, cost_l1, cost_giou}; }
    LossConfig loss() const {
        LossConfig lc;
        lc.match = match_weights();
        return lc;
    }

    // Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

// "key = value" per line in a fixed field order; doubles printed with full
// precision so the digest is reproduction-stable.
std::string canonical_config(const TrainConfig& cfg);

// FNV-1a over the canonical serialization.
uint64_t config_digest(const TrainConfig& cfg);

// Parses file contents. Lines are "key = value"; '#' starts a comment.
// Unknown keys are errors.
TrainConfig parse_config_text(const std::string& text);

TrainConfig load_config_file(const std::string& path);

// DN_SEED, when set, overrides the config seed.
void apply_env_seed_override(TrainConfig& cfg);

}  // namespace setdet
