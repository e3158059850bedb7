// Training loop, AdamW optimizer with lr schedule, validation (AP + matching
// instability) and the experiment runner that writes per-epoch CSV records.
#pragma once

#include <string>
#include <vector>

#include "setdet/checkpoint.hpp"
#include "setdet/config.hpp"
#include "setdet/losses.hpp"
#include "setdet/metrics.hpp"

namespace setdet {

// Learning rate for a 1-based epoch index: cfg.lr before the drop epoch,
// cfg.lr * cfg.lr_drop_factor from it onwards.
double lr_at(const TrainConfig& cfg, int epoch);

// One AdamW step (decoupled weight decay) over all parameters from the
// accumulated gradients.
void adamw_step(ModelParams& params, double lr, double weight_decay, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

// One pass over the training scenes in a seed-deterministic shuffled order.
// Returns mean per-batch losses. Throws std::runtime_error with epoch/batch
// diagnostics if the loss goes non-finite.
LossBreakdown train_epoch(ModelParams& params, const std::vector<Scene>& train,
                          const TrainConfig& cfg, int epoch);

struct EvalResult {
    double ap50 = 0.0;
    double mean_ap = 0.0;
    std::vector<IndexVector> index_vectors;  // final-layer Hungarian matching per image
};

// Inference-mode pass over the validation set: detections for AP plus the
// per-image matching index vectors used by the instability metric.
EvalResult evaluate(ModelParams& params, const std::vector<Scene>& val, const TrainConfig& cfg);

struct ExperimentResult {
    std::vector<EpochRecord> records;
    uint64_t digest = 0;
    std::vector<double> epoch_seconds;

    double final_ap50() const { return records.empty() ? 0.0 : records.back().ap50; }
    double ap50_at(int epoch) const { return records.at(epoch - 1).ap50; }
    // mean IS over epochs [first, last] (1-based, inclusive)
    double mean_is(int first, int last) const;
};

// Full experiment: train cfg.epochs epochs, evaluate after each, record IS
// against the previous epoch's matching. If out_dir is non-empty, writes
// config.txt, metrics.csv (one row per epoch, append-only) and a final
// checkpoint; refuses to overwrite an existing metrics.csv unless force.
ExperimentResult run_experiment(const TrainConfig& cfg, const std::string& out_dir = "",
                                bool force = false);

// Same, with pre-generated splits (lets callers share one dataset across
// several runs).
ExperimentResult run_experiment_on(const TrainConfig& cfg, const std::vector<Scene>& train,
                                   const std::vector<Scene>& val, const std::string& out_dir = "",
                                   bool force = false);

// Reads a metrics.csv written by run_experiment.
std::vector<EpochRecord> parse_metrics_csv(const std::string& path);

}  // namespace setdet
