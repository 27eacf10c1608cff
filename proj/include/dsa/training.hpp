#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsa/core.hpp"
#include "dsa/labeling.hpp"
#include "dsa/model.hpp"

namespace dsa {

enum class Objective { eep, dsa_full, dsa_trunc, survtls };

Objective parse_objective(const std::string& name);
std::string objective_name(Objective objective);

struct TrainConfig {
  Objective objective = Objective::dsa_trunc;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double l1_strength = 0.0;
  int patience = 10;
  int max_epochs = 100;
  std::uint64_t seed = 1;
  double lengthscale = 10.0;  // survtls smoothing
  int embed_dim = 16;
  int hidden_dim = 32;
};

void validate_train(const TrainConfig& config);

// One optimization item: an input sequence and aligned targets. Logit row
// targets.label_start + i carries the loss terms of targets row i. EEP items
// are whole stays (K = 1, w = 0 on within-event steps); DSA items are episodes.
struct TrainItem {
  Eigen::MatrixXd features;
  SurvivalTargets targets;
};

struct TrainingData {
  std::vector<TrainItem> items;
  int K = 1;
};

// forced_K > 0 pins the head width (used to keep train/val consistent under
// dsa_full, whose K is otherwise derived from the longest episode).
TrainingData build_training_data(const std::vector<Stay>& stays, const TaskConfig& task,
                                 const TrainConfig& config, int forced_K = 0);

struct LossReport {
  double total = 0.0;
  double data_term = 0.0;
  double l1_term = 0.0;
  std::int64_t weighted_term_count = 0;
};

// Mean over terms with w > 0 of w * BCE(logit, y), plus l1_strength * |W_e|_1.
// If grad is non-null it receives the exact gradient wrt params.theta().
// Items are evaluated in parallel and reduced in item order, so the result is
// independent of thread count. A batch with zero weighted terms reports
// weighted_term_count = 0 and total = l1 term only; callers should skip it.
LossReport compute_loss(const ModelParams& params, const std::vector<const TrainItem*>& batch,
                        double l1_strength, Eigen::VectorXd* grad, int threads = 1);

// Central-difference probe of n_probes randomly chosen coordinates; returns
// max over probes of |g_analytic - g_fd| / max(1e-8, |g_fd|). The probe step
// shrinks near the L1 kink of small embedding weights.
double finite_difference_check(const ModelParams& params,
                               const std::vector<const TrainItem*>& batch, double l1_strength,
                               int n_probes, double step, std::uint64_t seed, int threads = 1);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_timestep_auprc = 0.0;
  double elapsed_s = 0.0;
};

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, int batch)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch)),
        epoch(epoch),
        batch(batch) {}
  int epoch;
  int batch;
};

struct FitResult {
  ModelParams params;
  CheckpointMeta meta;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with seeded shuffling, per-epoch
// validation, and best-checkpoint early stopping after `patience` epochs
// without improvement. Deterministic given config.seed.
FitResult fit(const std::vector<Stay>& train_stays, const std::vector<Stay>& val_stays,
              const TaskConfig& task, const TrainConfig& config, int threads = 1);

// Per-step cumulative failure over a whole stay: column k-1 is F(k | X_t) for
// k = 1..h. EEP checkpoints (K = 1) return a single column, sigmoid(logit),
// read as F(h) directly.
Eigen::MatrixXd stay_risk(const ModelParams& params, const CheckpointMeta& meta,
                          const Stay& stay);

}  // namespace dsa
