#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsa/core.hpp"

namespace dsa {

// Per-step binary labels: 1 if the next event onset lies in (t, t+h],
// 0 otherwise, kMasked inside events (no prediction there).
inline constexpr std::int8_t kMasked = -1;

struct EepLabels {
  int horizon = 1;
  std::vector<std::int8_t> y;
};

EepLabels eep_labels(const Stay& stay, int h);

enum class TargetKind { hard, smoothed };

// Hazard regression targets for one episode. Rows cover the valid label steps
// label_start..label_end (row i is step label_start + i), columns horizons
// k = 1..K (column k-1). w(t,k) == 0 means the term is excluded from any loss.
struct SurvivalTargets {
  TargetKind kind = TargetKind::hard;
  int label_start = 0;
  Eigen::MatrixXd y;
  Eigen::MatrixXd w;
};

struct SmoothingConfig {
  double lengthscale = 10.0;  // Gaussian std at time-to-event delta is delta/lengthscale
  int truncation = 1;         // K
};

// Hard targets: uncensored steps get y = 1[k == delta_t],
// w = 1[k <= min(delta_t, truncate_to)]; censored steps get y = 0,
// w = 1[k <= min(sigma_t, truncate_to)] with sigma_t = label_end - t.
SurvivalTargets hazard_targets(const Episode& episode, int K, int truncate_to);

// Smoothed targets: the one-hot PMF at delta_t is replaced by a discretized
// Gaussian with mean delta_t and std delta_t / lengthscale; y becomes the
// smooth hazard lambda_S(k), w the smooth survival S_S(k-1). The
// discretization support extends to max(K, delta_t) before truncating to K
// columns, so distant events shed mass past K instead of piling it into the
// K-th bin; this keeps the large-lengthscale limit equal to hard targets.
// Censored steps keep hard censoring weights.
SurvivalTargets survtls_targets(const Episode& episode, const SmoothingConfig& config);

// The discretized Gaussian PMF used by survtls_targets for one step with
// time-to-event delta: bins k = 1..max(K, delta), closing the tail into the
// last bin so the mass sums to 1. Exposed for direct verification.
std::vector<double> survtls_pmf(int delta, double lengthscale, int K);

// Debug dump, one row per (episode, step, horizon): episode_id,t,k,y,w.
void write_targets_csv(const std::string& path, const std::vector<std::string>& episode_ids,
                       const std::vector<SurvivalTargets>& targets);

}  // namespace dsa
