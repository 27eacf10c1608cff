#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dsa {

enum class PolicyMode { fixed, prioritized };
enum class PriorityShape { convex, identity };

struct PolicyConfig {
  PolicyMode mode = PolicyMode::fixed;
  double tau = 0.5;
  int sigma = 1;  // alarms are suppressed for sigma - 1 steps after an alarm
  double gamma = 0.5;
  int h_max = 1;
  PriorityShape shape = PriorityShape::convex;
};

void validate_policy(const PolicyConfig& config, int h);

// Exponential horizon weight with exact anchors q(0) = 1 and q(h_max) = 0;
// zero beyond h_max. Computed as
//   q(k) = (expm1(-gamma k) - expm1(-gamma h_max)) / (-expm1(-gamma h_max)),
// which overflows nowhere. Throws "decay underflow; increase gamma" when
// gamma * h_max is so small the denominator vanishes in floating point.
double q_exp(int k, double gamma, int h_max);

// s_k = q(k) * F(k) (convex) or F(k) (identity), k = 1..h.
Eigen::VectorXd prioritized_scores(const Eigen::VectorXd& risk_row, const PolicyConfig& config);

// The scalar each step is thresholded on: F(h) under fixed mode, max_k s_k
// under prioritized mode. Precomputing it makes tau sweeps a linear scan.
std::vector<double> step_scores(const Eigen::MatrixXd& risk, const PolicyConfig& config);

struct AlarmTrace {
  std::vector<std::uint8_t> alarm;
  // Estimated time-to-event at each alarm (prioritized mode), -1 elsewhere.
  std::vector<int> d_t;
};

// Left-to-right scan: a step is a candidate when its score >= tau, alarms when
// additionally unmasked and >= sigma steps after the previous alarm.
AlarmTrace raise_alarms(const Eigen::MatrixXd& risk, const std::vector<std::uint8_t>& event_mask,
                        const PolicyConfig& config);

// The scan alone, given precomputed per-step scores.
std::vector<std::uint8_t> scan_alarms(const std::vector<double>& scores,
                                      const std::vector<std::uint8_t>& event_mask, double tau,
                                      int sigma);

// CSV dump `stay_id,step,alarm,d_t` (d_t empty when absent).
void write_alarms_csv(const std::string& path, const std::vector<std::string>& stay_ids,
                      const std::vector<AlarmTrace>& traces);

}  // namespace dsa
