#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsa/core.hpp"
#include "dsa/labeling.hpp"

namespace dsa {

// Network: per-step linear embedding (d -> m, L1-penalized weights) feeding a
// single GRU layer (hidden size n) and a K-way sigmoid head. Output k of step
// t is the hazard lambda(k | X_t), except in EEP mode (K = 1) where the single
// output is read as the cumulative failure F(h | X_t) directly.
struct ModelDims {
  int d = 0;  // input features
  int m = 0;  // embedding width
  int n = 0;  // hidden size
  int K = 0;  // output horizons
};

bool operator==(const ModelDims& a, const ModelDims& b);

// All parameters live in one flat vector so the optimizer and the
// finite-difference probe can treat the model as a function of theta.
// Segment order: W_e(m,d) b_e(m) W_z(n,m) U_z(n,n) b_z(n) W_r U_r b_r
// W_c U_c b_c W_o(K,n) b_o(K); matrices are row-major within theta.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }
  Eigen::VectorXd& theta() { return theta_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  Eigen::Index size() const { return theta_.size(); }

  using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  MatMap W_e() { return mat(0, dims_.m, dims_.d); }
  VecMap b_e() { return vec(1, dims_.m); }
  MatMap W_z() { return mat(2, dims_.n, dims_.m); }
  MatMap U_z() { return mat(3, dims_.n, dims_.n); }
  VecMap b_z() { return vec(4, dims_.n); }
  MatMap W_r() { return mat(5, dims_.n, dims_.m); }
  MatMap U_r() { return mat(6, dims_.n, dims_.n); }
  VecMap b_r() { return vec(7, dims_.n); }
  MatMap W_c() { return mat(8, dims_.n, dims_.m); }
  MatMap U_c() { return mat(9, dims_.n, dims_.n); }
  VecMap b_c() { return vec(10, dims_.n); }
  MatMap W_o() { return mat(11, dims_.K, dims_.n); }
  VecMap b_o() { return vec(12, dims_.K); }

  ConstMatMap W_e() const { return mat(0, dims_.m, dims_.d); }
  ConstVecMap b_e() const { return vec(1, dims_.m); }
  ConstMatMap W_z() const { return mat(2, dims_.n, dims_.m); }
  ConstMatMap U_z() const { return mat(3, dims_.n, dims_.n); }
  ConstVecMap b_z() const { return vec(4, dims_.n); }
  ConstMatMap W_r() const { return mat(5, dims_.n, dims_.m); }
  ConstMatMap U_r() const { return mat(6, dims_.n, dims_.n); }
  ConstVecMap b_r() const { return vec(7, dims_.n); }
  ConstMatMap W_c() const { return mat(8, dims_.n, dims_.m); }
  ConstMatMap U_c() const { return mat(9, dims_.n, dims_.n); }
  ConstVecMap b_c() const { return vec(10, dims_.n); }
  ConstMatMap W_o() const { return mat(11, dims_.K, dims_.n); }
  ConstVecMap b_o() const { return vec(12, dims_.K); }

  // Offset of the W_e segment (always 0) and one past its end; the L1 penalty
  // and its subgradient apply to exactly this range of theta.
  Eigen::Index embedding_weights_begin() const { return 0; }
  Eigen::Index embedding_weights_end() const {
    return static_cast<Eigen::Index>(dims_.m) * dims_.d;
  }

  static Eigen::Index param_count(const ModelDims& dims);

 private:
  Eigen::Index seg_offset(int seg) const;
  MatMap mat(int seg, int rows, int cols) {
    return MatMap(theta_.data() + seg_offset(seg), rows, cols);
  }
  ConstMatMap mat(int seg, int rows, int cols) const {
    return ConstMatMap(theta_.data() + seg_offset(seg), rows, cols);
  }
  VecMap vec(int seg, int size) { return VecMap(theta_.data() + seg_offset(seg), size); }
  ConstVecMap vec(int seg, int size) const {
    return ConstVecMap(theta_.data() + seg_offset(seg), size);
  }

  ModelDims dims_;
  Eigen::VectorXd theta_;
};

// Per-step activations kept for backpropagation through time.
struct ForwardCache {
  Eigen::MatrixXd embed;   // T x m
  Eigen::MatrixXd z;       // T x n, update gate
  Eigen::MatrixXd r;       // T x n, reset gate
  Eigen::MatrixXd c;       // T x n, candidate state
  Eigen::MatrixXd h;       // T x n, hidden state
  Eigen::MatrixXd logits;  // T x K, head outputs before sigmoid
};

// Runs the network over all rows of `features` (the episode history). Returns
// logits per step; hazards are sigmoid(logits). Pass a cache to enable backprop.
Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features,
                        ForwardCache* cache = nullptr);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Hazards (T x K, entries in (0,1)) from logits.
Eigen::MatrixXd hazards_from_logits(const Eigen::MatrixXd& logits);

struct RiskMatrix {
  Eigen::MatrixXd F;  // T x h, cumulative failure, non-decreasing per row
  Eigen::MatrixXd f;  // T x h, per-horizon PMF
};

// F(k) = 1 - prod_{j<=k}(1 - lambda(j)) via log1p accumulation;
// f(k) = prod_{j<k}(1 - lambda(j)) * lambda(k).
RiskMatrix cumulative_failure(const Eigen::MatrixXd& hazards, int h);

// Corpus-average hazard label per horizon: ytilde(k) = sum(y*w) / sum(w).
// Horizons with zero total weight fall back to floor = 1/(weighted steps + 1);
// rates of exactly 0 or 1 are pulled to floor / 1 - floor so the logit exists.
// `floored` (optional) reports which horizons were adjusted.
Eigen::VectorXd empirical_base_rates(const std::vector<SurvivalTargets>& targets, int K,
                                     std::vector<int>* floored = nullptr);
Eigen::VectorXd empirical_base_rates(const std::vector<const SurvivalTargets*>& targets, int K,
                                     std::vector<int>* floored = nullptr);

// All weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; head bias set to
// logit(base_rates). Throws if any rate is outside (0,1).
ModelParams init_params(const ModelDims& dims, const Eigen::VectorXd& base_rates,
                        std::uint64_t seed);

// Checkpoint: single JSON file with metadata {d,m,n,K,h,objective,seed} and a
// name -> {shape, flat row-major data} tensor map, full round-trip precision.
struct CheckpointMeta {
  ModelDims dims;
  int h = 1;
  std::string objective;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);
std::pair<ModelParams, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace dsa
