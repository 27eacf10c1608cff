#include "dsa/labeling.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dsa/stay_io.hpp"

namespace dsa {

namespace {

constexpr double kSurvivalFloor = 1e-12;

double gaussian_cdf(double x, double mean, double std) {
  return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0)));
}

}  // namespace

EepLabels eep_labels(const Stay& stay, int h) {
  validate_stay(stay);
  if (h < 1) throw std::invalid_argument("horizon must be >= 1");
  const auto onsets = event_onsets(stay.events);
  const std::size_t n = stay.events.size();
  EepLabels labels;
  labels.horizon = h;
  labels.y.assign(n, 0);
  std::size_t next_onset = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (stay.events[t] == 1) {
      labels.y[t] = kMasked;
      continue;
    }
    while (next_onset < onsets.size() &&
           static_cast<std::size_t>(onsets[next_onset]) <= t) {
      ++next_onset;
    }
    if (next_onset < onsets.size() &&
        static_cast<std::size_t>(onsets[next_onset]) - t <= static_cast<std::size_t>(h)) {
      labels.y[t] = 1;
    }
  }
  return labels;
}

SurvivalTargets hazard_targets(const Episode& episode, int K, int truncate_to) {
  if (K < 1 || truncate_to < 1 || truncate_to > K) {
    throw std::invalid_argument("need 1 <= truncate_to <= K");
  }
  const int n_steps = episode.label_end - episode.label_start + 1;
  if (n_steps < 1) throw std::invalid_argument("episode has empty label range");
  SurvivalTargets out;
  out.kind = TargetKind::hard;
  out.label_start = episode.label_start;
  out.y = Eigen::MatrixXd::Zero(n_steps, K);
  out.w = Eigen::MatrixXd::Zero(n_steps, K);
  for (int i = 0; i < n_steps; ++i) {
    const int t = episode.label_start + i;
    const int span = episode.censored ? survival_span_at(episode, t) : delta_at(episode, t);
    const int w_limit = std::min(span, truncate_to);
    for (int k = 1; k <= w_limit; ++k) out.w(i, k - 1) = 1.0;
    if (!episode.censored && span <= K) out.y(i, span - 1) = 1.0;
  }
  return out;
}

SurvivalTargets survtls_targets(const Episode& episode, const SmoothingConfig& config) {
  if (!(config.lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be positive");
  const int K = config.truncation;
  if (K < 1) throw std::invalid_argument("truncation must be >= 1");
  const int n_steps = episode.label_end - episode.label_start + 1;
  if (n_steps < 1) throw std::invalid_argument("episode has empty label range");

  SurvivalTargets out;
  out.kind = TargetKind::smoothed;
  out.label_start = episode.label_start;
  out.y = Eigen::MatrixXd::Zero(n_steps, K);
  out.w = Eigen::MatrixXd::Zero(n_steps, K);

  if (episode.censored) {
    for (int i = 0; i < n_steps; ++i) {
      const int t = episode.label_start + i;
      const int w_limit = std::min(survival_span_at(episode, t), K);
      for (int k = 1; k <= w_limit; ++k) out.w(i, k - 1) = 1.0;
    }
    return out;
  }

  for (int i = 0; i < n_steps; ++i) {
    const int t = episode.label_start + i;
    const int delta = delta_at(episode, t);
    const std::vector<double> pmf = survtls_pmf(delta, config.lengthscale, K);

    double survival = 1.0;  // S_S(k-1), starting at S_S(0) = 1
    for (int k = 1; k <= K; ++k) {
      if (survival < kSurvivalFloor) {
        out.y(i, k - 1) = 1.0;
        out.w(i, k - 1) = 0.0;
      } else {
        out.y(i, k - 1) = pmf[static_cast<std::size_t>(k - 1)] / survival;
        out.w(i, k - 1) = survival;
      }
      survival -= pmf[static_cast<std::size_t>(k - 1)];
    }
  }
  return out;
}

std::vector<double> survtls_pmf(int delta, double lengthscale, int K) {
  if (delta < 1 || K < 1) throw std::invalid_argument("delta and K must be >= 1");
  if (!(lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be positive");
  const int support = std::max(K, delta);
  const double mean = delta;
  const double std = delta / lengthscale;
  std::vector<double> pmf(static_cast<std::size_t>(support), 0.0);
  if (support == 1) {
    pmf[0] = 1.0;
    return pmf;
  }
  pmf[0] = gaussian_cdf(1.5, mean, std);
  for (int k = 2; k < support; ++k) {
    pmf[static_cast<std::size_t>(k - 1)] =
        gaussian_cdf(k + 0.5, mean, std) - gaussian_cdf(k - 0.5, mean, std);
  }
  pmf[static_cast<std::size_t>(support - 1)] = 1.0 - gaussian_cdf(support - 0.5, mean, std);
  return pmf;
}

void write_targets_csv(const std::string& path, const std::vector<std::string>& episode_ids,
                       const std::vector<SurvivalTargets>& targets) {
  if (episode_ids.size() != targets.size()) {
    throw std::invalid_argument("episode id / target count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "episode_id,t,k,y,w\n";
  for (std::size_t e = 0; e < targets.size(); ++e) {
    const SurvivalTargets& tg = targets[e];
    for (Eigen::Index i = 0; i < tg.y.rows(); ++i) {
      for (Eigen::Index k = 0; k < tg.y.cols(); ++k) {
        out << episode_ids[e] << ',' << (tg.label_start + i) << ',' << (k + 1) << ','
            << format_double(tg.y(i, k)) << ',' << format_double(tg.w(i, k)) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dsa
