#include "dsa/synthgen.hpp"

#include <cmath>
#include <stdexcept>

#include "dsa/parallel.hpp"
#include "dsa/rng.hpp"

namespace dsa {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int lookahead_steps(double signal_decay) {
  const double raw = std::ceil(4.0 * signal_decay);
  return std::min(64, std::max(1, static_cast<int>(raw)));
}

// Slow risk factor: a near-unit-root AR(1) drift that shifts the onset
// log-odds alongside the fast latent and modulates feature amplitude. Its
// timescale (~100 steps) sits far beyond any imminent-signal window.
constexpr double kSlowArCoeff = 0.99;
constexpr double kSlowStd = 0.75;
constexpr double kSlowRiskWeight = 2.0;

}  // namespace

void validate_gen(const GenConfig& c) {
  if (c.n_stays < 1) throw std::invalid_argument("n_stays must be positive");
  if (c.min_len < 1 || c.min_len > c.max_len) {
    throw std::invalid_argument("need 1 <= min_len <= max_len");
  }
  if (c.n_features < 1) throw std::invalid_argument("n_features must be positive");
  if (!(c.latent_ar_coeff > 0.0 && c.latent_ar_coeff < 1.0)) {
    throw std::invalid_argument("latent_ar_coeff must be in (0,1)");
  }
  if (!(c.hazard_scale > 0.0)) throw std::invalid_argument("hazard_scale must be positive");
  if (!std::isfinite(c.hazard_offset)) throw std::invalid_argument("hazard_offset must be finite");
  if (!(c.signal_decay > 0.0)) throw std::invalid_argument("signal_decay must be positive");
  if (!(c.noise_std > 0.0)) throw std::invalid_argument("noise_std must be positive");
  if (c.event_duration < 1) throw std::invalid_argument("event_duration must be positive");
}

Cohort generate_cohort(const GenConfig& c, int threads) {
  validate_gen(c);
  const int lags = lookahead_steps(c.signal_decay);
  const int d = c.n_features;

  // Cohort-level mixing: a fixed projection of the lookahead window plus a
  // per-feature offset, shared by every stay (substream 0).
  Rng cohort_rng(Rng::substream(c.seed, 0));
  Eigen::MatrixXd proj(d, lags);
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(lags));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < lags; ++j) proj(i, j) = proj_scale * cohort_rng.normal();
  }
  Eigen::VectorXd offset(d);
  for (int i = 0; i < d; ++i) offset(i) = cohort_rng.uniform(-1.0, 1.0);

  Cohort cohort;
  cohort.stays.resize(static_cast<std::size_t>(c.n_stays));
  cohort.onset_prob.resize(static_cast<std::size_t>(c.n_stays));

  const double stationary_std = 1.0 / std::sqrt(1.0 - c.latent_ar_coeff * c.latent_ar_coeff);

  parallel_for(c.n_stays, threads, [&](std::int64_t idx) {
    Rng rng(Rng::substream(c.seed, static_cast<std::uint64_t>(idx) + 1));
    const int len = static_cast<int>(rng.uniform_int(c.min_len, c.max_len));

    // Latent paths extend past the stay so every step has a full lookahead window.
    std::vector<double> z(static_cast<std::size_t>(len + lags));
    z[0] = stationary_std * rng.normal();
    for (std::size_t t = 1; t < z.size(); ++t) {
      z[t] = c.latent_ar_coeff * z[t - 1] + rng.normal();
    }
    const double slow_innov_std = kSlowStd * std::sqrt(1.0 - kSlowArCoeff * kSlowArCoeff);
    std::vector<double> slow(static_cast<std::size_t>(len + lags));
    slow[0] = kSlowStd * rng.normal();
    for (std::size_t t = 1; t < slow.size(); ++t) {
      slow[t] = kSlowArCoeff * slow[t - 1] + slow_innov_std * rng.normal();
    }

    std::vector<std::uint8_t> events(static_cast<std::size_t>(len), 0);
    std::vector<double> probs(static_cast<std::size_t>(len), 0.0);
    int in_event = 0;
    for (int t = 0; t < len; ++t) {
      if (in_event > 0) {
        events[static_cast<std::size_t>(t)] = 1;
        --in_event;
        continue;
      }
      const double risk =
          z[static_cast<std::size_t>(t)] + kSlowRiskWeight * slow[static_cast<std::size_t>(t)];
      const double p = sigmoid(c.hazard_offset + c.hazard_scale * risk);
      probs[static_cast<std::size_t>(t)] = p;
      if (rng.uniform01() < p) {
        events[static_cast<std::size_t>(t)] = 1;
        in_event = c.event_duration - 1;
      }
    }

    // Features preview the upcoming fast innovations, not the latent level
    // itself, so imminent events are visible in recent rows. The slow factor
    // never appears additively: it only scales the signal amplitude, and has
    // to be squeezed out of second moments accumulated over a long history.
    std::vector<double> eps(z.size());
    eps[0] = z[0] / stationary_std;
    for (std::size_t s = 1; s < z.size(); ++s) {
      eps[s] = z[s] - c.latent_ar_coeff * z[s - 1];
    }

    Eigen::MatrixXd features(len, d);
    Eigen::VectorXd window(lags);
    for (int t = 0; t < len; ++t) {
      for (int j = 0; j < lags; ++j) {
        window(j) = std::exp(-j / c.signal_decay) * eps[static_cast<std::size_t>(t + j)];
      }
      Eigen::VectorXd x =
          std::exp(slow[static_cast<std::size_t>(t)]) * (proj * window) + offset;
      for (int i = 0; i < d; ++i) x(i) += c.noise_std * rng.normal();
      features.row(t) = x.transpose();
    }

    Stay stay;
    stay.id = "s" + std::to_string(idx);
    stay.features = std::move(features);
    stay.events = std::move(events);
    cohort.stays[static_cast<std::size_t>(idx)] = std::move(stay);
    cohort.onset_prob[static_cast<std::size_t>(idx)] = std::move(probs);
  });
  return cohort;
}

}  // namespace dsa
