#pragma once

#include <cstdint>
#include <vector>

#include "dsa/core.hpp"

namespace dsa {

// Synthetic cohort: event onsets are Bernoulli draws from a two-factor risk
// process, a fast AR(1) latent plus a slow near-unit-root drift. Observed
// features leak exponentially decayed previews of the upcoming fast
// innovations, so imminent events are visible in recent rows, while the slow
// factor only modulates feature amplitude and must be pooled from a long
// history. Predictive signal therefore degrades with distance to the event.
struct GenConfig {
  int n_stays = 100;
  int min_len = 50;
  int max_len = 200;
  int n_features = 8;
  double latent_ar_coeff = 0.9;   // rho in (0,1)
  double hazard_scale = 1.0;      // maps latent risk to onset log-odds
  double hazard_offset = -4.0;    // log-odds intercept; controls base onset rate
  double signal_decay = 6.0;      // steps of lookahead carried by the features
  double noise_std = 0.5;
  int event_duration = 5;
  std::uint64_t seed = 1;
};

struct Cohort {
  std::vector<Stay> stays;
  // True per-step onset probability; 0 on steps inside an ongoing event
  // (no onset is drawn there).
  std::vector<std::vector<double>> onset_prob;
};

void validate_gen(const GenConfig& config);

// Deterministic for a given config regardless of thread count: each stay is
// generated from its own RNG substream.
Cohort generate_cohort(const GenConfig& config, int threads = 1);

}  // namespace dsa
