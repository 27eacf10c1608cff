#include "dsa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "dsa/metrics.hpp"
#include "dsa/parallel.hpp"
#include "dsa/rng.hpp"
#include "dsa/stay_io.hpp"

namespace dsa {

Objective parse_objective(const std::string& name) {
  if (name == "eep") return Objective::eep;
  if (name == "dsa_full") return Objective::dsa_full;
  if (name == "dsa_trunc") return Objective::dsa_trunc;
  if (name == "survtls") return Objective::survtls;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

std::string objective_name(Objective objective) {
  switch (objective) {
    case Objective::eep: return "eep";
    case Objective::dsa_full: return "dsa_full";
    case Objective::dsa_trunc: return "dsa_trunc";
    case Objective::survtls: return "survtls";
  }
  throw std::logic_error("bad objective");
}

void validate_train(const TrainConfig& c) {
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (c.l1_strength < 0.0) throw std::invalid_argument("l1_strength must be >= 0");
  if (c.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (c.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(c.lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be positive");
  if (c.embed_dim < 1 || c.hidden_dim < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
}

TrainingData build_training_data(const std::vector<Stay>& stays, const TaskConfig& task,
                                 const TrainConfig& config, int forced_K) {
  validate_task(task);
  validate_train(config);
  if (stays.empty()) throw std::invalid_argument("no stays");
  TrainingData data;

  if (config.objective == Objective::eep) {
    data.K = 1;
    for (const Stay& stay : stays) {
      const EepLabels labels = eep_labels(stay, task.horizon);
      const Eigen::Index T = stay.features.rows();
      TrainItem item;
      item.features = stay.features;
      item.targets.kind = TargetKind::hard;
      item.targets.label_start = 0;
      item.targets.y = Eigen::MatrixXd::Zero(T, 1);
      item.targets.w = Eigen::MatrixXd::Zero(T, 1);
      for (Eigen::Index t = 0; t < T; ++t) {
        if (labels.y[static_cast<std::size_t>(t)] == kMasked) continue;
        item.targets.y(t, 0) = labels.y[static_cast<std::size_t>(t)];
        item.targets.w(t, 0) = 1.0;
      }
      data.items.push_back(std::move(item));
    }
    return data;
  }

  std::vector<Episode> episodes;
  for (const Stay& stay : stays) {
    EpisodeSplit split = split_episodes(stay);
    for (Episode& ep : split.episodes) episodes.push_back(std::move(ep));
  }
  if (episodes.empty()) throw std::invalid_argument("no usable episodes");

  int K = task.horizon;
  if (config.objective == Objective::dsa_full) {
    if (forced_K > 0) {
      K = forced_K;
    } else {
      int longest = 1;
      for (const Episode& ep : episodes) {
        const int span = ep.censored ? survival_span_at(ep, ep.label_start)
                                     : delta_at(ep, ep.label_start);
        longest = std::max(longest, span);
      }
      K = std::min(std::max(task.horizon, longest), task.max_train_horizon);
    }
  }
  data.K = K;

  for (const Episode& ep : episodes) {
    TrainItem item;
    item.features = ep.history;
    switch (config.objective) {
      case Objective::dsa_full:
        item.targets = hazard_targets(ep, K, K);
        break;
      case Objective::dsa_trunc:
        item.targets = hazard_targets(ep, K, task.horizon);
        break;
      case Objective::survtls:
        item.targets = survtls_targets(ep, SmoothingConfig{config.lengthscale, K});
        break;
      case Objective::eep:
        throw std::logic_error("unreachable");
    }
    data.items.push_back(std::move(item));
  }
  return data;
}

namespace {

double bce_with_logits(double u, double y) {
  return std::max(u, 0.0) - u * y + std::log1p(std::exp(-std::abs(u)));
}

struct ItemResult {
  Eigen::VectorXd grad;  // unnormalized sum over this item's terms
  double term_sum = 0.0;
  std::int64_t count = 0;
};

// Loss terms and, if want_grad, full backpropagation through time for one item.
ItemResult item_loss(const ModelParams& params, const TrainItem& item, bool want_grad) {
  const ModelDims& dims = params.dims();
  ItemResult res;
  ForwardCache cache;
  const Eigen::MatrixXd logits = forward(params, item.features, want_grad ? &cache : nullptr);
  const SurvivalTargets& tg = item.targets;
  const Eigen::Index T = item.features.rows();
  const int K = dims.K;
  if (tg.y.cols() != K) throw std::invalid_argument("target K != model K");
  if (tg.label_start + tg.y.rows() != T) {
    throw std::invalid_argument("target rows misaligned with features");
  }

  Eigen::MatrixXd dU;
  if (want_grad) dU = Eigen::MatrixXd::Zero(T, K);
  for (Eigen::Index i = 0; i < tg.y.rows(); ++i) {
    const Eigen::Index t = tg.label_start + i;
    for (int k = 0; k < K; ++k) {
      const double w = tg.w(i, k);
      if (w <= 0.0) continue;
      const double u = logits(t, k);
      const double y = tg.y(i, k);
      res.term_sum += w * bce_with_logits(u, y);
      ++res.count;
      if (want_grad) dU(t, k) = w * (sigmoid(u) - y);
    }
  }
  if (!want_grad || res.count == 0) {
    if (want_grad) res.grad = Eigen::VectorXd::Zero(params.size());
    return res;
  }

  ModelParams grad(dims);
  auto gW_e = grad.W_e();
  auto gb_e = grad.b_e();
  auto gW_z = grad.W_z(), gU_z = grad.U_z();
  auto gW_r = grad.W_r(), gU_r = grad.U_r();
  auto gW_c = grad.W_c(), gU_c = grad.U_c();
  auto gb_z = grad.b_z(), gb_r = grad.b_r(), gb_c = grad.b_c();
  auto gW_o = grad.W_o();
  auto gb_o = grad.b_o();
  const auto W_z = params.W_z(), U_z = params.U_z();
  const auto W_r = params.W_r(), U_r = params.U_r();
  const auto W_c = params.W_c(), U_c = params.U_c();
  const auto W_o = params.W_o();

  const Eigen::Index n = dims.n;
  Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd du_t = dU.row(t).transpose();
    const Eigen::VectorXd h_t = cache.h.row(t).transpose();
    gW_o.noalias() += du_t * h_t.transpose();
    gb_o += du_t;

    Eigen::VectorXd dh = W_o.transpose() * du_t + dh_carry;
    const Eigen::VectorXd h_prev = t > 0 ? cache.h.row(t - 1).transpose() : zero;
    const Eigen::VectorXd z_t = cache.z.row(t).transpose();
    const Eigen::VectorXd r_t = cache.r.row(t).transpose();
    const Eigen::VectorXd c_t = cache.c.row(t).transpose();
    const Eigen::VectorXd e_t = cache.embed.row(t).transpose();

    const Eigen::VectorXd dz_pre =
        dh.cwiseProduct(c_t - h_prev).cwiseProduct(z_t).cwiseProduct(
            (1.0 - z_t.array()).matrix());
    const Eigen::VectorXd dc_pre =
        dh.cwiseProduct(z_t).cwiseProduct((1.0 - c_t.array().square()).matrix());
    const Eigen::VectorXd drh = U_c.transpose() * dc_pre;
    const Eigen::VectorXd dr_pre =
        drh.cwiseProduct(h_prev).cwiseProduct(r_t).cwiseProduct((1.0 - r_t.array()).matrix());

    dh_carry = dh.cwiseProduct((1.0 - z_t.array()).matrix());
    dh_carry.noalias() += drh.cwiseProduct(r_t);
    dh_carry.noalias() += U_z.transpose() * dz_pre;
    dh_carry.noalias() += U_r.transpose() * dr_pre;

    gW_z.noalias() += dz_pre * e_t.transpose();
    gU_z.noalias() += dz_pre * h_prev.transpose();
    gb_z += dz_pre;
    gW_r.noalias() += dr_pre * e_t.transpose();
    gU_r.noalias() += dr_pre * h_prev.transpose();
    gb_r += dr_pre;
    gW_c.noalias() += dc_pre * e_t.transpose();
    gU_c.noalias() += dc_pre * r_t.cwiseProduct(h_prev).transpose();
    gb_c += dc_pre;

    const Eigen::VectorXd de =
        W_z.transpose() * dz_pre + W_r.transpose() * dr_pre + W_c.transpose() * dc_pre;
    gW_e.noalias() += de * item.features.row(t);
    gb_e += de;
  }
  res.grad = std::move(grad.theta());
  return res;
}

}  // namespace

LossReport compute_loss(const ModelParams& params, const std::vector<const TrainItem*>& batch,
                        double l1_strength, Eigen::VectorXd* grad, int threads) {
  const bool want_grad = grad != nullptr;
  std::vector<ItemResult> results(batch.size());
  parallel_for(static_cast<std::int64_t>(batch.size()), threads, [&](std::int64_t i) {
    results[static_cast<std::size_t>(i)] =
        item_loss(params, *batch[static_cast<std::size_t>(i)], want_grad);
  });

  LossReport report;
  for (const ItemResult& r : results) {
    report.data_term += r.term_sum;
    report.weighted_term_count += r.count;
  }
  const Eigen::Index we_end = params.embedding_weights_end();
  report.l1_term =
      l1_strength * params.theta().head(we_end).cwiseAbs().sum();
  if (report.weighted_term_count == 0) {
    report.data_term = 0.0;
    report.total = report.l1_term;
    if (want_grad) grad->setZero(params.size());
    return report;
  }
  report.data_term /= static_cast<double>(report.weighted_term_count);
  report.total = report.data_term + report.l1_term;

  if (want_grad) {
    grad->setZero(params.size());
    for (const ItemResult& r : results) {
      if (r.count > 0) *grad += r.grad;
    }
    *grad /= static_cast<double>(report.weighted_term_count);
    if (l1_strength > 0.0) {
      for (Eigen::Index i = 0; i < we_end; ++i) {
        const double v = params.theta()(i);
        if (v > 0.0) (*grad)(i) += l1_strength;
        else if (v < 0.0) (*grad)(i) -= l1_strength;
      }
    }
  }
  return report;
}

double finite_difference_check(const ModelParams& params,
                               const std::vector<const TrainItem*>& batch, double l1_strength,
                               int n_probes, double step, std::uint64_t seed, int threads) {
  if (n_probes < 1) throw std::invalid_argument("n_probes must be >= 1");
  if (!(step >= 1e-6 && step <= 1e-3)) throw std::invalid_argument("step must be in [1e-6, 1e-3]");
  Eigen::VectorXd analytic(params.size());
  compute_loss(params, batch, l1_strength, &analytic, threads);

  ModelParams probe = params;
  Rng rng(Rng::substream(seed, 0xFD));
  const Eigen::Index we_end = params.embedding_weights_end();
  double max_rel = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    const Eigen::Index j =
        static_cast<Eigen::Index>(rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
    const double saved = probe.theta()(j);
    double local_step = step;
    // The L1 term is non-differentiable at 0; keep the probe on one side of
    // the kink when the coordinate is penalized and close to it.
    if (l1_strength > 0.0 && j < we_end && saved != 0.0) {
      local_step = std::max(1e-6, std::min(step, std::abs(saved) / 8.0));
    }
    probe.theta()(j) = saved + local_step;
    const double up = compute_loss(probe, batch, l1_strength, nullptr, threads).total;
    probe.theta()(j) = saved - local_step;
    const double down = compute_loss(probe, batch, l1_strength, nullptr, threads).total;
    probe.theta()(j) = saved;
    const double fd = (up - down) / (2.0 * local_step);
    const double rel = std::abs(analytic(j) - fd) / std::max(1e-8, std::abs(fd));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,train_loss,val_loss,val_timestep_auprc,elapsed_s\n";
  for (const EpochLog& row : log) {
    out << row.epoch << ',' << format_double(row.train_loss) << ',' << format_double(row.val_loss)
        << ',' << format_double(row.val_timestep_auprc) << ',' << format_double(row.elapsed_s)
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

double validation_auprc(const ModelParams& params, const CheckpointMeta& meta,
                        const std::vector<Stay>& stays, int threads) {
  std::vector<Eigen::MatrixXd> risks(stays.size());
  parallel_for(static_cast<std::int64_t>(stays.size()), threads, [&](std::int64_t i) {
    risks[static_cast<std::size_t>(i)] = stay_risk(params, meta, stays[static_cast<std::size_t>(i)]);
  });
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < stays.size(); ++i) {
    const EepLabels lab = eep_labels(stays[i], meta.h);
    const Eigen::MatrixXd& F = risks[i];
    for (Eigen::Index t = 0; t < F.rows(); ++t) {
      const std::int8_t y = lab.y[static_cast<std::size_t>(t)];
      if (y == kMasked) continue;
      scores.push_back(F(t, F.cols() - 1));
      labels.push_back(y);
    }
  }
  try {
    return timestep_auprc(scores, labels);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

FitResult fit(const std::vector<Stay>& train_stays, const std::vector<Stay>& val_stays,
              const TaskConfig& task, const TrainConfig& config, int threads) {
  validate_task(task);
  validate_train(config);
  if (train_stays.empty() || val_stays.empty()) {
    throw std::invalid_argument("empty train or validation split");
  }

  TrainingData train_data = build_training_data(train_stays, task, config);
  TrainingData val_data = build_training_data(val_stays, task, config, train_data.K);
  const int K = train_data.K;

  // Bias initialization calibrates the head to the corpus hazard rates; for
  // survtls the rates come from the hard-label view of the same episodes.
  std::vector<const SurvivalTargets*> rate_targets;
  TrainingData hard_view;
  if (config.objective == Objective::survtls) {
    TrainConfig hard_config = config;
    hard_config.objective = Objective::dsa_trunc;
    hard_view = build_training_data(train_stays, task, hard_config, K);
    for (const TrainItem& item : hard_view.items) rate_targets.push_back(&item.targets);
  } else {
    for (const TrainItem& item : train_data.items) rate_targets.push_back(&item.targets);
  }
  std::vector<int> floored;
  const Eigen::VectorXd rates = empirical_base_rates(rate_targets, K, &floored);
  hard_view.items.clear();
  if (!floored.empty()) {
    std::cerr << "note: base rate floored at " << floored.size() << " horizon(s)\n";
  }

  ModelDims dims;
  dims.d = static_cast<int>(train_stays.front().features.cols());
  dims.m = config.embed_dim;
  dims.n = config.hidden_dim;
  dims.K = K;
  ModelParams params = init_params(dims, rates, config.seed);

  CheckpointMeta meta;
  meta.dims = dims;
  meta.h = task.horizon;
  meta.objective = objective_name(config.objective);
  meta.seed = config.seed;

  const Eigen::Index P = params.size();
  Eigen::VectorXd grad(P);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(P);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t adam_step = 0;

  std::vector<std::size_t> order(train_data.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  FitResult result;
  result.meta = meta;
  Eigen::VectorXd best_theta = params.theta();
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_since_best = 0;

  auto batch_ptrs = [](const std::vector<TrainItem>& items, const std::vector<std::size_t>& idx,
                       std::size_t lo, std::size_t hi) {
    std::vector<const TrainItem*> ptrs;
    ptrs.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&items[idx[i]]);
    return ptrs;
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(Rng::substream(config.seed, 0xE000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    double train_sum = 0.0;
    std::int64_t train_count = 0;
    double l1_term = 0.0;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    int batch_index = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += bs, ++batch_index) {
      const std::size_t hi = std::min(order.size(), lo + bs);
      const auto batch = batch_ptrs(train_data.items, order, lo, hi);
      const LossReport report = compute_loss(params, batch, config.l1_strength, &grad, threads);
      if (report.weighted_term_count == 0) {
        std::cerr << "warning: batch " << batch_index << " of epoch " << epoch
                  << " has no weighted terms; skipped\n";
        continue;
      }
      if (!std::isfinite(report.total)) throw DivergenceError(epoch, batch_index);
      ++adam_step;
      adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
      adam_v = beta2 * adam_v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double mc = 1.0 - std::pow(beta1, static_cast<double>(adam_step));
      const double vc = 1.0 - std::pow(beta2, static_cast<double>(adam_step));
      params.theta() -=
          (config.learning_rate / mc) *
          adam_m.cwiseQuotient(((adam_v / vc).cwiseSqrt().array() + eps).matrix());
      train_sum += report.data_term * static_cast<double>(report.weighted_term_count);
      train_count += report.weighted_term_count;
      l1_term = report.l1_term;
    }

    double val_sum = 0.0;
    std::int64_t val_count = 0;
    double val_l1 = 0.0;
    std::vector<std::size_t> val_order(val_data.items.size());
    for (std::size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;
    for (std::size_t lo = 0; lo < val_order.size(); lo += bs) {
      const std::size_t hi = std::min(val_order.size(), lo + bs);
      const auto batch = batch_ptrs(val_data.items, val_order, lo, hi);
      const LossReport report = compute_loss(params, batch, config.l1_strength, nullptr, threads);
      val_sum += report.data_term * static_cast<double>(report.weighted_term_count);
      val_count += report.weighted_term_count;
      val_l1 = report.l1_term;
    }
    const double val_loss =
        (val_count > 0 ? val_sum / static_cast<double>(val_count) : 0.0) + val_l1;
    if (!std::isfinite(val_loss)) throw DivergenceError(epoch, -1);

    EpochLog row;
    row.epoch = epoch;
    row.train_loss =
        (train_count > 0 ? train_sum / static_cast<double>(train_count) : 0.0) + l1_term;
    row.val_loss = val_loss;
    row.val_timestep_auprc = validation_auprc(params, meta, val_stays, threads);
    const auto t1 = std::chrono::steady_clock::now();
    row.elapsed_s =
        std::round(std::chrono::duration<double>(t1 - t0).count() * 1000.0) / 1000.0;
    result.log.push_back(row);

    if (val_loss < best_val) {
      best_val = val_loss;
      best_theta = params.theta();
      best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }

  params.theta() = best_theta;
  result.params = std::move(params);
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  return result;
}

Eigen::MatrixXd stay_risk(const ModelParams& params, const CheckpointMeta& meta,
                          const Stay& stay) {
  const Eigen::MatrixXd logits = forward(params, stay.features);
  if (meta.objective == "eep") {
    return hazards_from_logits(logits);
  }
  if (meta.h > meta.dims.K) throw std::invalid_argument("checkpoint K < horizon");
  return cumulative_failure(hazards_from_logits(logits), meta.h).F;
}

}  // namespace dsa
