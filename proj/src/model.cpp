#include "dsa/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dsa/rng.hpp"
#include "dsa/stay_io.hpp"

namespace dsa {

bool operator==(const ModelDims& a, const ModelDims& b) {
  return a.d == b.d && a.m == b.m && a.n == b.n && a.K == b.K;
}

ModelParams::ModelParams(const ModelDims& dims) : dims_(dims) {
  if (dims.d < 1 || dims.m < 1 || dims.n < 1 || dims.K < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  theta_ = Eigen::VectorXd::Zero(param_count(dims));
}

Eigen::Index ModelParams::param_count(const ModelDims& dims) {
  const Eigen::Index d = dims.d, m = dims.m, n = dims.n, K = dims.K;
  return m * d + m + 3 * (n * m + n * n + n) + K * n + K;
}

Eigen::Index ModelParams::seg_offset(int seg) const {
  const Eigen::Index d = dims_.d, m = dims_.m, n = dims_.n, K = dims_.K;
  const Eigen::Index sizes[13] = {m * d, m,         n * m, n * n, n,    n * m, n * n,
                                  n,     n * m,     n * n, n,     K * n, K};
  Eigen::Index off = 0;
  for (int i = 0; i < seg; ++i) off += sizes[i];
  (void)K;
  return off;
}

Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features,
                        ForwardCache* cache) {
  const ModelDims& dims = params.dims();
  if (features.cols() != dims.d) throw std::invalid_argument("feature width != model d");
  const Eigen::Index T = features.rows();
  const Eigen::Index n = dims.n;

  const auto W_e = params.W_e();
  const auto b_e = params.b_e();
  const auto W_z = params.W_z(), U_z = params.U_z();
  const auto W_r = params.W_r(), U_r = params.U_r();
  const auto W_c = params.W_c(), U_c = params.U_c();
  const auto b_z = params.b_z(), b_r = params.b_r(), b_c = params.b_c();
  const auto W_o = params.W_o();
  const auto b_o = params.b_o();

  Eigen::MatrixXd embed = features * W_e.transpose();
  embed.rowwise() += b_e.transpose();

  Eigen::MatrixXd z(T, n), r(T, n), c(T, n), h(T, n);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd e_t = embed.row(t).transpose();
    Eigen::VectorXd z_t = (W_z * e_t + U_z * h_prev + b_z).unaryExpr([](double v) {
      return sigmoid(v);
    });
    Eigen::VectorXd r_t = (W_r * e_t + U_r * h_prev + b_r).unaryExpr([](double v) {
      return sigmoid(v);
    });
    Eigen::VectorXd c_t =
        (W_c * e_t + U_c * (r_t.cwiseProduct(h_prev)) + b_c).array().tanh().matrix();
    Eigen::VectorXd h_t =
        (Eigen::VectorXd::Ones(n) - z_t).cwiseProduct(h_prev) + z_t.cwiseProduct(c_t);
    z.row(t) = z_t.transpose();
    r.row(t) = r_t.transpose();
    c.row(t) = c_t.transpose();
    h.row(t) = h_t.transpose();
    h_prev = h_t;
  }

  Eigen::MatrixXd logits = h * W_o.transpose();
  logits.rowwise() += b_o.transpose();

  if (cache != nullptr) {
    cache->embed = std::move(embed);
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->c = std::move(c);
    cache->h = std::move(h);
    cache->logits = logits;
  }
  return logits;
}

Eigen::MatrixXd hazards_from_logits(const Eigen::MatrixXd& logits) {
  return logits.unaryExpr([](double v) { return sigmoid(v); });
}

RiskMatrix cumulative_failure(const Eigen::MatrixXd& hazards, int h) {
  if (h < 1 || h > hazards.cols()) throw std::invalid_argument("need 1 <= h <= K");
  const Eigen::Index T = hazards.rows();
  RiskMatrix risk;
  risk.F.resize(T, h);
  risk.f.resize(T, h);
  for (Eigen::Index t = 0; t < T; ++t) {
    double log_surv = 0.0;  // log prod_{j<=k}(1 - lambda(j))
    for (int k = 0; k < h; ++k) {
      const double lam = hazards(t, k);
      risk.f(t, k) = std::exp(log_surv) * lam;
      log_surv += std::log1p(-lam);
      risk.F(t, k) = -std::expm1(log_surv);
    }
  }
  return risk;
}

Eigen::VectorXd empirical_base_rates(const std::vector<SurvivalTargets>& targets, int K,
                                     std::vector<int>* floored) {
  std::vector<const SurvivalTargets*> ptrs;
  ptrs.reserve(targets.size());
  for (const SurvivalTargets& tg : targets) ptrs.push_back(&tg);
  return empirical_base_rates(ptrs, K, floored);
}

Eigen::VectorXd empirical_base_rates(const std::vector<const SurvivalTargets*>& targets, int K,
                                     std::vector<int>* floored) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  Eigen::VectorXd num = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(K);
  std::int64_t weighted_steps = 0;
  for (const SurvivalTargets* tgp : targets) {
    const SurvivalTargets& tg = *tgp;
    if (tg.y.cols() != K) throw std::invalid_argument("target horizon != K");
    num += (tg.y.array() * tg.w.array()).colwise().sum().matrix().transpose();
    den += tg.w.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < tg.w.rows(); ++i) {
      if ((tg.w.row(i).array() > 0.0).any()) ++weighted_steps;
    }
  }
  const double floor = 1.0 / (static_cast<double>(weighted_steps) + 1.0);
  Eigen::VectorXd rates(K);
  if (floored != nullptr) floored->clear();
  for (int k = 0; k < K; ++k) {
    double rate = den(k) > 0.0 ? num(k) / den(k) : 0.0;
    bool adjusted = false;
    if (den(k) <= 0.0 || rate <= 0.0) {
      rate = floor;
      adjusted = true;
    } else if (rate >= 1.0) {
      rate = 1.0 - floor;
      adjusted = true;
    }
    rates(k) = rate;
    if (adjusted && floored != nullptr) floored->push_back(k + 1);
  }
  return rates;
}

ModelParams init_params(const ModelDims& dims, const Eigen::VectorXd& base_rates,
                        std::uint64_t seed) {
  if (base_rates.size() != dims.K) throw std::invalid_argument("base rate count != K");
  for (int k = 0; k < dims.K; ++k) {
    if (!(base_rates(k) > 0.0 && base_rates(k) < 1.0)) {
      throw std::invalid_argument(
          "base rate outside (0,1) at horizon " + std::to_string(k + 1) +
          "; apply the empirical_base_rates floor before initializing");
    }
  }
  ModelParams params(dims);
  Rng rng(Rng::substream(seed, 0x1417));

  auto fill_uniform = [&rng](auto&& map, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < map.rows(); ++i) {
      for (Eigen::Index j = 0; j < map.cols(); ++j) map(i, j) = rng.uniform(-bound, bound);
    }
  };
  fill_uniform(params.W_e(), dims.d);
  fill_uniform(params.b_e(), dims.d);
  fill_uniform(params.W_z(), dims.m + dims.n);
  fill_uniform(params.U_z(), dims.m + dims.n);
  fill_uniform(params.b_z(), dims.m + dims.n);
  fill_uniform(params.W_r(), dims.m + dims.n);
  fill_uniform(params.U_r(), dims.m + dims.n);
  fill_uniform(params.b_r(), dims.m + dims.n);
  fill_uniform(params.W_c(), dims.m + dims.n);
  fill_uniform(params.U_c(), dims.m + dims.n);
  fill_uniform(params.b_c(), dims.m + dims.n);
  fill_uniform(params.W_o(), dims.n);
  auto b_o = params.b_o();
  for (int k = 0; k < dims.K; ++k) {
    b_o(k) = std::log(base_rates(k) / (1.0 - base_rates(k)));
  }
  return params;
}

namespace {

nlohmann::json tensor_json(const char* /*name*/, const double* data, Eigen::Index rows,
                           Eigen::Index cols) {
  nlohmann::json t;
  t["shape"] = cols < 0 ? nlohmann::json::array({rows}) : nlohmann::json::array({rows, cols});
  nlohmann::json values = nlohmann::json::array();
  const Eigen::Index count = cols < 0 ? rows : rows * cols;
  for (Eigen::Index i = 0; i < count; ++i) values.push_back(data[i]);
  t["data"] = std::move(values);
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  if (!(params.dims() == meta.dims)) throw std::invalid_argument("checkpoint dims mismatch");
  nlohmann::json doc;
  doc["metadata"] = {{"d", meta.dims.d},     {"m", meta.dims.m},   {"n", meta.dims.n},
                     {"K", meta.dims.K},     {"h", meta.h},        {"objective", meta.objective},
                     {"seed", meta.seed}};
  nlohmann::json tensors;
  const ModelDims& dm = meta.dims;
  auto add = [&](const char* name, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
    tensors[name] = tensor_json(name, params.theta().data() + offset, rows, cols);
  };
  Eigen::Index off = 0;
  const Eigen::Index d = dm.d, m = dm.m, n = dm.n, K = dm.K;
  struct Seg {
    const char* name;
    Eigen::Index rows, cols;
  };
  const Seg segs[13] = {{"W_e", m, d}, {"b_e", m, -1}, {"W_z", n, m}, {"U_z", n, n},
                        {"b_z", n, -1}, {"W_r", n, m},  {"U_r", n, n}, {"b_r", n, -1},
                        {"W_c", n, m}, {"U_c", n, n},  {"b_c", n, -1}, {"W_o", K, n},
                        {"b_o", K, -1}};
  for (const Seg& s : segs) {
    add(s.name, off, s.rows, s.cols);
    off += s.cols < 0 ? s.rows : s.rows * s.cols;
  }

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  doc["tensors"] = std::move(tensors);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::pair<ModelParams, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid checkpoint JSON: " + e.what());
  }
  CheckpointMeta meta;
  const auto& md = doc.at("metadata");
  meta.dims.d = md.at("d").get<int>();
  meta.dims.m = md.at("m").get<int>();
  meta.dims.n = md.at("n").get<int>();
  meta.dims.K = md.at("K").get<int>();
  meta.h = md.at("h").get<int>();
  meta.objective = md.at("objective").get<std::string>();
  meta.seed = md.at("seed").get<std::uint64_t>();

  ModelParams params(meta.dims);
  const ModelDims& dm = meta.dims;
  const Eigen::Index d = dm.d, m = dm.m, n = dm.n, K = dm.K;
  struct Seg {
    const char* name;
    Eigen::Index count;
  };
  const Seg segs[13] = {{"W_e", m * d}, {"b_e", m},     {"W_z", n * m}, {"U_z", n * n},
                        {"b_z", n},     {"W_r", n * m}, {"U_r", n * n}, {"b_r", n},
                        {"W_c", n * m}, {"U_c", n * n}, {"b_c", n},     {"W_o", K * n},
                        {"b_o", K}};
  Eigen::Index off = 0;
  const auto& tensors = doc.at("tensors");
  for (const Seg& s : segs) {
    const auto& data = tensors.at(s.name).at("data");
    if (static_cast<Eigen::Index>(data.size()) != s.count) {
      throw std::runtime_error(path + ": tensor " + s.name + " has wrong size");
    }
    for (Eigen::Index i = 0; i < s.count; ++i) {
      params.theta()(off + i) = data[static_cast<std::size_t>(i)].get<double>();
    }
    off += s.count;
  }
  return {std::move(params), std::move(meta)};
}

}  // namespace dsa
