#include "dsa/alarm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dsa {

void validate_policy(const PolicyConfig& c, int h) {
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw std::invalid_argument("tau must be in [0,1]");
  if (c.sigma < 1) throw std::invalid_argument("sigma must be >= 1");
  if (c.mode == PolicyMode::prioritized && c.shape == PriorityShape::convex) {
    if (!(c.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (c.h_max < 1 || c.h_max > h) throw std::invalid_argument("need 1 <= h_max <= horizon");
  }
}

double q_exp(int k, double gamma, int h_max) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (h_max < 1) throw std::invalid_argument("h_max must be >= 1");
  if (k < 0) throw std::invalid_argument("k must be >= 0");
  if (k > h_max) return 0.0;
  const double denom = -std::expm1(-gamma * h_max);
  if (denom <= 0.0) throw std::invalid_argument("decay underflow; increase gamma");
  return (std::expm1(-gamma * k) - std::expm1(-gamma * h_max)) / denom;
}

Eigen::VectorXd prioritized_scores(const Eigen::VectorXd& risk_row, const PolicyConfig& config) {
  const int h = static_cast<int>(risk_row.size());
  Eigen::VectorXd s(h);
  if (config.shape == PriorityShape::identity) {
    s = risk_row;
    return s;
  }
  for (int k = 1; k <= h; ++k) {
    s(k - 1) = q_exp(k, config.gamma, config.h_max) * risk_row(k - 1);
  }
  return s;
}

std::vector<double> step_scores(const Eigen::MatrixXd& risk, const PolicyConfig& config) {
  const Eigen::Index T = risk.rows();
  std::vector<double> scores(static_cast<std::size_t>(T), 0.0);
  if (config.mode == PolicyMode::fixed) {
    for (Eigen::Index t = 0; t < T; ++t) scores[static_cast<std::size_t>(t)] = risk(t, risk.cols() - 1);
    return scores;
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd s = prioritized_scores(risk.row(t).transpose(), config);
    scores[static_cast<std::size_t>(t)] = s.maxCoeff();
  }
  return scores;
}

std::vector<std::uint8_t> scan_alarms(const std::vector<double>& scores,
                                      const std::vector<std::uint8_t>& event_mask, double tau,
                                      int sigma) {
  if (scores.size() != event_mask.size()) throw std::invalid_argument("score/mask length mismatch");
  std::vector<std::uint8_t> alarm(scores.size(), 0);
  std::int64_t last_alarm = -1;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (event_mask[t] != 0) continue;
    if (scores[t] < tau) continue;
    if (last_alarm >= 0 && static_cast<std::int64_t>(t) - last_alarm < sigma) continue;
    alarm[t] = 1;
    last_alarm = static_cast<std::int64_t>(t);
  }
  return alarm;
}

AlarmTrace raise_alarms(const Eigen::MatrixXd& risk, const std::vector<std::uint8_t>& event_mask,
                        const PolicyConfig& config) {
  validate_policy(config, static_cast<int>(risk.cols()));
  if (static_cast<std::size_t>(risk.rows()) != event_mask.size()) {
    throw std::invalid_argument("risk rows != mask length");
  }
  const std::vector<double> scores = step_scores(risk, config);
  AlarmTrace trace;
  trace.alarm = scan_alarms(scores, event_mask, config.tau, config.sigma);
  trace.d_t.assign(trace.alarm.size(), -1);
  if (config.mode == PolicyMode::prioritized) {
    for (std::size_t t = 0; t < trace.alarm.size(); ++t) {
      if (trace.alarm[t] == 0) continue;
      const Eigen::VectorXd s =
          prioritized_scores(risk.row(static_cast<Eigen::Index>(t)).transpose(), config);
      for (int k = 1; k <= s.size(); ++k) {
        if (s(k - 1) >= config.tau) {
          trace.d_t[t] = k;
          break;
        }
      }
    }
  }
  return trace;
}

void write_alarms_csv(const std::string& path, const std::vector<std::string>& stay_ids,
                      const std::vector<AlarmTrace>& traces) {
  if (stay_ids.size() != traces.size()) throw std::invalid_argument("id/trace count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "stay_id,step,alarm,d_t\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const AlarmTrace& trace = traces[i];
    for (std::size_t t = 0; t < trace.alarm.size(); ++t) {
      out << stay_ids[i] << ',' << t << ',' << int(trace.alarm[t]) << ',';
      if (trace.d_t[t] >= 0) out << trace.d_t[t];
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dsa
