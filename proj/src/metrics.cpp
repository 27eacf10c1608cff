#include "dsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dsa/alarm.hpp"
#include "dsa/stay_io.hpp"

namespace dsa {

double timestep_auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("score/label length mismatch");
  std::int64_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0/1");
    positives += y;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("timestep AuPRC undefined: labels are all one class");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  double area = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]];
      fp += 1 - labels[order[j]];
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

namespace {

struct Window {
  std::size_t stay = 0;
  int onset = 0;
  int lo = 0;
  int hi = 0;
};

std::vector<Window> collect_windows(const std::vector<std::vector<std::uint8_t>>& events, int h,
                                    int* undetectable) {
  std::vector<Window> windows;
  *undetectable = 0;
  for (std::size_t s = 0; s < events.size(); ++s) {
    const auto& e = events[s];
    for (std::size_t t = 0; t < e.size(); ++t) {
      if (e[t] != 1 || (t > 0 && e[t - 1] == 1)) continue;
      if (t == 0) {
        ++*undetectable;
        continue;
      }
      Window w;
      w.stay = s;
      w.onset = static_cast<int>(t);
      w.lo = std::max(0, static_cast<int>(t) - h);
      w.hi = static_cast<int>(t) - 1;
      windows.push_back(w);
    }
  }
  return windows;
}

}  // namespace

EventSummary event_summary(const std::vector<std::vector<std::uint8_t>>& alarms,
                           const std::vector<std::vector<std::uint8_t>>& events, int h) {
  if (alarms.size() != events.size()) throw std::invalid_argument("alarm/event cohort mismatch");
  if (h < 1) throw std::invalid_argument("h must be >= 1");
  for (std::size_t s = 0; s < alarms.size(); ++s) {
    if (alarms[s].size() != events[s].size()) {
      throw std::invalid_argument("alarm/event length mismatch in stay " + std::to_string(s));
    }
  }

  EventSummary out;
  const std::vector<Window> windows = collect_windows(events, h, &out.n_undetectable);
  out.n_events = static_cast<int>(windows.size()) + out.n_undetectable;

  double distance_sum = 0.0;
  for (const Window& w : windows) {
    const auto& a = alarms[w.stay];
    int first = -1;
    for (int t = w.lo; t <= w.hi; ++t) {
      if (a[static_cast<std::size_t>(t)] != 0) {
        first = t;
        break;
      }
    }
    if (first >= 0) {
      ++out.n_detected;
      distance_sum += w.onset - first;
    }
  }

  for (std::size_t s = 0; s < alarms.size(); ++s) {
    for (std::size_t t = 0; t < alarms[s].size(); ++t) {
      if (alarms[s][t] == 0) continue;
      ++out.n_alarms;
      for (const Window& w : windows) {
        if (w.stay == s && static_cast<int>(t) >= w.lo && static_cast<int>(t) <= w.hi) {
          ++out.n_true_alarms;
          break;
        }
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int detectable = static_cast<int>(windows.size());
  out.event_recall = detectable > 0 ? static_cast<double>(out.n_detected) / detectable : nan;
  out.alarm_precision =
      out.n_alarms > 0 ? static_cast<double>(out.n_true_alarms) / out.n_alarms : nan;
  out.mean_first_alarm_distance = out.n_detected > 0 ? distance_sum / out.n_detected : nan;
  return out;
}

std::vector<double> default_tau_grid(const std::vector<std::vector<double>>& step_scores) {
  std::set<double> grid;
  for (int i = 0; i < 1000; ++i) grid.insert(static_cast<double>(i) / 999.0);
  std::set<double> observed;
  bool too_many = false;
  for (const auto& stay : step_scores) {
    for (double s : stay) {
      observed.insert(s);
      if (observed.size() > 5000) {
        too_many = true;
        break;
      }
    }
    if (too_many) break;
  }
  if (!too_many) grid.insert(observed.begin(), observed.end());
  return std::vector<double>(grid.begin(), grid.end());
}

EventCurve event_pr_curve(const std::vector<std::vector<double>>& step_scores,
                          const std::vector<std::vector<std::uint8_t>>& events, int h, int sigma,
                          const std::vector<double>& tau_grid) {
  if (step_scores.size() != events.size()) throw std::invalid_argument("cohort size mismatch");
  if (tau_grid.size() < 2) throw std::invalid_argument("tau grid needs >= 2 thresholds");

  std::vector<double> taus = tau_grid;
  std::sort(taus.begin(), taus.end(), std::greater<double>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  EventCurve curve;
  std::vector<std::vector<std::uint8_t>> alarms(step_scores.size());
  double prev_recall = -1.0;
  for (double tau : taus) {
    for (std::size_t s = 0; s < step_scores.size(); ++s) {
      alarms[s] = scan_alarms(step_scores[s], events[s], tau, sigma);
    }
    const EventSummary summary = event_summary(alarms, events, h);
    if (summary.n_alarms == 0) {
      ++curve.skipped_taus;
      continue;
    }
    if (std::isnan(summary.event_recall)) {
      throw std::invalid_argument("event PR curve undefined: no detectable events");
    }
    CurvePoint point;
    point.tau = tau;
    point.event_recall = summary.event_recall;
    point.alarm_precision = summary.alarm_precision;
    point.mean_first_alarm_distance = summary.mean_first_alarm_distance;
    curve.points.push_back(point);
    if (prev_recall >= 0.0 && point.event_recall < prev_recall) ++curve.nonmonotonicities;
    prev_recall = point.event_recall;
  }

  if (curve.points.empty()) {
    curve.auprc = 0.0;
    return curve;
  }

  // Collapse to max precision per recall value, with the (0, 1) boundary.
  std::vector<std::pair<double, double>> rp;
  rp.emplace_back(0.0, 1.0);
  for (const CurvePoint& p : curve.points) rp.emplace_back(p.event_recall, p.alarm_precision);
  std::sort(rp.begin(), rp.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& [r, p] : rp) {
    if (!merged.empty() && merged.back().first == r) {
      merged.back().second = std::max(merged.back().second, p);
    } else {
      merged.emplace_back(r, p);
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < merged.size(); ++i) {
    area += (merged[i].first - merged[i - 1].first) * merged[i].second;
  }
  curve.auprc = area;
  return curve;
}

OperatingPoint recall_at_precision(const EventCurve& curve, double level) {
  OperatingPoint op;
  op.precision_level = level;
  for (const CurvePoint& p : curve.points) {
    if (p.alarm_precision < level) continue;
    if (!op.found || p.event_recall > op.event_recall ||
        (p.event_recall == op.event_recall && p.tau > op.tau)) {
      op.found = true;
      op.tau = p.tau;
      op.event_recall = p.event_recall;
      op.mean_first_alarm_distance = p.mean_first_alarm_distance;
    }
  }
  return op;
}

void write_curve_csv(const std::string& path, const EventCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "tau,event_recall,alarm_precision,mean_first_alarm_distance_steps\n";
  for (const CurvePoint& p : curve.points) {
    out << format_double(p.tau) << ',' << format_double(p.event_recall) << ','
        << format_double(p.alarm_precision) << ',' << format_double(p.mean_first_alarm_distance)
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dsa
