#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsa {

// Step-wise precision-recall area with tied scores grouped: one PR point per
// distinct score, area = sum of precision * recall increment. Labels must
// contain at least one positive and one negative.
double timestep_auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// Event-level counts for one cohort at a fixed alarm trace. An event with
// onset t_E is detectable unless t_E = 0; its window is [max(0, t_E - h),
// t_E - 1]. recall / precision / mean distance are NaN when their denominator
// is empty (no detectable events / no alarms / no detections).
struct EventSummary {
  int n_events = 0;
  int n_undetectable = 0;
  int n_detected = 0;
  int n_alarms = 0;
  int n_true_alarms = 0;
  double event_recall = 0.0;
  double alarm_precision = 0.0;
  double mean_first_alarm_distance = 0.0;
};

EventSummary event_summary(const std::vector<std::vector<std::uint8_t>>& alarms,
                           const std::vector<std::vector<std::uint8_t>>& events, int h);

struct CurvePoint {
  double tau = 0.0;
  double event_recall = 0.0;
  double alarm_precision = 0.0;
  double mean_first_alarm_distance = 0.0;
};

struct EventCurve {
  std::vector<CurvePoint> points;  // in descending-tau sweep order
  double auprc = 0.0;
  int skipped_taus = 0;        // thresholds with zero alarms (precision undefined)
  int nonmonotonicities = 0;   // recall decreases along descending tau (silencing artifact)
};

// Sweeps tau over the grid, scanning alarms per stay from precomputed scalar
// step scores (see step_scores), and integrates precision over recall with the
// (0, 1) boundary appended and max precision taken at equal recall.
EventCurve event_pr_curve(const std::vector<std::vector<double>>& step_scores,
                          const std::vector<std::vector<std::uint8_t>>& events, int h, int sigma,
                          const std::vector<double>& tau_grid);

// 1000 evenly spaced thresholds in [0,1] plus every distinct observed score
// when there are at most 5000 of them.
std::vector<double> default_tau_grid(const std::vector<std::vector<double>>& step_scores);

// Highest-recall sweep point with alarm_precision >= level (ties broken
// toward higher tau). found = false when no point qualifies.
struct OperatingPoint {
  double precision_level = 0.0;
  bool found = false;
  double tau = 0.0;
  double event_recall = 0.0;
  double mean_first_alarm_distance = 0.0;
};

OperatingPoint recall_at_precision(const EventCurve& curve, double level);

// CSV `tau,event_recall,alarm_precision,mean_first_alarm_distance_steps`.
void write_curve_csv(const std::string& path, const EventCurve& curve);

}  // namespace dsa
