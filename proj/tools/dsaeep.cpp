// dsaeep: batch runner for synthetic cohort generation, hazard-model training,
// alarm-policy evaluation, threshold sweeps, the horizon ablation, and the
// finite-difference gradient check. Every command writes its artifacts under
// --out-dir and finishes with a manifest.json describing the run.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsa/alarm.hpp"
#include "dsa/core.hpp"
#include "dsa/labeling.hpp"
#include "dsa/metrics.hpp"
#include "dsa/model.hpp"
#include "dsa/rng.hpp"
#include "dsa/stay_io.hpp"
#include "dsa/synthgen.hpp"
#include "dsa/training.hpp"
#include "dsa/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Anything wrong with the configuration or the input files: exit code 2.
struct CliError : std::runtime_error {
  explicit CliError(const std::string& what) : std::runtime_error(what) {}
};

struct AppState {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
  std::string preset;
  std::string config_path;

  dsa::TaskConfig task;
  dsa::GenConfig gen;
  dsa::TrainConfig train;
  double val_fraction = 0.2;
  dsa::PolicyConfig policy;
};

// ---------------------------------------------------------------- config ---

// Expected JSON type per key: i integer, u non-negative integer, d number,
// s string, o object. Unknown keys are rejected rather than ignored so a
// typoed option cannot silently fall back to a default.
using Schema = std::map<std::string, char>;

void check_schema(const json& obj, const std::string& where, const Schema& allowed) {
  if (!obj.is_object()) throw CliError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto found = allowed.find(it.key());
    if (found == allowed.end()) {
      throw CliError("unknown config key '" + where + it.key() + "'");
    }
    const json& v = it.value();
    bool ok = false;
    switch (found->second) {
      case 'i': ok = v.is_number_integer(); break;
      case 'u': ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); break;
      case 'd': ok = v.is_number(); break;
      case 's': ok = v.is_string(); break;
      case 'o': ok = v.is_object(); break;
    }
    if (!ok) {
      throw CliError("config key '" + where + it.key() + "' has the wrong type");
    }
  }
}

const Schema kTopSchema = {{"seed", 'u'},  {"out_dir", 's'}, {"threads", 'i'},
                           {"preset", 's'}, {"task", 'o'},    {"gen", 'o'},
                           {"train", 'o'},  {"policy", 'o'}};
const Schema kTaskSchema = {{"horizon", 'i'}, {"resolution_minutes", 'd'}, {"max_train_horizon", 'i'}};
const Schema kGenSchema = {{"n_stays", 'i'},       {"min_len", 'i'},      {"max_len", 'i'},
                           {"n_features", 'i'},    {"latent_ar_coeff", 'd'}, {"hazard_scale", 'd'},
                           {"hazard_offset", 'd'}, {"signal_decay", 'd'}, {"noise_std", 'd'},
                           {"event_duration", 'i'}};
const Schema kTrainSchema = {{"objective", 's'},   {"batch_size", 'i'}, {"learning_rate", 'd'},
                             {"l1_strength", 'd'}, {"patience", 'i'},   {"max_epochs", 'i'},
                             {"lengthscale", 'd'}, {"embed_dim", 'i'},  {"hidden_dim", 'i'},
                             {"val_fraction", 'd'}};
const Schema kPolicySchema = {{"mode", 's'},  {"tau", 'd'},   {"sigma", 'i'},
                              {"gamma", 'd'}, {"h_max", 'i'}, {"shape", 's'}};

dsa::PolicyMode parse_mode(const std::string& name) {
  if (name == "fixed") return dsa::PolicyMode::fixed;
  if (name == "prioritized") return dsa::PolicyMode::prioritized;
  throw CliError("unknown policy mode '" + name + "' (fixed | prioritized)");
}

dsa::PriorityShape parse_shape(const std::string& name) {
  if (name == "convex") return dsa::PriorityShape::convex;
  if (name == "identity") return dsa::PriorityShape::identity;
  throw CliError("unknown priority shape '" + name + "' (convex | identity)");
}

void apply_preset(AppState& s, const std::string& name) {
  if (name == "circ" || name == "vent") {
    s.task.horizon = 144;  // 12 h at 5-minute steps
    s.task.resolution_minutes = 5.0;
  } else if (name == "decomp") {
    s.task.horizon = 24;  // 24 h at 1-hour steps
    s.task.resolution_minutes = 60.0;
  } else if (name == "synth") {
    s.task.horizon = 6;  // desk-scale smoke setting
    s.task.resolution_minutes = 5.0;
  } else {
    throw CliError("unknown preset '" + name + "' (circ | vent | decomp | synth)");
  }
  s.task.max_train_horizon = 4 * s.task.horizon;
  s.preset = name;
}

void apply_config_file(AppState& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot open config file " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CliError("config file " + path + " is not valid JSON: " + e.what());
  }
  check_schema(cfg, "", kTopSchema);
  if (cfg.contains("preset")) apply_preset(s, cfg["preset"].get<std::string>());
  if (cfg.contains("seed")) s.seed = cfg["seed"].get<std::uint64_t>();
  if (cfg.contains("out_dir")) s.out_dir = cfg["out_dir"].get<std::string>();
  if (cfg.contains("threads")) s.threads = cfg["threads"].get<int>();
  if (cfg.contains("task")) {
    const json& t = cfg["task"];
    check_schema(t, "task.", kTaskSchema);
    if (t.contains("horizon")) s.task.horizon = t["horizon"].get<int>();
    if (t.contains("resolution_minutes")) {
      s.task.resolution_minutes = t["resolution_minutes"].get<double>();
    }
    if (t.contains("max_train_horizon")) {
      s.task.max_train_horizon = t["max_train_horizon"].get<int>();
    }
  }
  if (cfg.contains("gen")) {
    const json& g = cfg["gen"];
    check_schema(g, "gen.", kGenSchema);
    if (g.contains("n_stays")) s.gen.n_stays = g["n_stays"].get<int>();
    if (g.contains("min_len")) s.gen.min_len = g["min_len"].get<int>();
    if (g.contains("max_len")) s.gen.max_len = g["max_len"].get<int>();
    if (g.contains("n_features")) s.gen.n_features = g["n_features"].get<int>();
    if (g.contains("latent_ar_coeff")) s.gen.latent_ar_coeff = g["latent_ar_coeff"].get<double>();
    if (g.contains("hazard_scale")) s.gen.hazard_scale = g["hazard_scale"].get<double>();
    if (g.contains("hazard_offset")) s.gen.hazard_offset = g["hazard_offset"].get<double>();
    if (g.contains("signal_decay")) s.gen.signal_decay = g["signal_decay"].get<double>();
    if (g.contains("noise_std")) s.gen.noise_std = g["noise_std"].get<double>();
    if (g.contains("event_duration")) s.gen.event_duration = g["event_duration"].get<int>();
  }
  if (cfg.contains("train")) {
    const json& t = cfg["train"];
    check_schema(t, "train.", kTrainSchema);
    if (t.contains("objective")) s.train.objective = dsa::parse_objective(t["objective"].get<std::string>());
    if (t.contains("batch_size")) s.train.batch_size = t["batch_size"].get<int>();
    if (t.contains("learning_rate")) s.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("l1_strength")) s.train.l1_strength = t["l1_strength"].get<double>();
    if (t.contains("patience")) s.train.patience = t["patience"].get<int>();
    if (t.contains("max_epochs")) s.train.max_epochs = t["max_epochs"].get<int>();
    if (t.contains("lengthscale")) s.train.lengthscale = t["lengthscale"].get<double>();
    if (t.contains("embed_dim")) s.train.embed_dim = t["embed_dim"].get<int>();
    if (t.contains("hidden_dim")) s.train.hidden_dim = t["hidden_dim"].get<int>();
    if (t.contains("val_fraction")) s.val_fraction = t["val_fraction"].get<double>();
  }
  if (cfg.contains("policy")) {
    const json& p = cfg["policy"];
    check_schema(p, "policy.", kPolicySchema);
    if (p.contains("mode")) s.policy.mode = parse_mode(p["mode"].get<std::string>());
    if (p.contains("tau")) s.policy.tau = p["tau"].get<double>();
    if (p.contains("sigma")) s.policy.sigma = p["sigma"].get<int>();
    if (p.contains("gamma")) s.policy.gamma = p["gamma"].get<double>();
    if (p.contains("h_max")) s.policy.h_max = p["h_max"].get<int>();
    if (p.contains("shape")) s.policy.shape = parse_shape(p["shape"].get<std::string>());
  }
}

json task_json(const dsa::TaskConfig& t) {
  return {{"horizon", t.horizon},
          {"resolution_minutes", t.resolution_minutes},
          {"max_train_horizon", t.max_train_horizon}};
}

json gen_json(const dsa::GenConfig& g) {
  return {{"n_stays", g.n_stays},
          {"min_len", g.min_len},
          {"max_len", g.max_len},
          {"n_features", g.n_features},
          {"latent_ar_coeff", g.latent_ar_coeff},
          {"hazard_scale", g.hazard_scale},
          {"hazard_offset", g.hazard_offset},
          {"signal_decay", g.signal_decay},
          {"noise_std", g.noise_std},
          {"event_duration", g.event_duration}};
}

json train_json(const dsa::TrainConfig& t, double val_fraction) {
  return {{"objective", dsa::objective_name(t.objective)},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"l1_strength", t.l1_strength},
          {"patience", t.patience},
          {"max_epochs", t.max_epochs},
          {"lengthscale", t.lengthscale},
          {"embed_dim", t.embed_dim},
          {"hidden_dim", t.hidden_dim},
          {"val_fraction", val_fraction}};
}

json policy_json(const dsa::PolicyConfig& p) {
  json out = {{"mode", p.mode == dsa::PolicyMode::fixed ? "fixed" : "prioritized"},
              {"tau", p.tau},
              {"sigma", p.sigma}};
  if (p.mode == dsa::PolicyMode::prioritized) {
    out["shape"] = p.shape == dsa::PriorityShape::convex ? "convex" : "identity";
    if (p.shape == dsa::PriorityShape::convex) {
      out["gamma"] = p.gamma;
      out["h_max"] = p.h_max;
    }
  }
  return out;
}

// -------------------------------------------------------------- manifest ---

// Collects the run description while the command executes and lands it on
// disk last, atomically, once every artifact has been written and checked.
class RunManifest {
 public:
  RunManifest(int argc, char** argv, const AppState& state, json config)
      : start_(std::chrono::steady_clock::now()) {
    std::string command;
    for (int i = 0; i < argc; ++i) {
      if (i > 0) command += ' ';
      command += argv[i];
    }
    doc_["command"] = command;
    doc_["version"] = dsa::kVersion;
    doc_["seed"] = state.seed;
    doc_["config"] = std::move(config);
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  void add_input(const std::string& path) { doc_["inputs"].push_back(path); }
  void add_output(const std::string& path) { doc_["outputs"].push_back(path); }

  // Every declared output must exist and be non-empty before the manifest
  // itself appears; a crash mid-run therefore leaves no manifest behind.
  void finalize(const fs::path& out_dir) {
    for (const auto& p : doc_["outputs"]) {
      const fs::path path = p.get<std::string>();
      if (!fs::exists(path) || fs::file_size(path) == 0) {
        throw std::runtime_error("declared artifact missing or empty: " + path.string());
      }
    }
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    doc_["duration_s"] =
        std::round(std::chrono::duration<double>(elapsed).count() * 1000.0) / 1000.0;
    const fs::path tmp = out_dir / "manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << doc_.dump(2) << "\n";
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, out_dir / "manifest.json");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

// --------------------------------------------------------------- helpers ---

json json_num(double v) { return std::isfinite(v) ? json(v) : json(); }

fs::path prepare_out_dir(const AppState& state) {
  const fs::path dir = state.out_dir;
  fs::create_directories(dir);
  return dir;
}

std::vector<dsa::Stay> load_stays(const std::string& path) {
  try {
    return dsa::read_stays_csv(path);
  } catch (const std::exception& e) {
    throw CliError(std::string("cannot load stays: ") + e.what());
  }
}

std::pair<std::pair<dsa::ModelParams, dsa::CheckpointMeta>, int> load_model(
    const std::string& path) {
  try {
    auto loaded = dsa::load_checkpoint(path);
    const int h = loaded.second.h;
    return {std::move(loaded), h};
  } catch (const std::exception& e) {
    throw CliError(std::string("cannot load checkpoint: ") + e.what());
  }
}

// Deterministic train/validation split; the split depends only on the seed,
// not on the training objective, so model comparisons share their data.
std::pair<std::vector<dsa::Stay>, std::vector<dsa::Stay>> split_stays(
    const std::vector<dsa::Stay>& stays, double val_fraction, std::uint64_t seed) {
  if (stays.size() < 2) throw CliError("need at least 2 stays for a train/validation split");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw CliError("val_fraction must be in (0,1)");
  }
  std::vector<std::size_t> idx(stays.size());
  std::iota(idx.begin(), idx.end(), 0);
  dsa::Rng rng(dsa::Rng::substream(seed, 0x5B17));
  rng.shuffle(idx);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(stays.size())));
  n_val = std::min(std::max<std::size_t>(n_val, 1), stays.size() - 1);
  std::vector<dsa::Stay> val, train;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_val ? val : train).push_back(stays[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

// Timestep AuPRC of the horizon-h risk against the EEP labels, skipping
// masked steps. Returns NaN when the labels are single-class.
double cohort_timestep_auprc(const dsa::ModelParams& params, const dsa::CheckpointMeta& meta,
                             const std::vector<dsa::Stay>& stays) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const dsa::Stay& stay : stays) {
    const Eigen::MatrixXd risk = dsa::stay_risk(params, meta, stay);
    const dsa::EepLabels lab = dsa::eep_labels(stay, meta.h);
    for (Eigen::Index t = 0; t < risk.rows(); ++t) {
      const std::int8_t y = lab.y[static_cast<std::size_t>(t)];
      if (y == dsa::kMasked) continue;
      scores.push_back(risk(t, risk.cols() - 1));
      labels.push_back(y);
    }
  }
  try {
    return dsa::timestep_auprc(scores, labels);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

json summary_json(const dsa::EventSummary& s) {
  return {{"n_events", s.n_events},
          {"n_undetectable", s.n_undetectable},
          {"n_detected", s.n_detected},
          {"n_alarms", s.n_alarms},
          {"n_true_alarms", s.n_true_alarms},
          {"event_recall", json_num(s.event_recall)},
          {"alarm_precision", json_num(s.alarm_precision)},
          {"mean_first_alarm_distance_steps", json_num(s.mean_first_alarm_distance)}};
}

// -------------------------------------------------------------- commands ---

int run_gen(AppState& state, RunManifest& manifest) {
  const fs::path dir = prepare_out_dir(state);
  state.gen.seed = state.seed;
  dsa::validate_gen(state.gen);
  const dsa::Cohort cohort = dsa::generate_cohort(state.gen, state.threads);

  const std::string stays_path = (dir / "stays.csv").string();
  const std::string truth_path = (dir / "ground_truth.csv").string();
  dsa::write_stays_csv(stays_path, cohort.stays);
  dsa::write_ground_truth_csv(truth_path, cohort.stays, cohort.onset_prob);
  manifest.add_output(stays_path);
  manifest.add_output(truth_path);

  std::int64_t steps = 0, event_steps = 0;
  for (const dsa::Stay& stay : cohort.stays) {
    steps += static_cast<std::int64_t>(stay.events.size());
    for (auto e : stay.events) event_steps += e;
  }
  std::cout << "generated " << cohort.stays.size() << " stays, " << steps << " steps ("
            << event_steps << " in-event) -> " << stays_path << "\n";
  manifest.finalize(dir);
  return 0;
}

int run_train(AppState& state, RunManifest& manifest, const std::string& stays_path) {
  const fs::path dir = prepare_out_dir(state);
  manifest.add_input(stays_path);
  const std::vector<dsa::Stay> stays = load_stays(stays_path);
  auto [train_stays, val_stays] = split_stays(stays, state.val_fraction, state.seed);
  state.train.seed = state.seed;

  const dsa::FitResult result =
      dsa::fit(train_stays, val_stays, state.task, state.train, state.threads);

  const std::string ckpt_path = (dir / "checkpoint.json").string();
  const std::string log_path = (dir / "training_log.csv").string();
  dsa::save_checkpoint(ckpt_path, result.params, result.meta);
  dsa::write_training_log_csv(log_path, result.log);
  manifest.add_output(ckpt_path);
  manifest.add_output(log_path);

  std::cout << "trained " << dsa::objective_name(state.train.objective) << " on "
            << train_stays.size() << "/" << val_stays.size() << " train/val stays, "
            << result.log.size() << " epochs, best epoch " << result.best_epoch
            << " (val loss " << result.best_val_loss << ") -> " << ckpt_path << "\n";
  manifest.finalize(dir);
  return 0;
}

int run_eval(AppState& state, RunManifest& manifest, const std::string& stays_path,
             const std::string& ckpt_path) {
  const fs::path dir = prepare_out_dir(state);
  manifest.add_input(stays_path);
  manifest.add_input(ckpt_path);
  const std::vector<dsa::Stay> stays = load_stays(stays_path);
  auto [loaded, h] = load_model(ckpt_path);
  const dsa::ModelParams& params = loaded.first;
  const dsa::CheckpointMeta& meta = loaded.second;

  if (meta.objective == "eep" && state.policy.mode == dsa::PolicyMode::prioritized) {
    throw CliError("prioritized policy needs a multi-horizon checkpoint; this one is eep");
  }
  const int risk_cols = meta.objective == "eep" ? 1 : h;
  dsa::validate_policy(state.policy, risk_cols);

  std::vector<std::string> ids;
  std::vector<dsa::AlarmTrace> traces;
  std::vector<std::vector<std::uint8_t>> alarms, events;
  for (const dsa::Stay& stay : stays) {
    const Eigen::MatrixXd risk = dsa::stay_risk(params, meta, stay);
    dsa::AlarmTrace trace = dsa::raise_alarms(risk, stay.events, state.policy);
    ids.push_back(stay.id);
    alarms.push_back(trace.alarm);
    events.push_back(stay.events);
    traces.push_back(std::move(trace));
  }

  // The silencing contract is load-bearing for the event metrics, so count
  // violations explicitly instead of trusting the scan.
  int violations = 0;
  for (const auto& a : alarms) {
    std::int64_t last = -1;
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a[t] == 0) continue;
      if (last >= 0 && static_cast<std::int64_t>(t) - last < state.policy.sigma) ++violations;
      last = static_cast<std::int64_t>(t);
    }
  }

  const dsa::EventSummary summary = dsa::event_summary(alarms, events, h);
  const double auprc = cohort_timestep_auprc(params, meta, stays);

  json metrics = {{"timestep_auprc", json_num(auprc)},
                  {"horizon", h},
                  {"n_stays", stays.size()},
                  {"policy", policy_json(state.policy)},
                  {"silencing_violations", violations},
                  {"event", summary_json(summary)}};
  const std::string metrics_path = (dir / "metrics.json").string();
  {
    std::ofstream out(metrics_path);
    out << metrics.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + metrics_path);
  }
  const std::string alarms_path = (dir / "alarms.csv").string();
  dsa::write_alarms_csv(alarms_path, ids, traces);
  manifest.add_output(metrics_path);
  manifest.add_output(alarms_path);

  std::cout << "eval: timestep AuPRC " << auprc << ", event recall " << summary.event_recall
            << ", alarm precision " << summary.alarm_precision << ", "
            << summary.n_alarms << " alarms, " << violations << " silencing violations -> "
            << metrics_path << "\n";
  manifest.finalize(dir);
  return 0;
}

int run_sweep(AppState& state, RunManifest& manifest, const std::string& stays_path,
              const std::string& ckpt_path, std::vector<double> gammas,
              std::vector<int> hmaxes) {
  const fs::path dir = prepare_out_dir(state);
  manifest.add_input(stays_path);
  manifest.add_input(ckpt_path);
  const std::vector<dsa::Stay> stays = load_stays(stays_path);
  auto [loaded, h] = load_model(ckpt_path);
  const dsa::ModelParams& params = loaded.first;
  const dsa::CheckpointMeta& meta = loaded.second;

  if (meta.objective == "eep" && state.policy.mode == dsa::PolicyMode::prioritized) {
    throw CliError("prioritized policy needs a multi-horizon checkpoint; this one is eep");
  }

  std::vector<Eigen::MatrixXd> risks;
  std::vector<std::vector<std::uint8_t>> events;
  for (const dsa::Stay& stay : stays) {
    risks.push_back(dsa::stay_risk(params, meta, stay));
    events.push_back(stay.events);
  }

  const bool gridded =
      state.policy.mode == dsa::PolicyMode::prioritized && state.policy.shape == dsa::PriorityShape::convex;
  if (gammas.empty()) gammas = {state.policy.gamma};
  if (hmaxes.empty()) hmaxes = {state.policy.h_max};
  std::vector<dsa::PolicyConfig> combos;
  if (gridded) {
    for (double gamma : gammas) {
      for (int h_max : hmaxes) {
        dsa::PolicyConfig c = state.policy;
        c.gamma = gamma;
        c.h_max = h_max;
        combos.push_back(c);
      }
    }
  } else {
    combos.push_back(state.policy);
  }

  json combo_rows = json::array();
  for (std::size_t ci = 0; ci < combos.size(); ++ci) {
    const dsa::PolicyConfig& combo = combos[ci];
    dsa::validate_policy(combo, meta.objective == "eep" ? 1 : h);
    std::vector<std::vector<double>> scores;
    for (const Eigen::MatrixXd& risk : risks) scores.push_back(dsa::step_scores(risk, combo));
    const std::vector<double> grid = dsa::default_tau_grid(scores);
    const dsa::EventCurve curve = dsa::event_pr_curve(scores, events, h, combo.sigma, grid);

    const std::string curve_name =
        combos.size() == 1 ? "curve.csv" : "curve_" + std::to_string(ci + 1) + ".csv";
    const std::string curve_path = (dir / curve_name).string();
    dsa::write_curve_csv(curve_path, curve);
    manifest.add_output(curve_path);

    json ops = json::array();
    for (double level : {0.6, 0.7, 0.8}) {
      const dsa::OperatingPoint op = dsa::recall_at_precision(curve, level);
      json row = {{"precision_level", level}, {"found", op.found}};
      if (op.found) {
        row["tau"] = op.tau;
        row["event_recall"] = op.event_recall;
        row["mean_first_alarm_distance_steps"] = json_num(op.mean_first_alarm_distance);
      }
      ops.push_back(row);
    }
    json row = {{"curve", curve_name},
                {"policy", policy_json(combo)},
                {"event_auprc", curve.auprc},
                {"points", curve.points.size()},
                {"skipped_taus", curve.skipped_taus},
                {"recall_nonmonotonicities", curve.nonmonotonicities},
                {"operating_points", ops}};
    combo_rows.push_back(row);
    std::cout << "sweep " << curve_name << ": event AuPRC " << curve.auprc << " ("
              << curve.points.size() << " points, " << curve.skipped_taus << " silent taus)\n";
  }

  json summary = {{"horizon", h}, {"n_stays", stays.size()}, {"combos", combo_rows}};
  const std::string summary_path = (dir / "sweep_summary.json").string();
  {
    std::ofstream out(summary_path);
    out << summary.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + summary_path);
  }
  manifest.add_output(summary_path);
  manifest.finalize(dir);
  return 0;
}

int run_ablate(AppState& state, RunManifest& manifest, const std::string& stays_path,
               int n_seeds) {
  const fs::path dir = prepare_out_dir(state);
  manifest.add_input(stays_path);
  if (n_seeds < 1) throw CliError("--seeds must be >= 1");
  const std::vector<dsa::Stay> stays = load_stays(stays_path);
  auto [train_stays, val_stays] = split_stays(stays, state.val_fraction, state.seed);

  std::ostringstream table;
  table << "factor,K,seed,timestep_auprc\n";
  std::cout << "horizon ablation at h = " << state.task.horizon << ":\n";
  for (const int factor : {1, 2, 4}) {
    dsa::TaskConfig task = state.task;
    task.max_train_horizon = factor * state.task.horizon;
    double mean = 0.0;
    for (int si = 0; si < n_seeds; ++si) {
      dsa::TrainConfig config = state.train;
      config.objective = dsa::Objective::dsa_full;  // truncates at max_train_horizon
      config.seed = state.seed + static_cast<std::uint64_t>(si);
      const dsa::FitResult result =
          dsa::fit(train_stays, val_stays, task, config, state.threads);
      const double auprc = result.best_epoch >= 1
                               ? result.log[static_cast<std::size_t>(result.best_epoch - 1)]
                                     .val_timestep_auprc
                               : std::numeric_limits<double>::quiet_NaN();
      table << factor << ',' << result.meta.dims.K << ',' << config.seed << ','
            << dsa::format_double(auprc) << '\n';
      mean += auprc;
    }
    std::cout << "  K = " << factor << "h: mean val AuPRC "
              << mean / static_cast<double>(n_seeds) << " over " << n_seeds << " seeds\n";
  }

  const std::string table_path = (dir / "ablation.csv").string();
  {
    std::ofstream out(table_path);
    out << table.str();
    if (!out) throw std::runtime_error("cannot write " + table_path);
  }
  manifest.add_output(table_path);
  manifest.finalize(dir);
  return 0;
}

int run_gradcheck(AppState& state, RunManifest& manifest, int max_params, int probes,
                  double step) {
  const fs::path dir = prepare_out_dir(state);
  if (max_params < 50) throw CliError("--params must be >= 50");

  const double limit = 1e-4;
  double worst = 0.0;
  json per_objective = json::object();
  const dsa::Objective objectives[] = {dsa::Objective::eep, dsa::Objective::dsa_full,
                                       dsa::Objective::dsa_trunc, dsa::Objective::survtls};
  for (std::size_t oi = 0; oi < 4; ++oi) {
    const dsa::Objective objective = objectives[oi];
    dsa::GenConfig gen;
    gen.n_stays = 6;
    gen.min_len = 8;
    gen.max_len = 24;
    gen.n_features = 4;
    gen.hazard_offset = -2.0;
    gen.hazard_scale = 0.8;
    gen.signal_decay = 2.0;
    gen.event_duration = 2;
    gen.seed = state.seed * 131 + oi;
    const dsa::Cohort cohort = dsa::generate_cohort(gen, state.threads);

    dsa::TaskConfig task;
    task.horizon = 4;
    task.max_train_horizon = 16;
    dsa::TrainConfig config;
    config.objective = objective;
    config.lengthscale = 6.0;
    const dsa::TrainingData data =
        dsa::build_training_data(cohort.stays, task, config);
    std::vector<const dsa::TrainItem*> batch;
    for (const dsa::TrainItem& item : data.items) batch.push_back(&item);

    dsa::ModelDims dims{4, 4, 2, data.K};
    while (dsa::ModelParams::param_count(dsa::ModelDims{4, 4, dims.n + 1, data.K}) <=
           max_params && dims.n < 32) {
      ++dims.n;
    }
    if (dsa::ModelParams::param_count(dims) > max_params) {
      throw CliError("--params too small for the smallest test net");
    }
    std::vector<const dsa::SurvivalTargets*> targets;
    for (const dsa::TrainItem& item : data.items) targets.push_back(&item.targets);
    const Eigen::VectorXd rates = dsa::empirical_base_rates(targets, data.K);
    const dsa::ModelParams params = dsa::init_params(dims, rates, state.seed + oi);

    const double err = dsa::finite_difference_check(params, batch, 0.01, probes, step,
                                                    state.seed * 17 + oi, state.threads);
    worst = std::max(worst, err);
    per_objective[dsa::objective_name(objective)] = {{"max_rel_error", err},
                                                     {"params", dsa::ModelParams::param_count(dims)}};
    std::cout << "gradcheck " << dsa::objective_name(objective) << ": max rel error " << err
              << " over " << probes << " probes (" << dsa::ModelParams::param_count(dims)
              << " params)\n";
  }

  const bool passed = worst <= limit;
  json report = {{"max_rel_error", worst},
                 {"limit", limit},
                 {"passed", passed},
                 {"probes", probes},
                 {"step", step},
                 {"objectives", per_objective}};
  const std::string report_path = (dir / "gradcheck.json").string();
  {
    std::ofstream out(report_path);
    out << report.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + report_path);
  }
  manifest.add_output(report_path);
  std::cout << (passed ? "PASS" : "FAIL") << ": max relative error " << worst << " (limit "
            << limit << ")\n";
  manifest.finalize(dir);
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic survival analysis for early event prediction"};
  app.require_subcommand(1);

  AppState state;
  std::string stays_path, ckpt_path;
  std::vector<double> sweep_gammas;
  std::vector<int> sweep_hmaxes;
  int ablate_seeds = 3;
  int gc_params = 500, gc_probes = 30;
  double gc_step = 1e-5;
  std::string objective_name, policy_mode, shape_name, preset_name;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", state.config_path, "JSON config file");
    sub->add_option("--seed", state.seed, "master seed");
    sub->add_option("--out-dir", state.out_dir, "artifact directory");
    sub->add_option("--threads", state.threads, "worker thread cap")->check(CLI::PositiveNumber);
    sub->add_option("--preset", preset_name, "task preset: circ | vent | decomp | synth");
  };
  auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--policy", policy_mode, "alarm policy: fixed | prioritized");
    sub->add_option("--sigma", state.policy.sigma, "silencing window in steps");
    sub->add_option("--shape", shape_name, "priority shape: convex | identity");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic cohort");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "fit a hazard model");
  add_common(train);
  train->add_option("--stays", stays_path, "input stays CSV")->required();
  train->add_option("--objective", objective_name, "eep | dsa_full | dsa_trunc | survtls");
  train->add_option("--horizon", state.task.horizon, "evaluation horizon in steps");
  train->add_option("--lengthscale", state.train.lengthscale, "survtls smoothing lengthscale");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint under an alarm policy");
  add_common(eval);
  eval->add_option("--stays", stays_path, "input stays CSV")->required();
  eval->add_option("--checkpoint", ckpt_path, "model checkpoint JSON")->required();
  add_policy(eval);
  eval->add_option("--tau", state.policy.tau, "alarm threshold");
  eval->add_option("--gamma", state.policy.gamma, "priority decay rate");
  eval->add_option("--hmax", state.policy.h_max, "priority cut-off horizon");

  CLI::App* sweep = app.add_subcommand("sweep", "trace the event PR curve over tau");
  add_common(sweep);
  sweep->add_option("--stays", stays_path, "input stays CSV")->required();
  sweep->add_option("--checkpoint", ckpt_path, "model checkpoint JSON")->required();
  add_policy(sweep);
  sweep->add_option("--gamma", sweep_gammas, "priority decay rate(s)")->delimiter(',');
  sweep->add_option("--hmax", sweep_hmaxes, "priority cut-off horizon(s)")->delimiter(',');

  CLI::App* ablate = app.add_subcommand("ablate-horizon",
                                        "train at K in {h, 2h, 4h} and tabulate AuPRC");
  add_common(ablate);
  ablate->add_option("--stays", stays_path, "input stays CSV")->required();
  ablate->add_option("--horizon", state.task.horizon, "evaluation horizon in steps");
  ablate->add_option("--seeds", ablate_seeds, "seeds per horizon factor");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck);
  gradcheck->add_option("--params", gc_params, "parameter budget per test net");
  gradcheck->add_option("--probes", gc_probes, "coordinates probed per objective");
  gradcheck->add_option("--step", gc_step, "central difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    // Defaults, then config file, then preset, then explicit flags; CLI11 has
    // already written flag values, so re-apply the survivors on top.
    AppState flags = state;
    if (!state.config_path.empty()) apply_config_file(state, state.config_path);
    if (!preset_name.empty()) apply_preset(state, preset_name);
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const std::string& name) {
      const CLI::Option* opt = sub->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--seed")) state.seed = flags.seed;
    if (given("--out-dir")) state.out_dir = flags.out_dir;
    if (given("--threads")) state.threads = flags.threads;
    if (given("--horizon")) state.task.horizon = flags.task.horizon;
    if (given("--lengthscale")) state.train.lengthscale = flags.train.lengthscale;
    if (given("--tau")) state.policy.tau = flags.policy.tau;
    if (given("--sigma")) state.policy.sigma = flags.policy.sigma;
    if (sub == eval) {
      if (given("--gamma")) state.policy.gamma = flags.policy.gamma;
      if (given("--hmax")) state.policy.h_max = flags.policy.h_max;
    }
    if (!objective_name.empty()) state.train.objective = dsa::parse_objective(objective_name);
    if (!policy_mode.empty()) state.policy.mode = parse_mode(policy_mode);
    if (!shape_name.empty()) state.policy.shape = parse_shape(shape_name);
    // Objectives other than dsa_full never read max_train_horizon; keep the
    // task valid without demanding it in every config.
    state.task.max_train_horizon = std::max(state.task.max_train_horizon, state.task.horizon);

    json config = {{"seed", state.seed}, {"out_dir", state.out_dir}, {"threads", state.threads}};
    if (!state.preset.empty()) config["preset"] = state.preset;
    if (sub == gen) config["gen"] = gen_json(state.gen);
    if (sub == train || sub == ablate) {
      config["task"] = task_json(state.task);
      config["train"] = train_json(state.train, state.val_fraction);
    }
    if (sub == eval || sub == sweep) config["policy"] = policy_json(state.policy);

    RunManifest manifest(argc, argv, state, std::move(config));
    if (!state.config_path.empty()) manifest.add_input(state.config_path);

    if (sub == gen) return run_gen(state, manifest);
    if (sub == train) return run_train(state, manifest, stays_path);
    if (sub == eval) return run_eval(state, manifest, stays_path, ckpt_path);
    if (sub == sweep) {
      return run_sweep(state, manifest, stays_path, ckpt_path, sweep_gammas, sweep_hmaxes);
    }
    if (sub == ablate) return run_ablate(state, manifest, stays_path, ablate_seeds);
    if (sub == gradcheck) return run_gradcheck(state, manifest, gc_params, gc_probes, gc_step);
    throw CliError("no subcommand dispatched");
  } catch (const dsa::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
