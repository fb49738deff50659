#pragma once

// Replay loop: stream samples through a selection strategy, retrain when the
// strategy (or a fixed cadence) says so, and evaluate every iteration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "memento/baselines.hpp"
#include "memento/batching.hpp"
#include "memento/error.hpp"
#include "memento/predictor.hpp"
#include "memento/rng.hpp"
#include "memento/sample.hpp"
#include "memento/sample_io.hpp"
#include "memento/selection.hpp"
#include "memento/workload.hpp"

namespace memento {

// ---------------------------------------------------------------------------
// Metrics

/// Mean of per-class accuracies. Every listed class must appear equally often.
inline double balanced_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                std::span<const std::size_t> classes) {
  if (predicted.size() != truth.size()) fail(Errc::length_mismatch, "prediction and label counts differ");
  if (classes.empty() || truth.empty()) fail(Errc::empty_input, "balanced accuracy of an empty set");
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (auto c : classes) per_class[c] = {0, 0};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto it = per_class.find(truth[i]);
    if (it == per_class.end()) fail(Errc::unbalanced_eval_set, "label outside the evaluated classes");
    ++it->second.second;
    if (predicted[i] == truth[i]) ++it->second.first;
  }
  const std::size_t expected = per_class.begin()->second.second;
  double sum = 0.0;
  for (const auto& [c, counts] : per_class) {
    if (counts.second != expected || expected == 0) fail(Errc::unbalanced_eval_set, "class counts differ");
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return sum / static_cast<double>(per_class.size());
}

/// Nearest-rank percentile, q in (0, 1].
inline double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) fail(Errc::empty_input, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline double p99_abs_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) fail(Errc::length_mismatch, "prediction and target counts differ");
  if (truth.empty()) fail(Errc::empty_input, "p99 error of an empty set");
  std::vector<double> err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) err[i] = std::abs(predicted[i] - truth[i]);
  return nearest_rank(std::move(err), 0.99);
}

// ---------------------------------------------------------------------------
// Configuration

enum class PredictorKind { uniform, oracle, histogram, centroid, gaussian };
enum class RetrainPolicy { strategy, every_n };

inline std::unique_ptr<Predictor> make_predictor(PredictorKind kind, std::size_t k) {
  switch (kind) {
    case PredictorKind::uniform: return std::make_unique<UniformPredictor>(k);
    case PredictorKind::oracle: return std::make_unique<OraclePredictor>(k);
    case PredictorKind::histogram: return std::make_unique<HistogramPredictor>(k);
    case PredictorKind::centroid: return std::make_unique<CentroidPredictor>(k);
    case PredictorKind::gaussian: return std::make_unique<GaussianPredictor>(k);
  }
  fail(Errc::config_error, "unhandled predictor kind");
}

/// Flat key/value configuration: one `key = value` per line, `#` comments.
using ConfigMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Errc::config_error, "line " + std::to_string(lineno) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

struct RunConfig {
  std::optional<ScenarioSpec> scenario;
  std::optional<std::string> input_path;
  StrategyKind strategy = StrategyKind::memento;
  StrategyParams strategy_params;
  StrategyConfig selection;
  PredictorKind predictor = PredictorKind::centroid;
  RetrainPolicy retrain_policy = RetrainPolicy::strategy;
  std::size_t retrain_every = 7;
  std::uint64_t seed = 0;
  double noise_fraction = 0.0;
  std::size_t eval_per_class = 300;
  std::string output_dir;  // empty: keep reports in memory only
  bool report_timing = true;
  bool snapshots = false;
  // Recorded input: how to chunk records without an iteration field and how
  // to interpret output bins.
  std::size_t input_chunk = 10000;
  std::size_t regression_bins = 21;
  double output_min = 0.0;
  double output_max = 5.0;

  void validate() const {
    if (scenario.has_value() == input_path.has_value()) {
      fail(Errc::config_error, "set exactly one of 'scenario' and 'input'");
    }
    selection.validate();
    if (retrain_policy == RetrainPolicy::every_n && retrain_every == 0) fail(Errc::config_error, "retrain_every = 0");
    if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) fail(Errc::bad_fraction, "noise_fraction outside [0,1]");
    if (scenario) scenario->validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(Errc::config_error, key + ": expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(Errc::config_error, key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    fail(Errc::config_error, key + ": expected a nonnegative integer, got '" + v + "'");
  }
}

}  // namespace detail

/// Builds a RunConfig from parsed keys. Unknown keys are rejected.
inline RunConfig run_config_from_map(const ConfigMap& m) {
  using namespace detail;
  RunConfig c;
  std::optional<ScenarioKind> kind;
  if (auto it = m.find("scenario"); it != m.end()) kind = parse_scenario_kind(it->second);
  ScenarioSpec spec = ScenarioSpec::make(kind.value_or(ScenarioKind::rare_patterns));
  bool classification_task = true;

  for (const auto& [key, v] : m) {
    if (key == "scenario") {
    } else if (key == "input") {
      c.input_path = v;
    } else if (key == "iterations") {
      spec.iterations = parse_uint(key, v);
    } else if (key == "samples_per_iteration") {
      spec.samples_per_iteration = parse_uint(key, v);
      c.input_chunk = spec.samples_per_iteration;
    } else if (key == "feature_dim") {
      spec.feature_dim = parse_uint(key, v);
      spec.classes = ScenarioSpec::default_classes(spec.feature_dim);
    } else if (key == "stationary") {
      spec.stationary = parse_bool(key, v);
    } else if (key == "strategy") {
      c.strategy = parse_strategy_kind(v);
    } else if (key == "capacity") {
      c.selection.capacity = parse_uint(key, v);
    } else if (key == "batch_size") {
      c.selection.batch_size = parse_uint(key, v);
    } else if (key == "bandwidth") {
      c.selection.bandwidth = parse_double(key, v);
    } else if (key == "temperature") {
      c.selection.temperature = parse_double(key, v);
    } else if (key == "threshold") {
      c.selection.threshold = parse_double(key, v);
    } else if (key == "seed") {
      c.seed = parse_uint(key, v);
    } else if (key == "k_pred") {
      c.selection.k_pred = parse_uint(key, v);
    } else if (key == "k_out") {
      c.selection.k_out = parse_uint(key, v);
    } else if (key == "task") {
      if (v != "classification" && v != "regression") fail(Errc::config_error, "task: classification|regression");
      classification_task = v == "classification";
    } else if (key == "predictor") {
      if (v == "uniform") c.predictor = PredictorKind::uniform;
      else if (v == "oracle") c.predictor = PredictorKind::oracle;
      else if (v == "histogram") c.predictor = PredictorKind::histogram;
      else if (v == "centroid") c.predictor = PredictorKind::centroid;
      else if (v == "gaussian") c.predictor = PredictorKind::gaussian;
      else fail(Errc::config_error, "unknown predictor '" + v + "'");
    } else if (key == "retrain_policy") {
      if (v == "strategy") c.retrain_policy = RetrainPolicy::strategy;
      else if (v == "every_n") c.retrain_policy = RetrainPolicy::every_n;
      else fail(Errc::config_error, "retrain_policy: strategy|every_n");
    } else if (key == "retrain_every") {
      c.retrain_every = parse_uint(key, v);
    } else if (key == "output_dir") {
      c.output_dir = v;
    } else if (key == "noise_fraction") {
      c.noise_fraction = parse_double(key, v);
    } else if (key == "eval_per_class") {
      c.eval_per_class = parse_uint(key, v);
    } else if (key == "report_timing") {
      c.report_timing = parse_bool(key, v);
    } else if (key == "snapshots") {
      c.snapshots = parse_bool(key, v);
    } else if (key == "lars_decay") {
      c.strategy_params.lars_decay = parse_double(key, v);
    } else if (key == "committee_size") {
      c.strategy_params.committee_size = parse_uint(key, v);
    } else if (key == "committee_mode") {
      if (v == "mean") c.strategy_params.committee_mode = CommitteeDisagreement::mean_entropy;
      else if (v == "member") c.strategy_params.committee_mode = CommitteeDisagreement::member_entropy;
      else fail(Errc::config_error, "committee_mode: mean|member");
    } else if (key == "regression_bins") {
      spec.regression_bins = parse_uint(key, v);
      c.regression_bins = spec.regression_bins;
    } else if (key == "output_min") {
      spec.output_min = parse_double(key, v);
      c.output_min = spec.output_min;
    } else if (key == "output_max") {
      spec.output_max = parse_double(key, v);
      c.output_max = spec.output_max;
    } else if (key == "fraction_w1") {
      spec.fraction_w1 = parse_double(key, v);
    } else if (key == "fraction_w3") {
      spec.fraction_w3 = parse_double(key, v);
    } else {
      fail(Errc::config_error, "unknown key '" + key + "'");
    }
  }

  c.selection.seed = c.seed;
  if (kind) {
    spec.seed = c.seed;
    c.scenario = spec;
    c.selection.k_out = spec.k_out();
    c.selection.k_pred = spec.k_out();
    c.selection.classification = spec.classification();
  } else {
    c.selection.classification = classification_task;
  }
  c.selection.remember_on_retrain = c.retrain_policy == RetrainPolicy::strategy;
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) { return run_config_from_map(read_config_file(path)); }

// ---------------------------------------------------------------------------
// Reports

struct IterationReport {
  std::size_t iteration = 0;
  bool retrained = false;
  double rci = 0.0;
  std::optional<double> balanced_accuracy;
  std::optional<double> p99_error;
  double mean_logscore = 0.0;
  double p1_logscore = 0.0;
  std::vector<std::size_t> mem_class_counts;
  std::size_t mem_noise = 0;  // evaluation only; not part of the table
  std::size_t mem_total = 0;
  std::optional<double> selection_seconds;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

}  // namespace detail

inline std::string report_header(std::size_t num_classes) {
  std::string h = "iteration,retrained,rci,balanced_accuracy,p99_error,mean_logscore,p1_logscore";
  for (std::size_t c = 0; c < num_classes; ++c) h += ",mem_count_class_" + std::to_string(c);
  h += ",selection_seconds";
  return h;
}

inline std::string report_table(std::span<const IterationReport> reports, std::size_t num_classes) {
  using detail::fmt_double;
  using detail::fmt_optional;
  std::string out = report_header(num_classes) + "\n";
  for (const auto& r : reports) {
    out += std::to_string(r.iteration) + "," + (r.retrained ? "1" : "0") + "," + fmt_double(r.rci) + "," +
           fmt_optional(r.balanced_accuracy) + "," + fmt_optional(r.p99_error) + "," + fmt_double(r.mean_logscore) +
           "," + fmt_double(r.p1_logscore);
    for (std::size_t c = 0; c < num_classes; ++c) {
      out += "," + std::to_string(c < r.mem_class_counts.size() ? r.mem_class_counts[c] : 0);
    }
    out += "," + fmt_optional(r.selection_seconds) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run loop

namespace detail {

/// Iteration source: either a scenario generator or chunks of a recorded file.
class IterationSource {
 public:
  explicit IterationSource(const RunConfig& cfg) {
    if (cfg.scenario) {
      stream_.emplace(*cfg.scenario);
      return;
    }
    auto records = read_records(*cfg.input_path);
    const bool tagged = !records.empty() && records.front().iteration.has_value();
    std::map<std::int64_t, std::vector<Sample>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::int64_t key = tagged ? records[i].iteration.value_or(0) : static_cast<std::int64_t>(i / cfg.input_chunk);
      groups[key].push_back(std::move(records[i].sample));
    }
    for (auto& [k, v] : groups) recorded_.push_back(std::move(v));
  }

  std::optional<std::vector<Sample>> next() {
    if (stream_) return stream_->next();
    if (cursor_ >= recorded_.size()) return std::nullopt;
    return std::move(recorded_[cursor_++]);
  }

  const ScenarioStream* stream() const { return stream_ ? &*stream_ : nullptr; }

 private:
  std::optional<ScenarioStream> stream_;
  std::vector<std::vector<Sample>> recorded_;
  std::size_t cursor_ = 0;
};

/// Equal-count subsample per class present (first occurrences).
inline std::vector<Sample> balanced_subset(const std::vector<Sample>& samples) {
  std::map<std::size_t, std::vector<const Sample*>> by_class;
  for (const auto& s : samples) by_class[s.output_bin].push_back(&s);
  std::size_t m = SIZE_MAX;
  for (const auto& [c, v] : by_class) m = std::min(m, v.size());
  std::vector<Sample> out;
  for (const auto& [c, v] : by_class) {
    for (std::size_t i = 0; i < m; ++i) out.push_back(*v[i]);
  }
  return out;
}

}  // namespace detail

/// Streams the configured samples through the strategy and returns one report
/// per iteration. When output_dir is set, the table is written to
/// output_dir/report.csv (and memory snapshots on retrain, if enabled).
inline std::vector<IterationReport> run(const RunConfig& cfg) {
  cfg.validate();
  const StrategyConfig& sel = cfg.selection;
  detail::IterationSource source(cfg);
  const ScenarioStream* stream = source.stream();
  const std::size_t num_classes =
      stream ? stream->spec().num_classes() : (sel.classification ? sel.k_out : std::size_t{0});

  ScenarioSpec binning;
  if (stream) {
    binning = stream->spec();
  } else {
    binning.kind = sel.classification ? ScenarioKind::rare_patterns : ScenarioKind::gradual_drift;
    binning.regression_bins = cfg.regression_bins;
    binning.output_min = cfg.output_min;
    binning.output_max = cfg.output_max;
    binning.classes = ScenarioSpec::default_classes(binning.feature_dim);
  }

  std::shared_ptr<const Predictor> model = make_predictor(cfg.predictor, sel.k_pred);
  auto strategy = make_strategy(cfg.strategy, cfg.strategy_params);
  ReplayMemory memory(sel.capacity);
  Rng select_rng(derive_seed(cfg.seed, 2));
  Rng noise_rng(derive_seed(cfg.seed, 3));
  Rng committee_rng(derive_seed(cfg.seed, 4));

  if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir);

  std::vector<IterationReport> reports;
  for (std::size_t it = 0;; ++it) {
    auto batch = source.next();
    if (!batch) break;
    std::vector<Sample> incoming = std::move(*batch);
    if (cfg.noise_fraction > 0.0) incoming = inject_noise(std::move(incoming), cfg.noise_fraction, binning, noise_rng);
    std::vector<Sample> held_out = stream ? std::vector<Sample>{} : detail::balanced_subset(incoming);

    if (strategy->needs_losses()) {
      score_losses(memory.samples, *model);
      score_losses(incoming, *model);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const SelectionOutcome outcome = strategy->select(memory, std::move(incoming), sel, *model, select_rng);
    const auto t1 = std::chrono::steady_clock::now();

    IterationReport rep;
    rep.iteration = it;
    rep.rci = outcome.rci;
    rep.retrained = cfg.retrain_policy == RetrainPolicy::strategy ? outcome.retrain : it % cfg.retrain_every == 0;
    if (cfg.report_timing) rep.selection_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (rep.retrained && !memory.samples.empty()) {
      model = model->fit(memory.samples);
      strategy->on_retrain(memory, *model, committee_rng);
      if (cfg.retrain_policy == RetrainPolicy::every_n) memory.last_train_batches = memory.batches;
      if (cfg.snapshots && !cfg.output_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%05zu.jsonl", it);
        write_records((std::filesystem::path(cfg.output_dir) / name).string(), memory.samples);
      }
    }

    // Evaluation.
    std::vector<Sample> eval = stream ? stream->evaluation_set(it, cfg.eval_per_class) : std::move(held_out);
    if (!eval.empty()) {
      std::vector<double> scores;
      std::vector<std::size_t> predicted, truth;
      std::vector<double> point, target;
      for (const auto& s : eval) {
        const auto p = model->predict_sample(s);
        scores.push_back(logscore(p, s.output_bin));
        predicted.push_back(mode_and_confidence(p).bin);
        truth.push_back(s.output_bin);
        double est = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) est += p[k] * binning.bin_midpoint(k);
        point.push_back(est);
        target.push_back(s.raw_output);
      }
      double mean = 0.0;
      for (double v : scores) mean += v;
      rep.mean_logscore = mean / static_cast<double>(scores.size());
      rep.p1_logscore = nearest_rank(scores, 0.01);
      if (sel.classification) {
        std::vector<std::size_t> classes(truth.begin(), truth.end());
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        rep.balanced_accuracy = balanced_accuracy(predicted, truth, classes);
      } else {
        rep.p99_error = p99_abs_error(point, target);
      }
    }

    rep.mem_class_counts.assign(num_classes, 0);
    for (const auto& s : memory.samples) {
      const auto c = s.source >= 0 ? static_cast<std::size_t>(s.source) : s.output_bin;
      if (c < num_classes) ++rep.mem_class_counts[c];
      if (s.noise) ++rep.mem_noise;
    }
    rep.mem_total = memory.samples.size();
    reports.push_back(std::move(rep));
  }

  if (!cfg.output_dir.empty()) {
    const auto path = std::filesystem::path(cfg.output_dir) / "report.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write " + path.string());
    out << report_table(reports, num_classes);
  }
  return reports;
}

/// Runs one configuration per value of `param`, each in its own output
/// subdirectory, on up to `workers` threads.
inline std::vector<std::vector<IterationReport>> sweep(const ConfigMap& base, const std::string& param,
                                                       const std::vector<std::string>& values, unsigned workers = 0) {
  std::vector<RunConfig> configs;
  for (const auto& v : values) {
    ConfigMap m = base;
    m[param] = v;
    if (auto it = base.find("output_dir"); it != base.end()) {
      m["output_dir"] = (std::filesystem::path(it->second) / (param + "_" + v)).string();
    }
    configs.push_back(run_config_from_map(m));
  }
  std::vector<std::vector<IterationReport>> results(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard g(lock);
        if (next >= configs.size()) return;
        i = next++;
      }
      try {
        results[i] = run(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, configs.size()); ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace memento
