#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace memento;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("memento_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfigMap small_config(const std::string& scenario = "rare_patterns") {
  return {{"scenario", scenario},    {"iterations", "12"}, {"samples_per_iteration", "600"},
          {"feature_dim", "8"},      {"capacity", "800"},  {"batch_size", "16"},
          {"eval_per_class", "40"},  {"seed", "5"},        {"report_timing", "false"}};
}

}  // namespace

TEST(BalancedAccuracy, Examples) {
  const std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2}, classes{0, 1, 2};
  EXPECT_EQ(balanced_accuracy(truth, truth, classes), 1.0);
  const std::vector<std::size_t> constant(6, 1);
  EXPECT_DOUBLE_EQ(balanced_accuracy(constant, truth, classes), 1.0 / 3.0);
  const std::vector<std::size_t> mixed{0, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(balanced_accuracy(mixed, truth, classes), 0.5);
}

TEST(BalancedAccuracy, Errors) {
  const std::vector<std::size_t> classes{0, 1};
  const std::vector<std::size_t> unequal{0, 0, 1};
  EXPECT_ERRC(balanced_accuracy(unequal, unequal, classes), Errc::unbalanced_eval_set);
  const std::vector<std::size_t> missing{0, 0};
  EXPECT_ERRC(balanced_accuracy(missing, missing, classes), Errc::unbalanced_eval_set);
  const std::vector<std::size_t> stranger{0, 1, 2};
  EXPECT_ERRC(balanced_accuracy(stranger, stranger, classes), Errc::unbalanced_eval_set);
}

TEST(P99AbsError, Examples) {
  const std::vector<double> same{1.0, 2.0, 3.0};
  EXPECT_EQ(p99_abs_error(same, same), 0.0);
  std::vector<double> pred, truth(100, 0.0);
  for (int i = 1; i <= 100; ++i) pred.push_back(i);
  EXPECT_EQ(p99_abs_error(pred, truth), 99.0);
  const std::vector<double> off(50, 3.5), base(50, 1.0);
  EXPECT_EQ(p99_abs_error(off, base), 2.5);
}

TEST(P99AbsError, Errors) {
  const std::vector<double> empty, one{1.0}, two{1.0, 2.0};
  EXPECT_ERRC(p99_abs_error(empty, empty), Errc::empty_input);
  EXPECT_ERRC(p99_abs_error(one, two), Errc::length_mismatch);
}

TEST(NearestRank, Definition) {
  EXPECT_EQ(nearest_rank({5.0, 1.0, 3.0}, 0.01), 1.0);
  EXPECT_EQ(nearest_rank({5.0, 1.0, 3.0}, 0.5), 3.0);
  EXPECT_EQ(nearest_rank({5.0, 1.0, 3.0}, 1.0), 5.0);
}

TEST(Config, ParsesTextWithComments) {
  const auto m = parse_config_text("# comment\nscenario = incremental\n\n  capacity=100 # trailing\nstrategy = fifo\n");
  EXPECT_EQ(m.at("scenario"), "incremental");
  EXPECT_EQ(m.at("capacity"), "100");
  EXPECT_EQ(m.at("strategy"), "fifo");
  EXPECT_ERRC(parse_config_text("no equals sign\n"), Errc::config_error);
}

TEST(Config, MapsKeysToRunConfig) {
  auto m = small_config("gradual_drift");
  m["strategy"] = "lars";
  m["temperature"] = "inf";
  m["threshold"] = "0.2";
  m["predictor"] = "gaussian";
  m["retrain_policy"] = "every_n";
  m["retrain_every"] = "3";
  m["noise_fraction"] = "0.05";
  const auto c = run_config_from_map(m);
  ASSERT_TRUE(c.scenario.has_value());
  EXPECT_EQ(c.scenario->kind, ScenarioKind::gradual_drift);
  EXPECT_EQ(c.scenario->iterations, 12u);
  EXPECT_EQ(c.scenario->feature_dim, 8u);
  EXPECT_EQ(c.strategy, StrategyKind::lars);
  EXPECT_TRUE(std::isinf(c.selection.temperature));
  EXPECT_EQ(c.selection.threshold, 0.2);
  EXPECT_EQ(c.selection.capacity, 800u);
  EXPECT_EQ(c.selection.batch_size, 16u);
  EXPECT_EQ(c.selection.k_out, 21u);
  EXPECT_FALSE(c.selection.classification);
  EXPECT_EQ(c.predictor, PredictorKind::gaussian);
  EXPECT_EQ(c.retrain_policy, RetrainPolicy::every_n);
  EXPECT_EQ(c.retrain_every, 3u);
  EXPECT_FALSE(c.selection.remember_on_retrain);
  EXPECT_EQ(c.noise_fraction, 0.05);
  EXPECT_FALSE(c.report_timing);
}

TEST(Config, Errors) {
  auto unknown = small_config();
  unknown["bogus"] = "1";
  EXPECT_ERRC(run_config_from_map(unknown), Errc::config_error);
  auto bad_number = small_config();
  bad_number["capacity"] = "12x";
  EXPECT_ERRC(run_config_from_map(bad_number), Errc::config_error);
  auto both = small_config();
  both["input"] = "/tmp/whatever.jsonl";
  EXPECT_ERRC(run_config_from_map(both).validate(), Errc::config_error);
  EXPECT_ERRC(run_config_from_map({}).validate(), Errc::config_error);
  auto small = small_config();
  small["capacity"] = "8";
  EXPECT_ERRC(run_config_from_map(small).validate(), Errc::capacity_too_small_for_one_batch);
  EXPECT_ERRC(load_run_config("/nonexistent/memento.conf"), Errc::io_error);
}

TEST(Run, ZeroIterationsGivesEmptyReport) {
  auto m = small_config();
  m["iterations"] = "0";
  EXPECT_TRUE(run(run_config_from_map(m)).empty());
}

TEST(Run, RetrainExactlyWhenRciReachesThreshold) {
  for (const std::string scenario : {"rare_patterns", "incremental", "gradual_drift"}) {
    const auto cfg = run_config_from_map(small_config(scenario));
    const auto reports = run(cfg);
    ASSERT_EQ(reports.size(), 12u);
    std::size_t retrains = 0;
    for (const auto& r : reports) {
      EXPECT_EQ(r.retrained, r.rci >= cfg.selection.threshold) << scenario << " " << r.iteration;
      EXPECT_GE(r.rci, 0.0);
      EXPECT_LE(r.rci, 1.0);
      EXPECT_LE(r.mem_total, cfg.selection.capacity);
      std::size_t sum = 0;
      for (auto c : r.mem_class_counts) sum += c;
      EXPECT_EQ(sum, r.mem_total);
      EXPECT_FALSE(r.selection_seconds.has_value());
      if (scenario == "gradual_drift") {
        EXPECT_TRUE(r.p99_error.has_value());
        EXPECT_FALSE(r.balanced_accuracy.has_value());
      } else {
        ASSERT_TRUE(r.balanced_accuracy.has_value());
        EXPECT_GE(*r.balanced_accuracy, 0.0);
        EXPECT_LE(*r.balanced_accuracy, 1.0);
      }
      EXPECT_LE(r.p1_logscore, r.mean_logscore);
      retrains += r.retrained;
    }
    EXPECT_TRUE(reports.front().retrained);
    EXPECT_GE(retrains, 1u);
  }
}

TEST(Run, FixedCadenceRetraining) {
  auto m = small_config();
  m["retrain_policy"] = "every_n";
  m["retrain_every"] = "4";
  for (const auto& r : run(run_config_from_map(m))) EXPECT_EQ(r.retrained, r.iteration % 4 == 0);
}

TEST(Run, EveryStrategyRespectsCapacity) {
  for (const std::string strategy : {"memento", "memento_euclidean", "random", "fifo", "priority_loss",
                                     "priority_confidence", "priority_label_count", "priority_stalled", "lars", "qbc"}) {
    auto m = small_config();
    m["strategy"] = strategy;
    m["iterations"] = "6";
    m["noise_fraction"] = "0.1";
    const auto reports = run(run_config_from_map(m));
    ASSERT_EQ(reports.size(), 6u) << strategy;
    for (const auto& r : reports) {
      EXPECT_LE(r.mem_total, 800u) << strategy;
      EXPECT_LE(r.mem_noise, r.mem_total) << strategy;
    }
  }
}

TEST(Run, FifoKeepsOnlyTheMajorityClass) {
  auto m = small_config();
  m["strategy"] = "fifo";
  m["predictor"] = "oracle";
  m["iterations"] = "20";
  m["samples_per_iteration"] = "10000";
  m["capacity"] = "20000";
  m["batch_size"] = "256";
  m["feature_dim"] = "16";
  const auto reports = run(run_config_from_map(m));
  EXPECT_EQ(reports.back().mem_class_counts, (std::vector<std::size_t>{0, 20000, 0}));
}

TEST(Run, ReportFilesAreDeterministic) {
  auto m = small_config("incremental");
  m["snapshots"] = "true";
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  m["output_dir"] = a.string();
  run(run_config_from_map(m));
  m["output_dir"] = b.string();
  run(run_config_from_map(m));
  const auto table = slurp(a / "report.csv");
  EXPECT_EQ(table, slurp(b / "report.csv"));
  EXPECT_EQ(table.substr(0, table.find('\n')),
            "iteration,retrained,rci,balanced_accuracy,p99_error,mean_logscore,p1_logscore,"
            "mem_count_class_0,mem_count_class_1,mem_count_class_2,selection_seconds");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 13);
  std::size_t snapshots = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("snapshot_", 0) != 0) continue;
    ++snapshots;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name));
    EXPECT_FALSE(read_records(entry.path().string()).empty());
  }
  EXPECT_GE(snapshots, 1u);
}

TEST(Run, RecordedInputMatchesItsIterations) {
  const auto dir = scratch_dir("input");
  auto spec = ScenarioSpec::make(ScenarioKind::incremental, 2);
  spec.samples_per_iteration = 300;
  spec.feature_dim = 8;
  spec.classes = ScenarioSpec::default_classes(8);
  ScenarioStream stream(spec);
  {
    std::ofstream out(dir / "stream.jsonl");
    for (std::int64_t it = 0; auto batch = stream.next(); ++it) write_records(out, *batch, it);
  }
  ConfigMap m{{"input", (dir / "stream.jsonl").string()},
              {"k_pred", "3"},
              {"k_out", "3"},
              {"task", "classification"},
              {"capacity", "500"},
              {"batch_size", "10"},
              {"report_timing", "false"}};
  const auto reports = run(run_config_from_map(m));
  ASSERT_EQ(reports.size(), 30u);
  EXPECT_EQ(reports.back().mem_class_counts.size(), 3u);
  EXPECT_GT(reports.back().mem_class_counts[2], 0u);
  EXPECT_LE(reports.back().mem_total, 500u);
  for (const auto& r : reports) EXPECT_TRUE(r.balanced_accuracy.has_value());

  m["input"] = (dir / "missing.jsonl").string();
  EXPECT_ERRC(run(run_config_from_map(m)), Errc::io_error);
}

TEST(Sweep, OneRunPerValue) {
  const auto dir = scratch_dir("sweep");
  auto m = small_config();
  m["iterations"] = "4";
  m["output_dir"] = dir.string();
  const auto results = sweep(m, "temperature", {"0", "0.01", "inf"}, 2);
  ASSERT_EQ(results.size(), 3u);
  for (const auto& r : results) EXPECT_EQ(r.size(), 4u);
  for (const std::string v : {"0", "0.01", "inf"}) EXPECT_TRUE(fs::exists(dir / ("temperature_" + v) / "report.csv"));

  m["temperature"] = "0";
  m.erase("output_dir");
  EXPECT_EQ(sweep(m, "seed", {"5"}, 1).front().back().mem_class_counts,
            run(run_config_from_map(m)).back().mem_class_counts);
  EXPECT_ERRC(sweep(m, "capacity", {"100", "-3"}, 2), Errc::config_error);
}
