#include <sstream>

#include "test_util.hpp"

using namespace memento;
using testutil::dist;
using testutil::make_sample;

TEST(ValidateSample, AcceptsWellFormedSample) {
  auto s = make_sample(0, 1, dist({0.5, 0.5}));
  EXPECT_FALSE(check_sample(s, 2, 2).has_value());
  EXPECT_NO_THROW(validate_sample(s, 2, 2));
}

TEST(ValidateSample, RejectsPredictionThatDoesNotSumToOne) {
  auto s = make_sample(0, 0, dist({0.7, 0.7}));
  EXPECT_ERRC(validate_sample(s, 2, 2), Errc::non_normalized_prediction);
}

TEST(ValidateSample, RejectsOutputBinOutOfRange) {
  auto s = make_sample(0, 5, dist({0.2, 0.3, 0.5}));
  EXPECT_ERRC(validate_sample(s, 3, 3), Errc::bin_out_of_range);
}

TEST(ValidateSample, RejectsNegativeProbability) {
  auto s = make_sample(0, 0, dist({1.5, -0.5}));
  EXPECT_ERRC(validate_sample(s, 2, 2), Errc::negative_probability);
}

TEST(ValidateSample, RejectsPredictionOfWrongLength) {
  auto s = make_sample(0, 0, dist({0.5, 0.5}));
  EXPECT_ERRC(validate_sample(s, 3, 3), Errc::length_mismatch);
}

TEST(ValidateSample, ToleratesRoundingWithinTolerance) {
  auto s = make_sample(0, 0, dist({0.5 + 4e-10, 0.5}));
  EXPECT_NO_THROW(validate_sample(s, 2, 2));
  s.prediction = dist({0.5 + 5e-9, 0.5});
  EXPECT_ERRC(validate_sample(s, 2, 2), Errc::non_normalized_prediction);
}

TEST(Mixture, AveragesTwoPointMasses) {
  std::vector<CategoricalDistribution> in{dist({1, 0}), dist({0, 1})};
  EXPECT_EQ(mixture(in).probs, (std::vector<double>{0.5, 0.5}));
}

TEST(Mixture, SingletonIsIdentity) {
  std::vector<CategoricalDistribution> in{dist({0.2, 0.8})};
  EXPECT_EQ(mixture(in).probs, (std::vector<double>{0.2, 0.8}));
}

TEST(Mixture, ThreeInputs) {
  std::vector<CategoricalDistribution> in{dist({0.5, 0.5}), dist({1, 0}), dist({0.25, 0.75})};
  const auto m = mixture(in);
  EXPECT_NEAR(m[0], 0.583333333333333333, 1e-15);
  EXPECT_NEAR(m[1], 0.416666666666666667, 1e-15);
}

TEST(Mixture, Errors) {
  EXPECT_ERRC(mixture({}), Errc::empty_input);
  std::vector<CategoricalDistribution> in{dist({1, 0}), dist({0.2, 0.3, 0.5})};
  EXPECT_ERRC(mixture(in), Errc::length_mismatch);
}

TEST(Mixture, IdempotentAndValidOnRandomInputs) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 30);
    const auto p = testutil::random_dist(rng, k);
    std::vector<CategoricalDistribution> same(1 + uniform_index(rng, 10), p);
    const auto m = mixture(same);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(m[i], p[i], 1e-12);

    std::vector<CategoricalDistribution> mixed;
    for (std::size_t n = 1 + uniform_index(rng, 10); n > 0; --n) mixed.push_back(testutil::random_dist(rng, k));
    EXPECT_FALSE(check_distribution(mixture(mixed)).has_value());
  }
}

TEST(SampleRecord, RoundTripsEveryField) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Sample s;
    s.features.resize(uniform_index(rng, 8));
    for (auto& f : s.features) f = standard_normal(rng) * 1e3;
    s.prediction = testutil::random_dist(rng, 1 + uniform_index(rng, 21));
    s.output_bin = uniform_index(rng, s.prediction.size());
    s.raw_output = standard_normal(rng);
    if (uniform01(rng) < 0.5) s.loss = uniform01(rng) * 40.0;
    s.stalled = uniform01(rng) < 0.5;
    s.arrival_index = rng();
    s.source = static_cast<int>(uniform_index(rng, 4)) - 1;
    s.noise = uniform01(rng) < 0.5;

    const auto rec = parse_record(to_record(s, trial), 0);
    EXPECT_EQ(rec.sample, s);
    EXPECT_EQ(rec.iteration, trial);
  }
}

TEST(SampleRecord, MinimalRecordUsesDefaults) {
  const auto rec =
      parse_record(R"({"features":[1.5,2],"output_bin":1,"raw_output":0.25,"prediction":[0.25,0.75],"stalled":1})", 42);
  EXPECT_EQ(rec.sample.features, (std::vector<double>{1.5, 2.0}));
  EXPECT_EQ(rec.sample.output_bin, 1u);
  EXPECT_TRUE(rec.sample.stalled);
  EXPECT_EQ(rec.sample.arrival_index, 42u);
  EXPECT_FALSE(rec.sample.loss.has_value());
  EXPECT_FALSE(rec.iteration.has_value());
}

TEST(SampleRecord, IgnoresUnknownFields) {
  const auto rec = parse_record(
      R"({"features":[],"output_bin":0,"raw_output":0,"prediction":[1],"stalled":false,"session":"abc","x":[1,2]})", 0);
  EXPECT_EQ(rec.sample.prediction.probs, (std::vector<double>{1.0}));
}

TEST(SampleRecord, ParseErrors) {
  EXPECT_ERRC(parse_record("not json", 0), Errc::parse_error);
  EXPECT_ERRC(parse_record("[1,2]", 0), Errc::parse_error);
  EXPECT_ERRC(parse_record(R"({"features":[],"raw_output":0,"prediction":[1],"stalled":0})", 0), Errc::parse_error);
  EXPECT_ERRC(parse_record(R"({"features":"x","output_bin":0,"raw_output":0,"prediction":[1],"stalled":0})", 0),
              Errc::parse_error);
}

TEST(SampleRecord, StreamReadSkipsBlankLinesAndNumbersRecords) {
  std::stringstream ss;
  ss << R"({"features":[],"output_bin":0,"raw_output":0,"prediction":[1],"stalled":0})" << "\n\n"
     << R"({"features":[],"output_bin":0,"raw_output":1,"prediction":[1],"stalled":0})" << "\n";
  const auto recs = read_records(ss);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].sample.arrival_index, 0u);
  EXPECT_EQ(recs[1].sample.arrival_index, 1u);
  EXPECT_ERRC(read_records(std::string("/nonexistent/file.jsonl")), Errc::io_error);
}

TEST(ReplayMemory, FindsSamplesByArrivalIndex) {
  ReplayMemory mem(10);
  mem.set_samples({make_sample(9, 0, dist({1})), make_sample(3, 0, dist({1})), make_sample(5, 0, dist({1}))});
  EXPECT_EQ(mem.samples.front().arrival_index, 3u);
  ASSERT_NE(mem.find(5), nullptr);
  EXPECT_EQ(mem.find(5)->arrival_index, 5u);
  EXPECT_EQ(mem.find(4), nullptr);
  EXPECT_EQ(mem.find(10), nullptr);
}

TEST(StrategyConfig, DefaultsAndValidation) {
  StrategyConfig cfg;
  EXPECT_EQ(cfg.capacity, 20000u);
  EXPECT_EQ(cfg.batch_size, 256u);
  EXPECT_DOUBLE_EQ(cfg.bandwidth, 0.1);
  EXPECT_DOUBLE_EQ(cfg.temperature, 0.01);
  EXPECT_DOUBLE_EQ(cfg.threshold, 0.1);
  EXPECT_NO_THROW(cfg.validate());

  auto bad = cfg;
  bad.batch_size = bad.capacity + 1;
  EXPECT_ERRC(bad.validate(), Errc::capacity_too_small_for_one_batch);
  bad = cfg;
  bad.bandwidth = 0.0;
  EXPECT_ERRC(bad.validate(), Errc::non_positive_bandwidth);
  bad = cfg;
  bad.temperature = -1.0;
  EXPECT_ERRC(bad.validate(), Errc::negative_temperature);
  bad = cfg;
  bad.threshold = 1.5;
  EXPECT_ERRC(bad.validate(), Errc::config_error);
}

TEST(Error, CarriesCodeAndName) {
  try {
    fail(Errc::last_batch, "detail");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::last_batch);
    EXPECT_NE(std::string(e.what()).find("LastBatch"), std::string::npos);
  }
}
