#include <map>
#include <set>

#include "test_util.hpp"

using namespace memento;
using testutil::dist;
using testutil::make_sample;

TEST(ModeAndConfidence, Examples) {
  auto a = mode_and_confidence(dist({0.1, 0.7, 0.2}));
  EXPECT_EQ(a.bin, 1u);
  EXPECT_EQ(a.confidence, 0.7);
  auto b = mode_and_confidence(dist({0.5, 0.5}));
  EXPECT_EQ(b.bin, 0u);
  EXPECT_EQ(b.confidence, 0.5);
  auto c = mode_and_confidence(dist({0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(c.bin, 0u);
  EXPECT_EQ(c.confidence, 0.25);
}

TEST(BatchSamples, SplitsByOutput) {
  std::vector<Sample> s;
  for (std::uint64_t i = 0; i < 6; ++i) s.push_back(make_sample(i, i < 3 ? 0 : 1, dist({0.5, 0.5})));
  const auto batches = batch_samples(s, 3, 2);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].sample_ids, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(batches[1].sample_ids, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(batches[0].out_dist.probs, (std::vector<double>{1, 0}));
  EXPECT_EQ(batches[1].out_dist.probs, (std::vector<double>{0, 1}));
}

TEST(BatchSamples, SingleSample) {
  std::vector<Sample> s{make_sample(7, 2, dist({0.2, 0.8}))};
  const auto batches = batch_samples(s, 256, 3);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 1u);
  EXPECT_EQ(batches[0].out_dist.probs, (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(batches[0].pred_dist.probs, (std::vector<double>{0.2, 0.8}));
}

TEST(BatchSamples, GroupsByPredictionMode) {
  std::vector<Sample> s;
  for (std::uint64_t i = 0; i < 10; ++i) s.push_back(make_sample(i, 0, i % 2 == 0 ? dist({0.9, 0.1}) : dist({0.2, 0.8})));
  const auto batches = batch_samples(s, 5, 1);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].sample_ids, (std::vector<std::uint64_t>{0, 2, 4, 6, 8}));
  EXPECT_EQ(batches[1].sample_ids, (std::vector<std::uint64_t>{1, 3, 5, 7, 9}));
}

TEST(BatchSamples, OrdersByConfidenceThenArrivalWithinMode) {
  std::vector<Sample> s{make_sample(0, 0, dist({0.9, 0.1})), make_sample(1, 0, dist({0.6, 0.4})),
                        make_sample(2, 0, dist({0.9, 0.1})), make_sample(3, 0, dist({0.7, 0.3}))};
  const auto batches = batch_samples(s, 2, 1);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].sample_ids, (std::vector<std::uint64_t>{1, 3}));
  EXPECT_EQ(batches[1].sample_ids, (std::vector<std::uint64_t>{0, 2}));
}

TEST(BatchSamples, EmptyInput) { EXPECT_ERRC(batch_samples({}, 4, 2), Errc::empty_input); }

TEST(BatchSamples, PropertiesOnRandomInputs) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k_out = 1 + uniform_index(rng, 6);
    const std::size_t k_pred = 1 + uniform_index(rng, 6);
    const std::size_t b = 1 + uniform_index(rng, 12);
    const std::size_t n = 1 + uniform_index(rng, 300);
    std::vector<Sample> s;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(make_sample(i * 3 + 1, uniform_index(rng, k_out), testutil::random_dist(rng, k_pred),
                              {standard_normal(rng), standard_normal(rng)}));
    }
    const auto batches = batch_samples(s, b, k_out);

    // Exact partition of the input.
    std::multiset<std::uint64_t> seen;
    for (const auto& bt : batches) seen.insert(bt.sample_ids.begin(), bt.sample_ids.end());
    std::multiset<std::uint64_t> expected;
    for (const auto& x : s) expected.insert(x.arrival_index);
    EXPECT_EQ(seen, expected);

    std::map<std::uint64_t, const Sample*> by_id;
    for (const auto& x : s) by_id[x.arrival_index] = &x;
    std::map<std::size_t, std::size_t> per_output;
    for (const auto& x : s) ++per_output[x.output_bin];

    for (std::size_t i = 0; i < batches.size(); ++i) {
      const auto& bt = batches[i];
      ASSERT_GE(bt.size(), 1u);
      ASSERT_LE(bt.size(), b);
      // Members share one output bin, so every batch is pure.
      const std::size_t out = by_id[bt.sample_ids[0]]->output_bin;
      std::vector<double> pred(k_pred, 0.0), hist(k_out, 0.0), mean(2, 0.0);
      for (auto id : bt.sample_ids) {
        const Sample* m = by_id[id];
        EXPECT_EQ(m->output_bin, out);
        for (std::size_t k = 0; k < k_pred; ++k) pred[k] += m->prediction[k] / static_cast<double>(bt.size());
        hist[m->output_bin] += 1.0 / static_cast<double>(bt.size());
        for (std::size_t d = 0; d < 2; ++d) mean[d] += m->features[d] / static_cast<double>(bt.size());
      }
      for (std::size_t k = 0; k < k_pred; ++k) EXPECT_NEAR(bt.pred_dist[k], pred[k], 1e-9);
      for (std::size_t k = 0; k < k_out; ++k) EXPECT_NEAR(bt.out_dist[k], hist[k], 1e-9);
      for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(bt.mean_features[d], mean[d], 1e-9);
      // Only the last batch of an output run may be short.
      const bool last_of_run =
          i + 1 == batches.size() || by_id[batches[i + 1].sample_ids[0]]->output_bin != out;
      if (!last_of_run) {
        EXPECT_EQ(bt.size(), b);
      }
    }
    // Same input, same batches.
    const auto again = batch_samples(s, b, k_out);
    ASSERT_EQ(again.size(), batches.size());
    for (std::size_t i = 0; i < batches.size(); ++i) EXPECT_EQ(again[i].sample_ids, batches[i].sample_ids);
  }
}

TEST(Bbdr, UniformPredictorGivesUniformPredictions) {
  std::vector<Sample> s{make_sample(0, 0, dist({1, 0, 0})), make_sample(1, 2, dist({0, 0, 1}))};
  const auto out = bbdr(s, UniformPredictor(3));
  for (const auto& x : out) EXPECT_EQ(x.prediction, CategoricalDistribution::uniform(3));
}

TEST(Bbdr, OraclePredictorModeEqualsOutput) {
  Rng rng(2);
  std::vector<Sample> s;
  for (std::uint64_t i = 0; i < 50; ++i) s.push_back(make_sample(i, uniform_index(rng, 5), testutil::random_dist(rng, 5)));
  const auto out = bbdr(s, OraclePredictor(5));
  for (const auto& x : out) EXPECT_EQ(mode_and_confidence(x.prediction).bin, x.output_bin);
}

TEST(Bbdr, HistogramPredictorGivesTrainingFrequencies) {
  std::vector<Sample> train;
  for (std::size_t label : {0, 0, 0, 1, 1}) train.push_back(make_sample(train.size(), label, dist({0.5, 0.5})));
  const auto model = HistogramPredictor(2).fit(train);
  const auto out = bbdr(train, *model);
  for (const auto& x : out) {
    EXPECT_NEAR(x.prediction[0], 4.0 / 7.0, 1e-15);
    EXPECT_NEAR(x.prediction[1], 3.0 / 7.0, 1e-15);
  }
}

TEST(Bbdr, KeepsFeaturesAndChecksDimension) {
  std::vector<Sample> train{make_sample(0, 0, dist({0.5, 0.5}), {0, 0}), make_sample(1, 1, dist({0.5, 0.5}), {3, 3})};
  const auto model = CentroidPredictor(2).fit(train);
  const auto out = bbdr(train, *model);
  EXPECT_EQ(out[0].features, train[0].features);
  EXPECT_GT(out[0].prediction[0], 0.99);
  std::vector<Sample> wrong{make_sample(2, 0, dist({0.5, 0.5}), {1, 2, 3})};
  EXPECT_ERRC(bbdr(wrong, *model), Errc::predictor_dimension_mismatch);
}
