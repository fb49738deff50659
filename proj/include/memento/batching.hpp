#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "memento/error.hpp"
#include "memento/predictor.hpp"
#include "memento/sample.hpp"

namespace memento {

struct ModeConfidence {
  std::size_t bin = 0;
  double confidence = 0.0;
};

/// Argmax of a distribution and its probability; ties go to the lowest bin.
inline ModeConfidence mode_and_confidence(const CategoricalDistribution& p) {
  ModeConfidence out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i == 0 || p[i] > out.confidence) out = {i, p[i]};
  }
  return out;
}

/// Summarizes a group of samples: mixture of predictions, histogram of
/// output bins and mean feature vector.
inline Batch make_batch(std::span<const Sample* const> members, std::size_t k_out) {
  if (members.empty()) fail(Errc::empty_input, "empty batch");
  Batch b;
  const std::size_t k_pred = members.front()->prediction.size();
  const std::size_t dim = members.front()->features.size();
  std::vector<double> pred(k_pred, 0.0);
  std::vector<double> out(k_out, 0.0);
  std::vector<double> mean(dim, 0.0);
  b.sample_ids.reserve(members.size());
  for (const Sample* s : members) {
    if (s->prediction.size() != k_pred) fail(Errc::length_mismatch, "predictions differ in length");
    if (s->output_bin >= k_out) fail(Errc::bin_out_of_range, "output_bin outside output bins");
    if (s->features.size() != dim) fail(Errc::length_mismatch, "features differ in length");
    b.sample_ids.push_back(s->arrival_index);
    for (std::size_t i = 0; i < k_pred; ++i) pred[i] += s->prediction[i];
    out[s->output_bin] += 1.0;
    for (std::size_t i = 0; i < dim; ++i) mean[i] += s->features[i];
  }
  const double n = static_cast<double>(members.size());
  for (double& v : pred) v /= n;
  for (double& v : out) v /= n;
  for (double& v : mean) v /= n;
  b.pred_dist = CategoricalDistribution(std::move(pred));
  b.out_dist = CategoricalDistribution(std::move(out));
  b.mean_features = std::move(mean);
  return b;
}

/// Groups samples by output bin, then prediction mode, then mode probability
/// (arrival index breaks remaining ties) and cuts each output-bin run into
/// consecutive chunks of at most `b` samples. A short final chunk stays its
/// own batch rather than mixing output bins.
inline std::vector<Batch> batch_samples(std::span<const Sample> samples, std::size_t b, std::size_t k_out) {
  if (samples.empty()) fail(Errc::empty_input, "no samples to batch");
  if (b == 0) fail(Errc::config_error, "batch size must be positive");

  struct Key {
    std::size_t out;
    std::size_t mode;
    double conf;
    std::uint64_t arrival;
    const Sample* s;
  };
  std::vector<Key> keys;
  keys.reserve(samples.size());
  for (const auto& s : samples) {
    const auto mc = mode_and_confidence(s.prediction);
    keys.push_back({s.output_bin, mc.bin, mc.confidence, s.arrival_index, &s});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& x, const Key& y) {
    return std::tie(x.out, x.mode, x.conf, x.arrival) < std::tie(y.out, y.mode, y.conf, y.arrival);
  });

  std::vector<Batch> batches;
  std::vector<const Sample*> chunk;
  chunk.reserve(b);
  auto flush = [&] {
    if (chunk.empty()) return;
    batches.push_back(make_batch(chunk, k_out));
    chunk.clear();
  };
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && keys[i].out != keys[i - 1].out) flush();
    chunk.push_back(keys[i].s);
    if (chunk.size() == b) flush();
  }
  flush();
  return batches;
}

/// Black-box dimensionality reduction: replace each sample's prediction by the
/// model's output. Features are left untouched.
inline std::vector<Sample> bbdr(std::vector<Sample> samples, const Predictor& model) {
  for (auto& s : samples) {
    model.check_dimension(s.features.size());
    s.prediction = model.predict_sample(s);
  }
  return samples;
}

}  // namespace memento
