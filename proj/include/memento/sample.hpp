#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memento/error.hpp"

namespace memento {

inline constexpr double kNormalizationTolerance = 1e-9;

/// Probability vector over a fixed number of bins.
struct CategoricalDistribution {
  std::vector<double> probs;

  CategoricalDistribution() = default;
  explicit CategoricalDistribution(std::vector<double> p) : probs(std::move(p)) {}

  static CategoricalDistribution uniform(std::size_t k) {
    return CategoricalDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }
  static CategoricalDistribution point_mass(std::size_t k, std::size_t bin) {
    std::vector<double> p(k, 0.0);
    p.at(bin) = 1.0;
    return CategoricalDistribution(std::move(p));
  }

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  friend bool operator==(const CategoricalDistribution&, const CategoricalDistribution&) = default;
};

/// Returns the first violated invariant, if any.
inline std::optional<Errc> check_distribution(const CategoricalDistribution& d) {
  double sum = 0.0;
  for (double p : d.probs) {
    if (p < 0.0 || std::isnan(p)) return Errc::negative_probability;
    sum += p;
  }
  if (d.probs.empty() || std::abs(sum - 1.0) > kNormalizationTolerance) {
    return Errc::non_normalized_prediction;
  }
  return std::nullopt;
}

/// One observation from the stream.
///
/// `source` and `noise` are evaluation metadata: the generator knows which
/// workload produced a sample and whether it was corrupted, but selection
/// strategies must never read them.
struct Sample {
  std::vector<double> features;
  std::size_t output_bin = 0;
  double raw_output = 0.0;
  CategoricalDistribution prediction;
  std::optional<double> loss;
  bool stalled = false;
  std::uint64_t arrival_index = 0;

  int source = -1;
  bool noise = false;

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline std::optional<Errc> check_sample(const Sample& s, std::size_t k_pred, std::size_t k_out) {
  if (s.output_bin >= k_out) return Errc::bin_out_of_range;
  if (s.prediction.size() != k_pred) return Errc::length_mismatch;
  if (auto e = check_distribution(s.prediction)) return e;
  if (s.loss && *s.loss < 0.0) return Errc::negative_probability;
  return std::nullopt;
}

inline void validate_sample(const Sample& s, std::size_t k_pred, std::size_t k_out) {
  if (auto e = check_sample(s, k_pred, k_out)) {
    fail(*e, "sample " + std::to_string(s.arrival_index) + " is invalid");
  }
}

/// Uniform mixture (entry-wise mean) of equally sized distributions.
inline CategoricalDistribution mixture(std::span<const CategoricalDistribution> preds) {
  if (preds.empty()) fail(Errc::empty_input, "mixture of zero distributions");
  const std::size_t k = preds.front().size();
  std::vector<double> acc(k, 0.0);
  for (const auto& p : preds) {
    if (p.size() != k) fail(Errc::length_mismatch, "mixture inputs differ in length");
    for (std::size_t i = 0; i < k; ++i) acc[i] += p[i];
  }
  const double n = static_cast<double>(preds.size());
  for (double& a : acc) a /= n;
  return CategoricalDistribution(std::move(acc));
}

/// A group of samples summarized by its prediction and output distributions.
struct Batch {
  std::vector<std::uint64_t> sample_ids;
  CategoricalDistribution pred_dist;
  CategoricalDistribution out_dist;
  std::vector<double> mean_features;
  double density_pred = 0.0;
  double density_out = 0.0;

  std::size_t size() const noexcept { return sample_ids.size(); }
};

/// Capacity-bounded sample store plus the batches of the last training event.
struct ReplayMemory {
  std::size_t capacity = 0;
  std::vector<Sample> samples;  // sorted by arrival_index
  std::vector<Batch> batches;
  std::vector<Batch> last_train_batches;
  std::uint64_t seen = 0;  // samples ever offered, for reservoir-style strategies

  ReplayMemory() = default;
  explicit ReplayMemory(std::size_t cap) : capacity(cap) {}

  std::size_t size() const noexcept { return samples.size(); }

  const Sample* find(std::uint64_t id) const {
    auto it = std::lower_bound(samples.begin(), samples.end(), id,
                               [](const Sample& s, std::uint64_t v) { return s.arrival_index < v; });
    return (it != samples.end() && it->arrival_index == id) ? &*it : nullptr;
  }

  void set_samples(std::vector<Sample> kept) {
    std::sort(kept.begin(), kept.end(),
              [](const Sample& a, const Sample& b) { return a.arrival_index < b.arrival_index; });
    samples = std::move(kept);
  }
};

struct StrategyConfig {
  std::size_t capacity = 20000;
  std::size_t batch_size = 256;
  double bandwidth = 0.1;
  double temperature = 0.01;
  double threshold = 0.1;
  std::uint64_t seed = 0;
  std::size_t k_pred = 21;
  std::size_t k_out = 21;
  // Output bins are class labels (as opposed to discretized regression targets).
  bool classification = true;
  // When false the caller owns last_train_batches (fixed-cadence retraining).
  bool remember_on_retrain = true;

  void validate() const {
    if (capacity == 0) fail(Errc::config_error, "capacity must be positive");
    if (batch_size == 0) fail(Errc::config_error, "batch_size must be positive");
    if (batch_size > capacity) {
      fail(Errc::capacity_too_small_for_one_batch,
           "batch_size " + std::to_string(batch_size) + " exceeds capacity " + std::to_string(capacity));
    }
    if (!(bandwidth > 0.0)) fail(Errc::non_positive_bandwidth, "bandwidth must be positive");
    if (temperature < 0.0 || std::isnan(temperature)) fail(Errc::negative_temperature, "temperature < 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail(Errc::config_error, "threshold must lie in [0,1]");
    if (k_pred == 0 || k_out == 0) fail(Errc::config_error, "bin counts must be positive");
  }
};

}  // namespace memento
