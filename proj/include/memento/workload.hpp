#pragma once

// Synthetic traffic streams with three workload classes (W1, W2, W3).
//
// Each class draws features from an isotropic Gaussian around its own mean.
// Classification streams use the class index as the output bin; regression
// streams draw a positive continuous output from a class-dependent log-normal
// whose scale drifts between phases, and discretize it into equal-width bins.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memento/error.hpp"
#include "memento/rng.hpp"
#include "memento/sample.hpp"

namespace memento {

enum class ScenarioKind { rare_patterns, incremental, gradual_drift };

inline constexpr std::string_view to_string(ScenarioKind k) noexcept {
  switch (k) {
    case ScenarioKind::rare_patterns: return "rare_patterns";
    case ScenarioKind::incremental: return "incremental";
    case ScenarioKind::gradual_drift: return "gradual_drift";
  }
  return "unknown";
}

inline ScenarioKind parse_scenario_kind(std::string_view s) {
  for (auto k : {ScenarioKind::rare_patterns, ScenarioKind::incremental, ScenarioKind::gradual_drift}) {
    if (to_string(k) == s) return k;
  }
  fail(Errc::config_error, "unknown scenario '" + std::string(s) + "'");
}

struct ClassSpec {
  std::vector<double> mean;
  double scale = 0.5;        // per-dimension standard deviation
  double output_base = 1.0;  // regression: median output before drift
};

inline constexpr std::size_t kPhaseLength = 10;
inline constexpr std::size_t kRarePeriodW1 = 5;
inline constexpr std::size_t kRarePeriodW3 = 10;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::rare_patterns;
  std::size_t iterations = 20;
  std::size_t samples_per_iteration = 10000;
  std::size_t feature_dim = 16;
  std::vector<ClassSpec> classes;
  // rare_patterns: every class in every iteration at the rare fractions.
  bool stationary = false;
  double fraction_w1 = 0.013;
  double fraction_w3 = 0.005;
  // regression binning; classification uses one bin per class
  std::size_t regression_bins = 21;
  double output_min = 0.0;
  double output_max = 5.0;
  double output_spread = 0.25;  // log-normal sigma
  std::vector<double> phase_scales{1.0, 1.5, 2.0};
  std::uint64_t seed = 0;

  bool classification() const noexcept { return kind != ScenarioKind::gradual_drift; }
  std::size_t num_classes() const noexcept { return classes.size(); }
  std::size_t k_out() const noexcept { return classification() ? classes.size() : regression_bins; }

  /// Default W1/W2/W3 classes: each class shifts its own block of four
  /// feature dimensions, giving a centroid separation of 3 at scale 0.5.
  static std::vector<ClassSpec> default_classes(std::size_t dim) {
    const double shift = 3.0 / std::sqrt(8.0);
    const double bases[3] = {0.8, 0.08, 1.0};
    std::vector<ClassSpec> out(3);
    for (std::size_t c = 0; c < 3; ++c) {
      out[c].mean.assign(dim, 0.0);
      for (std::size_t d = 4 * c; d < std::min(dim, 4 * c + 4); ++d) out[c].mean[d] = shift;
      out[c].output_base = bases[c];
    }
    return out;
  }

  static ScenarioSpec make(ScenarioKind kind, std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.kind = kind;
    s.seed = seed;
    s.iterations = kind == ScenarioKind::rare_patterns ? 20 : 30;
    s.classes = default_classes(s.feature_dim);
    return s;
  }

  double phase_scale(std::size_t iteration) const {
    if (kind != ScenarioKind::gradual_drift) return 1.0;
    return phase_scales.at(std::min(iteration / kPhaseLength, phase_scales.size() - 1));
  }

  std::size_t output_bin(double raw) const {
    const double width = (output_max - output_min) / static_cast<double>(regression_bins);
    const auto bin = static_cast<std::ptrdiff_t>(std::floor((raw - output_min) / width));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(regression_bins) - 1));
  }

  double bin_midpoint(std::size_t bin) const {
    if (classification()) return static_cast<double>(bin);
    const double width = (output_max - output_min) / static_cast<double>(regression_bins);
    return output_min + (static_cast<double>(bin) + 0.5) * width;
  }

  void validate() const {
    if (classes.size() != 3) fail(Errc::bad_schedule, "scenarios need exactly three classes");
    for (const auto& c : classes) {
      if (c.mean.size() != feature_dim) fail(Errc::bad_schedule, "class mean length differs from feature_dim");
    }
    if (kind == ScenarioKind::incremental && iterations > 3 * kPhaseLength) {
      fail(Errc::bad_schedule, "incremental learning runs at most 30 iterations");
    }
    if (kind == ScenarioKind::gradual_drift) {
      if (iterations > phase_scales.size() * kPhaseLength) fail(Errc::bad_schedule, "drift runs at most 30 iterations");
      if (!(output_max > output_min) || regression_bins == 0) fail(Errc::bad_schedule, "bad output binning");
    }
    if (fraction_w1 < 0.0 || fraction_w3 < 0.0) fail(Errc::bad_schedule, "negative class fraction");
    for (std::size_t i = 0; i < iterations; ++i) {
      const auto w = weights(i);
      double sum = 0.0;
      for (double x : w) {
        if (x < 0.0) fail(Errc::bad_schedule, "negative mixture weight at iteration " + std::to_string(i));
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9) fail(Errc::bad_schedule, "weights do not sum to 1");
    }
  }

  /// Class mixture weights of one iteration.
  std::vector<double> weights(std::size_t iteration) const {
    std::vector<double> w(3, 0.0);
    switch (kind) {
      case ScenarioKind::rare_patterns: {
        if (stationary) {
          w[0] = fraction_w1;
          w[2] = fraction_w3;
        } else {
          // Rare classes only appear on their cadence but still make up the
          // configured share of the whole stream.
          const double n = static_cast<double>(iterations);
          const double n1 = static_cast<double>((iterations + kRarePeriodW1 - 1) / kRarePeriodW1);
          const double n3 = static_cast<double>((iterations + kRarePeriodW3 - 1) / kRarePeriodW3);
          if (iteration % kRarePeriodW1 == 0) w[0] = fraction_w1 * n / n1;
          if (iteration % kRarePeriodW3 == 0) w[2] = fraction_w3 * n / n3;
        }
        w[1] = 1.0 - w[0] - w[2];
        break;
      }
      case ScenarioKind::incremental: w[std::min<std::size_t>(iteration / kPhaseLength, 2)] = 1.0; break;
      case ScenarioKind::gradual_drift: w = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; break;
    }
    return w;
  }

  /// Largest-remainder rounding of weights * count.
  static std::vector<std::size_t> apportion(const std::vector<double>& w, std::size_t count) {
    std::vector<std::size_t> out(w.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double exact = w[i] * static_cast<double>(count);
      out[i] = static_cast<std::size_t>(std::floor(exact));
      assigned += out[i];
      rem.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < count && r < rem.size(); ++r, ++assigned) ++out[rem[r].second];
    return out;
  }

  /// Bounding box used for noise features: every class mean +- 3 scales.
  std::pair<std::vector<double>, std::vector<double>> feature_box() const {
    std::vector<double> lo(feature_dim, 0.0), hi(feature_dim, 0.0);
    for (std::size_t d = 0; d < feature_dim; ++d) {
      lo[d] = hi[d] = classes.front().mean[d];
      for (const auto& c : classes) {
        lo[d] = std::min(lo[d], c.mean[d] - 3.0 * c.scale);
        hi[d] = std::max(hi[d], c.mean[d] + 3.0 * c.scale);
      }
    }
    return {lo, hi};
  }
};

/// Draws one sample of class `c` under the drift phase of `iteration`.
inline Sample draw_sample(const ScenarioSpec& spec, std::size_t c, std::size_t iteration, Rng& rng) {
  const auto& cls = spec.classes.at(c);
  Sample s;
  s.features.resize(spec.feature_dim);
  for (std::size_t d = 0; d < spec.feature_dim; ++d) s.features[d] = cls.mean[d] + cls.scale * standard_normal(rng);
  if (spec.classification()) {
    s.output_bin = c;
    s.raw_output = static_cast<double>(c);
  } else {
    s.raw_output = spec.phase_scale(iteration) * cls.output_base * std::exp(spec.output_spread * standard_normal(rng));
    s.output_bin = spec.output_bin(s.raw_output);
  }
  s.prediction = CategoricalDistribution::uniform(spec.k_out());
  s.source = static_cast<int>(c);
  return s;
}

/// Sequential iterator over the iterations of one scenario. Class counts per
/// iteration are the apportioned schedule weights, and samples of different
/// classes are interleaved in a seeded random order.
class ScenarioStream {
 public:
  explicit ScenarioStream(ScenarioSpec spec) : spec_(std::move(spec)), rng_(derive_seed(spec_.seed, 0)) {
    spec_.validate();
  }

  const ScenarioSpec& spec() const noexcept { return spec_; }
  std::size_t iteration() const noexcept { return iteration_; }

  std::optional<std::vector<Sample>> next() {
    if (iteration_ >= spec_.iterations) return std::nullopt;
    const auto counts = ScenarioSpec::apportion(spec_.weights(iteration_), spec_.samples_per_iteration);
    std::vector<std::size_t> labels;
    labels.reserve(spec_.samples_per_iteration);
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], c);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng_, i)]);
    std::vector<Sample> out;
    out.reserve(labels.size());
    for (std::size_t c : labels) {
      out.push_back(draw_sample(spec_, c, iteration_, rng_));
      out.back().arrival_index = next_index_++;
    }
    ++iteration_;
    return out;
  }

  /// Balanced held-out set for an iteration: `per_class` fresh samples of every
  /// class under that iteration's conditions. Independent of the stream state.
  std::vector<Sample> evaluation_set(std::size_t iteration, std::size_t per_class) const {
    Rng rng(derive_seed(spec_.seed, 1'000'000 + iteration));
    std::vector<Sample> out;
    for (std::size_t c = 0; c < spec_.num_classes(); ++c) {
      for (std::size_t i = 0; i < per_class; ++i) out.push_back(draw_sample(spec_, c, iteration, rng));
    }
    return out;
  }

 private:
  ScenarioSpec spec_;
  Rng rng_;
  std::size_t iteration_ = 0;
  std::uint64_t next_index_ = 0;
};

inline ScenarioStream generate_rare_patterns(ScenarioSpec spec) {
  spec.kind = ScenarioKind::rare_patterns;
  return ScenarioStream(std::move(spec));
}

inline ScenarioStream generate_incremental(ScenarioSpec spec) {
  spec.kind = ScenarioKind::incremental;
  return ScenarioStream(std::move(spec));
}

inline ScenarioStream generate_gradual_drift(ScenarioSpec spec) {
  spec.kind = ScenarioKind::gradual_drift;
  return ScenarioStream(std::move(spec));
}

/// Replaces exactly round(fraction * n) samples, at seeded positions, with
/// noise: features uniform over the scenario's feature box, output uniform
/// over the output range. Replaced samples keep their arrival index and are
/// tagged `noise` for evaluation.
inline std::vector<Sample> inject_noise(std::vector<Sample> samples, double fraction, const ScenarioSpec& spec,
                                        Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) fail(Errc::bad_fraction, "noise fraction must lie in [0,1]");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
  std::vector<std::size_t> pos(samples.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(pos[i], pos[i + uniform_index(rng, pos.size() - i)]);
  const auto [lo, hi] = spec.feature_box();
  for (std::size_t i = 0; i < count; ++i) {
    Sample& s = samples[pos[i]];
    for (std::size_t d = 0; d < s.features.size() && d < lo.size(); ++d) {
      s.features[d] = lo[d] + (hi[d] - lo[d]) * uniform01(rng);
    }
    if (spec.classification()) {
      s.output_bin = uniform_index(rng, spec.num_classes());
      s.raw_output = static_cast<double>(s.output_bin);
      s.source = static_cast<int>(s.output_bin);
    } else {
      s.raw_output = spec.output_min + (spec.output_max - spec.output_min) * uniform01(rng);
      s.output_bin = spec.output_bin(s.raw_output);
      s.source = static_cast<int>(uniform_index(rng, spec.num_classes()));
    }
    s.prediction = CategoricalDistribution::uniform(spec.k_out());
    s.loss.reset();
    s.noise = true;
  }
  return samples;
}

}  // namespace memento
