#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memento/error.hpp"
#include "memento/sample.hpp"

namespace memento {

inline constexpr double kLogscoreFloor = 1e-12;

/// log2 p(y), clamped at log2(floor) when the model assigned zero mass.
inline double logscore(const CategoricalDistribution& pred, std::size_t y, double floor = kLogscoreFloor) {
  if (y >= pred.size()) fail(Errc::bin_out_of_range, "logscore bin outside prediction");
  return std::log2(std::max(pred[y], floor));
}

/// Model interface consumed by BBDR, loss scoring and committees.
///
/// Trained predictors are immutable; `fit` returns a new model of the same
/// kind trained on the given samples.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_bins() const = 0;
  /// Expected feature length, or nullopt when features are ignored.
  virtual std::optional<std::size_t> feature_dim() const { return std::nullopt; }
  virtual CategoricalDistribution predict(std::span<const double> features) const = 0;
  virtual std::unique_ptr<Predictor> fit(std::span<const Sample> training) const = 0;

  /// Prediction for a whole sample. Only label-aware test doubles override this.
  virtual CategoricalDistribution predict_sample(const Sample& s) const { return predict(s.features); }

  double loss(const Sample& s) const { return -logscore(predict_sample(s), s.output_bin); }

  void check_dimension(std::size_t n) const {
    if (auto d = feature_dim(); d && *d != n) {
      fail(Errc::predictor_dimension_mismatch,
           name() + " expects " + std::to_string(*d) + " features, got " + std::to_string(n));
    }
  }
};

using PredictorPtr = std::shared_ptr<const Predictor>;

/// Untrained model: uniform over all bins.
class UniformPredictor final : public Predictor {
 public:
  explicit UniformPredictor(std::size_t k) : k_(k) {}
  std::string name() const override { return "uniform"; }
  std::size_t num_bins() const override { return k_; }
  CategoricalDistribution predict(std::span<const double>) const override {
    return CategoricalDistribution::uniform(k_);
  }
  std::unique_ptr<Predictor> fit(std::span<const Sample>) const override {
    return std::make_unique<UniformPredictor>(k_);
  }

 private:
  std::size_t k_;
};

/// Point mass on the sample's true output bin. Lets selection be studied
/// independently of model quality.
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(std::size_t k) : k_(k) {}
  std::string name() const override { return "oracle"; }
  std::size_t num_bins() const override { return k_; }
  CategoricalDistribution predict(std::span<const double>) const override {
    return CategoricalDistribution::uniform(k_);
  }
  CategoricalDistribution predict_sample(const Sample& s) const override {
    if (s.output_bin >= k_) fail(Errc::bin_out_of_range, "oracle: output_bin outside prediction bins");
    return CategoricalDistribution::point_mass(k_, s.output_bin);
  }
  std::unique_ptr<Predictor> fit(std::span<const Sample>) const override {
    return std::make_unique<OraclePredictor>(k_);
  }

 private:
  std::size_t k_;
};

/// Ignores features; predicts add-one smoothed label frequencies.
class HistogramPredictor final : public Predictor {
 public:
  explicit HistogramPredictor(std::size_t k) : probs_(CategoricalDistribution::uniform(k)) {}

  std::string name() const override { return "histogram"; }
  std::size_t num_bins() const override { return probs_.size(); }
  CategoricalDistribution predict(std::span<const double>) const override { return probs_; }

  std::unique_ptr<Predictor> fit(std::span<const Sample> training) const override {
    if (training.empty()) fail(Errc::empty_training_set, "histogram predictor needs samples");
    const std::size_t k = probs_.size();
    std::vector<double> counts(k, 1.0);
    for (const auto& s : training) {
      if (s.output_bin >= k) fail(Errc::bin_out_of_range, "training label outside prediction bins");
      counts[s.output_bin] += 1.0;
    }
    const double total = static_cast<double>(training.size() + k);
    for (double& c : counts) c /= total;
    auto out = std::make_unique<HistogramPredictor>(k);
    out->probs_ = CategoricalDistribution(std::move(counts));
    return out;
  }

 private:
  CategoricalDistribution probs_;
};

/// Nearest-centroid classifier with a softmax over negative squared distances.
/// Bins without training samples get zero probability.
class CentroidPredictor final : public Predictor {
 public:
  explicit CentroidPredictor(std::size_t k, double temperature = 1.0) : k_(k), temperature_(temperature) {}

  std::string name() const override { return "centroid"; }
  std::size_t num_bins() const override { return k_; }
  std::optional<std::size_t> feature_dim() const override {
    if (dim_ == 0) return std::nullopt;
    return dim_;
  }

  bool trained() const noexcept { return dim_ != 0; }
  const std::vector<std::vector<double>>& centroids() const noexcept { return centroids_; }

  CategoricalDistribution predict(std::span<const double> x) const override {
    if (!trained()) return CategoricalDistribution::uniform(k_);
    check_dimension(x.size());
    std::vector<double> logits(k_, -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k_; ++c) {
      if (centroids_[c].empty()) continue;
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double d = x[i] - centroids_[c][i];
        d2 += d * d;
      }
      logits[c] = -d2 / temperature_;
      best = std::max(best, logits[c]);
    }
    double total = 0.0;
    for (double& l : logits) {
      l = std::isinf(l) ? 0.0 : std::exp(l - best);
      total += l;
    }
    for (double& l : logits) l /= total;
    return CategoricalDistribution(std::move(logits));
  }

  std::unique_ptr<Predictor> fit(std::span<const Sample> training) const override {
    if (training.empty()) fail(Errc::empty_training_set, "centroid predictor needs samples");
    const std::size_t dim = training.front().features.size();
    std::vector<std::vector<double>> sums(k_);
    std::vector<std::size_t> counts(k_, 0);
    for (const auto& s : training) {
      if (s.features.size() != dim) fail(Errc::predictor_dimension_mismatch, "ragged training features");
      if (s.output_bin >= k_) fail(Errc::bin_out_of_range, "training label outside prediction bins");
      auto& acc = sums[s.output_bin];
      if (acc.empty()) acc.assign(dim, 0.0);
      for (std::size_t i = 0; i < dim; ++i) acc[i] += s.features[i];
      ++counts[s.output_bin];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
    }
    auto out = std::make_unique<CentroidPredictor>(k_, temperature_);
    out->centroids_ = std::move(sums);
    out->dim_ = dim;
    return out;
  }

 private:
  std::size_t k_;
  double temperature_;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> centroids_;
};

/// Generative classifier: one isotropic Gaussian per bin (shared variance)
/// plus a uniform background component over the training bounding box.
/// Far from the training data the background dominates and the prediction
/// tends to uniform, unlike the centroid softmax, which grows more confident.
class GaussianPredictor final : public Predictor {
 public:
  explicit GaussianPredictor(std::size_t k, double background_weight = 0.01)
      : k_(k), background_weight_(background_weight) {}

  std::string name() const override { return "gaussian"; }
  std::size_t num_bins() const override { return k_; }
  std::optional<std::size_t> feature_dim() const override {
    if (dim_ == 0) return std::nullopt;
    return dim_;
  }

  CategoricalDistribution predict(std::span<const double> x) const override {
    if (dim_ == 0) return CategoricalDistribution::uniform(k_);
    check_dimension(x.size());
    const double d = static_cast<double>(dim_);
    const double norm = -0.5 * d * std::log(2.0 * std::numbers::pi * variance_);
    const double background = std::log(background_weight_) + log_box_density_ - std::log(static_cast<double>(k_));
    std::vector<double> logp(k_, background);
    for (std::size_t c = 0; c < k_; ++c) {
      if (log_prior_[c] == -std::numeric_limits<double>::infinity()) continue;
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double diff = x[i] - means_[c][i];
        d2 += diff * diff;
      }
      const double a = log_prior_[c] + norm - d2 / (2.0 * variance_);
      const double hi = std::max(a, background);
      logp[c] = hi + std::log1p(std::exp(std::min(a, background) - hi));
    }
    const double best = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    for (double& l : logp) {
      l = std::exp(l - best);
      total += l;
    }
    for (double& l : logp) l /= total;
    return CategoricalDistribution(std::move(logp));
  }

  std::unique_ptr<Predictor> fit(std::span<const Sample> training) const override {
    if (training.empty()) fail(Errc::empty_training_set, "gaussian predictor needs samples");
    const std::size_t dim = training.front().features.size();
    std::vector<std::vector<double>> means(k_, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k_, 0);
    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (const auto& s : training) {
      if (s.features.size() != dim) fail(Errc::predictor_dimension_mismatch, "ragged training features");
      if (s.output_bin >= k_) fail(Errc::bin_out_of_range, "training label outside prediction bins");
      for (std::size_t i = 0; i < dim; ++i) {
        means[s.output_bin][i] += s.features[i];
        lo[i] = std::min(lo[i], s.features[i]);
        hi[i] = std::max(hi[i], s.features[i]);
      }
      ++counts[s.output_bin];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      if (counts[c] == 0) continue;
      for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    }
    double ss = 0.0;
    for (const auto& s : training) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double diff = s.features[i] - means[s.output_bin][i];
        ss += diff * diff;
      }
    }
    const double n = static_cast<double>(training.size());
    auto out = std::make_unique<GaussianPredictor>(k_, background_weight_);
    out->dim_ = dim;
    out->means_ = std::move(means);
    out->variance_ = std::max(ss / (n * static_cast<double>(std::max<std::size_t>(dim, 1))), 1e-9);
    out->log_prior_.resize(k_);
    for (std::size_t c = 0; c < k_; ++c) {
      out->log_prior_[c] = counts[c] == 0 ? -std::numeric_limits<double>::infinity()
                                          : std::log((1.0 - background_weight_) * static_cast<double>(counts[c]) / n);
    }
    out->log_box_density_ = 0.0;
    for (std::size_t i = 0; i < dim; ++i) out->log_box_density_ -= std::log(std::max(hi[i] - lo[i], 1e-9));
    return out;
  }

 private:
  std::size_t k_;
  double background_weight_;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> means_;
  std::vector<double> log_prior_;
  double variance_ = 1.0;
  double log_box_density_ = 0.0;
};

/// Fills in `loss` for every sample using the given model.
inline void score_losses(std::span<Sample> samples, const Predictor& model) {
  for (auto& s : samples) s.loss = model.loss(s);
}

}  // namespace memento
