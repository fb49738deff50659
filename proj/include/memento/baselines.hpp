#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memento/batching.hpp"
#include "memento/error.hpp"
#include "memento/predictor.hpp"
#include "memento/rng.hpp"
#include "memento/sample.hpp"
#include "memento/selection.hpp"

namespace memento {

enum class StrategyKind {
  memento,
  memento_euclidean,
  random,
  fifo,
  priority_loss,
  priority_confidence,
  priority_label_count,
  priority_stalled,
  lars,
  qbc,
};

inline constexpr std::string_view to_string(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::memento: return "memento";
    case StrategyKind::memento_euclidean: return "memento_euclidean";
    case StrategyKind::random: return "random";
    case StrategyKind::fifo: return "fifo";
    case StrategyKind::priority_loss: return "priority_loss";
    case StrategyKind::priority_confidence: return "priority_confidence";
    case StrategyKind::priority_label_count: return "priority_label_count";
    case StrategyKind::priority_stalled: return "priority_stalled";
    case StrategyKind::lars: return "lars";
    case StrategyKind::qbc: return "qbc";
  }
  return "unknown";
}

inline StrategyKind parse_strategy_kind(std::string_view s) {
  for (auto k : {StrategyKind::memento, StrategyKind::memento_euclidean, StrategyKind::random, StrategyKind::fifo,
                 StrategyKind::priority_loss, StrategyKind::priority_confidence, StrategyKind::priority_label_count,
                 StrategyKind::priority_stalled, StrategyKind::lars, StrategyKind::qbc}) {
    if (to_string(k) == s) return k;
  }
  fail(Errc::config_error, "unknown strategy '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Random

/// Uniform sample of everything seen so far (reservoir sampling, Algorithm R):
/// the n-th sample offered replaces a uniformly chosen slot with probability
/// C / n once the memory is full. Baselines always request retraining.
inline SelectionOutcome random_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                      const Predictor& model, Rng& rng) {
  cfg.validate();
  mem.capacity = cfg.capacity;
  incoming = bbdr(std::move(incoming), model);
  std::sort(incoming.begin(), incoming.end(),
            [](const Sample& a, const Sample& b) { return a.arrival_index < b.arrival_index; });
  std::vector<Sample> slots = std::move(mem.samples);
  // An earlier strategy may have left the memory above the new capacity.
  while (slots.size() > cfg.capacity) slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, slots.size())));
  for (auto& s : incoming) {
    ++mem.seen;
    if (slots.size() < cfg.capacity) {
      slots.push_back(std::move(s));
      continue;
    }
    const auto j = uniform_index(rng, mem.seen);
    if (j < cfg.capacity) slots[j] = std::move(s);
  }
  mem.set_samples(std::move(slots));
  SelectionOutcome out;
  for (const auto& s : mem.samples) out.kept_sample_ids.push_back(s.arrival_index);
  out.retrain = true;
  out.rci = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// FIFO

inline SelectionOutcome fifo_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                    const Predictor& model, Rng&) {
  cfg.validate();
  mem.capacity = cfg.capacity;
  mem.seen += incoming.size();
  incoming = bbdr(std::move(incoming), model);
  auto pool = detail::assemble_pool(mem, std::move(incoming));
  std::vector<char> keep(pool.size(), 0);
  const std::size_t first = pool.size() > cfg.capacity ? pool.size() - cfg.capacity : 0;
  for (std::size_t i = first; i < pool.size(); ++i) keep[i] = 1;
  SelectionOutcome out;
  out.kept_sample_ids = detail::commit(mem, pool, keep);
  out.retrain = true;
  out.rci = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Scalar priorities

enum class PriorityScore { loss, confidence, label_count, stalled };

namespace detail {

inline double gumbel(Rng& rng) {
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  return -std::log(-std::log(u) + std::numeric_limits<double>::min());
}

// Oriented so that a higher value means more likely to be discarded.
inline double signed_score(const Sample& s, PriorityScore kind) {
  switch (kind) {
    case PriorityScore::loss:
      if (!s.loss) fail(Errc::missing_scores, "sample " + std::to_string(s.arrival_index) + " has no loss");
      return -*s.loss;
    case PriorityScore::confidence: return mode_and_confidence(s.prediction).confidence;
    case PriorityScore::stalled: return s.stalled ? 0.0 : 1.0;
    case PriorityScore::label_count: break;
  }
  return 0.0;
}

/// Draws `count` discards sequentially with probability softmax(score / T)
/// over the remaining samples. Scores are fixed, so the sequential process is
/// sampled in one pass by perturbing each score with Gumbel noise and taking
/// the largest keys (the Plackett-Luce equivalence).
inline std::vector<std::size_t> static_discards(std::span<const double> score, std::size_t count, double temperature,
                                                Rng& rng) {
  std::vector<double> key(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (temperature == 0.0) {
      key[i] = score[i];
    } else if (std::isinf(temperature)) {
      key[i] = gumbel(rng);
    } else {
      key[i] = score[i] / temperature + gumbel(rng);
    }
  }
  std::vector<std::size_t> order(score.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  order.resize(count);
  return order;
}

/// Sequential discards where each sample's score is its label's share of the
/// current pool. T = 0 removes the oldest sample of the largest label.
inline std::vector<std::size_t> label_count_discards(std::span<const Sample> pool, std::size_t count,
                                                     std::size_t num_labels, double temperature, Rng& rng) {
  std::vector<std::vector<std::size_t>> members(num_labels);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].output_bin >= num_labels) fail(Errc::bin_out_of_range, "label outside output bins");
    members[pool[i].output_bin].push_back(i);
  }
  std::vector<std::size_t> front(num_labels, 0);  // T = 0 consumes members oldest-first
  std::vector<std::size_t> out;
  double remaining = static_cast<double>(pool.size());
  std::vector<double> logits(num_labels);
  for (std::size_t step = 0; step < count; ++step) {
    std::size_t label = 0;
    auto size_of = [&](std::size_t l) { return static_cast<double>(members[l].size() - front[l]); };
    if (temperature == 0.0) {
      for (std::size_t l = 1; l < num_labels; ++l) {
        if (size_of(l) > size_of(label)) label = l;
      }
    } else {
      // P(label) ∝ n_l * exp((n_l / N) / T)
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < num_labels; ++l) {
        const double n = size_of(l);
        logits[l] = n > 0.0 ? std::log(n) + (std::isinf(temperature) ? 0.0 : (n / remaining) / temperature)
                            : -std::numeric_limits<double>::infinity();
        best = std::max(best, logits[l]);
      }
      for (auto& v : logits) v = std::isinf(v) ? 0.0 : std::exp(v - best);
      label = weighted_choice(logits, rng);
    }
    auto& m = members[label];
    if (temperature == 0.0) {
      out.push_back(m[front[label]++]);
    } else {
      const std::size_t pick = front[label] + uniform_index(rng, m.size() - front[label]);
      out.push_back(m[pick]);
      std::swap(m[pick], m.back());
      m.pop_back();
    }
    remaining -= 1.0;
  }
  return out;
}

}  // namespace detail

/// Per-sample discards drawn from softmax(signed_score / T) until the pool
/// fits. Batch size is irrelevant here since the scores are per sample.
inline SelectionOutcome priority_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                        const Predictor& model, PriorityScore kind, Rng& rng) {
  cfg.validate();
  mem.capacity = cfg.capacity;
  mem.seen += incoming.size();
  incoming = bbdr(std::move(incoming), model);
  auto pool = detail::assemble_pool(mem, std::move(incoming));

  std::vector<char> keep(pool.size(), 1);
  SelectionOutcome out;
  if (pool.size() > cfg.capacity) {
    const std::size_t count = pool.size() - cfg.capacity;
    std::vector<std::size_t> discards;
    if (kind == PriorityScore::label_count) {
      discards = detail::label_count_discards(pool, count, cfg.k_out, cfg.temperature, rng);
    } else {
      std::vector<double> score(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) score[i] = detail::signed_score(pool[i], kind);
      discards = detail::static_discards(score, count, cfg.temperature, rng);
    }
    for (std::size_t d : discards) keep[d] = 0;
  } else if (kind == PriorityScore::loss) {
    for (const auto& s : pool) detail::signed_score(s, kind);  // MissingScores regardless of pool size
  }
  out.kept_sample_ids = detail::commit(mem, pool, keep);
  out.retrain = true;
  out.rci = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// LARS-style reservoir

/// State carried between calls: when the memory first filled.
struct LarsState {
  std::optional<std::uint64_t> filled_at;
  double decay = 0.0;  // per-sample rate; 0 selects ln 2 / C (admission halves every C samples)
};

inline double lars_admission_probability(const LarsState& st, std::uint64_t seen, std::size_t capacity) {
  if (!st.filled_at || seen <= *st.filled_at) return 1.0;
  const double lambda = st.decay > 0.0 ? st.decay : std::numbers::ln2 / static_cast<double>(capacity);
  const double base = std::min(1.0, static_cast<double>(capacity) / static_cast<double>(seen));
  return base * std::exp(-lambda * static_cast<double>(seen - *st.filled_at));
}

/// Two stages: each new sample is admitted with a probability that decays
/// with the number of samples seen; an admitted sample replaces the
/// lowest-loss sample of the most frequent label.
inline SelectionOutcome lars_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                    const Predictor& model, LarsState& state, Rng& rng) {
  cfg.validate();
  if (!cfg.classification) fail(Errc::not_classification, "LARS needs class labels");
  mem.capacity = cfg.capacity;
  incoming = bbdr(std::move(incoming), model);
  std::sort(incoming.begin(), incoming.end(),
            [](const Sample& a, const Sample& b) { return a.arrival_index < b.arrival_index; });
  for (const auto& s : mem.samples) {
    if (!s.loss) fail(Errc::missing_scores, "memory sample without loss");
  }
  for (const auto& s : incoming) {
    if (!s.loss) fail(Errc::missing_scores, "new sample without loss");
    if (s.output_bin >= cfg.k_out) fail(Errc::bin_out_of_range, "label outside output bins");
  }

  std::vector<Sample> slots = std::move(mem.samples);
  using Entry = std::tuple<double, std::uint64_t, std::size_t>;  // loss, arrival, slot
  std::vector<std::set<Entry>> by_label(cfg.k_out);
  for (std::size_t i = 0; i < slots.size(); ++i) by_label[slots[i].output_bin].insert({*slots[i].loss, slots[i].arrival_index, i});
  auto evict_slot = [&]() {
    std::size_t label = 0;
    for (std::size_t l = 1; l < by_label.size(); ++l) {
      if (by_label[l].size() > by_label[label].size()) label = l;
    }
    auto it = by_label[label].begin();
    const std::size_t slot = std::get<2>(*it);
    by_label[label].erase(it);
    return slot;
  };
  while (slots.size() > cfg.capacity) {
    const std::size_t slot = evict_slot();
    if (slot != slots.size() - 1) {
      auto& moved = slots.back();
      by_label[moved.output_bin].erase({*moved.loss, moved.arrival_index, slots.size() - 1});
      by_label[moved.output_bin].insert({*moved.loss, moved.arrival_index, slot});
      slots[slot] = std::move(moved);
    }
    slots.pop_back();
  }

  SelectionOutcome out;
  std::size_t step = 0;
  for (auto& s : incoming) {
    ++mem.seen;
    if (slots.size() < cfg.capacity) {
      by_label[s.output_bin].insert({*s.loss, s.arrival_index, slots.size()});
      slots.push_back(std::move(s));
      if (slots.size() == cfg.capacity && !state.filled_at) state.filled_at = mem.seen;
      continue;
    }
    if (!state.filled_at) state.filled_at = mem.seen - 1;
    const double p = lars_admission_probability(state, mem.seen, cfg.capacity);
    if (uniform01(rng) >= p) continue;
    const std::size_t slot = evict_slot();
    out.trace.push_back({step++, slot, p});
    by_label[s.output_bin].insert({*s.loss, s.arrival_index, slot});
    slots[slot] = std::move(s);
  }
  mem.set_samples(std::move(slots));
  for (const auto& s : mem.samples) out.kept_sample_ids.push_back(s.arrival_index);
  out.retrain = true;
  out.rci = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Query-by-committee

inline double entropy_bits(const CategoricalDistribution& p) {
  double h = 0.0;
  for (double x : p.probs) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

enum class CommitteeDisagreement { mean_entropy, member_entropy };

/// Entropy of the committee's averaged prediction (soft vote), or the mean of
/// the members' own entropies.
inline double committee_entropy(std::span<const PredictorPtr> committee, const Sample& s,
                                CommitteeDisagreement mode = CommitteeDisagreement::mean_entropy) {
  if (committee.empty()) fail(Errc::empty_committee, "committee has no members");
  if (mode == CommitteeDisagreement::member_entropy) {
    double sum = 0.0;
    for (const auto& m : committee) sum += entropy_bits(m->predict_sample(s));
    return sum / static_cast<double>(committee.size());
  }
  std::vector<CategoricalDistribution> preds;
  preds.reserve(committee.size());
  for (const auto& m : committee) preds.push_back(m->predict_sample(s));
  return entropy_bits(mixture(preds));
}

/// Keeps the C samples on which the committee disagrees most; ties keep the
/// more recent sample.
inline SelectionOutcome qbc_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                   std::span<const PredictorPtr> committee,
                                   CommitteeDisagreement mode = CommitteeDisagreement::mean_entropy) {
  cfg.validate();
  if (committee.empty()) fail(Errc::empty_committee, "committee has no members");
  mem.capacity = cfg.capacity;
  mem.seen += incoming.size();
  for (auto& s : incoming) {
    committee.front()->check_dimension(s.features.size());
    s.prediction = committee.front()->predict_sample(s);
  }
  auto pool = detail::assemble_pool(mem, std::move(incoming));
  std::vector<char> keep(pool.size(), 1);
  if (pool.size() > cfg.capacity) {
    std::vector<double> h(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) h[i] = committee_entropy(committee, pool[i], mode);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (h[a] != h[b]) return h[a] > h[b];
      return a > b;  // pool is in arrival order
    });
    for (std::size_t r = cfg.capacity; r < order.size(); ++r) keep[order[r]] = 0;
  }
  SelectionOutcome out;
  out.kept_sample_ids = detail::commit(mem, pool, keep);
  out.retrain = true;
  out.rci = 1.0;
  return out;
}

/// Fits `size` members on bootstrap resamples of the memory.
inline std::vector<PredictorPtr> fit_committee(const Predictor& prototype, std::span<const Sample> memory,
                                               std::size_t size, Rng& rng) {
  if (size == 0) fail(Errc::empty_committee, "committee size must be positive");
  if (memory.empty()) fail(Errc::empty_training_set, "committee needs training samples");
  std::vector<PredictorPtr> out;
  std::vector<Sample> resample(memory.size());
  for (std::size_t m = 0; m < size; ++m) {
    for (auto& s : resample) s = memory[uniform_index(rng, memory.size())];
    out.push_back(prototype.fit(resample));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniform interface

struct StrategyParams {
  double lars_decay = 0.0;
  std::size_t committee_size = 5;
  CommitteeDisagreement committee_mode = CommitteeDisagreement::mean_entropy;
};

class SelectionStrategy {
 public:
  virtual ~SelectionStrategy() = default;
  virtual StrategyKind kind() const = 0;
  /// Whether memory and new samples need a loss pass before select().
  virtual bool needs_losses() const { return false; }
  virtual SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                  const Predictor& model, Rng& rng) = 0;
  /// Called after the model was retrained on the memory.
  virtual void on_retrain(const ReplayMemory&, const Predictor&, Rng&) {}
};

namespace detail {

class MementoStrategy final : public SelectionStrategy {
 public:
  explicit MementoStrategy(DistanceKind d) : distance_(d) {}
  StrategyKind kind() const override {
    return distance_ == DistanceKind::jsd ? StrategyKind::memento : StrategyKind::memento_euclidean;
  }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng& rng) override {
    return memento_select(mem, std::move(incoming), cfg, model, rng, distance_);
  }

 private:
  DistanceKind distance_;
};

class RandomStrategy final : public SelectionStrategy {
 public:
  StrategyKind kind() const override { return StrategyKind::random; }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng& rng) override {
    return random_select(mem, std::move(incoming), cfg, model, rng);
  }
};

class FifoStrategy final : public SelectionStrategy {
 public:
  StrategyKind kind() const override { return StrategyKind::fifo; }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng& rng) override {
    return fifo_select(mem, std::move(incoming), cfg, model, rng);
  }
};

class PriorityStrategy final : public SelectionStrategy {
 public:
  PriorityStrategy(StrategyKind k, PriorityScore s) : kind_(k), score_(s) {}
  StrategyKind kind() const override { return kind_; }
  bool needs_losses() const override { return score_ == PriorityScore::loss; }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng& rng) override {
    return priority_select(mem, std::move(incoming), cfg, model, score_, rng);
  }

 private:
  StrategyKind kind_;
  PriorityScore score_;
};

class LarsStrategy final : public SelectionStrategy {
 public:
  explicit LarsStrategy(double decay) { state_.decay = decay; }
  StrategyKind kind() const override { return StrategyKind::lars; }
  bool needs_losses() const override { return true; }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng& rng) override {
    return lars_select(mem, std::move(incoming), cfg, model, state_, rng);
  }

 private:
  LarsState state_;
};

class QbcStrategy final : public SelectionStrategy {
 public:
  QbcStrategy(std::size_t size, CommitteeDisagreement mode) : size_(size), mode_(mode) {}
  StrategyKind kind() const override { return StrategyKind::qbc; }
  SelectionOutcome select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                          const Predictor& model, Rng&) override {
    if (committee_.empty()) {
      // Nothing trained yet: the deployed model is the whole committee.
      const PredictorPtr only(&model, [](const Predictor*) {});
      return qbc_select(mem, std::move(incoming), cfg, std::span<const PredictorPtr>(&only, 1), mode_);
    }
    return qbc_select(mem, std::move(incoming), cfg, committee_, mode_);
  }
  void on_retrain(const ReplayMemory& mem, const Predictor& trained, Rng& rng) override {
    if (mem.samples.empty()) return;
    committee_ = fit_committee(trained, mem.samples, size_, rng);
  }

 private:
  std::size_t size_;
  CommitteeDisagreement mode_;
  std::vector<PredictorPtr> committee_;
};

}  // namespace detail

inline std::unique_ptr<SelectionStrategy> make_strategy(StrategyKind kind, const StrategyParams& params = {}) {
  switch (kind) {
    case StrategyKind::memento: return std::make_unique<detail::MementoStrategy>(DistanceKind::jsd);
    case StrategyKind::memento_euclidean: return std::make_unique<detail::MementoStrategy>(DistanceKind::euclidean_mean);
    case StrategyKind::random: return std::make_unique<detail::RandomStrategy>();
    case StrategyKind::fifo: return std::make_unique<detail::FifoStrategy>();
    case StrategyKind::priority_loss: return std::make_unique<detail::PriorityStrategy>(kind, PriorityScore::loss);
    case StrategyKind::priority_confidence:
      return std::make_unique<detail::PriorityStrategy>(kind, PriorityScore::confidence);
    case StrategyKind::priority_label_count:
      return std::make_unique<detail::PriorityStrategy>(kind, PriorityScore::label_count);
    case StrategyKind::priority_stalled: return std::make_unique<detail::PriorityStrategy>(kind, PriorityScore::stalled);
    case StrategyKind::lars: return std::make_unique<detail::LarsStrategy>(params.lars_decay);
    case StrategyKind::qbc: return std::make_unique<detail::QbcStrategy>(params.committee_size, params.committee_mode);
  }
  fail(Errc::config_error, "unhandled strategy kind");
}

}  // namespace memento
