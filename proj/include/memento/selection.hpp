#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "memento/batching.hpp"
#include "memento/density.hpp"
#include "memento/distance.hpp"
#include "memento/error.hpp"
#include "memento/predictor.hpp"
#include "memento/rng.hpp"
#include "memento/sample.hpp"

namespace memento {

// Densities closer than this are treated as equal when picking the maximum,
// so that incremental and from-scratch estimates resolve ties identically.
inline constexpr double kDensityTieTolerance = 1e-12;

struct DiscardRecord {
  std::size_t iteration = 0;    // discard step within one select call
  std::size_t batch_index = 0;  // index into the batch list built for this call
  double probability = 0.0;     // probability the drawn batch had at that step

  friend bool operator==(const DiscardRecord&, const DiscardRecord&) = default;
};

struct SelectionOutcome {
  std::vector<std::uint64_t> kept_sample_ids;  // ascending
  std::vector<DiscardRecord> trace;
  bool retrain = false;
  double rci = 0.0;

  friend bool operator==(const SelectionOutcome&, const SelectionOutcome&) = default;
};

/// Index of the largest value; values within kDensityTieTolerance of the
/// maximum tie and the lowest index wins.
inline std::size_t argmax_with_ties(std::span<const double> v) {
  if (v.empty()) fail(Errc::empty_input, "argmax of empty vector");
  const double best = *std::max_element(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= best - kDensityTieTolerance) return i;
  }
  return 0;
}

/// softmax(rho / T) with max subtraction. T = 0 gives a point mass on the
/// densest entry; an infinite T gives the uniform distribution.
inline std::vector<double> discard_probabilities(std::span<const double> rho, double temperature) {
  if (rho.empty()) fail(Errc::empty_input, "no densities");
  if (temperature < 0.0 || std::isnan(temperature)) fail(Errc::negative_temperature, "temperature < 0");
  std::vector<double> p(rho.size(), 0.0);
  if (temperature == 0.0) {
    p[argmax_with_ties(rho)] = 1.0;
    return p;
  }
  if (std::isinf(temperature)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  const double best = *std::max_element(rho.begin(), rho.end());
  double total = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    p[i] = std::exp((rho[i] - best) / temperature);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

/// Inverse-CDF draw from a probability vector.
inline std::size_t weighted_choice(std::span<const double> p, Rng& rng) {
  double total = 0.0;
  for (double x : p) total += x;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

inline double coverage(std::span<const double> rho) {
  double sum = 0.0;
  for (double r : rho) sum += r;
  return sum;
}

/// min-aggregated density of `reference` evaluated at each batch of `at`.
inline std::vector<double> evaluate_density(std::span<const Batch> at, std::span<const Batch> reference, double h,
                                            DistanceKind kind) {
  std::vector<double> out;
  for (Space s : density_spaces(kind)) {
    auto rho = cross_kde(cross_distances(at, reference, s), at.size(), reference.size(), h);
    if (out.empty()) {
      out = std::move(rho);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], rho[i]);
    }
  }
  return out;
}

/// Relative coverage increase of `current` over `reference`: the share of
/// current coverage where the current density exceeds the reference density.
/// An empty reference counts as entirely new coverage.
inline double rci(std::span<const Batch> current, std::span<const Batch> reference, double h,
                  DistanceKind kind = DistanceKind::jsd) {
  if (current.empty()) fail(Errc::empty_current_set, "rci needs a nonempty current batch set");
  check_bandwidth(h);
  if (reference.empty()) return 1.0;
  const auto own = evaluate_density(current, current, h, kind);
  const auto ref = evaluate_density(current, reference, h, kind);
  double increase = 0.0;
  for (std::size_t i = 0; i < own.size(); ++i) increase += std::max(own[i] - ref[i], 0.0);
  const double cov = coverage(own);
  return std::clamp(increase / cov, 0.0, 1.0);
}

struct RetrainDecision {
  bool retrain = false;
  double rci = 0.0;
};

inline RetrainDecision retrain_decision(std::span<const Batch> current, std::span<const Batch> last_train,
                                        double tau, double h, DistanceKind kind = DistanceKind::jsd) {
  const double r = rci(current, last_train, h, kind);
  return {r >= tau, r};
}

namespace detail {

/// mem ∪ new sorted by arrival index; ids must be unique.
inline std::vector<Sample> assemble_pool(const ReplayMemory& mem, std::vector<Sample> incoming) {
  std::vector<Sample> pool;
  pool.reserve(mem.samples.size() + incoming.size());
  pool.insert(pool.end(), mem.samples.begin(), mem.samples.end());
  for (auto& s : incoming) pool.push_back(std::move(s));
  std::sort(pool.begin(), pool.end(),
            [](const Sample& a, const Sample& b) { return a.arrival_index < b.arrival_index; });
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].arrival_index == pool[i - 1].arrival_index) {
      fail(Errc::duplicate_sample_id, "arrival_index " + std::to_string(pool[i].arrival_index));
    }
  }
  return pool;
}

inline std::size_t position_of(std::span<const Sample> sorted_pool, std::uint64_t id) {
  auto it = std::lower_bound(sorted_pool.begin(), sorted_pool.end(), id,
                             [](const Sample& s, std::uint64_t v) { return s.arrival_index < v; });
  return static_cast<std::size_t>(it - sorted_pool.begin());
}

/// Moves the flagged samples into memory and returns their ids.
inline std::vector<std::uint64_t> commit(ReplayMemory& mem, std::vector<Sample>& pool, const std::vector<char>& keep) {
  std::vector<Sample> kept;
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!keep[i]) continue;
    ids.push_back(pool[i].arrival_index);
    kept.push_back(std::move(pool[i]));
  }
  mem.set_samples(std::move(kept));
  return ids;
}

}  // namespace detail

/// Coverage-maximizing selection.
///
/// New samples are relabelled with the model's predictions, the pool
/// mem ∪ new is batched, and whole batches are discarded with probability
/// softmax(density / T) until the pool fits the capacity. Densities are
/// updated incrementally after every discard. Finally the relative coverage
/// increase against the last training set decides whether to retrain.
inline SelectionOutcome memento_select(ReplayMemory& mem, std::vector<Sample> incoming, const StrategyConfig& cfg,
                                       const Predictor& model, Rng& rng,
                                       DistanceKind kind = DistanceKind::jsd) {
  cfg.validate();
  if (model.num_bins() != cfg.k_pred) fail(Errc::length_mismatch, "model bins differ from k_pred");
  mem.capacity = cfg.capacity;
  mem.seen += incoming.size();

  incoming = bbdr(std::move(incoming), model);
  for (const auto& s : incoming) validate_sample(s, cfg.k_pred, cfg.k_out);
  auto pool = detail::assemble_pool(mem, std::move(incoming));

  SelectionOutcome outcome;
  if (pool.empty()) {
    mem.samples.clear();
    mem.batches.clear();
    return outcome;
  }

  std::vector<Batch> batches = batch_samples(pool, cfg.batch_size, cfg.k_out);
  std::vector<DistanceMatrix> spaces;
  for (Space s : density_spaces(kind)) spaces.push_back(distance_matrix(batches, s));
  DensityState state(std::move(spaces), cfg.bandwidth);

  std::size_t total = pool.size();
  std::size_t step = 0;
  while (total > cfg.capacity) {
    if (state.count() == 1) {
      fail(Errc::capacity_too_small_for_one_batch, "a single batch exceeds the capacity");
    }
    const auto p = discard_probabilities(state.rho_min(), cfg.temperature);
    const std::size_t pos = weighted_choice(p, rng);
    const std::size_t index = state.active()[pos];
    outcome.trace.push_back({step++, index, p[pos]});
    total -= batches[index].size();
    state.remove_batch(pos);
  }

  std::vector<Batch> surviving;
  surviving.reserve(state.count());
  const bool two_spaces = state.num_spaces() > 1;
  for (std::size_t pos = 0; pos < state.count(); ++pos) {
    Batch b = std::move(batches[state.active()[pos]]);
    b.density_pred = state.rho(0)[pos];
    b.density_out = two_spaces ? state.rho(1)[pos] : b.density_pred;
    surviving.push_back(std::move(b));
  }

  std::vector<char> keep(pool.size(), 0);
  for (const auto& b : surviving) {
    for (auto id : b.sample_ids) keep[detail::position_of(pool, id)] = 1;
  }
  outcome.kept_sample_ids = detail::commit(mem, pool, keep);

  const auto decision = retrain_decision(surviving, mem.last_train_batches, cfg.threshold, cfg.bandwidth, kind);
  outcome.retrain = decision.retrain;
  outcome.rci = decision.rci;
  mem.batches = std::move(surviving);
  if (outcome.retrain && cfg.remember_on_retrain) mem.last_train_batches = mem.batches;
  return outcome;
}

}  // namespace memento
