#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include "memento/error.hpp"
#include "memento/sample.hpp"

namespace memento {

/// KL divergence in bits. Terms with p(x) = 0 contribute nothing.
inline double kl_divergence(const CategoricalDistribution& p, const CategoricalDistribution& m) {
  if (p.size() != m.size()) fail(Errc::length_mismatch, "kl_divergence operands differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (m[i] <= 0.0) fail(Errc::undefined_divergence, "p(x) > 0 where m(x) = 0");
    sum += p[i] * std::log2(p[i] / m[i]);
  }
  return std::max(sum, 0.0);
}

/// Jensen-Shannon distance with base-2 logarithms, so the result lies in [0, 1].
///
/// Both KL terms are accumulated bin by bin in one pass, which makes the
/// result bit-for-bit symmetric in its arguments.
inline double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(Errc::length_mismatch, "jsd operands differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i];
    const double b = q[i];
    const double m = 0.5 * (a + b);
    double term = 0.0;
    if (a > 0.0) term += a * std::log2(a / m);
    if (b > 0.0) term += b * std::log2(b / m);
    sum += term;
  }
  const double js = std::clamp(0.5 * sum, 0.0, 1.0);
  return std::sqrt(js);
}

inline double jsd(const CategoricalDistribution& p, const CategoricalDistribution& q) {
  return jsd(std::span<const double>(p.probs), std::span<const double>(q.probs));
}

inline double euclidean_mean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::length_mismatch, "mean feature vectors differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// Which batch summary a distance is computed on.
enum class Space { pred, out, features };

enum class DistanceKind { jsd, euclidean_mean };

inline std::span<const double> batch_view(const Batch& b, Space s) {
  switch (s) {
    case Space::pred: return b.pred_dist.probs;
    case Space::out: return b.out_dist.probs;
    case Space::features: return b.mean_features;
  }
  return {};
}

inline double batch_distance(const Batch& a, const Batch& b, Space s) {
  if (s == Space::features) return euclidean_mean_distance(a.mean_features, b.mean_features);
  return jsd(batch_view(a, s), batch_view(b, s));
}

/// Symmetric matrix with an implicit zero diagonal, stored as the strict upper
/// triangle.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

  std::size_t dimension() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return values_[offset(i, j)];
  }

  void set(std::size_t i, std::size_t j, double v) {
    if (i == j) return;
    values_[offset(i, j)] = v;
  }

  /// Matrix restricted to `keep` (indices into this matrix, in order).
  DistanceMatrix subset(std::span<const std::size_t> keep) const {
    DistanceMatrix out(keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) {
      for (std::size_t b = a + 1; b < keep.size(); ++b) out.set(a, b, (*this)(keep[a], keep[b]));
    }
    return out;
  }

 private:
  std::size_t offset(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// Pairwise distances between batches in one space. Rows are dealt to
/// threads round-robin; every entry is computed independently, so the result
/// does not depend on the thread count.
inline DistanceMatrix distance_matrix(std::span<const Batch> batches, Space space, unsigned threads = 1) {
  const std::size_t n = batches.size();
  for (const auto& b : batches) {
    if (batch_view(b, space).size() != batch_view(batches.front(), space).size()) {
      fail(Errc::length_mismatch, "batch summaries differ in length");
    }
  }
  DistanceMatrix d(n);
  auto work = [&](unsigned t, unsigned stride) {
    for (std::size_t i = t; i < n; i += stride) {
      for (std::size_t j = i + 1; j < n; ++j) d.set(i, j, batch_distance(batches[i], batches[j], space));
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || n < 64) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return d;
}

/// Row-major |rows| x |cols| distances, used to evaluate one batch set's
/// density at the locations of another.
inline std::vector<double> cross_distances(std::span<const Batch> rows, std::span<const Batch> cols, Space space) {
  std::vector<double> out(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out[i * cols.size() + j] = batch_distance(rows[i], cols[j], space);
    }
  }
  return out;
}

/// Spaces in which densities are estimated for a given distance kind.
inline std::vector<Space> density_spaces(DistanceKind kind) {
  if (kind == DistanceKind::euclidean_mean) return {Space::features};
  return {Space::pred, Space::out};
}

}  // namespace memento
