#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "memento/distance.hpp"
#include "memento/error.hpp"

namespace memento {

inline constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

inline double gaussian_kernel(double d, double h) { return std::exp(-(d * d) / (2.0 * h * h)); }

inline void check_bandwidth(double h) {
  if (!(h > 0.0)) fail(Errc::non_positive_bandwidth, "bandwidth must be positive");
}

/// Gaussian KDE at every batch location; the sum includes each batch itself.
inline std::vector<double> kde(const DistanceMatrix& d, double h) {
  check_bandwidth(h);
  const std::size_t n = d.dimension();
  std::vector<double> rho(n, 0.0);
  if (n == 0) return rho;
  const double norm = kInvSqrt2Pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += gaussian_kernel(d(i, j), h);
    rho[i] = norm * sum;
  }
  return rho;
}

/// Density of a reference set evaluated at other locations. `cross` is
/// row-major |rows| x |cols| with one row per evaluation point.
inline std::vector<double> cross_kde(std::span<const double> cross, std::size_t rows, std::size_t cols, double h) {
  check_bandwidth(h);
  std::vector<double> rho(rows, 0.0);
  if (cols == 0) return rho;
  if (cross.size() != rows * cols) fail(Errc::length_mismatch, "cross distance shape");
  const double norm = kInvSqrt2Pi / static_cast<double>(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += gaussian_kernel(cross[i * cols + j], h);
    rho[i] = norm * sum;
  }
  return rho;
}

inline std::vector<double> aggregate_min(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::length_mismatch, "density vectors differ in length");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(a[i], b[i]);
  return out;
}

/// Per-space densities over a shrinking batch set.
///
/// Distance matrices are kept at their original size; removed batches are
/// dropped from `active()` and never read again, which keeps each removal
/// linear in the number of surviving batches. `distances()` materializes the
/// reduced matrix when a caller needs it.
class DensityState {
 public:
  DensityState(std::vector<DistanceMatrix> spaces, double h) : distances_(std::move(spaces)), h_(h) {
    check_bandwidth(h);
    if (distances_.empty()) fail(Errc::empty_input, "density state needs at least one space");
    const std::size_t n = distances_.front().dimension();
    for (const auto& d : distances_) {
      if (d.dimension() != n) fail(Errc::length_mismatch, "distance matrices differ in size");
      rho_.push_back(kde(d, h));
    }
    active_.resize(n);
    for (std::size_t i = 0; i < n; ++i) active_[i] = i;
    refresh_min();
  }

  std::size_t count() const noexcept { return active_.size(); }
  std::size_t num_spaces() const noexcept { return rho_.size(); }
  double bandwidth() const noexcept { return h_; }

  const std::vector<double>& rho(std::size_t space) const { return rho_.at(space); }
  const std::vector<double>& rho_min() const noexcept { return rho_min_; }
  /// Original indices of the surviving batches, ascending.
  const std::vector<std::size_t>& active() const noexcept { return active_; }

  DistanceMatrix distances(std::size_t space) const { return distances_.at(space).subset(active_); }

  /// Drops the batch at position `j` of the current set and updates every
  /// surviving density by removing that batch's kernel contribution and
  /// renormalizing from |B| to |B| - 1.
  void remove_batch(std::size_t j) {
    const std::size_t n = count();
    if (j >= n) fail(Errc::index_out_of_range, "batch position " + std::to_string(j));
    if (n < 2) fail(Errc::last_batch, "cannot remove the only batch");
    const double nn = static_cast<double>(n);
    const std::size_t removed = active_[j];
    for (std::size_t s = 0; s < rho_.size(); ++s) {
      auto& rho = rho_[s];
      const auto& d = distances_[s];
      for (std::size_t p = 0; p < n; ++p) {
        if (p == j) continue;
        const double k = gaussian_kernel(d(active_[p], removed), h_);
        rho[p] = (nn * rho[p] - kInvSqrt2Pi * k) / (nn - 1.0);
      }
      rho.erase(rho.begin() + static_cast<std::ptrdiff_t>(j));
    }
    active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(j));
    refresh_min();
  }

 private:
  void refresh_min() {
    rho_min_ = rho_.front();
    for (std::size_t s = 1; s < rho_.size(); ++s) {
      for (std::size_t i = 0; i < rho_min_.size(); ++i) rho_min_[i] = std::min(rho_min_[i], rho_[s][i]);
    }
  }

  std::vector<DistanceMatrix> distances_;
  double h_;
  std::vector<std::vector<double>> rho_;
  std::vector<double> rho_min_;
  std::vector<std::size_t> active_;
};

inline DensityState remove_batch(DensityState state, std::size_t j) {
  state.remove_batch(j);
  return state;
}

}  // namespace memento
