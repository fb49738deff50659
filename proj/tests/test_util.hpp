#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

#include "memento/memento.hpp"

namespace testutil {

#define EXPECT_ERRC(stmt, errc)                                        \
  do {                                                                 \
    try {                                                              \
      stmt;                                                            \
      ADD_FAILURE() << "expected " << memento::to_string(errc);        \
    } catch (const memento::Error& e) {                                \
      EXPECT_EQ(e.code(), errc) << e.what();                           \
    }                                                                  \
  } while (0)

inline memento::CategoricalDistribution dist(std::vector<double> p) {
  return memento::CategoricalDistribution(std::move(p));
}

// Random distribution over k bins. Some draws are sparse so that zero entries
// and near-point masses are exercised too.
inline memento::CategoricalDistribution random_dist(memento::Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  const double style = memento::uniform01(rng);
  double total = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - memento::uniform01(rng));
    if (style < 0.3 && memento::uniform01(rng) < 0.5) x = 0.0;
    if (style > 0.8) x = std::pow(x, 8.0);
    total += x;
  }
  if (total == 0.0) {
    p[memento::uniform_index(rng, k)] = 1.0;
    return memento::CategoricalDistribution(std::move(p));
  }
  for (auto& x : p) x /= total;
  return memento::CategoricalDistribution(std::move(p));
}

inline memento::Sample make_sample(std::uint64_t id, std::size_t bin, memento::CategoricalDistribution pred,
                                   std::vector<double> features = {}) {
  memento::Sample s;
  s.arrival_index = id;
  s.output_bin = bin;
  s.raw_output = static_cast<double>(bin);
  s.prediction = std::move(pred);
  s.features = std::move(features);
  return s;
}

// Batch with the given distributions and member ids; densities left at zero.
inline memento::Batch make_batch(memento::CategoricalDistribution pred, memento::CategoricalDistribution out,
                                 std::vector<std::uint64_t> ids = {0}) {
  memento::Batch b;
  b.sample_ids = std::move(ids);
  b.pred_dist = std::move(pred);
  b.out_dist = std::move(out);
  return b;
}

// Distance matrix from an explicit symmetric table.
inline memento::DistanceMatrix matrix(const std::vector<std::vector<double>>& rows) {
  memento::DistanceMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

}  // namespace testutil
