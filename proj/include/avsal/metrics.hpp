#ifndef AVSAL_METRICS_HPP
#define AVSAL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "avsal/common.hpp"
#include "avsal/rng.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

using FixPoints = std::vector<std::pair<int, int>>;

struct MetricValue {
  double value = 0.0;
  bool degenerate = false;  // zero-variance input; value forced to 0
};

struct MetricReport {
  double cc = 0.0, nss = 0.0, auc_j = 0.0, sauc = 0.0, sim = 0.0;
};

namespace detail {

inline void check_same_2d(const Tensor<double>& a, const Tensor<double>& b, const char* what) {
  if (a.shape().size() != 2 || !a.same_shape(b))
    throw ShapeError(cat(what, ": want matching 2-D maps, got ", shape_str(a.shape()), " vs ",
                         shape_str(b.shape())));
}

inline double value_at(const Tensor<double>& p, const std::pair<int, int>& pt, const char* what) {
  const int h = p.shape()[0], w = p.shape()[1];
  if (pt.first < 0 || pt.first >= h || pt.second < 0 || pt.second >= w)
    throw ArgumentError(cat(what, ": point (", pt.first, ",", pt.second, ") outside ", h, "x", w));
  return p[static_cast<std::int64_t>(pt.first) * w + pt.second];
}

// Mann-Whitney area: fraction of (positive, negative) pairs the positive wins,
// ties worth half. Computed through average ranks so large sets stay cheap.
inline double rank_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) return 0.5;
  struct Item {
    double v;
    bool is_pos;
  };
  std::vector<Item> all;
  all.reserve(pos.size() + neg.size());
  for (double v : pos) all.push_back({v, true});
  for (double v : neg) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (all[k].is_pos) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

}  // namespace detail

// Pearson correlation over pixels. Constant maps have no correlation; the
// result is flagged and forced to zero so averages stay finite.
inline MetricValue metric_cc(const Tensor<double>& p, const Tensor<double>& g) {
  detail::check_same_2d(p, g, "metric_cc");
  const std::int64_t n = p.numel();
  double mp = 0.0, mg = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    mp += p[i];
    mg += g[i];
  }
  mp /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double cov = 0.0, vp = 0.0, vg = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double dp = p[i] - mp, dg = g[i] - mg;
    cov += dp * dg;
    vp += dp * dp;
    vg += dg * dg;
  }
  if (vp <= 1e-30 || vg <= 1e-30) return {0.0, true};
  return {cov / std::sqrt(vp * vg), false};
}

// Mean standardized saliency at the fixated pixels (population std).
inline MetricValue metric_nss(const Tensor<double>& p, const FixPoints& fix) {
  if (p.shape().size() != 2) throw ShapeError(cat("metric_nss: want a 2-D map, got ", shape_str(p.shape())));
  if (fix.empty()) throw ArgumentError("metric_nss: no fixation points");
  std::vector<double> at;
  at.reserve(fix.size());
  for (const auto& pt : fix) at.push_back(detail::value_at(p, pt, "metric_nss"));
  const std::int64_t n = p.numel();
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += p[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::int64_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
  var /= static_cast<double>(n);
  if (var <= 1e-30) return {0.0, true};
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (double v : at) acc += (v - mean) / sd;
  return {acc / static_cast<double>(fix.size()), false};
}

// ROC area with fixated pixels as positives and every other pixel as a
// negative; ties count half.
inline double metric_auc_judd(const Tensor<double>& p, const FixPoints& fix) {
  if (p.shape().size() != 2) throw ShapeError(cat("metric_auc_judd: want a 2-D map, got ", shape_str(p.shape())));
  if (fix.empty()) throw ArgumentError("metric_auc_judd: no fixation points");
  const int w = p.shape()[1];
  std::vector<char> fixated(static_cast<std::size_t>(p.numel()), 0);
  std::vector<double> pos;
  pos.reserve(fix.size());
  for (const auto& pt : fix) {
    pos.push_back(detail::value_at(p, pt, "metric_auc_judd"));
    fixated[static_cast<std::size_t>(pt.first) * static_cast<std::size_t>(w) + static_cast<std::size_t>(pt.second)] = 1;
  }
  std::vector<double> neg;
  neg.reserve(static_cast<std::size_t>(p.numel()));
  for (std::int64_t i = 0; i < p.numel(); ++i)
    if (!fixated[static_cast<std::size_t>(i)]) neg.push_back(p[i]);
  return detail::rank_auc(pos, neg);
}

// Shuffled variant: negatives are saliency values at fixation points taken
// from other clips, subsampled to ten negatives per positive under the seed.
inline double metric_sauc(const Tensor<double>& p, const FixPoints& fix, const FixPoints& other,
                          std::uint64_t seed) {
  if (p.shape().size() != 2) throw ShapeError(cat("metric_sauc: want a 2-D map, got ", shape_str(p.shape())));
  if (fix.empty()) throw ArgumentError("metric_sauc: no fixation points");
  if (other.empty()) throw ArgumentError("metric_sauc: no shuffled fixation points");
  std::vector<double> pos;
  pos.reserve(fix.size());
  for (const auto& pt : fix) pos.push_back(detail::value_at(p, pt, "metric_sauc"));

  FixPoints chosen = other;
  const std::size_t want = 10 * fix.size();
  if (chosen.size() > want) {
    Rng rng(seed);
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(chosen.size() - 1 - i)));
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(want);
  }
  std::vector<double> neg;
  neg.reserve(chosen.size());
  for (const auto& pt : chosen) neg.push_back(detail::value_at(p, pt, "metric_sauc"));
  return detail::rank_auc(pos, neg);
}

// Histogram intersection of two normalized maps.
inline double metric_sim(const Tensor<double>& p, const Tensor<double>& g) {
  detail::check_same_2d(p, g, "metric_sim");
  double acc = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) acc += std::min(p[i], g[i]);
  return acc;
}

}  // namespace avsal

#endif  // AVSAL_METRICS_HPP
