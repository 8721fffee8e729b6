#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/matrix.hpp"
#include "tsnescope/random.hpp"
#include "tsnescope/stats.hpp"
#include "tsnescope/tsne.hpp"

namespace tsnescope {

enum class Metric { nh, t, c, s, sdc, qma };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::nh: return "NH";
    case Metric::t: return "T";
    case Metric::c: return "C";
    case Metric::s: return "S";
    case Metric::sdc: return "SDC";
    case Metric::qma: return "QMA";
  }
  return "?";
}

inline Metric parse_metric(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  for (Metric m : {Metric::nh, Metric::t, Metric::c, Metric::s, Metric::sdc, Metric::qma})
    if (upper == to_string(m)) return m;
  fail(ErrorKind::validation, "unknown metric '" + std::string(text) + "' (expected NH, T, C, S, SDC or QMA)");
}

// Scores in [0, 1]. NH is absent for unlabeled data and QMA then averages
// the remaining four.
struct QualityScores {
  std::optional<double> nh;
  double t = 0.0;
  double c = 0.0;
  double s = 0.0;
  double sdc = 0.0;
  double qma = 0.0;

  double get(Metric m) const {
    switch (m) {
      case Metric::nh:
        if (!nh) fail(ErrorKind::validation, "NH requires labels");
        return *nh;
      case Metric::t: return t;
      case Metric::c: return c;
      case Metric::s: return s;
      case Metric::sdc: return sdc;
      case Metric::qma: return qma;
    }
    return 0.0;
  }

  friend bool operator==(const QualityScores&, const QualityScores&) = default;
};

// Non-empty, duplicate-free point indices, stored ascending.
class Selection {
 public:
  static Selection create(std::vector<std::size_t> indices, std::size_t n) {
    require(!indices.empty(), "selection is empty");
    std::sort(indices.begin(), indices.end());
    require(std::adjacent_find(indices.begin(), indices.end()) == indices.end(), "selection contains duplicates");
    require(indices.back() < n, "selection index " + std::to_string(indices.back()) + " out of range");
    Selection sel;
    sel.indices_ = std::move(indices);
    return sel;
  }

  static Selection all(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return create(std::move(idx), n);
  }

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }

  friend bool operator==(const Selection&, const Selection&) = default;

 private:
  Selection() = default;
  std::vector<std::size_t> indices_;
};

// ---------------------------------------------------------------------------
// Shepard views

struct ShepardHeatmap {
  std::size_t bins = 10;
  // counts[y * bins + x]; x bins the normalized 2-D distance, y the
  // normalized N-D distance, both starting at the top-left origin.
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t y, std::size_t x) const { return counts[y * bins + x]; }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

namespace detail {

inline double max_offdiag(const Matrix& d) {
  double m = 0.0;
  for (double v : d.data()) m = std::max(m, v);
  return m;
}

inline std::pair<double, double> shepard_scales(const Matrix& hd, const Matrix& ld) {
  require(hd.rows() == hd.cols() && ld.rows() == ld.cols() && hd.rows() == ld.rows(),
          "distance matrices must be square and of equal size");
  require(hd.rows() >= 2, "dataset too small");
  const double hd_max = max_offdiag(hd), ld_max = max_offdiag(ld);
  if (hd_max <= 0.0 || ld_max <= 0.0) fail(ErrorKind::computation, "degenerate distances");
  return {hd_max, ld_max};
}

inline std::size_t bin_of(double v, std::size_t bins) {
  return std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
}

}  // namespace detail

inline ShepardHeatmap shepard_heatmap(const Matrix& hd_dists, const Matrix& ld_dists, std::size_t bins = 10) {
  require(bins >= 2, "bins must be >= 2");
  const auto [hd_max, ld_max] = detail::shepard_scales(hd_dists, ld_dists);
  ShepardHeatmap map;
  map.bins = bins;
  map.counts.assign(bins * bins, 0);
  const std::size_t n = hd_dists.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t x = detail::bin_of(ld_dists(i, j) / ld_max, bins);
      const std::size_t y = detail::bin_of(hd_dists(i, j) / hd_max, bins);
      ++map.counts[y * bins + x];
    }
  return map;
}

struct ShepardPair {
  std::size_t i, j;
  double x;  // normalized 2-D distance
  double y;  // normalized N-D distance
};

// Every pair when n(n-1)/2 <= cap, otherwise a seeded uniform sample of
// `cap` pairs without replacement. Output is in pair-enumeration order.
inline std::vector<ShepardPair> shepard_pairs(const Matrix& hd_dists, const Matrix& ld_dists, std::size_t cap,
                                              std::uint64_t seed = 0) {
  require(cap >= 1, "cap must be >= 1");
  const auto [hd_max, ld_max] = detail::shepard_scales(hd_dists, ld_dists);
  const std::size_t n = hd_dists.rows();
  const std::size_t total = n * (n - 1) / 2;

  std::vector<std::size_t> chosen;
  if (total <= cap) {
    chosen.resize(total);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> pool(total);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t k = 0; k < cap; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(total - k));
      std::swap(pool[k], pool[pick]);
    }
    chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cap));
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<ShepardPair> out;
  out.reserve(chosen.size());
  std::size_t next = 0, linear = 0;
  for (std::size_t i = 0; i < n && next < chosen.size(); ++i)
    for (std::size_t j = i + 1; j < n && next < chosen.size(); ++j, ++linear)
      if (chosen[next] == linear) {
        out.push_back({i, j, ld_dists(i, j) / ld_max, hd_dists(i, j) / hd_max});
        ++next;
      }
  return out;
}

// ---------------------------------------------------------------------------
// Neighbourhoods

// Other points ordered by distance from i, ties by ascending index.
inline std::vector<std::size_t> neighbor_order(const Matrix& dists, std::size_t i) {
  std::vector<std::size_t> order;
  order.reserve(dists.rows() - 1);
  for (std::size_t j = 0; j < dists.rows(); ++j)
    if (j != i) order.push_back(j);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = dists(i, a), db = dists(i, b);
    return da < db || (da == db && a < b);
  });
  return order;
}

struct NPCurve {
  std::vector<std::size_t> k_values;
  std::vector<double> global;
  std::optional<std::vector<double>> selection;
};

inline std::size_t default_np_k_max(std::size_t n) { return std::min<std::size_t>(50, n - 1); }

// NP_k: mean over points of the Jaccard index between the k-nearest-neighbour
// sets in N-D and 2-D, for k = 1..k_max.
inline NPCurve neighborhood_preservation(const Matrix& hd_dists, const Matrix& ld_dists,
                                         const std::optional<Selection>& selection, std::size_t k_max) {
  const std::size_t n = hd_dists.rows();
  require(n >= 2 && hd_dists.cols() == n && ld_dists.rows() == n && ld_dists.cols() == n,
          "distance matrices must be square and of equal size");
  require(k_max >= 1 && k_max <= n - 1, "k_max must lie in [1, n-1]");

  // jaccard[i * k_max + (k-1)]
  std::vector<double> jaccard(n * k_max);
  std::vector<char> in_hd(n), in_ld(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hd_order = neighbor_order(hd_dists, i);
    const auto ld_order = neighbor_order(ld_dists, i);
    std::fill(in_hd.begin(), in_hd.end(), 0);
    std::fill(in_ld.begin(), in_ld.end(), 0);
    std::size_t shared = 0;
    for (std::size_t k = 1; k <= k_max; ++k) {
      const std::size_t a = hd_order[k - 1], b = ld_order[k - 1];
      in_hd[a] = 1;
      in_ld[b] = 1;
      if (a == b) {
        ++shared;
      } else {
        if (in_ld[a]) ++shared;
        if (in_hd[b]) ++shared;
      }
      jaccard[i * k_max + (k - 1)] = static_cast<double>(shared) / static_cast<double>(2 * k - shared);
    }
  }

  auto reduce = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> curve(k_max, 0.0);
    for (std::size_t k = 0; k < k_max; ++k) {
      double sum = 0.0;
      for (std::size_t i : rows) sum += jaccard[i * k_max + k];
      curve[k] = sum / static_cast<double>(rows.size());
    }
    return curve;
  };

  NPCurve out;
  out.k_values.resize(k_max);
  std::iota(out.k_values.begin(), out.k_values.end(), std::size_t{1});
  out.global = reduce(Selection::all(n).indices());
  if (selection && selection->size() > 0) {
    require(selection->indices().back() < n, "selection index out of range");
    out.selection = reduce(selection->indices());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar metrics

// Largest usable k <= requested for n points (trustworthiness needs 2n-3k-1 > 0).
inline std::size_t effective_k(std::size_t n, std::size_t k) {
  require(k >= 1, "k must be >= 1");
  require(n >= 3, "quality metrics need at least 3 points");
  k = std::min(k, n - 2);
  while (k > 1 && 2 * n <= 3 * k + 1) --k;
  return k;
}

constexpr std::size_t default_quality_k = 7;

// Per-point ingredients shared by global and selection-scoped metrics.
struct QualityTerms {
  std::size_t n = 0;
  std::size_t k = 0;
  std::optional<std::vector<double>> nh;  // fraction of 2-D neighbours sharing the label
  std::vector<double> t_penalty;
  std::vector<double> c_penalty;
  std::vector<double> stress_num;  // sum_j (D_ij - alpha d_ij)^2
  std::vector<double> stress_den;  // sum_j D_ij^2
  std::vector<double> pair_hd;     // i < j enumeration
  std::vector<double> pair_ld;
};

inline QualityTerms quality_terms(const Dataset& dataset, const Embedding& embedding, const Matrix& hd,
                                  const Matrix& ld, std::size_t k_requested) {
  const std::size_t n = dataset.n();
  require(embedding.size() == n, "embedding size does not match dataset");
  QualityTerms terms;
  terms.n = n;
  terms.k = effective_k(n, k_requested);
  const std::size_t k = terms.k;

  terms.t_penalty.assign(n, 0.0);
  terms.c_penalty.assign(n, 0.0);
  if (dataset.has_labels()) terms.nh.emplace(n, 0.0);
  std::vector<std::size_t> hd_rank(n), ld_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hd_order = neighbor_order(hd, i);
    const auto ld_order = neighbor_order(ld, i);
    for (std::size_t r = 0; r < n - 1; ++r) {
      hd_rank[hd_order[r]] = r + 1;
      ld_rank[ld_order[r]] = r + 1;
    }
    double t_pen = 0.0, c_pen = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t from_ld = ld_order[r];
      if (hd_rank[from_ld] > k) t_pen += static_cast<double>(hd_rank[from_ld] - k);
      const std::size_t from_hd = hd_order[r];
      if (ld_rank[from_hd] > k) c_pen += static_cast<double>(ld_rank[from_hd] - k);
    }
    terms.t_penalty[i] = t_pen;
    terms.c_penalty[i] = c_pen;
    if (terms.nh) {
      const auto& labels = *dataset.labels();
      std::size_t same = 0;
      for (std::size_t r = 0; r < k; ++r) same += labels[ld_order[r]] == labels[i] ? 1 : 0;
      (*terms.nh)[i] = static_cast<double>(same) / static_cast<double>(k);
    }
  }

  double cross = 0.0, ld_sq = 0.0;
  const std::size_t pairs = n * (n - 1) / 2;
  terms.pair_hd.reserve(pairs);
  terms.pair_ld.reserve(pairs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      cross += hd(i, j) * ld(i, j);
      ld_sq += ld(i, j) * ld(i, j);
      terms.pair_hd.push_back(hd(i, j));
      terms.pair_ld.push_back(ld(i, j));
    }
  if (ld_sq <= 0.0) fail(ErrorKind::computation, "degenerate embedding: all points coincide");
  const double alpha = cross / ld_sq;
  terms.stress_num.assign(n, 0.0);
  terms.stress_den.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double diff = hd(i, j) - alpha * ld(i, j);
      terms.stress_num[i] += diff * diff;
      terms.stress_den[i] += hd(i, j) * hd(i, j);
    }
  return terms;
}

inline QualityTerms quality_terms(const Dataset& dataset, const Embedding& embedding,
                                  std::size_t k = default_quality_k) {
  return quality_terms(dataset, embedding, pairwise_distances(dataset), pairwise_distances(embedding.coords), k);
}

// Reduces the per-point terms over `rows` (ascending). The full index set
// yields the global metric.
inline double reduce_metric(const QualityTerms& terms, Metric metric, const std::vector<std::size_t>& rows) {
  const double count = static_cast<double>(rows.size());
  const double n = static_cast<double>(terms.n), k = static_cast<double>(terms.k);
  auto mean_of = [&](const std::vector<double>& v) {
    double sum = 0.0;
    for (std::size_t i : rows) sum += v[i];
    return sum / count;
  };
  switch (metric) {
    case Metric::nh:
      if (!terms.nh) fail(ErrorKind::validation, "NH requires labels");
      return mean_of(*terms.nh);
    case Metric::t:
      return std::clamp(1.0 - 2.0 / (k * (2.0 * n - 3.0 * k - 1.0)) * mean_of(terms.t_penalty), 0.0, 1.0);
    case Metric::c:
      return std::clamp(1.0 - 2.0 / (k * (2.0 * n - 3.0 * k - 1.0)) * mean_of(terms.c_penalty), 0.0, 1.0);
    case Metric::s: {
      double num = 0.0, den = 0.0;
      for (std::size_t i : rows) {
        num += terms.stress_num[i];
        den += terms.stress_den[i];
      }
      if (den <= 0.0) fail(ErrorKind::computation, "degenerate distances: zero N-D spread in selection");
      return std::clamp(1.0 - num / den, 0.0, 1.0);
    }
    case Metric::sdc: {
      std::vector<char> member(terms.n, 0);
      for (std::size_t i : rows) member[i] = 1;
      std::vector<double> hd, ld;
      std::size_t p = 0;
      for (std::size_t i = 0; i < terms.n; ++i)
        for (std::size_t j = i + 1; j < terms.n; ++j, ++p)
          if (member[i] || member[j]) {
            hd.push_back(terms.pair_hd[p]);
            ld.push_back(terms.pair_ld[p]);
          }
      return std::max(spearman(hd, ld), 0.0);
    }
    case Metric::qma: {
      double sum = 0.0, parts = 0.0;
      if (terms.nh) {
        sum += reduce_metric(terms, Metric::nh, rows);
        parts += 1.0;
      }
      for (Metric m : {Metric::t, Metric::c, Metric::s, Metric::sdc}) {
        sum += reduce_metric(terms, m, rows);
        parts += 1.0;
      }
      return sum / parts;
    }
  }
  return 0.0;
}

inline QualityScores scores_over(const QualityTerms& terms, const std::vector<std::size_t>& rows) {
  QualityScores q;
  if (terms.nh) q.nh = reduce_metric(terms, Metric::nh, rows);
  q.t = reduce_metric(terms, Metric::t, rows);
  q.c = reduce_metric(terms, Metric::c, rows);
  q.s = reduce_metric(terms, Metric::s, rows);
  q.sdc = reduce_metric(terms, Metric::sdc, rows);
  q.qma = reduce_metric(terms, Metric::qma, rows);
  return q;
}

inline QualityScores compute_quality_scores(const Dataset& dataset, const Embedding& embedding,
                                            std::size_t k = default_quality_k) {
  const auto terms = quality_terms(dataset, embedding, k);
  return scores_over(terms, Selection::all(dataset.n()).indices());
}

inline double selection_quality(const Dataset& dataset, const Embedding& embedding, const Selection& selection,
                                Metric metric, std::size_t k = default_quality_k) {
  if (metric == Metric::nh && !dataset.has_labels()) fail(ErrorKind::validation, "NH requires labels");
  require(selection.indices().back() < dataset.n(), "selection index out of range");
  const auto terms = quality_terms(dataset, embedding, k);
  return reduce_metric(terms, metric, selection.indices());
}

// ---------------------------------------------------------------------------
// Instrumentation histograms

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::uint64_t> counts;
};

inline Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  require(bins >= 1, "bins must be >= 1");
  require(!values.empty(), "histogram of an empty vector");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    h.edges[b] = b == bins ? hi : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  const double width = hi - lo;
  for (double v : values) {
    const std::size_t b = width > 0.0 ? detail::bin_of((v - lo) / width, bins) : 0;
    ++h.counts[b];
  }
  return h;
}

struct DensityCostHistograms {
  Histogram density;
  Histogram cost;
};

inline DensityCostHistograms density_cost_histograms(const Instrumentation& inst, std::size_t bins) {
  return {histogram(inst.density, bins), histogram(inst.point_cost, bins)};
}

}  // namespace tsnescope
