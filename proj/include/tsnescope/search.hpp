#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/tsne.hpp"

namespace tsnescope {

struct GridSpec {
  std::vector<double> perplexities;
  std::vector<double> learning_rates;
  std::vector<int> iteration_counts;
  std::uint64_t seed_base = 0;
  double theta = 0.5;
  std::size_t quality_k = default_quality_k;

  std::size_t size() const { return perplexities.size() * learning_rates.size() * iteration_counts.size(); }

  // Configuration index order: perplexity major, then learning rate, then iterations.
  TsneParams params_at(std::size_t index) const {
    const std::size_t n_it = iteration_counts.size(), n_lr = learning_rates.size();
    TsneParams p;
    p.max_iterations = iteration_counts[index % n_it];
    p.learning_rate = learning_rates[(index / n_it) % n_lr];
    p.perplexity = perplexities[index / (n_it * n_lr)];
    p.theta = theta;
    p.seed = seed_base + index;
    return p;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate(const GridSpec& grid) {
  require(!grid.perplexities.empty() && !grid.learning_rates.empty() && !grid.iteration_counts.empty(),
          "grid has an empty parameter list");
  for (std::size_t i = 0; i < grid.size(); ++i) validate(grid.params_at(i));
  require(grid.quality_k >= 1, "quality_k must be >= 1");
}

// 10 perplexities x 10 learning rates x 5 iteration counts. Perplexities
// are clipped to (n-1)/3; clipping can collapse duplicates for small n.
inline GridSpec default_grid(std::size_t n, std::uint64_t seed_base = 0) {
  if (n < 8) fail(ErrorKind::validation, "insufficient data for grid search");
  GridSpec grid;
  const double cap = max_perplexity(n);
  for (double p : {2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 70.0, 100.0}) {
    const double v = std::min(p, cap);
    if (std::find(grid.perplexities.begin(), grid.perplexities.end(), v) == grid.perplexities.end())
      grid.perplexities.push_back(v);
  }
  grid.learning_rates = {10, 20, 50, 100, 150, 200, 300, 400, 500, 1000};
  grid.iteration_counts = {250, 500, 750, 1000, 2000};
  grid.seed_base = seed_base;
  return grid;
}

struct ProjectionRecord {
  std::string id;
  TsneParams params;
  Embedding embedding;
  Instrumentation instrumentation;
  QualityScores scores;
  bool failed = false;
  std::string error;

  friend bool operator==(const ProjectionRecord&, const ProjectionRecord&) = default;
};

// One t-SNE run plus scoring.
inline ProjectionRecord make_projection(const Dataset& dataset, const TsneParams& params, std::string id,
                                        std::size_t quality_k = default_quality_k) {
  ProjectionRecord rec;
  rec.id = std::move(id);
  auto run = run_tsne(dataset, params);
  rec.params = run.params;
  rec.embedding = std::move(run.embedding);
  rec.instrumentation = std::move(run.instrumentation);
  rec.scores = compute_quality_scores(dataset, rec.embedding, quality_k);
  return rec;
}

namespace detail {

// Runs body(i) for i in [0, count) on up to `workers` threads.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = count;
          }
        }
      });
  }
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string record_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "cfg-" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

}  // namespace detail

using ProgressFn = std::function<void(std::size_t completed, std::size_t total)>;

// One record per configuration, in configuration order. Record i uses seed
// seed_base + i, so the pool does not depend on `parallelism`.
inline std::vector<ProjectionRecord> run_grid_search(const Dataset& dataset, const GridSpec& grid,
                                                     std::size_t parallelism = 1, const ProgressFn& progress = {}) {
  validate(grid);
  const std::size_t total = grid.size();
  std::vector<ProjectionRecord> pool(total);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  detail::parallel_for(total, parallelism, [&](std::size_t i) {
    const TsneParams params = grid.params_at(i);
    try {
      pool[i] = make_projection(dataset, params, detail::record_id(i), grid.quality_k);
    } catch (const std::exception& e) {
      pool[i].id = detail::record_id(i);
      pool[i].params = params;
      pool[i].failed = true;
      pool[i].error = e.what();
    }
    const std::size_t completed = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(completed, total);
    }
  });
  const auto failures = static_cast<std::size_t>(
      std::count_if(pool.begin(), pool.end(), [](const ProjectionRecord& r) { return r.failed; }));
  if (failures * 10 > total) {
    std::string first;
    for (const auto& r : pool)
      if (r.failed) {
        first = r.error;
        break;
      }
    fail(ErrorKind::computation, "grid search failed: " + std::to_string(failures) + " of " +
                                     std::to_string(total) + " runs failed (first: " + first + ")");
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Procrustes

// Residual after centering both configurations, scaling them to unit
// Frobenius norm and applying the best orthogonal map (reflections allowed)
// and scale to B: 1 - (sum of singular values of A^T B)^2.
inline double procrustes_distance(const Embedding& a, const Embedding& b) {
  const std::size_t n = a.size();
  require(n == b.size(), "procrustes: configurations differ in point count");
  require(n >= 2, "procrustes: need at least two points");
  auto standardize = [n](const Matrix& m) {
    Eigen::MatrixX2d x(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i), 0) = m(i, 0);
      x(static_cast<Eigen::Index>(i), 1) = m(i, 1);
    }
    x.rowwise() -= x.colwise().mean();
    const double norm = x.norm();
    if (!(norm > 0.0)) fail(ErrorKind::computation, "procrustes: degenerate configuration (all points coincide)");
    return Eigen::MatrixX2d(x / norm);
  };
  const Eigen::MatrixX2d sa = standardize(a.coords), sb = standardize(b.coords);
  const Eigen::Matrix2d cross = sa.transpose() * sb;
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross);
  const double trace = svd.singularValues().sum();
  return std::max(0.0, 1.0 - trace * trace);
}

inline Matrix procrustes_matrix(const std::vector<const Embedding*>& items, std::size_t parallelism = 1) {
  const std::size_t m = items.size();
  Matrix dist(m, m);
  detail::parallel_for(m, parallelism, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < m; ++j) dist(i, j) = procrustes_distance(*items[i], *items[j]);
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) dist(j, i) = dist(i, j);
  return dist;
}

// ---------------------------------------------------------------------------
// K-Medoids (PAM)

struct KMedoidsResult {
  std::vector<std::size_t> medoids;     // item indices
  std::vector<std::size_t> assignment;  // item -> position in `medoids`
  double cost = 0.0;
  std::vector<double> cost_history;     // after BUILD, then after every accepted swap
};

namespace detail {

inline double assign_nearest(const Matrix& dist, const std::vector<std::size_t>& medoids,
                             std::vector<std::size_t>& nearest, std::vector<double>& d_nearest,
                             std::vector<double>& d_second) {
  const std::size_t n = dist.rows();
  double cost = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    std::size_t best_pos = 0;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const double d = dist(j, medoids[m]);
      if (d < best) {
        second = best;
        best = d;
        best_pos = m;
      } else if (d < second) {
        second = d;
      }
    }
    nearest[j] = best_pos;
    d_nearest[j] = best;
    d_second[j] = second;
    cost += best;
  }
  return cost;
}

}  // namespace detail

// Partitioning Around Medoids: greedy BUILD followed by best-improvement
// SWAP until no swap lowers the total distance. Ties go to lower indices.
inline KMedoidsResult kmedoids(const Matrix& dist, std::size_t k) {
  const std::size_t n = dist.rows();
  require(dist.cols() == n, "distance matrix must be square");
  require(k > 0, "k must be positive");
  require(k <= n, "k exceeds the number of items");

  KMedoidsResult out;
  std::vector<char> is_medoid(n, 0);
  std::vector<double> d_near(n, std::numeric_limits<double>::infinity());

  // BUILD
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = n;
    double best_gain = -1.0, best_total = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      if (step == 0) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += dist(j, c);
        if (total < best_total) {
          best_total = total;
          best = c;
        }
      } else {
        double gain = 0.0;
        for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, d_near[j] - dist(j, c));
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
    }
    is_medoid[best] = 1;
    out.medoids.push_back(best);
    for (std::size_t j = 0; j < n; ++j) d_near[j] = std::min(d_near[j], dist(j, best));
  }

  std::vector<std::size_t> nearest(n);
  std::vector<double> d_second(n);
  double cost = detail::assign_nearest(dist, out.medoids, nearest, d_near, d_second);
  out.cost_history.push_back(cost);

  // SWAP
  for (;;) {
    double best_delta = 0.0;
    std::size_t best_pos = 0, best_h = n;
    for (std::size_t pos = 0; pos < k; ++pos)
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = dist(j, h);
          const double replaced = nearest[j] == pos ? std::min(dh, d_second[j]) : std::min(dh, d_near[j]);
          delta += replaced - d_near[j];
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_pos = pos;
          best_h = h;
        }
      }
    if (best_h == n || best_delta > -1e-12 * (1.0 + cost)) break;
    is_medoid[out.medoids[best_pos]] = 0;
    is_medoid[best_h] = 1;
    out.medoids[best_pos] = best_h;
    const double next = detail::assign_nearest(dist, out.medoids, nearest, d_near, d_second);
    if (next >= cost) break;  // rounding guard; keeps the objective strictly decreasing
    cost = next;
    out.cost_history.push_back(cost);
  }
  out.assignment = nearest;
  out.cost = cost;
  return out;
}

// ---------------------------------------------------------------------------
// Representatives

struct RepresentativeSet {
  std::vector<std::string> medoid_ids;  // sorted by QMA descending, ties by id
  // pool index -> position in medoid_ids; empty for failed runs
  std::vector<std::optional<std::size_t>> cluster_assignment;
  double cost = 0.0;

  friend bool operator==(const RepresentativeSet&, const RepresentativeSet&) = default;
};

constexpr std::size_t default_representatives = 25;

inline RepresentativeSet select_representatives(const std::vector<ProjectionRecord>& pool,
                                                std::size_t k = default_representatives,
                                                std::size_t parallelism = 1) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!pool[i].failed) usable.push_back(i);
  require(!usable.empty(), "projection pool is empty");
  require(k > 0, "k must be positive");

  std::vector<const Embedding*> items;
  for (std::size_t i : usable) items.push_back(&pool[i].embedding);
  const Matrix dist = procrustes_matrix(items, parallelism);
  const auto clusters = kmedoids(dist, std::min(k, usable.size()));

  std::vector<std::size_t> order(clusters.medoids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rec = [&](std::size_t pos) -> const ProjectionRecord& { return pool[usable[clusters.medoids[pos]]]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double qa = rec(a).scores.qma, qb = rec(b).scores.qma;
    return qa > qb || (qa == qb && rec(a).id < rec(b).id);
  });
  std::vector<std::size_t> rank_of(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r;

  RepresentativeSet reps;
  reps.cost = clusters.cost;
  for (std::size_t pos : order) reps.medoid_ids.push_back(rec(pos).id);
  reps.cluster_assignment.assign(pool.size(), std::nullopt);
  for (std::size_t u = 0; u < usable.size(); ++u) reps.cluster_assignment[usable[u]] = rank_of[clusters.assignment[u]];
  return reps;
}

constexpr std::size_t default_top = 6;

// Orders records by a metric, descending, ties by id. With a selection each
// score is recomputed over the selected points only.
inline std::vector<std::string> rank_representatives(const Dataset& dataset,
                                                     const std::vector<ProjectionRecord>& reps, Metric metric,
                                                     const std::optional<Selection>& selection,
                                                     std::size_t top = default_top,
                                                     std::size_t quality_k = default_quality_k) {
  if (metric == Metric::nh && !dataset.has_labels()) fail(ErrorKind::validation, "NH requires labels");
  std::vector<std::pair<double, const ProjectionRecord*>> scored;
  for (const auto& r : reps) {
    if (r.failed) continue;
    const double v = selection ? selection_quality(dataset, r.embedding, *selection, metric, quality_k)
                               : r.scores.get(metric);
    scored.emplace_back(v, &r);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second->id < b.second->id);
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < scored.size() && i < top; ++i) ids.push_back(scored[i].second->id);
  return ids;
}

// Stride-decimated coordinates for thumbnails.
inline Embedding thumbnail(const Embedding& e, std::size_t max_points = 1000) {
  const std::size_t n = e.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / max_points);
  std::vector<double> data;
  for (std::size_t i = 0; i < n; i += stride) {
    data.push_back(e.coords(i, 0));
    data.push_back(e.coords(i, 1));
  }
  const std::size_t rows = data.size() / 2;
  return Embedding{Matrix(rows, 2, std::move(data))};
}

}  // namespace tsnescope
