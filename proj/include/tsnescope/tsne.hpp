#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/matrix.hpp"
#include "tsnescope/quadtree.hpp"
#include "tsnescope/random.hpp"

namespace tsnescope {

struct TsneParams {
  double perplexity = 30.0;
  double learning_rate = 200.0;
  int max_iterations = 1000;
  double theta = 0.5;  // 0 selects the exact gradient
  std::uint64_t seed = 0;

  friend bool operator==(const TsneParams&, const TsneParams&) = default;
};

// Largest admissible perplexity for n points.
inline double max_perplexity(std::size_t n) { return (static_cast<double>(n) - 1.0) / 3.0; }

inline void validate(const TsneParams& p) {
  require(std::isfinite(p.perplexity) && p.perplexity > 1.0, "perplexity must be a finite value > 1");
  require(std::isfinite(p.learning_rate) && p.learning_rate > 0.0, "learning_rate must be a finite value > 0");
  require(p.max_iterations >= 50, "max_iterations must be >= 50");
  require(std::isfinite(p.theta) && p.theta >= 0.0 && p.theta <= 1.0, "theta must lie in [0, 1]");
}

// Clips perplexity to (n-1)/3.
inline TsneParams clipped_for(TsneParams p, std::size_t n) {
  validate(p);
  const double cap = max_perplexity(n);
  require(cap > 1.0, "dataset too small for t-SNE (need at least 5 points)");
  p.perplexity = std::min(p.perplexity, cap);
  return p;
}

struct Embedding {
  Matrix coords;  // n x 2

  std::size_t size() const noexcept { return coords.rows(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

struct Instrumentation {
  std::vector<double> sigma;
  std::vector<double> density;     // sigma^-2
  std::vector<double> point_cost;  // KL(P_i || Q_i) over conditional rows
  double total_cost = 0.0;         // symmetric joint KL objective

  friend bool operator==(const Instrumentation&, const Instrumentation&) = default;
};

struct Calibration {
  std::vector<double> sigma;
  Matrix p_cond;  // row i holds p_{j|i}
  // Rows whose target perplexity is unreachable because more than `perplexity`
  // neighbours tie at the minimum distance; P is uniform over that tied set.
  std::vector<std::size_t> saturated_rows;
};

namespace detail {

constexpr double prob_floor = 1e-12;
constexpr int max_bisection_steps = 200;
constexpr double calibration_tolerance = 1e-7;  // relative, on 2^H

// Fills `row` with exp(-beta (d2_j - d2_min)) normalized; returns entropy in bits.
inline double gaussian_row(std::span<const double> d2, std::size_t self, double d2_min, double beta,
                           std::span<double> row) {
  double sum = 0.0;
  for (std::size_t j = 0; j < d2.size(); ++j) {
    row[j] = j == self ? 0.0 : std::exp(-beta * (d2[j] - d2_min));
    sum += row[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < d2.size(); ++j) {
    row[j] /= sum;
    if (j != self) weighted += row[j] * (d2[j] - d2_min);
  }
  const double nats = std::log(sum) + beta * weighted;
  return nats / std::numbers::ln2;
}

}  // namespace detail

// Per-row binary search on the Gaussian precision beta = 1/(2 sigma^2) so that
// each conditional row has perplexity 2^H equal to `perplexity`.
inline Calibration calibrate_bandwidths(const Matrix& dists, double perplexity) {
  const std::size_t n = dists.rows();
  require(n >= 2 && dists.cols() == n, "distance matrix must be square with n >= 2");
  require(std::isfinite(perplexity) && perplexity > 1.0, "perplexity must be a finite value > 1");
  require(perplexity <= static_cast<double>(n - 1), "perplexity exceeds the number of neighbours");

  const double target = std::log2(perplexity);
  Calibration out;
  out.sigma.assign(n, 0.0);
  out.p_cond = Matrix(n, n);
  std::vector<double> d2(n);

  for (std::size_t i = 0; i < n; ++i) {
    double d2_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      d2[j] = dists(i, j) * dists(i, j);
      if (j != i) d2_min = std::min(d2_min, d2[j]);
    }
    std::size_t tied = 0;
    double d2_next = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (d2[j] == d2_min)
        ++tied;
      else
        d2_next = std::min(d2_next, d2[j]);
    }
    auto row = out.p_cond.row(i);

    if (static_cast<double>(tied) > perplexity * (1.0 + detail::calibration_tolerance)) {
      // Infeasible: entropy cannot drop below log2(tied). Take the limit.
      double beta;
      if (std::isfinite(d2_next))
        beta = std::log(1.0 / detail::prob_floor) / (d2_next - d2_min);
      else
        beta = d2_min > 0.0 ? 1.0 / (2.0 * d2_min) : 1.0;
      detail::gaussian_row(d2, i, d2_min, beta, row);
      out.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
      out.saturated_rows.push_back(i);
      continue;
    }

    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int step = 0; step < detail::max_bisection_steps; ++step) {
      const double h = detail::gaussian_row(d2, i, d2_min, beta, row);
      if (std::abs(std::exp2(h) - perplexity) <= detail::calibration_tolerance * perplexity) {
        converged = true;
        break;
      }
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    if (!converged) {
      const double h = detail::gaussian_row(d2, i, d2_min, beta, row);
      if (std::abs(std::exp2(h) - perplexity) > 1e-5 * perplexity)
        fail(ErrorKind::computation, "bandwidth calibration did not converge for row " + std::to_string(i));
    }
    out.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
  }
  return out;
}

// Symmetrized joint affinities p_ij = (p_{j|i} + p_{i|j}) / 2n.
inline Matrix joint_probabilities(const Matrix& p_cond) {
  const std::size_t n = p_cond.rows();
  Matrix p(n, n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (p_cond(i, j) + p_cond(j, i)) * scale;
      p(i, j) = v;
      p(j, i) = v;
    }
  return p;
}

// Objective KL(P || Q) with Student-t joint Q over the embedding.
inline double symmetric_kl(const Matrix& p, const Matrix& coords) {
  const std::size_t n = coords.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = coords(i, 0) - coords(j, 0), dy = coords(i, 1) - coords(j, 1);
      z += 2.0 / (1.0 + dx * dx + dy * dy);
    }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double dx = coords(i, 0) - coords(j, 0), dy = coords(i, 1) - coords(j, 1);
      const double q = std::max(1.0 / (1.0 + dx * dx + dy * dy) / z, detail::prob_floor);
      kl += p(i, j) * std::log(std::max(p(i, j), detail::prob_floor) / q);
    }
  return kl;
}

// Exact gradient of symmetric_kl with P scaled by `exaggeration`.
inline Matrix kl_gradient(const Matrix& p, const Matrix& coords, double exaggeration = 1.0) {
  const std::size_t n = coords.rows();
  Matrix w(n, n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = coords(i, 0) - coords(j, 0), dy = coords(i, 1) - coords(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      w(i, j) = v;
      w(j, i) = v;
      z += 2.0 * v;
    }
  Matrix grad(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double mult = (exaggeration * p(i, j) - w(i, j) / z) * w(i, j);
      gx += mult * (coords(i, 0) - coords(j, 0));
      gy += mult * (coords(i, 1) - coords(j, 1));
    }
    grad(i, 0) = 4.0 * gx;
    grad(i, 1) = 4.0 * gy;
  }
  return grad;
}

// Barnes-Hut gradient: exact attraction over the dense P, tree-approximated repulsion.
inline Matrix kl_gradient_bh(const Matrix& p, const Matrix& coords, double theta, double exaggeration = 1.0) {
  const std::size_t n = coords.rows();
  detail::QuadTree tree(coords);
  Matrix attract(n, 2), repulse(n, 2);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ax = 0.0, ay = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || p(i, j) == 0.0) continue;
      const double dx = coords(i, 0) - coords(j, 0), dy = coords(i, 1) - coords(j, 1);
      const double mult = p(i, j) / (1.0 + dx * dx + dy * dy);
      ax += mult * dx;
      ay += mult * dy;
    }
    attract(i, 0) = ax;
    attract(i, 1) = ay;
    double sum_w = 0.0, fx = 0.0, fy = 0.0;
    tree.repulsion(i, theta, sum_w, fx, fy);
    repulse(i, 0) = fx;
    repulse(i, 1) = fy;
    z += sum_w;
  }
  Matrix grad(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 2; ++c) grad(i, c) = 4.0 * (exaggeration * attract(i, c) - repulse(i, c) / z);
  return grad;
}

// Per-point remaining cost sum_j p_{j|i} ln(p_{j|i} / q_{j|i}) with q_{j|i}
// the row-normalized Student-t affinity of the embedding.
inline std::vector<double> point_costs(const Matrix& p_cond, const Embedding& embedding) {
  const Matrix& y = embedding.coords;
  const std::size_t n = y.rows();
  require(p_cond.rows() == n && p_cond.cols() == n, "conditional probabilities do not match embedding size");
  std::vector<double> costs(n, 0.0);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        w[j] = 0.0;
        continue;
      }
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      w[j] = 1.0 / (1.0 + dx * dx + dy * dy);
      row_sum += w[j];
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double pj = p_cond(i, j);
      if (j == i || pj <= 0.0) continue;
      const double q = std::max(w[j] / row_sum, detail::prob_floor);
      kl += pj * std::log(std::max(pj, detail::prob_floor) / q);
    }
    costs[i] = std::max(kl, 0.0);
  }
  return costs;
}

struct TsneResult {
  TsneParams params;  // as run, perplexity clipped
  Embedding embedding;
  Instrumentation instrumentation;
  std::vector<std::size_t> saturated_rows;
};

namespace detail {

inline int exaggeration_iterations(int max_iterations) { return std::min(250, max_iterations / 4); }
constexpr double exaggeration_factor = 12.0;
constexpr int momentum_switch_iteration = 250;

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

// Optimizes a 2-D embedding of `dataset`. Sequential and deterministic for a
// fixed seed; safe to call concurrently on distinct inputs.
inline TsneResult run_tsne(const Dataset& dataset, const TsneParams& requested) {
  const std::size_t n = dataset.n();
  const TsneParams params = clipped_for(requested, n);

  const Matrix dists = pairwise_distances(dataset);
  bool any_distance = false;
  for (double v : dists.data()) any_distance = any_distance || v > 0.0;
  if (!any_distance) fail(ErrorKind::computation, "degenerate distances: all points coincide");

  Calibration cal = calibrate_bandwidths(dists, params.perplexity);
  const Matrix p = joint_probabilities(cal.p_cond);

  Rng rng(params.seed);
  Matrix y(n, 2);
  for (double& v : y.data()) v = rng.normal() * 1e-4;

  Matrix velocity(n, 2), gains(n, 2, 1.0);
  const int stop_lying = detail::exaggeration_iterations(params.max_iterations);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    const double exaggeration = iter < stop_lying ? detail::exaggeration_factor : 1.0;
    const double momentum = iter < detail::momentum_switch_iteration ? 0.5 : 0.8;
    const Matrix grad = params.theta == 0.0 ? kl_gradient(p, y, exaggeration)
                                            : kl_gradient_bh(p, y, params.theta, exaggeration);
    for (std::size_t k = 0; k < y.data().size(); ++k) {
      double& gain = gains.data()[k];
      double& vel = velocity.data()[k];
      const double g = grad.data()[k];
      gain = detail::sign(g) != detail::sign(vel) ? gain + 0.2 : gain * 0.8;
      gain = std::max(gain, 0.01);
      vel = momentum * vel - params.learning_rate * gain * g;
      y.data()[k] += vel;
    }
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_x += y(i, 0);
      mean_y += y(i, 1);
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    bool finite = std::isfinite(mean_x) && std::isfinite(mean_y);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, 0) -= mean_x;
      y(i, 1) -= mean_y;
    }
    if (!finite) fail(ErrorKind::computation, "non-finite embedding at iteration " + std::to_string(iter));
  }

  TsneResult result;
  result.params = params;
  result.embedding.coords = std::move(y);
  auto& inst = result.instrumentation;
  inst.sigma = cal.sigma;
  inst.density.resize(n);
  for (std::size_t i = 0; i < n; ++i) inst.density[i] = 1.0 / (inst.sigma[i] * inst.sigma[i]);
  inst.point_cost = point_costs(cal.p_cond, result.embedding);
  inst.total_cost = symmetric_kl(p, result.embedding.coords);
  if (!std::isfinite(inst.total_cost))
    fail(ErrorKind::computation, "non-finite cost at iteration " + std::to_string(params.max_iterations));
  result.saturated_rows = std::move(cal.saturated_rows);
  return result;
}

}  // namespace tsnescope
