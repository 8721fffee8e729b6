#pragma once

// Slow, independent reference computations used as test oracles. Each one
// follows the textbook definition directly and shares no code with the
// library beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "tsnescope/matrix.hpp"

namespace oracle {

using tsnescope::Matrix;

inline Matrix distances(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j) {
      long double s = 0.0L;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const long double diff = static_cast<long double>(x(i, c)) - x(j, c);
        s += diff * diff;
      }
      d(i, j) = static_cast<double>(std::sqrt(s));
    }
  return d;
}

// Perplexity 2^H of a conditional row, H in bits, skipping the diagonal.
inline double row_perplexity(const Matrix& p, std::size_t i) {
  long double h = 0.0L;
  for (std::size_t j = 0; j < p.cols(); ++j)
    if (j != i && p(i, j) > 0.0) h -= p(i, j) * std::log2(static_cast<long double>(p(i, j)));
  return static_cast<double>(std::exp2(h));
}

// Objective written as a plain double loop with explicit Q matrix.
inline double kl_objective(const Matrix& p, const Matrix& y) {
  const std::size_t n = y.rows();
  long double z = 0.0L;
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      w(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
      z += w(i, j);
    }
  long double kl = 0.0L;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / (w(i, j) / z));
  return static_cast<double>(kl);
}

inline Matrix finite_difference_gradient(const Matrix& p, const Matrix& y, double h = 1e-6) {
  Matrix g(y.rows(), 2);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      Matrix plus = y, minus = y;
      plus(i, c) += h;
      minus(i, c) -= h;
      g(i, c) = (kl_objective(p, plus) - kl_objective(p, minus)) / (2.0 * h);
    }
  return g;
}

// sum_j p_{j|i} log(p_{j|i} / q_{j|i}) per row, q_{j|i} conditional Student-t.
inline std::vector<double> conditional_costs(const Matrix& p_cond, const Matrix& y) {
  const std::size_t n = y.rows();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double denom = 0.0L;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i) continue;
      const long double dx = y(i, 0) - y(l, 0), dy = y(i, 1) - y(l, 1);
      denom += 1.0L / (1.0L + dx * dx + dy * dy);
    }
    long double kl = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || p_cond(i, j) <= 0.0) continue;
      const long double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      const long double q = (1.0L / (1.0L + dx * dx + dy * dy)) / denom;
      kl += p_cond(i, j) * std::log(p_cond(i, j) / q);
    }
    out[i] = static_cast<double>(kl);
  }
  return out;
}

// k nearest neighbours of i as a set; ties by smaller index.
inline std::set<std::size_t> knn_set(const Matrix& d, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t j = 0; j < d.rows(); ++j)
    if (j != i) cand.emplace_back(d(i, j), j);
  std::sort(cand.begin(), cand.end());
  std::set<std::size_t> out;
  for (std::size_t r = 0; r < k; ++r) out.insert(cand[r].second);
  return out;
}

inline double jaccard(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::vector<std::size_t> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

inline double np(const Matrix& hd, const Matrix& ld, std::size_t k, const std::vector<std::size_t>& rows) {
  double sum = 0.0;
  for (std::size_t i : rows) sum += jaccard(knn_set(hd, i, k), knn_set(ld, i, k));
  return sum / static_cast<double>(rows.size());
}

// Rank of j among i's neighbours (1-based), ties by smaller index.
inline std::size_t rank_of(const Matrix& d, std::size_t i, std::size_t j) {
  std::size_t r = 1;
  for (std::size_t l = 0; l < d.rows(); ++l)
    if (l != i && l != j && (d(i, l) < d(i, j) || (d(i, l) == d(i, j) && l < j))) ++r;
  return r;
}

// Venna-Kaski trustworthiness: penalize 2-D neighbours that are far in N-D.
inline double trustworthiness(const Matrix& hd, const Matrix& ld, std::size_t k) {
  const std::size_t n = hd.rows();
  double pen = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : knn_set(ld, i, k)) {
      const std::size_t r = rank_of(hd, i, j);
      if (r > k) pen += static_cast<double>(r - k);
    }
  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  return std::clamp(1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * pen, 0.0, 1.0);
}

inline double continuity(const Matrix& hd, const Matrix& ld, std::size_t k) { return trustworthiness(ld, hd, k); }

// Normalized stress score with the optimal global scale of the 2-D distances.
inline double stress_score(const Matrix& hd, const Matrix& ld) {
  long double num = 0.0L, den = 0.0L, cross = 0.0L, ld2 = 0.0L;
  for (std::size_t i = 0; i < hd.rows(); ++i)
    for (std::size_t j = i + 1; j < hd.rows(); ++j) {
      cross += hd(i, j) * ld(i, j);
      ld2 += ld(i, j) * ld(i, j);
    }
  const long double alpha = cross / ld2;
  for (std::size_t i = 0; i < hd.rows(); ++i)
    for (std::size_t j = i + 1; j < hd.rows(); ++j) {
      const long double r = hd(i, j) - alpha * ld(i, j);
      num += r * r;
      den += static_cast<long double>(hd(i, j)) * hd(i, j);
    }
  return std::clamp(static_cast<double>(1.0L - num / den), 0.0, 1.0);
}

// Textbook Spearman with tie correction:
// rho = (Sx + Sy - sum d^2) / (2 sqrt(Sx Sy)), Sx = (n^3 - n)/12 - sum (t^3 - t)/12.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  auto ranks = [n](const std::vector<double>& v, long double& s) {
    std::vector<long double> r(n);
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[v[i]].push_back(i);
    long double next = 1.0L, tie_term = 0.0L;
    for (const auto& [value, members] : groups) {
      const long double t = static_cast<long double>(members.size());
      const long double avg = next + (t - 1.0L) / 2.0L;
      for (std::size_t i : members) r[i] = avg;
      next += t;
      tie_term += t * t * t - t;
    }
    const long double nn = static_cast<long double>(n);
    s = (nn * nn * nn - nn) / 12.0L - tie_term / 12.0L;
    return r;
  };
  long double sx = 0.0L, sy = 0.0L;
  const auto ra = ranks(a, sx), rb = ranks(b, sy);
  if (sx <= 0.0L || sy <= 0.0L) return 0.0;
  long double d2 = 0.0L;
  for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return static_cast<double>((sx + sy - d2) / (2.0L * std::sqrt(sx * sy)));
}

// Center, scale to unit Frobenius norm.
inline std::vector<std::pair<double, double>> normalize_shape(const Matrix& x) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    mx += x(i, 0);
    my += x(i, 1);
  }
  mx /= static_cast<double>(x.rows());
  my /= static_cast<double>(x.rows());
  std::vector<std::pair<double, double>> out;
  double norm = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.emplace_back(x(i, 0) - mx, x(i, 1) - my);
    norm += out.back().first * out.back().first + out.back().second * out.back().second;
  }
  norm = std::sqrt(norm);
  for (auto& [a, b] : out) {
    a /= norm;
    b /= norm;
  }
  return out;
}

// Procrustes residual found by brute-force search over rotation angles, with
// and without reflection: 1 - max_R <A, B R>^2 for unit-norm centered shapes.
inline double procrustes_grid(const Matrix& a, const Matrix& b) {
  const auto sa = normalize_shape(a), sb = normalize_shape(b);
  auto inner = [&](double theta, bool reflect) {
    const double c = std::cos(theta), s = std::sin(theta);
    double sum = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
      double bx = sb[i].first, by = sb[i].second;
      if (reflect) by = -by;
      sum += sa[i].first * (c * bx - s * by) + sa[i].second * (s * bx + c * by);
    }
    return sum * sum;
  };
  double best = 0.0;
  const int steps = 3600;
  const double step = 2.0 * M_PI / steps;
  for (bool reflect : {false, true}) {
    int arg = 0;
    double arg_val = -1.0;
    for (int t = 0; t < steps; ++t)
      if (const double v = inner(t * step, reflect); v > arg_val) {
        arg_val = v;
        arg = t;
      }
    // Golden-section refinement inside the bracketing cells.
    double lo = (arg - 1) * step, hi = (arg + 1) * step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
      if (inner(m1, reflect) < inner(m2, reflect))
        lo = m1;
      else
        hi = m2;
    }
    best = std::max({best, arg_val, inner(0.5 * (lo + hi), reflect)});
  }
  return 1.0 - best;
}

// Best 2-medoid pair by exhaustive search over all candidate pairs.
inline std::pair<std::pair<std::size_t, std::size_t>, double> best_medoid_pair(const Matrix& d) {
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> arg{0, 0};
  for (std::size_t a = 0; a < d.rows(); ++a)
    for (std::size_t b = a + 1; b < d.rows(); ++b) {
      double cost = 0.0;
      for (std::size_t i = 0; i < d.rows(); ++i) cost += std::min(d(i, a), d(i, b));
      if (cost < best) {
        best = cost;
        arg = {a, b};
      }
    }
  return {arg, best};
}

// Leading eigenvector of a symmetric PSD matrix by power iteration.
inline std::vector<double> leading_eigenvector(const std::vector<std::vector<double>>& m, int iterations = 20000) {
  const std::size_t d = m.size();
  std::vector<double> v(d), next(d);
  for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 0.01 * static_cast<double>(j);
  for (int it = 0; it < iterations; ++it) {
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      next[r] = 0.0;
      for (std::size_t c = 0; c < d; ++c) next[r] += m[r][c] * v[c];
      norm += next[r] * next[r];
    }
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < d; ++r) v[r] = next[r] / norm;
  }
  return v;
}

// Nearest point on a polyline by dense sampling: (distance, arclength).
inline std::pair<double, double> sampled_projection(const std::vector<std::pair<double, double>>& vertices, double px,
                                                    double py, int samples_per_segment = 10000) {
  double best = std::numeric_limits<double>::infinity(), best_arc = 0.0, arc = 0.0;
  for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
    const auto [ax, ay] = vertices[s];
    const auto [bx, by] = vertices[s + 1];
    const double len = std::hypot(bx - ax, by - ay);
    for (int t = 0; t <= samples_per_segment; ++t) {
      const double f = static_cast<double>(t) / samples_per_segment;
      const double d = std::hypot(px - (ax + f * (bx - ax)), py - (ay + f * (by - ay)));
      if (d < best) {
        best = d;
        best_arc = arc + f * len;
      }
    }
    arc += len;
  }
  return {best, best_arc};
}

}  // namespace oracle
