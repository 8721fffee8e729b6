#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/stats.hpp"
#include "tsnescope/tsne.hpp"

namespace tsnescope {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// A user-drawn polyline with its capture radius, in embedding units.
class Polyline {
 public:
  static Polyline create(std::vector<Point2> vertices, double rho) {
    require(vertices.size() >= 2, "polyline needs at least 2 vertices");
    for (const auto& v : vertices) require(std::isfinite(v.x) && std::isfinite(v.y), "polyline vertex is not finite");
    for (std::size_t i = 1; i < vertices.size(); ++i)
      require(!(vertices[i] == vertices[i - 1]), "consecutive polyline vertices must be distinct");
    require(std::isfinite(rho) && rho > 0.0, "rho must be a finite value > 0");
    Polyline p;
    p.vertices_ = std::move(vertices);
    p.rho_ = rho;
    return p;
  }

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  double rho() const noexcept { return rho_; }

  Polyline reversed() const {
    Polyline p = *this;
    std::reverse(p.vertices_.begin(), p.vertices_.end());
    return p;
  }

 private:
  Polyline() = default;
  std::vector<Point2> vertices_;
  double rho_ = 0.0;
};

// 5% of the embedding's bounding-box diagonal.
inline double default_rho(const Embedding& e) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x, max_x = -min_x, max_y = -min_x;
  for (std::size_t i = 0; i < e.size(); ++i) {
    min_x = std::min(min_x, e.coords(i, 0));
    max_x = std::max(max_x, e.coords(i, 0));
    min_y = std::min(min_y, e.coords(i, 1));
    max_y = std::max(max_y, e.coords(i, 1));
  }
  return 0.05 * std::hypot(max_x - min_x, max_y - min_y);
}

struct PolylinePoint {
  std::size_t index;
  double arclength;
  double distance;
  friend bool operator==(const PolylinePoint&, const PolylinePoint&) = default;
};

// Points within rho of the polyline, ordered by the arclength of their
// closest location on it (ties by point index).
using PolylineProjection = std::vector<PolylinePoint>;

inline PolylineProjection project_to_polyline(const Embedding& embedding, const Polyline& polyline) {
  const auto& v = polyline.vertices();
  const std::size_t segments = v.size() - 1;
  std::vector<double> start(segments), length(segments);
  double cumulative = 0.0;
  for (std::size_t s = 0; s < segments; ++s) {
    start[s] = cumulative;
    length[s] = std::hypot(v[s + 1].x - v[s].x, v[s + 1].y - v[s].y);
    cumulative += length[s];
  }

  PolylineProjection out;
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    const double px = embedding.coords(i, 0), py = embedding.coords(i, 1);
    double best = std::numeric_limits<double>::infinity(), best_arc = 0.0;
    for (std::size_t s = 0; s < segments; ++s) {
      const Point2 a = v[s], b = v[s + 1];
      const double ex = b.x - a.x, ey = b.y - a.y;
      const double t = std::clamp(((px - a.x) * ex + (py - a.y) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
      double qx, qy;
      if (t == 0.0) {
        qx = a.x;
        qy = a.y;
      } else if (t == 1.0) {
        qx = b.x;
        qy = b.y;
      } else {
        qx = a.x + t * ex;
        qy = a.y + t * ey;
      }
      const double d = std::hypot(px - qx, py - qy);
      if (d < best) {
        best = d;
        best_arc = t == 1.0 ? (s + 1 < segments ? start[s + 1] : cumulative) : start[s] + t * length[s];
      }
    }
    if (best <= polyline.rho()) out.push_back({i, best_arc, best});
  }
  if (out.empty()) fail(ErrorKind::computation, "empty capture band");
  std::sort(out.begin(), out.end(), [](const PolylinePoint& a, const PolylinePoint& b) {
    return a.arclength < b.arclength || (a.arclength == b.arclength && a.index < b.index);
  });
  return out;
}

struct DimensionCoefficient {
  std::size_t dimension;
  std::string name;
  double coefficient;  // signed Spearman rho
  friend bool operator==(const DimensionCoefficient&, const DimensionCoefficient&) = default;
};

// Sorted by |coefficient| descending, ties by dimension index.
using DimensionCorrelation = std::vector<DimensionCoefficient>;

// Spearman correlation between the polyline ordering and each dimension's
// values over the captured points. Entries with |rho| < threshold are dropped.
inline DimensionCorrelation dimension_correlation(const Dataset& dataset, const PolylineProjection& projection,
                                                  double threshold = 0.0) {
  require(projection.size() >= 2, "dimension correlation needs at least 2 captured points");
  require(std::isfinite(threshold) && threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  std::vector<double> order(projection.size()), values(projection.size());
  for (std::size_t k = 0; k < projection.size(); ++k) {
    require(projection[k].index < dataset.n(), "projection refers to a point outside the dataset");
    order[k] = projection[k].arclength;
  }

  DimensionCorrelation out;
  for (std::size_t j = 0; j < dataset.d(); ++j) {
    for (std::size_t k = 0; k < projection.size(); ++k) values[k] = dataset.values()(projection[k].index, j);
    const double rho = spearman(order, values);
    if (std::abs(rho) >= threshold) out.push_back({j, dataset.dim_names()[j], rho});
  }
  std::stable_sort(out.begin(), out.end(), [](const DimensionCoefficient& a, const DimensionCoefficient& b) {
    return std::abs(a.coefficient) > std::abs(b.coefficient);
  });
  return out;
}

struct AxisWeight {
  std::size_t dimension;
  double weight;
  friend bool operator==(const AxisWeight&, const AxisWeight&) = default;
};

constexpr std::size_t max_pcp_axes = 8;

// Up to 8 dimensions ranked by |loading| on the leading principal component
// of the selected rows (standardized where the spread is non-zero).
using AxisSelection = std::vector<AxisWeight>;

inline AxisSelection adaptive_axes(const Dataset& dataset, const Selection& selection) {
  require(selection.size() >= 2, "adaptive axes need a selection of at least 2 points");
  require(selection.indices().back() < dataset.n(), "selection index out of range");
  const auto m = static_cast<Eigen::Index>(selection.size());
  const auto d = static_cast<Eigen::Index>(dataset.d());

  Eigen::MatrixXd x(m, d);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index j = 0; j < d; ++j)
      x(r, j) = dataset.values()(selection.indices()[static_cast<std::size_t>(r)], static_cast<std::size_t>(j));
  x.rowwise() -= x.colwise().mean();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(m - 1));
    if (sd > 0.0) x.col(j) /= sd;
  }
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(m - 1);
  if (!(cov.trace() > 0.0)) fail(ErrorKind::computation, "degenerate selection");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd w = eig.eigenvectors().col(d - 1);
  Eigen::Index lead = 0;
  for (Eigen::Index j = 1; j < d; ++j)
    if (std::abs(w(j)) > std::abs(w(lead))) lead = j;
  if (w(lead) < 0.0) w = -w;

  AxisSelection axes;
  for (Eigen::Index j = 0; j < d; ++j) axes.push_back({static_cast<std::size_t>(j), w(j)});
  std::stable_sort(axes.begin(), axes.end(),
                   [](const AxisWeight& a, const AxisWeight& b) { return std::abs(a.weight) > std::abs(b.weight); });
  axes.resize(std::min<std::size_t>(max_pcp_axes, axes.size()));
  return axes;
}

}  // namespace tsnescope
