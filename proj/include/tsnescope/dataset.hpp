#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tsnescope/error.hpp"
#include "tsnescope/matrix.hpp"

namespace tsnescope {

// An n x d numeric table. Raw values are kept for display; the per-dimension
// min-max normalized copy is what all distance computations use.
class Dataset {
 public:
  static Dataset create(Matrix values, std::vector<std::string> dim_names,
                        std::optional<std::vector<std::string>> labels = std::nullopt) {
    require(values.rows() >= 1, "dataset has no rows");
    require(values.cols() >= 1, "dataset has no dimensions");
    require(dim_names.size() == values.cols(), "dimension name count does not match column count");
    std::set<std::string> unique(dim_names.begin(), dim_names.end());
    require(unique.size() == dim_names.size(), "dimension names must be unique");
    if (labels) require(labels->size() == values.rows(), "label count does not match row count");
    for (std::size_t i = 0; i < values.rows(); ++i)
      for (std::size_t j = 0; j < values.cols(); ++j)
        require(std::isfinite(values(i, j)),
                "non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));

    Dataset ds;
    ds.norm_values_ = normalize(values);
    ds.values_ = std::move(values);
    ds.dim_names_ = std::move(dim_names);
    ds.labels_ = std::move(labels);
    return ds;
  }

  std::size_t n() const noexcept { return values_.rows(); }
  std::size_t d() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const Matrix& norm_values() const noexcept { return norm_values_; }
  const std::vector<std::string>& dim_names() const noexcept { return dim_names_; }
  const std::optional<std::vector<std::string>>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return labels_.has_value(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Dataset() = default;

  // Constant dimensions map to 0.
  static Matrix normalize(const Matrix& values) {
    Matrix out(values.rows(), values.cols());
    for (std::size_t j = 0; j < values.cols(); ++j) {
      double lo = values(0, j), hi = values(0, j);
      for (std::size_t i = 1; i < values.rows(); ++i) {
        lo = std::min(lo, values(i, j));
        hi = std::max(hi, values(i, j));
      }
      const double range = hi - lo;
      for (std::size_t i = 0; i < values.rows(); ++i)
        out(i, j) = range > 0.0 ? std::clamp((values(i, j) - lo) / range, 0.0, 1.0) : 0.0;
    }
    return out;
  }

  Matrix values_;
  Matrix norm_values_;
  std::vector<std::string> dim_names_;
  std::optional<std::vector<std::string>> labels_;
};

namespace detail {

// Squared Euclidean distance; Neumaier-compensated above 64 dimensions.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() <= 64) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double diff = a[k] - b[k];
      sum += diff * diff;
    }
    return sum;
  }
  double sum = 0.0, comp = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    const double term = diff * diff;
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
      comp += (sum - t) + term;
    else
      comp += (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

// Symmetric matrix of Euclidean distances between the rows of `points`.
inline Matrix pairwise_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  require(n >= 2, "dataset too small");
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::sqrt(detail::squared_distance(points.row(i), points.row(j)));
      dist(i, j) = v;
      dist(j, i) = v;
    }
  return dist;
}

// Distances over the normalized values of a dataset.
inline Matrix pairwise_distances(const Dataset& dataset) { return pairwise_distances(dataset.norm_values()); }

}  // namespace tsnescope
