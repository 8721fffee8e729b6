#pragma once

// Shared helpers for building inputs in tests and in the acceptance runner.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsnescope/dataset.hpp"
#include "tsnescope/io/csv.hpp"
#include "tsnescope/random.hpp"

namespace fixtures {

using tsnescope::Dataset;
using tsnescope::Matrix;
using tsnescope::Rng;

inline std::string data_path(const std::string& name) { return std::string(TSNESCOPE_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Dataset iris() { return tsnescope::io::ingest_csv(read_file(data_path("iris.csv")), "species"); }

inline Dataset breast_cancer() {
  return tsnescope::io::ingest_csv(read_file(data_path("breast_cancer_wisconsin.csv")), "class");
}

inline Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform() * scale;
  return m;
}

inline Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal() * scale;
  return m;
}

inline std::vector<std::string> dim_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

inline Dataset dataset_from(Matrix m, std::optional<std::vector<std::string>> labels = std::nullopt) {
  const std::size_t d = m.cols();
  return Dataset::create(std::move(m), dim_names(d), std::move(labels));
}

// Gaussian blobs in `dims` dimensions; centers on the coordinate axes
// at distance `spacing` from the origin.
inline Dataset blobs(Rng& rng, const std::vector<double>& stddevs, std::size_t per_blob, std::size_t dims,
                     double spacing) {
  Matrix m(stddevs.size() * per_blob, dims);
  std::vector<std::string> labels;
  for (std::size_t b = 0; b < stddevs.size(); ++b)
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t row = b * per_blob + i;
      for (std::size_t j = 0; j < dims; ++j)
        m(row, j) = (j == b % dims ? spacing : 0.0) + rng.normal() * stddevs[b];
      labels.push_back("blob" + std::to_string(b));
    }
  return dataset_from(std::move(m), labels);
}

}  // namespace fixtures
