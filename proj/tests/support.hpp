#pragma once

// Shared helpers and independent oracles for the test binaries.

#include "vigor/data/dataset.hpp"
#include "vigor/nn/matrix.hpp"
#include "vigor/rng.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

inline vigor::nn::Matrix random_matrix(vigor::Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  vigor::nn::Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

// triple loop, long double accumulation
inline vigor::nn::Matrix naive_matmul(const vigor::nn::Matrix& a, const vigor::nn::Matrix& b) {
  vigor::nn::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline vigor::nn::Matrix transpose(const vigor::nn::Matrix& a) {
  vigor::nn::Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs_diff(const vigor::nn::Matrix& a, const vigor::nn::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// Small logistic dataset with a hidden driver, for model-level tests that
/// need fewer rows than the synthetic benchmark allows.
inline vigor::data::Dataset toy_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  vigor::Rng rng(seed);
  vigor::data::Dataset ds;
  ds.x = vigor::nn::Matrix(n, d);
  ds.t.resize(n);
  ds.y.resize(n);
  for (std::size_t j = 0; j < d; ++j) ds.column_names.push_back("c" + std::to_string(j + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.normal();
    double lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ds.x(i, j) = rng.normal() + 0.3 * u;
      lin += 0.4 * ds.x(i, j);
    }
    ds.t[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-(u + 0.5 * lin))) ? 1.0 : 0.0;
    ds.y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-(u - 0.5 * ds.t[i] + 0.3 * lin))) ? 1.0 : 0.0;
  }
  return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("vigor_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

} // namespace testing
