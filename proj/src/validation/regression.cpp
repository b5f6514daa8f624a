#include "vigor/validation/regression.hpp"

#include "vigor/error.hpp"

#include <Eigen/SVD>

#include <string>

namespace vigor::validation {

R2Result predictive_r2(const nn::Matrix& z, std::span<const double> u) {
  const std::size_t n = z.rows();
  const std::size_t p = z.cols();
  if (u.size() != n)
    throw ShapeError("predictive_r2: " + std::to_string(u.size()) + " targets for " + z.shape_string() + " design");
  if (n <= p + 1)
    throw DegenerateInputError("predictive_r2: need more than " + std::to_string(p + 1) + " rows, got " + std::to_string(n));

  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) design(i, j + 1) = z(i, j);
    target(i) = u[i];
  }
  const double mean = target.mean();
  const double ss_tot = (target.array() - mean).square().sum();
  R2Result result;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  result.rank = static_cast<std::size_t>(svd.rank());
  result.rank_deficient = result.rank < p + 1;
  if (!(ss_tot > 0.0)) return result;
  const Eigen::VectorXd coef = svd.solve(target);
  const double ss_res = (target - design * coef).squaredNorm();
  result.r_squared = 1.0 - ss_res / ss_tot;
  return result;
}

} // namespace vigor::validation
