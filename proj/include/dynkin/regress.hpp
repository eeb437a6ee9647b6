#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynkin/error.hpp"

namespace dynkin {

/// Monomials (1, x, x^2, ..., x^d) in the normalised state x = s / scale.
struct RegressionBasis {
  int degree = 2;
  double scale = 1.0;  // the strike in option applications

  std::size_t size() const { return static_cast<std::size_t>(degree) + 1; }

  void features(double s, std::span<double> out) const {
    const double x = s / scale;
    double p = 1.0;
    for (std::size_t k = 0; k < size(); ++k) {
      out[k] = p;
      p *= x;
    }
  }

  double evaluate(std::span<const double> coefficients, double s) const {
    const double x = s / scale;
    double acc = 0.0;
    for (std::size_t k = coefficients.size(); k-- > 0;) acc = acc * x + coefficients[k];
    return acc;
  }
};

struct FitResult {
  std::vector<double> coefficients;
  double residual_norm = 0.0;
  std::size_t rank = 0;
};

/// Orthogonal projection onto the span of the basis evaluated at a fixed
/// cross-section of states. Built once per date and applied to any number
/// of target vectors; the fitted-value map is linear in the targets.
///
/// Uses a thin SVD; singular values at or below 1e-10 times the largest are
/// treated as zero, which yields the minimum-norm least-squares solution on
/// rank-deficient designs.
class LeastSquaresProjector {
 public:
  static constexpr double kRankTolerance = 1e-10;

  LeastSquaresProjector(std::span<const double> states, const RegressionBasis& basis) : basis_(basis) {
    if (basis.degree < 0) throw ValidationError("basis degree must be >= 0");
    if (!(basis.scale > 0.0)) throw ValidationError("basis scale must be > 0");
    if (states.empty()) throw ValidationError("regression needs at least one state");
    if (states.size() < basis.size())
      throw ValidationError("regression needs at least degree+1 = " + std::to_string(basis.size()) +
                            " samples, got " + std::to_string(states.size()));

    const auto n = static_cast<Eigen::Index>(states.size());
    const auto p = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd design(n, p);
    std::vector<double> row(basis.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      basis.features(states[static_cast<std::size_t>(i)], row);
      for (Eigen::Index k = 0; k < p; ++k) design(i, k) = row[static_cast<std::size_t>(k)];
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankTolerance);
    rank_ = static_cast<std::size_t>(svd.rank());
    const auto r = static_cast<Eigen::Index>(rank_);
    u_ = svd.matrixU().leftCols(r);
    v_ = svd.matrixV().leftCols(r);
    inv_sigma_ = svd.singularValues().head(r).cwiseInverse();
  }

  std::size_t size() const { return static_cast<std::size_t>(u_.rows()); }
  std::size_t rank() const { return rank_; }
  const RegressionBasis& basis() const { return basis_; }

  /// Fitted values U_r U_r^T y at the sample states.
  std::vector<double> fitted(std::span<const double> targets) const {
    check(targets);
    Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
    std::vector<double> out(targets.size());
    Eigen::Map<Eigen::VectorXd> f(out.data(), static_cast<Eigen::Index>(out.size()));
    const Eigen::VectorXd proj = u_.transpose() * y;
    f.noalias() = u_ * proj;
    return out;
  }

  FitResult fit(std::span<const double> targets) const {
    check(targets);
    Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const Eigen::VectorXd proj = u_.transpose() * y;
    const Eigen::VectorXd coef = v_ * inv_sigma_.cwiseProduct(proj);
    FitResult result;
    result.coefficients.assign(basis_.size(), 0.0);
    for (Eigen::Index k = 0; k < coef.size(); ++k) result.coefficients[static_cast<std::size_t>(k)] = coef(k);
    result.residual_norm = (y - u_ * proj).norm();
    result.rank = rank_;
    return result;
  }

 private:
  void check(std::span<const double> targets) const {
    if (targets.size() != size())
      throw ValidationError("target length " + std::to_string(targets.size()) + " does not match state length " +
                            std::to_string(size()));
  }

  RegressionBasis basis_;
  std::size_t rank_ = 0;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd inv_sigma_;
};

inline FitResult fit_least_squares(std::span<const double> states, std::span<const double> targets,
                                   const RegressionBasis& basis) {
  if (states.size() != targets.size()) throw ValidationError("states and targets differ in length");
  return LeastSquaresProjector(states, basis).fit(targets);
}

/// Regression estimate of E[values_next | state] evaluated at each entry of states_now.
inline std::vector<double> conditional_expectation(std::span<const double> states_now,
                                                   std::span<const double> values_next,
                                                   const RegressionBasis& basis) {
  if (states_now.size() != values_next.size()) throw ValidationError("states and values differ in length");
  return LeastSquaresProjector(states_now, basis).fitted(values_next);
}

}  // namespace dynkin
