#include "targetpop/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace targetpop {

GaussHermiteRule gauss_hermite(std::size_t n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
  // Probabilists' Hermite: He_{k+1} = x He_k - k He_{k-1}; Jacobi matrix has
  // zero diagonal and off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = off;
    jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    rule.nodes[k] = solver.eigenvalues()(i);
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[k] = v0 * v0;  // total mass 1 for the standard normal
  }
  return rule;
}

double expected_expit(double mean, double sd) {
  static const GaussHermiteRule rule = gauss_hermite(128);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double eta = mean + sd * rule.nodes[k];
    acc += rule.weights[k] / (1.0 + std::exp(-eta));
  }
  return acc;
}

}  // namespace targetpop
