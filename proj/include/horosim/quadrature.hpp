#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

namespace horosim {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                                   double mu0) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) jac(i, i) = diag(i);
  for (int i = 0; i + 1 < n; ++i) {
    jac(i, i + 1) = offdiag(i);
    jac(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  if (es.info() != Eigen::Success) throw std::runtime_error("golub_welsch: eigensolver failed");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

// Gauss-Legendre on [-1, 1]; sum w_i f(x_i) ~ integral of f.
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n), o(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) o(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(d, o, 2.0);
}

// Gauss-Legendre mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  QuadratureRule r = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = mid + half * r.nodes[i];
    r.weights[i] *= half;
  }
  return r;
}

// Gauss-Laguerre for weight e^{-x} on [0, inf):
// sum w_i g(x_i) ~ integral of g(x) e^{-x}.
inline QuadratureRule gauss_laguerre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_laguerre: n >= 1");
  Eigen::VectorXd d(n), o(n - 1 > 0 ? n - 1 : 0);
  for (int k = 0; k < n; ++k) d(k) = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) o(k - 1) = static_cast<double>(k);
  return detail::golub_welsch(d, o, 1.0);
}

}  // namespace horosim
