#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/lattice.hpp"
#include "horosim/linalg.hpp"

// Hyperbolic (H^2) sigma model on a periodic lattice.
//
// Spins live on the hyperboloid; in horospherical coordinates (s, t) the spin
// at a site is encoded by the positive Hermitian unit-determinant matrix
//   M(t, s) = [ cosh t + (s^2/2) e^t     sinh t - (i s + s^2/2) e^t ]
//             [ sinh t + (i s - s^2/2) e^t   cosh t + (s^2/2) e^t   ],
// i.e. M = S sigma3 where S is the spin matrix.  The energy of a field
// configuration is
//   A(t, s) = beta * sum_edges [ cosh(t_i - t_j) + (1/2)(s_i - s_j)^2 e^{t_i + t_j} ]
//           + h * sum_sites [ cosh t_j + (1/2) s_j^2 e^{t_j} ],
// with Gibbs weight exp(-A) prod_j e^{t_j} dt_j ds_j.
//
// Two ensembles for the s-field:
//  * HMassed: the h s^2 e^t site term above regularizes s directly.
//  * DeltaConstrained: the s zero mode is fixed by delta(sum_j s_j) instead,
//    and the h s^2 e^t site term is dropped (h cosh t is kept).
//
// Integrating out s gives the effective t-action
//   E(t) = beta * sum_edges cosh(t_i - t_j) + C(t) + sum_j ( -t_j + h cosh t_j )
// with the frozen constant conventions
//   C(t) = (1/2) logdet( Q^T (beta D(t)) Q )        (DeltaConstrained)
//   C(t) = (1/2) logdet( beta D(t) + h diag(e^t) )  (HMassed),
// where D(t) is the edge-weighted Laplacian with weights e^{t_i + t_j} and Q
// is the fixed Helmert basis of the zero-sum subspace.  All 2*pi factors are
// dropped; the beta dependence of C is kept.  With these conventions
//   E_hmassed - E_delta = R_h + (1/2) log h
// for the regularization shift R_h computed in observables.hpp.
namespace horosim {

enum class Ensemble { DeltaConstrained, HMassed };

struct ModelParams {
  double beta = 1.0;
  double h = 0.0;
  Ensemble ensemble = Ensemble::DeltaConstrained;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("ModelParams: beta must be > 0");
    if (!(h >= 0.0)) throw std::invalid_argument("ModelParams: h must be >= 0");
    if (ensemble == Ensemble::HMassed && !(h > 0.0))
      throw std::invalid_argument("ModelParams: HMassed ensemble needs h > 0");
  }
};

struct FieldConfig {
  Vector t;
  Vector s;
};

using SpinMatrix = Eigen::Matrix2cd;  // stores M = S sigma3 (Hermitian, det 1)

// Overflow guards.  Configurations this far out are unphysical for every
// supported run; report them instead of letting inf/nan propagate.
inline void check_t_range(const Vector& t) {
  for (int i = 0; i < t.size(); ++i)
    if (!(std::abs(t(i)) <= 700.0))
      throw std::domain_error("t overflow: |t| > 700 at site " + std::to_string(i));
}

inline double edge_weight(const Vector& t, int a, int b) {
  const double sum = t(a) + t(b);
  if (!(sum <= 1400.0))
    throw std::domain_error("t overflow: t_a + t_b > 1400 on edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ")");
  const double w = std::exp(sum);
  if (!std::isfinite(w))
    throw std::domain_error("t overflow: edge weight e^{t_a+t_b} not finite on edge (" +
                            std::to_string(a) + "," + std::to_string(b) + ")");
  return w;
}

inline SpinMatrix horo_to_matrix(double t, double s) {
  if (!(std::abs(t) <= 700.0)) throw std::domain_error("horo_to_matrix: |t| > 700");
  const double et = std::exp(t);
  const double diag = std::cosh(t) + 0.5 * s * s * et;
  SpinMatrix m;
  m(0, 0) = diag;
  m(1, 1) = diag;
  m(0, 1) = std::complex<double>(std::sinh(t) - 0.5 * s * s * et, -s * et);
  m(1, 0) = std::complex<double>(std::sinh(t) - 0.5 * s * s * et, s * et);
  return m;
}

// (1/2) beta sum_edges Tr(S_i S_j) + (1/2) h sum_sites Tr(sigma3 S_j).
// Inputs are the Hermitian matrices M = S sigma3; each must have det 1.
inline double action_matrix(const std::vector<SpinMatrix>& spins, const ModelParams& p,
                            const Lattice& lat) {
  p.validate();
  if (static_cast<int>(spins.size()) != lat.num_sites)
    throw std::invalid_argument("action_matrix: spin count mismatch");
  SpinMatrix s3 = SpinMatrix::Zero();
  s3(0, 0) = 1.0;
  s3(1, 1) = -1.0;
  for (int j = 0; j < lat.num_sites; ++j) {
    const auto& m = spins[j];
    const std::complex<double> det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (std::abs(det - 1.0) > 1e-9)
      throw std::invalid_argument("action_matrix: det(M) != 1 at site " + std::to_string(j));
    if ((m - m.adjoint()).norm() > 1e-9 * (1.0 + m.norm()))
      throw std::invalid_argument("action_matrix: M not Hermitian at site " + std::to_string(j));
  }
  double edge_sum = 0.0;
  for (const auto& e : lat.edges) {
    // Tr(S_a S_b) = Tr(M_a sigma3 M_b sigma3); real for our spins.
    const std::complex<double> tr = (spins[e.a] * s3 * spins[e.b] * s3).trace();
    edge_sum += tr.real();
  }
  double site_sum = 0.0;
  for (int j = 0; j < lat.num_sites; ++j) site_sum += spins[j].trace().real();
  return 0.5 * p.beta * edge_sum + 0.5 * p.h * site_sum;
}

// Same energy evaluated directly in horospherical coordinates.  In the
// DeltaConstrained ensemble the h s^2 e^t site term is omitted.
inline double action_horo(const FieldConfig& f, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (f.t.size() != lat.num_sites || f.s.size() != lat.num_sites)
    throw std::invalid_argument("action_horo: field size mismatch");
  check_t_range(f.t);
  double a = 0.0;
  for (const auto& e : lat.edges) {
    const double dt = f.t(e.a) - f.t(e.b);
    const double ds = f.s(e.a) - f.s(e.b);
    a += p.beta * (std::cosh(dt) + 0.5 * ds * ds * edge_weight(f.t, e.a, e.b));
  }
  for (int j = 0; j < lat.num_sites; ++j) {
    a += p.h * std::cosh(f.t(j));
    if (p.ensemble == Ensemble::HMassed) a += 0.5 * p.h * f.s(j) * f.s(j) * std::exp(f.t(j));
  }
  return a;
}

// D(t): quadratic form sum_edges e^{t_i + t_j} (s_i - s_j)^2.  At t = 0 this
// is the graph Laplacian -Delta.
inline SymmetricOperator build_D(const Vector& t, const Lattice& lat, Storage storage = Storage::Auto) {
  if (t.size() != lat.num_sites) throw std::invalid_argument("build_D: size mismatch");
  check_t_range(t);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(4 * lat.edges.size());
  for (const auto& e : lat.edges) {
    const double w = edge_weight(t, e.a, e.b);
    trips.emplace_back(e.a, e.a, w);
    trips.emplace_back(e.b, e.b, w);
    trips.emplace_back(e.a, e.b, -w);
    trips.emplace_back(e.b, e.a, -w);
  }
  return SymmetricOperator::from_triplets(lat.num_sites, trips, storage);
}

namespace detail {

// beta D + h diag(e^t), the s-precision matrix of the HMassed ensemble.
inline Matrix massed_matrix(const Vector& t, const ModelParams& p, const Lattice& lat) {
  Matrix m = p.beta * build_D(t, lat, Storage::Dense).dense();
  for (int j = 0; j < lat.num_sites; ++j) m(j, j) += p.h * std::exp(t(j));
  return m;
}

inline SparseMatrix massed_matrix_sparse(const Vector& t, const ModelParams& p, const Lattice& lat) {
  SparseMatrix m = p.beta * build_D(t, lat, Storage::Sparse).sparse();
  for (int j = 0; j < lat.num_sites; ++j) m.coeffRef(j, j) += p.h * std::exp(t(j));
  return m;
}

}  // namespace detail

inline double effective_action(const Vector& t, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (t.size() != lat.num_sites) throw std::invalid_argument("effective_action: size mismatch");
  check_t_range(t);
  double e = 0.0;
  for (const auto& ed : lat.edges) e += p.beta * std::cosh(t(ed.a) - t(ed.b));
  for (int j = 0; j < lat.num_sites; ++j) e += -t(j) + p.h * std::cosh(t(j));

  if (p.ensemble == Ensemble::DeltaConstrained) {
    if (lat.num_sites >= kDenseLimit) {
      SparseMatrix m = p.beta * build_D(t, lat, Storage::Sparse).sparse();
      e += 0.5 * logdet_projected(SymmetricOperator(std::move(m)), "beta D(t)");
    } else {
      Matrix m = p.beta * build_D(t, lat, Storage::Dense).dense();
      e += 0.5 * logdet_projected(SymmetricOperator(std::move(m)), "beta D(t)");
    }
  } else {
    if (lat.num_sites >= kDenseLimit)
      e += 0.5 * logdet_spd(detail::massed_matrix_sparse(t, p, lat), "beta D(t) + h e^t");
    else
      e += 0.5 * logdet_spd(detail::massed_matrix(t, p, lat), "beta D(t) + h e^t");
  }
  return e;
}

// Gradient of effective_action.  Edge/site terms are elementary; the C-term
// contributes (1/2) Tr( C d/dt_i [precision] ) with C the s-covariance of the
// ensemble.  For DeltaConstrained that reduces to
//   dC/dt_i = sum_{j ~ i} e^{t_i+t_j} ( G_ii + G_jj - 2 G_ij ) / 2,  G = pinv(D(t)),
// which is the mean of U_i(s) = sum_{j~i} e^{t_i+t_j}(s_i - s_j)^2 in the
// s-ensemble with weight exp(-(s, D s)) delta(sum s).
inline Vector grad_effective_action(const Vector& t, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (t.size() != lat.num_sites) throw std::invalid_argument("grad_effective_action: size mismatch");
  check_t_range(t);
  const int n = lat.num_sites;
  Vector g = Vector::Zero(n);
  for (const auto& e : lat.edges) {
    const double sh = std::sinh(t(e.a) - t(e.b));
    g(e.a) += p.beta * sh;
    g(e.b) -= p.beta * sh;
  }
  for (int j = 0; j < n; ++j) g(j) += -1.0 + p.h * std::sinh(t(j));

  if (p.ensemble == Ensemble::DeltaConstrained) {
    // C-term derivative via the pseudo-inverse of D(t) on the zero-sum
    // subspace (the beta factor inside logdet is t-independent).
    const Matrix q = helmert_basis(n);
    const Matrix d = build_D(t, lat, Storage::Dense).dense();
    Eigen::LLT<Matrix> llt(Matrix(q.transpose() * d * q));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("grad_effective_action: projected D(t) not positive definite");
    const Matrix green = q * llt.solve(Matrix::Identity(n - 1, n - 1)) * q.transpose();
    for (const auto& e : lat.edges) {
      const double w = edge_weight(t, e.a, e.b);
      const double var = green(e.a, e.a) + green(e.b, e.b) - 2.0 * green(e.a, e.b);
      g(e.a) += 0.5 * w * var;
      g(e.b) += 0.5 * w * var;
    }
  } else {
    const Matrix m = detail::massed_matrix(t, p, lat);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("grad_effective_action: massed matrix not positive definite");
    const Matrix c = llt.solve(Matrix::Identity(n, n));
    for (const auto& e : lat.edges) {
      const double w = edge_weight(t, e.a, e.b);
      const double var = c(e.a, e.a) + c(e.b, e.b) - 2.0 * c(e.a, e.b);
      g(e.a) += 0.5 * p.beta * w * var;
      g(e.b) += 0.5 * p.beta * w * var;
    }
    for (int j = 0; j < n; ++j) g(j) += 0.5 * p.h * std::exp(t(j)) * c(j, j);
  }
  return g;
}

// Value and gradient of effective_action from one factorization (the
// Langevin kernel calls this once per proposal).  Matches the two separate
// functions above to round-off.
struct EnergyGrad {
  double value = 0.0;
  Vector grad;
};

inline EnergyGrad effective_action_and_grad(const Vector& t, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (t.size() != lat.num_sites) throw std::invalid_argument("effective_action_and_grad: size mismatch");
  check_t_range(t);
  const int n = lat.num_sites;
  EnergyGrad out;
  out.grad = Vector::Zero(n);
  for (const auto& e : lat.edges) {
    const double dt = t(e.a) - t(e.b);
    out.value += p.beta * std::cosh(dt);
    const double sh = std::sinh(dt);
    out.grad(e.a) += p.beta * sh;
    out.grad(e.b) -= p.beta * sh;
  }
  for (int j = 0; j < n; ++j) {
    out.value += -t(j) + p.h * std::cosh(t(j));
    out.grad(j) += -1.0 + p.h * std::sinh(t(j));
  }
  if (p.ensemble == Ensemble::DeltaConstrained) {
    const Matrix q = helmert_basis(n);
    const Matrix m = q.transpose() * (p.beta * build_D(t, lat, Storage::Dense).dense()) * q;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("effective_action_and_grad: projected D(t) not positive definite");
    double ld = 0.0;
    for (int i = 0; i < n - 1; ++i) ld += std::log(llt.matrixLLT()(i, i));
    out.value += ld;  // = (1/2) logdet
    // Physical s-covariance pinv(beta D); the C-term derivative is
    // (beta/2) w (C_ii + C_jj - 2 C_ij) per edge, as in the massed branch.
    const Matrix green = q * llt.solve(Matrix::Identity(n - 1, n - 1)) * q.transpose();
    for (const auto& e : lat.edges) {
      const double w = edge_weight(t, e.a, e.b);
      const double var = green(e.a, e.a) + green(e.b, e.b) - 2.0 * green(e.a, e.b);
      out.grad(e.a) += 0.5 * p.beta * w * var;
      out.grad(e.b) += 0.5 * p.beta * w * var;
    }
  } else {
    const Matrix m = detail::massed_matrix(t, p, lat);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("effective_action_and_grad: massed matrix not positive definite");
    double ld = 0.0;
    for (int i = 0; i < n; ++i) ld += std::log(llt.matrixLLT()(i, i));
    out.value += ld;
    const Matrix c = llt.solve(Matrix::Identity(n, n));
    for (const auto& e : lat.edges) {
      const double w = edge_weight(t, e.a, e.b);
      const double var = c(e.a, e.a) + c(e.b, e.b) - 2.0 * c(e.a, e.b);
      out.grad(e.a) += 0.5 * p.beta * w * var;
      out.grad(e.b) += 0.5 * p.beta * w * var;
    }
    for (int j = 0; j < n; ++j) out.grad(j) += 0.5 * p.h * std::exp(t(j)) * c(j, j);
  }
  return out;
}

// (Tr sigma3 S_0)^2 = (2 cosh t_0 + s_0^2 e^{t_0})^2, the symmetry-breaking
// observable at the origin.
inline double order_parameter(const FieldConfig& f) {
  if (f.t.size() < 1) throw std::invalid_argument("order_parameter: empty field");
  const double v = 2.0 * std::cosh(f.t(0)) + f.s(0) * f.s(0) * std::exp(f.t(0));
  return v * v;
}

}  // namespace horosim
