#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "horosim/lattice.hpp"
#include "horosim/linalg.hpp"
#include "horosim/model.hpp"

// Analytic curvature of the effective t-action via Gaussian (Wick)
// covariances of the s-field, plus the positivity certificate
//   E''(t) >= -(beta - 1/2) Delta + h.
namespace horosim {

// Covariance of the s-field at fixed t.
//  * DeltaConstrained: pseudo-inverse of beta D(t) on the zero-sum subspace
//    (computed in the fixed Helmert basis).
//  * HMassed: (beta D(t) + h diag(e^t))^{-1}.
struct SCovariance {
  Matrix c;
  Ensemble ensemble = Ensemble::DeltaConstrained;
};

inline SCovariance s_covariance(const Vector& t, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (t.size() != lat.num_sites) throw std::invalid_argument("s_covariance: size mismatch");
  if (lat.num_sites >= kDenseLimit)
    throw std::invalid_argument("s_covariance: dense covariance limited to < 4096 sites");
  const int n = lat.num_sites;
  SCovariance out;
  out.ensemble = p.ensemble;
  if (p.ensemble == Ensemble::DeltaConstrained) {
    const Matrix q = helmert_basis(n);
    const Matrix m = q.transpose() * (p.beta * build_D(t, lat, Storage::Dense).dense()) * q;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("s_covariance: projected beta D(t) not positive definite");
    out.c = q * llt.solve(Matrix::Identity(n - 1, n - 1)) * q.transpose();
  } else {
    const Matrix m = detail::massed_matrix(t, p, lat);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("s_covariance: beta D(t) + h e^t not positive definite");
    out.c = llt.solve(Matrix::Identity(n, n));
  }
  return out;
}

// mean of U_i(s) = sum_{j ~ i} e^{t_i + t_j} (s_i - s_j)^2 for Gaussian s
// with covariance C: <U_i> = sum_{j ~ i} w_ij (C_ii + C_jj - 2 C_ij).
inline Vector mean_U(const Vector& t, const SCovariance& cov, const Lattice& lat) {
  if (t.size() != lat.num_sites || cov.c.rows() != lat.num_sites)
    throw std::invalid_argument("mean_U: size mismatch");
  Vector u = Vector::Zero(lat.num_sites);
  for (const auto& e : lat.edges) {
    const double w = edge_weight(t, e.a, e.b);
    const double var = cov.c(e.a, e.a) + cov.c(e.b, e.b) - 2.0 * cov.c(e.a, e.b);
    u(e.a) += w * var;
    u(e.b) += w * var;
  }
  return u;
}

// Wick covariance K_ij = Cov(U_i, U_j).  For Gaussian s,
//   Cov((s_a - s_b)^2, (s_c - s_d)^2) = 2 (C_ac - C_ad - C_bc + C_bd)^2,
// so K is entrywise nonnegative by construction.
inline Matrix K_matrix(const Vector& t, const SCovariance& cov, const Lattice& lat) {
  if (t.size() != lat.num_sites || cov.c.rows() != lat.num_sites)
    throw std::invalid_argument("K_matrix: size mismatch");
  const int n = lat.num_sites;
  const Matrix& c = cov.c;
  Matrix k = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int a : lat.neighbors[i]) {
      const double wia = edge_weight(t, i, a);
      for (int j = 0; j < n; ++j) {
        for (int b : lat.neighbors[j]) {
          const double cc = c(i, j) - c(i, b) - c(a, j) + c(a, b);
          k(i, j) += wia * edge_weight(t, j, b) * 2.0 * cc * cc;
        }
      }
    }
  }
  return k;
}

// Full curvature report at one configuration (DeltaConstrained effective
// action).  The C-term Hessian is assembled from the decomposition
//   C'' = (2 <U> delta - K) + R,
//   R_ij = -<U_i> delta_ij + e^{t_i+t_j} <(s_i - s_j)^2>  (edges only),
// where <.> is the s-average with weight exp(-(s, D(t) s)) delta(sum s),
// i.e. covariance pinv(2 D(t)).  In that normalization the identities below
// hold exactly for every beta:
//   sum_j K_ij = 2 <U_i>,  K >= 0 entrywise,  2 <U> delta - K >= 0,
//   R <= 0 with zero row sums,  e^{t_i+t_j} <(s_i-s_j)^2> <= 1/2.
struct HessianReport {
  Vector mean_u;              // <U_i>
  Matrix k;                   // Cov(U_i, U_j)
  Matrix r;                   // off-diagonal remainder
  Matrix c_hess;              // Hessian of the C-term
  Matrix e_hess;              // full Hessian of the effective action
  double rowsum_residual = 0.0;        // max_i |sum_j K_ij - 2 <U_i>| / (1 + 2 <U_i>)
  double k_min_entry = 0.0;            // min_ij K_ij
  double psd_2u_minus_k = 0.0;         // lambda_min(2 <U> delta - K)
  double max_edge_expectation = 0.0;   // max over edges of w <(s_i-s_j)^2>
  double r_max_eigenvalue = 0.0;       // lambda_max(R)
  double r_rowsum_residual = 0.0;      // max_i |sum_j R_ij|
};

inline HessianReport hessian_effective(const Vector& t, const ModelParams& p, const Lattice& lat) {
  p.validate();
  if (p.ensemble != Ensemble::DeltaConstrained)
    throw std::invalid_argument("hessian_effective: analytic Hessian is for the DeltaConstrained ensemble");
  if (t.size() != lat.num_sites) throw std::invalid_argument("hessian_effective: size mismatch");
  const int n = lat.num_sites;

  // Wick normalization: covariance pinv(2 D(t)), independent of beta.  This
  // is the normalization in which the row-sum identity is exact.
  ModelParams wick = p;
  wick.beta = 2.0;
  wick.h = 0.0;
  const SCovariance cov = s_covariance(t, wick, lat);

  HessianReport rep;
  rep.mean_u = mean_U(t, cov, lat);
  rep.k = K_matrix(t, cov, lat);

  rep.r = Matrix::Zero(n, n);
  rep.max_edge_expectation = 0.0;
  for (const auto& e : lat.edges) {
    const double w = edge_weight(t, e.a, e.b);
    const double ev = w * (cov.c(e.a, e.a) + cov.c(e.b, e.b) - 2.0 * cov.c(e.a, e.b));
    rep.r(e.a, e.b) += ev;
    rep.r(e.b, e.a) += ev;
    rep.max_edge_expectation = std::max(rep.max_edge_expectation, ev);
  }
  for (int i = 0; i < n; ++i) rep.r(i, i) = -rep.mean_u(i);

  rep.c_hess = -rep.k + rep.r;
  for (int i = 0; i < n; ++i) rep.c_hess(i, i) += 2.0 * rep.mean_u(i);

  // Full Hessian: cosh couplings on edges, C-term, h cosh t on the diagonal.
  rep.e_hess = rep.c_hess;
  for (const auto& e : lat.edges) {
    const double ch = p.beta * std::cosh(t(e.a) - t(e.b));
    rep.e_hess(e.a, e.a) += ch;
    rep.e_hess(e.b, e.b) += ch;
    rep.e_hess(e.a, e.b) -= ch;
    rep.e_hess(e.b, e.a) -= ch;
  }
  for (int i = 0; i < n; ++i) rep.e_hess(i, i) += p.h * std::cosh(t(i));

  // Lemma diagnostics.
  rep.rowsum_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    const double rs = rep.k.row(i).sum() - 2.0 * rep.mean_u(i);
    rep.rowsum_residual = std::max(rep.rowsum_residual, std::abs(rs) / (1.0 + 2.0 * rep.mean_u(i)));
  }
  rep.k_min_entry = rep.k.minCoeff();
  Matrix two_u_minus_k = -rep.k;
  for (int i = 0; i < n; ++i) two_u_minus_k(i, i) += 2.0 * rep.mean_u(i);
  rep.psd_2u_minus_k = smallest_eigenvalue(two_u_minus_k);
  rep.r_max_eigenvalue = -smallest_eigenvalue(Matrix(-rep.r));
  rep.r_rowsum_residual = rep.r.rowwise().sum().cwiseAbs().maxCoeff();
  return rep;
}

// lambda_min( E''(t) - ( (beta - 1/2)(-Delta) + h ) ).  Nonnegative (up to
// round-off) for beta >= 3/2 is the convexity certificate.
inline double convexity_certificate(const Vector& t, const ModelParams& p, const Lattice& lat) {
  const HessianReport rep = hessian_effective(t, p, lat);
  Matrix ref = (p.beta - 0.5) * laplacian(lat, Storage::Dense).dense();
  for (int i = 0; i < lat.num_sites; ++i) ref(i, i) += p.h;
  return smallest_eigenvalue(Matrix(rep.e_hess - ref));
}

}  // namespace horosim
