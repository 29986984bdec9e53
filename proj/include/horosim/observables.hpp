#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/hessian.hpp"
#include "horosim/lattice.hpp"
#include "horosim/model.hpp"
#include "horosim/sampler.hpp"
#include "horosim/stats.hpp"

namespace horosim {

// One inequality check with Monte-Carlo error: passes when
// lhs <= rhs + 3 * mc_error.
struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  double mc_error = 0.0;
  bool passed = false;
};

inline BoundCheck make_bound_check(const std::string& name, double lhs, double rhs, double mc_error) {
  BoundCheck b;
  b.name = name;
  b.lhs = lhs;
  b.rhs = rhs;
  b.slack = rhs - lhs;
  b.mc_error = mc_error;
  b.passed = lhs <= rhs + 3.0 * mc_error;
  return b;
}

// G = ( (beta - 1/2)(-Delta) + h )^{-1}.  For h = 0 the inverse is taken on
// the zero-sum subspace (the operator has the constants as kernel there).
// Row sums equal 1/h for h > 0; entries are positive.
inline Matrix reference_green(const Lattice& lat, double beta, double h) {
  if (!(beta > 0.5)) throw std::invalid_argument("reference_green: need beta > 1/2");
  if (!(h >= 0.0)) throw std::invalid_argument("reference_green: need h >= 0");
  if (lat.num_sites >= kDenseLimit)
    throw std::invalid_argument("reference_green: dense Green function limited to < 4096 sites");
  const int n = lat.num_sites;
  Matrix m = (beta - 0.5) * laplacian(lat, Storage::Dense).dense();
  if (h > 0.0) {
    for (int i = 0; i < n; ++i) m(i, i) += h;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("reference_green: matrix not positive definite");
    return llt.solve(Matrix::Identity(n, n));
  }
  const Matrix q = helmert_basis(n);
  Eigen::LLT<Matrix> llt(Matrix(q.transpose() * m * q));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("reference_green: projected matrix not positive definite");
  return q * llt.solve(Matrix::Identity(n - 1, n - 1)) * q.transpose();
}

// ---- chain observables ------------------------------------------------

inline ChainObservable ward_observable() {
  return {"ward", [](const SampleView& v) {
            double s = 0.0;
            for (int j = 0; j < v.lat.num_sites; ++j) s += std::sinh(v.t(j));
            return v.params.h * s;
          }};
}

inline ChainObservable t0_observable() {
  return {"t0", [](const SampleView& v) { return v.t(0); }};
}

// (Tr sigma3 S_0)^2 with s_0 integrated out analytically at fixed t:
//   <(2 cosh t0 + s0^2 e^{t0})^2>_s = 4 cosh^2 t0 + 4 cosh t0 e^{t0} C00 + 3 e^{2 t0} C00^2.
inline double order_parameter_rb(double t0, double c00) {
  const double ch = std::cosh(t0);
  const double et = std::exp(t0);
  return 4.0 * ch * ch + 4.0 * ch * et * c00 + 3.0 * et * et * c00 * c00;
}

inline ChainObservable order_parameter_observable_rb() {
  return {"obs_rb", [](const SampleView& v) { return order_parameter_rb(v.t(0), v.c00); }};
}

inline ChainObservable order_parameter_observable_raw() {
  return {"obs_raw", [](const SampleView& v) {
            return order_parameter(FieldConfig{v.t, v.s});
          }};
}

// s-covariance (0,0) and its square; their chain averages estimate the
// annealed moments <C00(t)^k>, k = 1, 2 (note <s0^4> = 3 <C00^2> pointwise).
inline ChainObservable c00_observable() {
  return {"c00", [](const SampleView& v) { return v.c00; }};
}
inline ChainObservable c00_sq_observable() {
  return {"c00_sq", [](const SampleView& v) { return v.c00 * v.c00; }};
}

struct SMoments {
  Estimate first;   // < C00(t) >
  Estimate second;  // < C00(t)^2 >
};

// From explicit t-samples (the chain-integrated path goes through
// c00_observable / c00_sq_observable instead).
inline SMoments s_moment_estimators(const std::vector<Vector>& t_samples, const ModelParams& p,
                                    const Lattice& lat) {
  if (t_samples.size() < 4) throw std::invalid_argument("s_moment_estimators: need >= 4 samples");
  std::vector<double> c1, c2;
  c1.reserve(t_samples.size());
  for (const auto& t : t_samples) {
    const double c = s_covariance(t, p, lat).c(0, 0);
    c1.push_back(c);
    c2.push_back(c * c);
  }
  return {estimate_from_series(c1), estimate_from_series(c2)};
}

// ---- Moment, tail, and identity checks on a t0 series -----------------

inline BoundCheck moment_bound_check(const std::vector<double>& t0_series, double alpha, double g00) {
  const Estimate m = estimate_from_series(t0_series);
  std::vector<double> y;
  y.reserve(t0_series.size());
  for (double t0 : t0_series) y.push_back(std::exp(alpha * (t0 - m.mean)));
  const Estimate e = estimate_from_series(y);
  return make_bound_check("moment_bound_alpha=" + std::to_string(alpha), e.mean,
                          std::exp(0.5 * alpha * alpha * g00), e.std_error);
}

inline BoundCheck tail_bound_check(const std::vector<double>& t0_series, double rho, double g00) {
  const Estimate m = estimate_from_series(t0_series);
  std::vector<double> y;
  y.reserve(t0_series.size());
  for (double t0 : t0_series) y.push_back(std::abs(t0 - m.mean) >= rho ? 1.0 : 0.0);
  const Estimate e = estimate_from_series(y);
  return make_bound_check("tail_bound_rho=" + std::to_string(rho), e.mean,
                          2.0 * std::exp(-rho * rho / (2.0 * g00)), e.std_error);
}

// -(1/4) G00 <= <t0> <= 1 + (1/4) G00, reported as two one-sided checks.
inline std::vector<BoundCheck> t0_sandwich_check(const Estimate& t0, double g00) {
  return {make_bound_check("t0_upper", t0.mean, 1.0 + 0.25 * g00, t0.std_error),
          make_bound_check("t0_lower", -t0.mean, 0.25 * g00, t0.std_error)};
}

inline BoundCheck ward_check(const Estimate& ward) {
  // Equality h sum_j <sinh t_j> = 1; expressed as |mean - 1| <= 3 sigma.
  BoundCheck b;
  b.name = "ward";
  b.lhs = ward.mean;
  b.rhs = 1.0;
  b.slack = 1.0 - ward.mean;
  b.mc_error = ward.std_error;
  b.passed = std::abs(ward.mean - 1.0) <= 3.0 * ward.std_error;
  return b;
}

// ---- weighted Laplacian (site-decaying weights) -----------------------

// Quadratic form sum_edges a_e (f_i - f_j)^2 with a_e the site weight
// (1 + |j|)^{-p} of the endpoint nearer the origin (minimal-image Euclidean
// distance; ties broken toward the lexicographically smaller coordinate
// tuple, which carries the same weight).  Returns the (0,0) entry of the
// inverse on the zero-sum subspace.  flagged marks p >= d - 2, where the
// infinite-volume Green function is not expected to stay bounded.
struct WeightedLaplacianResult {
  double green00 = 0.0;
  bool flagged = false;
};

inline WeightedLaplacianResult weighted_laplacian_check(const Lattice& lat, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("weighted_laplacian_check: need p >= 0");
  const int n = lat.num_sites;
  if (n >= kDenseLimit)
    throw std::invalid_argument("weighted_laplacian_check: dense path limited to < 4096 sites");
  std::vector<double> site_weight(n);
  for (int j = 0; j < n; ++j)
    site_weight[j] = std::pow(1.0 + lat.distance_from_origin(j), -p);
  Matrix m = Matrix::Zero(n, n);
  for (const auto& e : lat.edges) {
    const double da = lat.distance_from_origin(e.a);
    const double db = lat.distance_from_origin(e.b);
    int nearer;
    if (da < db)
      nearer = e.a;
    else if (db < da)
      nearer = e.b;
    else
      nearer = lat.coords(e.a) <= lat.coords(e.b) ? e.a : e.b;
    const double w = site_weight[nearer];
    m(e.a, e.a) += w;
    m(e.b, e.b) += w;
    m(e.a, e.b) -= w;
    m(e.b, e.a) -= w;
  }
  const Matrix q = helmert_basis(n);
  Eigen::LLT<Matrix> llt(Matrix(q.transpose() * m * q));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("weighted_laplacian_check: projected operator not positive definite");
  const Matrix c = q * llt.solve(Matrix::Identity(n - 1, n - 1)) * q.transpose();
  WeightedLaplacianResult res;
  res.green00 = c(0, 0);
  res.flagged = p >= static_cast<double>(lat.dimension) - 2.0;
  return res;
}

// ---- regularization shift (mass term vs zero-sum constraint) ----------

// R_h relates the two ensembles: E_hmassed - E_delta = R_h + (1/2) log h.
// Computed two independent ways and cross-checked:
//  (a) R_h = (1/2) Tr log(1 + h pinv(beta D) P_t) + (1/2) log (psi0, e^t psi0)
//      with P_t = P e^t P - P e^t P0 e^t P / (psi0, e^t psi0),
//      P0 = psi0 psi0^T, psi0 = 1/sqrt(n), P = 1 - P0;
//  (b) R_h = (1/2) logdet(beta D + h e^t) - (1/2) logdet(Q^T beta D Q)
//            - (1/2) log h.
struct RegularizationShift {
  double r_formula = 0.0;      // route (a)
  double r_logdet = 0.0;       // route (b)
  double lambda_min_pt = 0.0;  // smallest eigenvalue of P_t (PSD up to round-off)
  double psi_weight = 0.0;     // (psi0, e^t psi0) = mean of e^{t_j}
};

inline RegularizationShift regularization_shift(const Vector& t, const ModelParams& p,
                                                const Lattice& lat) {
  p.validate();
  if (!(p.h > 0.0)) throw std::invalid_argument("regularization_shift: need h > 0");
  if (t.size() != lat.num_sites) throw std::invalid_argument("regularization_shift: size mismatch");
  check_t_range(t);
  const int n = lat.num_sites;
  const Vector et = t.array().exp().matrix();
  const double mu = et.mean();  // (psi0, e^t psi0)

  RegularizationShift out;
  out.psi_weight = mu;

  // P_t in full coordinates: P diag(e^t) P - (P v)(P v)^T / mu, v = e^t / n^(1/2) scaled out.
  Matrix pt = Matrix::Zero(n, n);
  {
    const Matrix p0 = Matrix::Constant(n, n, 1.0 / n);
    const Matrix proj = Matrix::Identity(n, n) - p0;
    const Matrix pep = proj * et.asDiagonal() * proj;
    const Vector pv = proj * et / std::sqrt(static_cast<double>(n));
    pt = pep - (pv * pv.transpose()) / mu;
  }
  out.lambda_min_pt = smallest_eigenvalue(pt);

  const Matrix q = helmert_basis(n);
  const Matrix mt = q.transpose() * (p.beta * build_D(t, lat, Storage::Dense).dense()) * q;
  Eigen::LLT<Matrix> llt(mt);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("regularization_shift: projected beta D(t) not positive definite");

  // (a): symmetrized as logdet(1 + h L^{-1} P~ L^{-T}), P~ = Q^T P_t Q.
  const Matrix ptq = q.transpose() * pt * q;
  const Matrix linv_p = llt.matrixL().solve(ptq).transpose();
  const Matrix sym = Matrix::Identity(n - 1, n - 1) + p.h * llt.matrixL().solve(linv_p);
  out.r_formula = 0.5 * logdet_spd(Matrix((sym + sym.transpose()) / 2.0), "1 + h L^-1 Pt L^-T") +
                  0.5 * std::log(mu);

  // (b): straight log-determinant difference.
  double ld_mt = 0.0;
  for (int i = 0; i < n - 1; ++i) ld_mt += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double ld_massed = logdet_spd(detail::massed_matrix(t, p, lat), "beta D + h e^t");
  out.r_logdet = 0.5 * ld_massed - 0.5 * ld_mt - 0.5 * std::log(p.h);
  return out;
}

// ---- symmetry-breaking study ------------------------------------------

// Ratio estimate num/den from per-sample series, with a batch-means error
// bar via the usual linearization.
inline Estimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den) {
  if (num.size() != den.size() || num.size() < 4)
    throw std::invalid_argument("ratio_estimate: bad series");
  const long n = static_cast<long>(num.size());
  const long nb = static_cast<long>(std::floor(std::sqrt(static_cast<double>(n))));
  const long m = n / nb;
  double nsum = 0.0, dsum = 0.0;
  for (long i = 0; i < nb * m; ++i) {
    nsum += num[i];
    dsum += den[i];
  }
  const double r = nsum / dsum;
  const double dmean = dsum / static_cast<double>(nb * m);
  double var = 0.0;
  for (long b = 0; b < nb; ++b) {
    double nb_mean = 0.0, db_mean = 0.0;
    for (long i = b * m; i < (b + 1) * m; ++i) {
      nb_mean += num[i];
      db_mean += den[i];
    }
    nb_mean /= static_cast<double>(m);
    db_mean /= static_cast<double>(m);
    const double z = (nb_mean - r * db_mean) / dmean;
    var += z * z;
  }
  var /= static_cast<double>(nb - 1);
  Estimate e;
  e.mean = r;
  e.std_error = std::sqrt(var / static_cast<double>(nb));
  e.n_samples = n;
  e.n_effective = static_cast<double>(nb);
  return e;
}

struct StudyRow {
  int dimension = 0;
  int side = 0;
  int num_sites = 0;
  double beta = 0.0;
  double h = 0.0;
  Estimate obs_delta;     // <(Tr sigma3 S_0)^2> in the DeltaConstrained chain
  Estimate obs_hmassed;   // same observable transported to the h-massed ensemble
  double ess_fraction = 0.0;  // effective sample size of the reweighting
  Estimate t0;
  double g00 = 0.0;
  Estimate ward;
  double accept_site = 0.0;
};

// One study row: run a DeltaConstrained chain, estimate the observable both
// directly and reweighted to the h-massed ensemble by exp(-R_h) per sample
// (<F>_h = <F w>_delta / <w>_delta).  The transported observable integrates
// s0 against the h-massed covariance.
inline StudyRow symmetry_breaking_study_row(int dimension, int side, const ModelParams& params,
                                            const ChainConfig& cfg, std::uint64_t seed,
                                            std::uint64_t stream) {
  if (params.ensemble != Ensemble::DeltaConstrained)
    throw std::invalid_argument("study: chain ensemble must be DeltaConstrained");
  if (!(params.h > 0.0)) throw std::invalid_argument("study: need h > 0");
  const Lattice lat = build_lattice(dimension, std::vector<int>(dimension, side));

  ModelParams massed = params;
  massed.ensemble = Ensemble::HMassed;

  std::vector<ChainObservable> obs = {ward_observable(), t0_observable(), order_parameter_observable_rb()};
  obs.push_back({"rh", [massed, &lat](const SampleView& v) {
                   const double ld = logdet_spd(detail::massed_matrix(v.t, massed, v.lat),
                                                "beta D + h e^t");
                   return 0.5 * ld - 0.5 * v.logdet_prec - 0.5 * std::log(massed.h);
                 }});
  obs.push_back({"obs_h_integrand", [massed](const SampleView& v) {
                   Eigen::LLT<Matrix> llt(detail::massed_matrix(v.t, massed, v.lat));
                   if (llt.info() != Eigen::Success)
                     throw std::runtime_error("study: massed matrix not positive definite");
                   Vector e0 = Vector::Zero(v.lat.num_sites);
                   e0(0) = 1.0;
                   const double ch00 = llt.matrixL().solve(e0).squaredNorm();
                   return order_parameter_rb(v.t(0), ch00);
                 }});

  std::mt19937_64 rng = make_stream(seed, stream);
  const ChainResult res = run_chain(params, lat, cfg, obs, rng);

  const auto& rh = res.series.at("rh");
  const auto& fh = res.series.at("obs_h_integrand");
  std::vector<double> rs = rh;
  std::nth_element(rs.begin(), rs.begin() + rs.size() / 2, rs.end());
  const double r0 = rs[rs.size() / 2];
  std::vector<double> w(rh.size()), wf(rh.size());
  double wsum = 0.0, w2sum = 0.0;
  for (size_t i = 0; i < rh.size(); ++i) {
    w[i] = std::exp(-(rh[i] - r0));
    wf[i] = w[i] * fh[i];
    wsum += w[i];
    w2sum += w[i] * w[i];
  }

  StudyRow row;
  row.dimension = dimension;
  row.side = side;
  row.num_sites = lat.num_sites;
  row.beta = params.beta;
  row.h = params.h;
  row.obs_delta = res.estimates.at("obs_rb");
  row.obs_hmassed = ratio_estimate(wf, w);
  row.ess_fraction = (wsum * wsum) / (static_cast<double>(w.size()) * w2sum);
  row.t0 = res.estimates.at("t0");
  row.g00 = reference_green(lat, params.beta, params.h)(0, 0);
  row.ward = res.estimates.at("ward");
  row.accept_site = res.accept_site;
  return row;
}

}  // namespace horosim
