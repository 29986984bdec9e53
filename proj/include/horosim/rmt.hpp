#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/lattice.hpp"
#include "horosim/linalg.hpp"
#include "horosim/quadrature.hpp"
#include "horosim/stats.hpp"

// Band random-matrix companion: Hermitian H indexed by (site, orbital) with
// independent Gaussian entries whose variances are set by a site-profile J,
//   E[ H_ab conj(H_ab) ] = J_{site(a), site(b)},
// complex off the diagonal (E[H_ab^2] = 0), real on it.  This realizes the
// characteristic function E exp(i Tr HK) = exp(-1/2 sum_ij J_ij Tr(Pi_i K Pi_j K)).
namespace horosim::rmt {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

enum class ProfileKind { ExponentialW, Cubes };

// Single site, no edges.  The sigma-model lattice builder requires side
// lengths >= 2, but the band-matrix ensembles are well defined for |Lambda|
// = 1 (one dense block), and the B1 quadrature oracle lives there.
inline Lattice single_site_lattice() {
  Lattice lat;
  lat.dimension = 1;
  lat.sides = {1};
  lat.num_sites = 1;
  lat.neighbors.resize(1);
  return lat;
}

struct BandSpec {
  Lattice lat;
  int orbitals = 1;  // N
  Matrix j;          // |Lambda| x |Lambda| site-profile of variances
  ProfileKind kind = ProfileKind::ExponentialW;
  double j_min_eigenvalue = 0.0;  // flagged, not fatal: the Gaussian field
  bool psd = true;                // interpretation needs J >= 0 as a matrix

  int matrix_size() const { return lat.num_sites * orbitals; }
  int site_of(int a) const { return a / orbitals; }

  void validate() const {
    if (orbitals < 1) throw std::invalid_argument("BandSpec: orbitals >= 1");
    if (j.rows() != lat.num_sites || j.cols() != lat.num_sites)
      throw std::invalid_argument("BandSpec: J size mismatch");
    for (int x = 0; x < j.rows(); ++x)
      for (int y = 0; y < j.cols(); ++y)
        if (!(j(x, y) >= 0.0))
          throw std::invalid_argument("BandSpec: negative variance J(" + std::to_string(x) + "," +
                                      std::to_string(y) + ")");
  }
};

inline void finalize_spec(BandSpec& spec) {
  spec.validate();
  spec.j_min_eigenvalue = smallest_eigenvalue(Matrix((spec.j + spec.j.transpose()) / 2.0));
  spec.psd = spec.j_min_eigenvalue >= -1e-12;
}

// J = ( -W^2 Delta + 1 )^{-1}: smooth band profile; rows sum to 1 because
// the Laplacian kills constants.
inline BandSpec build_J_exponential(const Lattice& lat, int orbitals, double w) {
  if (!(w >= 0.0)) throw std::invalid_argument("build_J_exponential: need W >= 0");
  BandSpec spec;
  spec.lat = lat;
  spec.orbitals = orbitals;
  spec.kind = ProfileKind::ExponentialW;
  const int n = lat.num_sites;
  Matrix m = w * w * laplacian(lat, Storage::Dense).dense() + Matrix::Identity(n, n);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("build_J_exponential: -W^2 Delta + 1 not positive definite");
  spec.j = llt.solve(Matrix::Identity(n, n));
  finalize_spec(spec);
  return spec;
}

// Cube profile: J0 within a cube of side w, J1 for face-adjacent cubes
// (periodic), zero otherwise.  Every side length must be divisible by w.
inline BandSpec build_J_cubes(const Lattice& lat, int orbitals, int w, double j0, double j1) {
  if (w < 1) throw std::invalid_argument("build_J_cubes: cube side must be >= 1");
  for (int k = 0; k < lat.dimension; ++k)
    if (lat.sides[k] % w != 0)
      throw std::invalid_argument("build_J_cubes: side " + std::to_string(lat.sides[k]) +
                                  " not divisible by cube side " + std::to_string(w));
  BandSpec spec;
  spec.lat = lat;
  spec.orbitals = orbitals;
  spec.kind = ProfileKind::Cubes;
  const int n = lat.num_sites;
  std::vector<std::vector<int>> cube(n, std::vector<int>(lat.dimension));
  for (int s = 0; s < n; ++s) {
    const auto c = lat.coords(s);
    for (int k = 0; k < lat.dimension; ++k) cube[s][k] = c[k] / w;
  }
  spec.j = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (cube[x] == cube[y]) {
        spec.j(x, y) = j0;
        continue;
      }
      int diff_dims = 0;
      bool adjacent = true;
      for (int k = 0; k < lat.dimension; ++k) {
        const int nk = lat.sides[k] / w;  // cubes per direction
        int d = std::abs(cube[x][k] - cube[y][k]);
        d = std::min(d, nk - d);  // periodic
        if (d == 0) continue;
        if (d == 1)
          ++diff_dims;
        else
          adjacent = false;
      }
      if (adjacent && diff_dims == 1) spec.j(x, y) = j1;
    }
  finalize_spec(spec);
  return spec;
}

inline CMatrix sample_H(const BandSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = spec.matrix_size();
  CMatrix h = CMatrix::Zero(m, m);
  for (int a = 0; a < m; ++a) {
    const double jaa = spec.j(spec.site_of(a), spec.site_of(a));
    h(a, a) = std::sqrt(jaa) * normal(rng);
    for (int b = a + 1; b < m; ++b) {
      const double jab = spec.j(spec.site_of(a), spec.site_of(b));
      const double sigma = std::sqrt(0.5 * jab);
      const Complex z(sigma * normal(rng), sigma * normal(rng));
      h(a, b) = z;
      h(b, a) = std::conj(z);
    }
  }
  return h;
}

// Local density of states and two-point resolvent modulus at sites x, y:
//   rho = pi^{-1} Im Tr[ (H - E - i eps)^{-1} Pi_x ],
//   abs2 = sum over orbitals a in x, b in y of |(H - E - i eps)^{-1}_{ab}|^2.
// Every solved column is checked against the deterministic resolvent bound
// ||(H - E - i eps)^{-1}|| <= 1/eps.
struct ResolventStats {
  Estimate rho;
  Estimate abs2;
};

inline ResolventStats resolvent_stats(const BandSpec& spec, double energy, double eps, int x, int y,
                                      long draws, std::mt19937_64& rng) {
  spec.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("resolvent_stats: need eps > 0");
  if (x < 0 || x >= spec.lat.num_sites || y < 0 || y >= spec.lat.num_sites)
    throw std::invalid_argument("resolvent_stats: site out of range");
  if (draws < 4) throw std::invalid_argument("resolvent_stats: need >= 4 draws");
  const int m = spec.matrix_size();
  const int nn = spec.orbitals;
  std::vector<double> rho_series, abs2_series;
  rho_series.reserve(draws);
  abs2_series.reserve(draws);
  for (long d = 0; d < draws; ++d) {
    CMatrix a = sample_H(spec, rng);
    for (int i = 0; i < m; ++i) a(i, i) -= Complex(energy, eps);
    Eigen::PartialPivLU<CMatrix> lu(a);
    const auto solve_column = [&](int col) {
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(m);
      e(col) = 1.0;
      Eigen::VectorXcd g = lu.solve(e);
      if (g.norm() > (1.0 + 1e-12) / eps)
        throw std::runtime_error("resolvent_stats: resolvent bound ||G|| <= 1/eps violated");
      return g;
    };
    double rho = 0.0;
    double abs2 = 0.0;
    for (int k = 0; k < nn; ++k) {
      const Eigen::VectorXcd gx = solve_column(x * nn + k);
      rho += gx(x * nn + k).imag();
      if (y == x)
        for (int k2 = 0; k2 < nn; ++k2) abs2 += std::norm(gx(y * nn + k2));
    }
    if (y != x)
      for (int k = 0; k < nn; ++k) {
        const Eigen::VectorXcd gy = solve_column(y * nn + k);
        for (int k2 = 0; k2 < nn; ++k2) abs2 += std::norm(gy(x * nn + k2));
      }
    rho_series.push_back(rho / M_PI);
    abs2_series.push_back(abs2);
  }
  return {estimate_from_series(rho_series), estimate_from_series(abs2_series)};
}

// Importance-sampled average in the determinant-deformed ensemble:
//   B1 = < |Tr (H-E+i eps)^{-1} Pi_ell|^2 >_deformed
//      = E[ obs * w ] / E[ w ],  w = |Det(H-E+i eps)|^{-2},
// over draws from the undeformed ensemble.  Aborts when the weights
// degenerate (effective sample size below 1% of draws).
struct B1Result {
  Estimate b1;
  double ess_fraction = 0.0;
};

inline B1Result deformed_average_B1(const BandSpec& spec, double energy, double eps, int ell,
                                    long draws, std::mt19937_64& rng) {
  spec.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("deformed_average_B1: need eps > 0");
  if (ell < 0 || ell >= spec.lat.num_sites)
    throw std::invalid_argument("deformed_average_B1: site out of range");
  if (draws < 16) throw std::invalid_argument("deformed_average_B1: need >= 16 draws");
  const int m = spec.matrix_size();
  const int nn = spec.orbitals;
  std::vector<double> logw(draws);
  std::vector<double> obs(draws);
  for (long d = 0; d < draws; ++d) {
    CMatrix a = sample_H(spec, rng);
    for (int i = 0; i < m; ++i) a(i, i) -= Complex(energy, -eps);  // H - E + i eps
    Eigen::PartialPivLU<CMatrix> lu(a);
    double log_abs_det = 0.0;
    for (int i = 0; i < m; ++i) log_abs_det += std::log(std::abs(lu.matrixLU()(i, i)));
    logw[d] = -2.0 * log_abs_det;
    Complex tr = 0.0;
    for (int k = 0; k < nn; ++k) {
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(m);
      e(ell * nn + k) = 1.0;
      tr += lu.solve(e)(ell * nn + k);
    }
    obs[d] = std::norm(tr);
  }
  const double lmax = *std::max_element(logw.begin(), logw.end());
  double wsum = 0.0, w2sum = 0.0, wxsum = 0.0;
  std::vector<double> w(draws);
  for (long d = 0; d < draws; ++d) {
    w[d] = std::exp(logw[d] - lmax);
    wsum += w[d];
    w2sum += w[d] * w[d];
    wxsum += w[d] * obs[d];
  }
  B1Result out;
  out.ess_fraction = (wsum * wsum) / (static_cast<double>(draws) * w2sum);
  if (out.ess_fraction < 0.01)
    throw std::runtime_error(
        "deformed_average_B1: weight effective sample size below 1% of draws; "
        "increase eps or draws, or reduce the matrix size");
  const double ratio = wxsum / wsum;
  // Delta method for the ratio of means over iid draws.
  double var = 0.0;
  const double wmean = wsum / static_cast<double>(draws);
  for (long d = 0; d < draws; ++d) {
    const double z = w[d] * (obs[d] - ratio) / wmean;
    var += z * z;
  }
  var /= static_cast<double>(draws - 1);
  out.b1.mean = ratio;
  out.b1.std_error = std::sqrt(var / static_cast<double>(draws));
  out.b1.n_samples = draws;
  out.b1.n_effective = out.ess_fraction * static_cast<double>(draws);
  return out;
}

// Mean-field map from ensemble parameters to effective sigma-model
// parameters: rho = sqrt(4 N J0 - E^2) / (2 J0), beta = 2 J1 rho^2,
// h = 2 eps rho.
struct SaddleParams {
  double rho = 0.0;
  double beta = 0.0;
  double h = 0.0;
};

inline SaddleParams saddle_params(int orbitals, double j0, double j1, double energy, double eps) {
  if (orbitals < 1 || !(j0 > 0.0) || !(j1 >= 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("saddle_params: bad parameters");
  const double disc = 4.0 * orbitals * j0 - energy * energy;
  if (!(disc > 0.0))
    throw std::invalid_argument("saddle_params: energy outside the band (4 N J0 - E^2 <= 0)");
  SaddleParams sp;
  sp.rho = std::sqrt(disc) / (2.0 * j0);
  sp.beta = 2.0 * j1 * sp.rho * sp.rho;
  sp.h = 2.0 * eps * sp.rho;
  return sp;
}

// ---- push-forward check -----------------------------------------------

// Checks that for U-invariant F (a symmetric function of the eigenvalues of
// the n x n matrix phi^* phi, phi an N x n complex matrix),
//   L = integral of F(phi^* phi) over C^{N x n} (Lebesgue d Re d Im)
// is proportional to
//   R = integral of F(lambda) prod_{i<j} (lambda_i - lambda_j)^2
//       prod_k lambda_k^{N-n} d lambda
// with an F-independent constant.  R is the eigenvalue-coordinate form of
// the singular-value Jacobian prod (u_i - u_j)^2 (u_i + u_j)^2 prod u^{1+2(N-n)}
// under u = sqrt(lambda) (times 2^n for the substitution).  Under these
// conventions the (n, N) = (1, 1) ratio is exactly pi.
struct PushforwardRow {
  double l = 0.0;
  double l_err = 0.0;
  double r = 0.0;
  double ratio = 0.0;
  double ratio_err = 0.0;
};

struct PushforwardResult {
  std::vector<PushforwardRow> rows;
  // max over pairs of |ratio_k - ratio_j| / combined sigma, computed with
  // shared draws so the comparison is paired.
  double max_pair_z = 0.0;
};

using EigFn = std::function<double(const std::vector<double>&)>;

inline PushforwardResult pushforward_check(int n, int bign, const std::vector<EigFn>& fs,
                                           long draws, std::mt19937_64& rng) {
  if (n < 1 || n > 3 || bign < n)
    throw std::invalid_argument("pushforward_check: need 1 <= n <= 3 and N >= n");
  if (fs.empty()) throw std::invalid_argument("pushforward_check: no test functions");
  if (draws < 100) throw std::invalid_argument("pushforward_check: need >= 100 draws");

  // Reference integrals by tensor Gauss-Laguerre (integrand = F * jac * e^{+sum}).
  const int nodes = 48;
  const QuadratureRule gl = gauss_laguerre(nodes);
  const size_t nf = fs.size();
  std::vector<double> r(nf, 0.0), tail(nf, 0.0);
  std::vector<int> idx(n, 0);
  while (true) {
    std::vector<double> lam(n);
    double wq = 1.0;
    bool outer = false;
    for (int k = 0; k < n; ++k) {
      lam[k] = gl.nodes[idx[k]];
      wq *= gl.weights[idx[k]] * std::exp(gl.nodes[idx[k]]);
      if (idx[k] == nodes - 1) outer = true;
    }
    double jac = 1.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) jac *= (lam[i] - lam[j]) * (lam[i] - lam[j]);
    for (int k = 0; k < n; ++k) jac *= std::pow(lam[k], static_cast<double>(bign - n));
    for (size_t q = 0; q < nf; ++q) {
      const double fv = fs[q](lam);
      if (!(fv >= 0.0))
        throw std::invalid_argument("pushforward_check: test function must be nonnegative");
      const double contrib = fv * jac * wq;
      r[q] += contrib;
      if (outer) tail[q] += contrib;
    }
    int k = 0;
    for (; k < n; ++k) {
      if (++idx[k] < nodes) break;
      idx[k] = 0;
    }
    if (k == n) break;
  }
  for (size_t q = 0; q < nf; ++q) {
    if (!(r[q] > 0.0)) throw std::invalid_argument("pushforward_check: test function integrates to 0");
    if (tail[q] > 1e-6 * r[q])
      throw std::invalid_argument("pushforward_check: test function decays too slowly for the "
                                  "quadrature (tail check failed)");
  }

  // Monte-Carlo side: phi with iid standard complex Gaussian entries
  // (density pi^{-Nn} exp(-||phi||_F^2) w.r.t. Lebesgue), importance weight
  // pi^{Nn} exp(+||phi||_F^2) F(eigs).
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<RunningStat> lstat(nf);
  std::vector<std::vector<RunningStat>> dstat(nf, std::vector<RunningStat>(nf));
  const double lognorm = static_cast<double>(bign * n) * std::log(M_PI);
  for (long d = 0; d < draws; ++d) {
    CMatrix phi(bign, n);
    double norm2 = 0.0;
    for (int i = 0; i < bign; ++i)
      for (int j = 0; j < n; ++j) {
        const Complex z(normal(rng), normal(rng));
        phi(i, j) = z;
        norm2 += std::norm(z);
      }
    CMatrix mm = phi.adjoint() * phi;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(mm);
    if (es.info() != Eigen::Success) throw std::runtime_error("pushforward_check: eigensolver failed");
    std::vector<double> lam(n);
    for (int k = 0; k < n; ++k) lam[k] = std::max(0.0, es.eigenvalues()(k));
    const double base = std::exp(lognorm + norm2);
    std::vector<double> vals(nf);
    for (size_t q = 0; q < nf; ++q) {
      vals[q] = fs[q](lam) * base;
      lstat[q].push(vals[q]);
    }
    for (size_t q = 0; q < nf; ++q)
      for (size_t p = q + 1; p < nf; ++p) dstat[q][p].push(vals[q] / r[q] - vals[p] / r[p]);
  }

  PushforwardResult out;
  for (size_t q = 0; q < nf; ++q) {
    PushforwardRow row;
    row.l = lstat[q].mean;
    row.l_err = lstat[q].std_error();
    row.r = r[q];
    row.ratio = row.l / r[q];
    row.ratio_err = row.l_err / r[q];
    out.rows.push_back(row);
  }
  for (size_t q = 0; q < nf; ++q)
    for (size_t p = q + 1; p < nf; ++p) {
      const double se = dstat[q][p].std_error();
      const double z = se > 0.0 ? std::abs(dstat[q][p].mean) / se : 0.0;
      out.max_pair_z = std::max(out.max_pair_z, z);
    }
  return out;
}

}  // namespace horosim::rmt
