#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "horosim/hessian.hpp"
#include "horosim/lattice.hpp"
#include "horosim/model.hpp"
#include "oracles.hpp"

using namespace horosim;

namespace {

Vector random_t(int n, std::mt19937_64& rng, double scale = 0.4) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector t(n);
  for (int i = 0; i < n; ++i) t(i) = normal(rng);
  return t;
}

ModelParams params(double beta, double h, Ensemble e = Ensemble::DeltaConstrained) {
  ModelParams p;
  p.beta = beta;
  p.h = h;
  p.ensemble = e;
  return p;
}

}  // namespace

TEST_CASE("constrained s-covariance is the Laplacian pseudo-inverse at t = 0") {
  const Lattice ring3 = build_lattice(1, {3});
  const SCovariance cov = s_covariance(Vector::Zero(3), params(1.0, 0.0), ring3);
  REQUIRE(cov.c(0, 0) == Catch::Approx(2.0 / 9.0).epsilon(1e-13));
  REQUIRE(cov.c(0, 1) == Catch::Approx(-1.0 / 9.0).epsilon(1e-13));
  REQUIRE(cov.c.rowwise().sum().cwiseAbs().maxCoeff() < 1e-13);
  // Pseudo-inverse property on the zero-sum subspace: D C D = D.
  const Matrix d = build_D(Vector::Zero(3), ring3, Storage::Dense).dense();
  REQUIRE((d * cov.c * d - d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance scales as e^{-2c} under a global shift") {
  const Lattice lat = build_lattice(1, {4});
  std::mt19937_64 rng(47);
  const Vector t = random_t(4, rng);
  const double c = 0.6;
  const Matrix base = s_covariance(t, params(1.7, 0.0), lat).c;
  const Matrix shifted =
      s_covariance(t + Vector::Constant(4, c), params(1.7, 0.0), lat).c;
  REQUIRE((shifted - std::exp(-2.0 * c) * base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("massed covariance inverts the massed precision matrix") {
  const Lattice lat = build_lattice(2, {2, 3});
  std::mt19937_64 rng(53);
  const Vector t = random_t(lat.num_sites, rng);
  const ModelParams p = params(1.2, 0.4, Ensemble::HMassed);
  const SCovariance cov = s_covariance(t, p, lat);
  const Matrix m = detail::massed_matrix(t, p, lat);
  REQUIRE((m * cov.c - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("frozen mean_U at the origin") {
  // Ring of three, covariance pinv(-Delta): each edge variance is 2/3, two
  // edges per site -> <U_i> = 4/3.
  const Lattice ring3 = build_lattice(1, {3});
  const SCovariance cov = s_covariance(Vector::Zero(3), params(1.0, 0.0), ring3);
  const Vector u = mean_U(Vector::Zero(3), cov, ring3);
  for (int i = 0; i < 3; ++i) REQUIRE(u(i) == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("Wick formulas match a direct Gaussian sampling oracle") {
  const Lattice lat = build_lattice(1, {4});
  std::mt19937_64 rng(59);
  const Vector t = random_t(4, rng);
  // The Hessian decomposition's normalization: covariance pinv(2 D(t)).
  const SCovariance cov = s_covariance(t, params(2.0, 0.0), lat);
  const Vector u_exact = mean_U(t, cov, lat);
  const Matrix k_exact = K_matrix(t, cov, lat);

  const Matrix q = helmert_basis(4);
  const Matrix m = q.transpose() * (2.0 * build_D(t, lat, Storage::Dense).dense()) * q;
  Eigen::LLT<Matrix> llt(m);
  REQUIRE(llt.info() == Eigen::Success);

  const long draws = 400000;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector mean = Vector::Zero(4);
  Matrix second = Matrix::Zero(4, 4);
  for (long d = 0; d < draws; ++d) {
    Vector xi(3);
    for (int i = 0; i < 3; ++i) xi(i) = normal(rng);
    const Vector s = q * llt.matrixU().solve(xi);
    Vector u(4);
    for (int i = 0; i < 4; ++i) {
      double ui = 0.0;
      for (int j : lat.neighbors[i])
        ui += edge_weight(t, i, j) * (s(i) - s(j)) * (s(i) - s(j));
      u(i) = ui;
    }
    mean += u;
    second += u * u.transpose();
  }
  mean /= static_cast<double>(draws);
  second /= static_cast<double>(draws);
  const Matrix k_mc = second - mean * mean.transpose();

  // MC errors ~ sqrt(Var/draws); U variances are O(1) here.
  REQUIRE((mean - u_exact).cwiseAbs().maxCoeff() < 0.02);
  REQUIRE((k_mc - k_exact).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("decomposition identities hold at machine precision") {
  std::mt19937_64 rng(61);
  const Lattice lat = build_lattice(2, {3, 3});
  for (double beta : {0.8, 1.5, 3.0}) {
    const Vector t = random_t(lat.num_sites, rng);
    const HessianReport rep = hessian_effective(t, params(beta, 0.3), lat);
    REQUIRE(rep.rowsum_residual < 1e-10);
    REQUIRE(rep.k_min_entry >= 0.0);
    REQUIRE(rep.psd_2u_minus_k >= -1e-10);
    REQUIRE(rep.r_max_eigenvalue <= 1e-10);
    REQUIRE(rep.r_rowsum_residual < 1e-10);
    REQUIRE(rep.max_edge_expectation <= 0.5 + 1e-10);
    // C'' = (2U delta - K) + R by construction; check the reassembly.
    Matrix c2 = -rep.k + rep.r;
    for (int i = 0; i < lat.num_sites; ++i) c2(i, i) += 2.0 * rep.mean_u(i);
    REQUIRE((c2 - rep.c_hess).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("R-form bound |f R f| <= (1/2) sum of squared gradients") {
  std::mt19937_64 rng(67);
  const Lattice lat = build_lattice(1, {6});
  const Vector t = random_t(6, rng);
  const HessianReport rep = hessian_effective(t, params(2.0, 0.1), lat);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep_i = 0; rep_i < 100; ++rep_i) {
    Vector f(6);
    for (int i = 0; i < 6; ++i) f(i) = normal(rng);
    REQUIRE(std::abs(f.dot(rep.r * f)) <= 0.5 * gradient_form(lat, f) + 1e-10);
  }
}

TEST_CASE("analytic Hessian matches finite differences") {
  std::mt19937_64 rng(71);
  for (const auto& shape : std::vector<std::pair<int, std::vector<int>>>{
           {1, {4}}, {1, {6}}, {2, {3, 3}}}) {
    const Lattice lat = build_lattice(shape.first, shape.second);
    const ModelParams p = params(1.8, 0.25);
    const Vector t = random_t(lat.num_sites, rng);
    const HessianReport rep = hessian_effective(t, p, lat);
    const Matrix fd = oracles::fd_hessian(
        [&](const Vector& x) { return effective_action(x, p, lat); }, t, 1e-3);
    const double rel =
        (rep.e_hess - fd).cwiseAbs().maxCoeff() / (1.0 + rep.e_hess.cwiseAbs().maxCoeff());
    REQUIRE(rel < 1e-5);
  }
}

TEST_CASE("certificate is nonnegative for beta >= 3/2") {
  const Lattice lat = build_lattice(2, {3, 3});
  REQUIRE(convexity_certificate(Vector::Zero(lat.num_sites), params(1.5, 0.2), lat) >= -1e-8);
  std::mt19937_64 rng(73);
  const Vector t = random_t(lat.num_sites, rng);
  REQUIRE(convexity_certificate(t, params(2.5, 0.05), lat) >= -1e-8);
}

TEST_CASE("analytic Hessian is restricted to the constrained ensemble") {
  const Lattice ring3 = build_lattice(1, {3});
  REQUIRE_THROWS_AS(
      hessian_effective(Vector::Zero(3), params(2.0, 0.5, Ensemble::HMassed), ring3),
      std::invalid_argument);
}
