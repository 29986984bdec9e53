#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "horosim/lattice.hpp"
#include "horosim/model.hpp"
#include "horosim/observables.hpp"
#include "horosim/rng.hpp"

using namespace horosim;

namespace {

ModelParams params(double beta, double h, Ensemble e = Ensemble::DeltaConstrained) {
  ModelParams p;
  p.beta = beta;
  p.h = h;
  p.ensemble = e;
  return p;
}

Vector random_t(int n, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector t(n);
  for (int i = 0; i < n; ++i) t(i) = normal(rng);
  return t;
}

}  // namespace

TEST_CASE("reference Green function invariants") {
  const Lattice ring3 = build_lattice(1, {3});
  // (1 (-Delta) + 1)^{-1} = (4 I - ones)^{-1}: diagonal 1/2, off-diagonal 1/4.
  const Matrix g = reference_green(ring3, 1.5, 1.0);
  REQUIRE(g(0, 0) == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(g(0, 1) == Catch::Approx(0.25).epsilon(1e-12));

  const Lattice lat = build_lattice(2, {3, 3});
  const double h = 0.3;
  const Matrix gh = reference_green(lat, 2.0, h);
  REQUIRE((gh.rowwise().sum() - Vector::Constant(9, 1.0 / h)).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(gh.minCoeff() > 0.0);

  // h = 0: pseudo-inverse on the zero-sum subspace, rows sum to zero.
  const Matrix g0 = reference_green(ring3, 1.0, 0.0);
  REQUIRE(g0(0, 0) == Catch::Approx(2.0 * 2.0 / 9.0).epsilon(1e-12));  // (1/2)^-1 pinv factor
  REQUIRE(g0.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE_THROWS_AS(reference_green(ring3, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("Rao-Blackwellized observable matches direct s integration") {
  std::mt19937_64 rng = make_stream(31, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double t0 = 0.4, c00 = 0.35;
  RunningStat rs;
  for (long d = 0; d < 400000; ++d) {
    const double s0 = std::sqrt(c00) * normal(rng);
    const double v = 2.0 * std::cosh(t0) + s0 * s0 * std::exp(t0);
    rs.push(v * v);
  }
  REQUIRE(std::abs(rs.mean - order_parameter_rb(t0, c00)) < 5.0 * rs.std_error());
}

TEST_CASE("bound checks pass and fail as designed") {
  std::mt19937_64 rng = make_stream(37, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double g00 = 1.0;
  std::vector<double> ok(20000), bad(20000), wide(20000);
  for (auto& v : ok) v = 0.6 * normal(rng);    // variance 0.36 < g00
  for (auto& v : bad) v = 1.6 * normal(rng);   // variance 2.56 > g00
  for (auto& v : wide) v = 6.0 * normal(rng);  // heavy enough to beat the tail bound
  REQUIRE(moment_bound_check(ok, 1.0, g00).passed);
  REQUIRE_FALSE(moment_bound_check(bad, 1.0, g00).passed);
  REQUIRE(tail_bound_check(ok, 1.5, g00).passed);
  REQUIRE_FALSE(tail_bound_check(wide, 1.5, g00).passed);

  Estimate t0;
  t0.mean = 0.8;
  t0.std_error = 0.01;
  for (const auto& c : t0_sandwich_check(t0, g00)) REQUIRE(c.passed);
  t0.mean = 1.5;  // above 1 + g00/4 = 1.25
  const auto sandwich = t0_sandwich_check(t0, g00);
  REQUIRE_FALSE(sandwich[0].passed);
  REQUIRE(sandwich[1].passed);

  Estimate w;
  w.mean = 1.002;
  w.std_error = 0.001;
  REQUIRE(ward_check(w).passed);
  w.mean = 1.02;
  REQUIRE_FALSE(ward_check(w).passed);
}

TEST_CASE("weighted Laplacian: unit weights recover the plain Laplacian") {
  const Lattice ring3 = build_lattice(1, {3});
  const WeightedLaplacianResult r = weighted_laplacian_check(ring3, 0.0);
  REQUIRE(r.green00 == Catch::Approx(2.0 / 9.0).epsilon(1e-12));
  REQUIRE(r.flagged);  // d - 2 = -1 <= 0
  const Lattice cube = build_lattice(3, {3, 3, 3});
  REQUIRE_FALSE(weighted_laplacian_check(cube, 0.5).flagged);
  REQUIRE(weighted_laplacian_check(cube, 1.0).flagged);
}

TEST_CASE("weighted Laplacian: decaying weights against a hand-built matrix") {
  const Lattice lat = build_lattice(1, {4});
  const double p = 1.5;
  // Distances from the origin: 0, 1, 2, 1.  Edge weights take the nearer
  // endpoint; the (1,2) edge uses site 1, the (2,3) edge uses site 3.
  const double w0 = 1.0, w1 = std::pow(2.0, -p);
  Matrix m = Matrix::Zero(4, 4);
  const auto add = [&](int a, int b, double w) {
    m(a, a) += w;
    m(b, b) += w;
    m(a, b) -= w;
    m(b, a) -= w;
  };
  add(0, 1, w0);
  add(0, 3, w0);
  add(1, 2, w1);
  add(2, 3, w1);
  const Matrix q = helmert_basis(4);
  const Matrix c =
      q * Matrix(q.transpose() * m * q).inverse() * q.transpose();
  REQUIRE(weighted_laplacian_check(lat, p).green00 == Catch::Approx(c(0, 0)).epsilon(1e-10));
}

TEST_CASE("regularization shift: both routes agree and tie the two ensembles together") {
  std::mt19937_64 rng = make_stream(41, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int side = 3 + rep % 3;
    const Lattice lat = build_lattice(1, {side});
    const ModelParams pd = params(1.0 + 0.3 * rep, 0.05 + 0.2 * (rep % 4));
    const Vector t = random_t(side, rng);
    const RegularizationShift rs = regularization_shift(t, pd, lat);
    REQUIRE(std::abs(rs.r_formula - rs.r_logdet) < 1e-9 * (1.0 + std::abs(rs.r_logdet)));
    REQUIRE(rs.lambda_min_pt >= -1e-10);
    REQUIRE(rs.psi_weight == Catch::Approx(t.array().exp().mean()).epsilon(1e-12));

    ModelParams pm = pd;
    pm.ensemble = Ensemble::HMassed;
    const double gap = effective_action(t, pm, lat) - effective_action(t, pd, lat);
    REQUIRE(gap == Catch::Approx(rs.r_logdet + 0.5 * std::log(pd.h)).margin(1e-9));
  }
}

TEST_CASE("regularization shift closed form at t = 0") {
  // P_t reduces to the complement projector, so route (a) becomes
  // (1/2) sum_k ln(1 + h / (beta lambda_k)) over nonzero Laplacian modes.
  const Lattice ring4 = build_lattice(1, {4});
  const ModelParams p = params(2.0, 0.3);
  const RegularizationShift rs = regularization_shift(Vector::Zero(4), p, ring4);
  double expect = 0.0;
  for (double lam : {2.0, 2.0, 4.0}) expect += 0.5 * std::log(1.0 + p.h / (p.beta * lam));
  REQUIRE(rs.r_formula == Catch::Approx(expect).margin(1e-11));
  REQUIRE(rs.r_logdet == Catch::Approx(expect).margin(1e-11));
  REQUIRE(rs.psi_weight == Catch::Approx(1.0));
}

TEST_CASE("ratio estimator sanity") {
  std::mt19937_64 rng = make_stream(43, 0);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<double> num(10000), den(10000);
  for (size_t i = 0; i < num.size(); ++i) {
    den[i] = unif(rng);
    num[i] = 3.0 * den[i] + 0.1 * (unif(rng) - 1.0);
  }
  const Estimate r = ratio_estimate(num, den);
  REQUIRE(r.mean == Catch::Approx(3.0).margin(0.01));
  REQUIRE(r.std_error > 0.0);
  REQUIRE(r.std_error < 0.01);
  REQUIRE_THROWS_AS(ratio_estimate({1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("s-moment estimators match the covariance directly") {
  const Lattice ring3 = build_lattice(1, {3});
  const ModelParams p = params(2.0, 0.0);
  std::mt19937_64 rng = make_stream(47, 0);
  std::vector<Vector> ts;
  std::vector<double> c1, c2;
  for (int k = 0; k < 8; ++k) {
    ts.push_back(random_t(3, rng));
    const double c = s_covariance(ts.back(), p, ring3).c(0, 0);
    c1.push_back(c);
    c2.push_back(c * c);
  }
  const SMoments m = s_moment_estimators(ts, p, ring3);
  REQUIRE(m.first.mean == Catch::Approx(estimate_from_series(c1).mean).epsilon(1e-14));
  REQUIRE(m.second.mean == Catch::Approx(estimate_from_series(c2).mean).epsilon(1e-14));
}

TEST_CASE("study row on a small system") {
  ChainConfig cfg;
  cfg.sweeps = 6000;
  cfg.burn_in = 1000;
  cfg.thin = 2;
  const StudyRow row = symmetry_breaking_study_row(1, 4, params(2.0, 0.25), cfg, 51, 0);
  REQUIRE(row.num_sites == 4);
  REQUIRE(row.h == 0.25);
  REQUIRE(row.ess_fraction > 0.10);
  REQUIRE(row.ess_fraction <= 1.0 + 1e-12);
  REQUIRE(row.obs_delta.mean > 4.0);  // observable is >= 4 cosh^2 >= 4 pointwise
  REQUIRE(row.obs_hmassed.mean > 4.0);
  REQUIRE(std::abs(row.ward.mean - 1.0) <= 5.0 * row.ward.std_error);
  // Cross-check the exp(-R_h) transport against a direct HMassed chain; the
  // Rao-Blackwellized observable there uses the massed covariance, the same
  // integrand the transport evaluates.
  std::mt19937_64 rng = make_stream(51, 7);
  const ChainResult direct = run_chain(params(2.0, 0.25, Ensemble::HMassed), build_lattice(1, {4}),
                                       cfg, {order_parameter_observable_rb()}, rng);
  const Estimate& dm = direct.estimates.at("obs_rb");
  const double z = std::abs(dm.mean - row.obs_hmassed.mean) /
                   std::hypot(dm.std_error, row.obs_hmassed.std_error);
  INFO("transported " << row.obs_hmassed.mean << " +- " << row.obs_hmassed.std_error << " direct "
                      << dm.mean << " +- " << dm.std_error);
  REQUIRE(z < 5.0);
  REQUIRE_THROWS_AS(
      symmetry_breaking_study_row(1, 4, params(2.0, 0.25, Ensemble::HMassed), cfg, 51, 0),
      std::invalid_argument);
}
