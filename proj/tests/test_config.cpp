#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "horosim/config.hpp"

using namespace horosim;

namespace {
const char* kGood = R"(
# comment line
lattice.d      = 2
lattice.sides  = [4, 4]   # trailing comment
model.beta     = 2.0
model.h_rule   = inverse_volume
model.ensemble = delta
chain.kernel   = gibbs
chain.sweeps   = 5000
chain.burn_in  = 500
seed           = 9
)";
}

TEST_CASE("valid config parses and resolves h") {
  const RunConfig cfg = parse_config(kGood, "simulate");
  REQUIRE(cfg.lattice_d == 2);
  REQUIRE(cfg.lattice_sides == std::vector<int>{4, 4});
  REQUIRE(cfg.beta == 2.0);
  REQUIRE(cfg.resolved_h() == Catch::Approx(1.0 / 16.0));
  REQUIRE(cfg.ensemble == Ensemble::DeltaConstrained);
  REQUIRE(cfg.kernel == Kernel::GibbsAlternating);
  REQUIRE(cfg.sweeps == 5000);
  REQUIRE(cfg.burn_in == 500);
  REQUIRE(cfg.seed == 9);
  REQUIRE(cfg.warnings.empty());
  const auto pairs = cfg.resolved_pairs();
  bool saw_h = false;
  for (const auto& [k, v] : pairs)
    if (k == "model.h") {
      saw_h = true;
      REQUIRE(std::stod(v) == Catch::Approx(0.0625));
    }
  REQUIRE(saw_h);
}

TEST_CASE("every violation is reported in one pass") {
  const std::string bad =
      "lattice.d = 3\n"
      "lattice.sides = [4, 4]\n"
      "model.beta = -1\n"
      "model.h = 0.1\n"
      "nonsense.key = 5\n";
  try {
    parse_config(bad, "simulate");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string all = e.what();
    REQUIRE(all.find("lattice.sides") != std::string::npos);  // arity mismatch
    REQUIRE(all.find("model.beta") != std::string::npos);     // range
    REQUIRE(all.find("nonsense.key") != std::string::npos);   // unknown key
    REQUIRE(e.violations.size() == 3);
  }
}

TEST_CASE("h and h_rule are mutually exclusive and one is required") {
  REQUIRE_THROWS_WITH(
      parse_config("lattice.d=1\nlattice.sides=[8]\nmodel.beta=2\n", "simulate"),
      Catch::Matchers::ContainsSubstring("model.h"));
  REQUIRE_THROWS_WITH(parse_config("lattice.d=1\nlattice.sides=[8]\nmodel.beta=2\nmodel.h=0.1\n"
                                   "model.h_rule=inverse_side\n",
                                   "simulate"),
                      Catch::Matchers::ContainsSubstring("mutually exclusive"));
}

TEST_CASE("assorted grammar errors") {
  REQUIRE_THROWS_WITH(parse_config("model.beta 2\n", "simulate"),
                      Catch::Matchers::ContainsSubstring("key = value"));
  REQUIRE_THROWS_WITH(parse_config("seed = 1\nseed = 2\n", "pushforward"),
                      Catch::Matchers::ContainsSubstring("duplicate"));
  REQUIRE_THROWS_WITH(parse_config("lattice.sides = [4, 4\n", "simulate"),
                      Catch::Matchers::ContainsSubstring("unterminated"));
  REQUIRE_THROWS_AS(parse_config(kGood, "frobnicate"), ConfigError);
}

TEST_CASE("hmassed requires positive h") {
  const std::string cfg =
      "lattice.d=1\nlattice.sides=[8]\nmodel.beta=2\nmodel.h=0\nmodel.ensemble=hmassed\n";
  REQUIRE_THROWS_WITH(parse_config(cfg, "simulate"),
                      Catch::Matchers::ContainsSubstring("hmassed"));
}

TEST_CASE("burn-in and measurement-count cross checks") {
  const std::string base = "lattice.d=1\nlattice.sides=[8]\nmodel.beta=2\nmodel.h=0.1\n";
  REQUIRE_THROWS_WITH(parse_config(base + "chain.sweeps=100\nchain.burn_in=100\n", "simulate"),
                      Catch::Matchers::ContainsSubstring("burn_in"));
  REQUIRE_THROWS_WITH(parse_config(base + "chain.sweeps=100\nchain.burn_in=95\n", "simulate"),
                      Catch::Matchers::ContainsSubstring("too few measurements"));
}

TEST_CASE("certify below the convexity threshold warns but is accepted") {
  const std::string cfg = "lattice.d=1\nlattice.sides=[6]\nmodel.beta=1.0\nmodel.h=0.1\n"
                          "certify.betas=[1.0]\n";
  const RunConfig c = parse_config(cfg, "certify");
  REQUIRE(c.certify_betas == std::vector<double>{1.0});
  bool warned = false;
  for (const auto& w : c.warnings)
    if (w.find("3/2") != std::string::npos) warned = true;
  REQUIRE(warned);
}

TEST_CASE("side length two warns") {
  const std::string cfg = "lattice.d=2\nlattice.sides=[2, 4]\nmodel.beta=2\nmodel.h=0.1\n";
  const RunConfig c = parse_config(cfg, "simulate");
  REQUIRE(c.warnings.size() == 1);
}

TEST_CASE("subcommand-specific keys are rejected elsewhere") {
  const std::string cfg = std::string(kGood) + "rmt.draws = 100\n";
  REQUIRE_THROWS_WITH(parse_config(cfg, "simulate"),
                      Catch::Matchers::ContainsSubstring("unknown key 'rmt.draws'"));
  // ... but accepted where they belong.
  const RunConfig c =
      parse_config("lattice.d=1\nlattice.sides=[2]\nrmt.draws=100\n", "rmt");
  REQUIRE(c.rmt_draws == 100);
}

TEST_CASE("pushforward config bounds") {
  REQUIRE_THROWS_WITH(parse_config("pushforward.n=3\npushforward.N=2\n", "pushforward"),
                      Catch::Matchers::ContainsSubstring("pushforward.N"));
  const RunConfig c = parse_config("pushforward.n=2\npushforward.N=3\npushforward.draws=5000\n",
                                   "pushforward");
  REQUIRE(c.push_n == 2);
  REQUIRE(c.push_bign == 3);
  REQUIRE(c.push_draws == 5000);
}
