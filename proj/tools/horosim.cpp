// horosim CLI: parse a config, dispatch a subcommand, write CSV/JSON
// artifacts.  Exit codes: 0 all asserted checks pass, 1 a check failed,
// 2 invalid config, 3 runtime error.  Every output embeds the resolved
// config and seed; outputs are byte-identical for a fixed config + seed.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "horosim/config.hpp"
#include "horosim/hessian.hpp"
#include "horosim/io.hpp"
#include "horosim/lattice.hpp"
#include "horosim/model.hpp"
#include "horosim/observables.hpp"
#include "horosim/rmt.hpp"
#include "horosim/rng.hpp"
#include "horosim/sampler.hpp"

namespace {

using nlohmann::json;
using namespace horosim;

json estimate_json(const Estimate& e) {
  return {{"mean", e.mean},
          {"std_error", e.std_error},
          {"n_effective", e.n_effective},
          {"n_samples", e.n_samples}};
}

json bound_check_json(const BoundCheck& b) {
  return {{"name", b.name}, {"lhs", b.lhs},           {"rhs", b.rhs},
          {"slack", b.slack}, {"mc_error", b.mc_error}, {"passed", b.passed}};
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.resolved_pairs()) j[k] = v;
  return j;
}

void write_summary(const std::string& out_dir, const RunConfig& cfg, json body, bool passed,
                   const std::vector<std::string>& failures) {
  body["config"] = config_json(cfg);
  body["passed"] = passed;
  body["failures"] = failures;
  if (!cfg.warnings.empty()) body["warnings"] = cfg.warnings;
  std::ofstream out(out_dir + "/summary.json");
  out << body.dump(2) << "\n";
}

// Stream layout: 0 main chain; certify beta k -> k; study side k -> k;
// rmt resolvent 0, B1 1, B1 stability 2; pushforward 0.

int run_simulate(const RunConfig& cfg) {
  const Lattice lat = build_lattice(cfg.lattice_d, cfg.lattice_sides);
  const ModelParams params = cfg.model_params();
  const ChainConfig ccfg = cfg.chain_config();
  const std::vector<ChainObservable> obs = {ward_observable(),        t0_observable(),
                                            order_parameter_observable_rb(), order_parameter_observable_raw(),
                                            c00_observable(),         c00_sq_observable()};
  std::mt19937_64 rng = make_stream(cfg.seed, 0);
  const ChainResult res = run_chain(params, lat, ccfg, obs, rng);

  const auto pairs = cfg.resolved_pairs();
  {
    CsvWriter csv(cfg.out_dir + "/estimates.csv", pairs,
                  {"observable", "mean", "std_error", "n_effective", "n_samples"});
    for (const auto& ob : obs) {
      const Estimate& e = res.estimates.at(ob.name);
      csv.row({ob.name, csv_cell(e.mean), csv_cell(e.std_error), csv_cell(e.n_effective),
               csv_cell(e.n_samples)});
    }
  }
  if (cfg.trace) {
    std::vector<std::string> cols = {"sweep"};
    for (const auto& ob : obs) cols.push_back(ob.name);
    CsvWriter csv(cfg.out_dir + "/trace.csv", pairs, cols);
    const long n = res.measured;
    for (long i = 0; i < n; ++i) {
      std::vector<std::string> cells = {csv_cell(cfg.burn_in + i * cfg.thin)};
      for (const auto& ob : obs) cells.push_back(csv_cell(res.series.at(ob.name)[i]));
      csv.row(cells);
    }
  }

  json body;
  for (const auto& ob : obs) body["estimates"][ob.name] = estimate_json(res.estimates.at(ob.name));
  body["chain"] = {{"accept_site", res.accept_site},
                   {"accept_aux", res.accept_aux},
                   {"step_site", res.step_site},
                   {"step_aux", res.step_aux},
                   {"measured", res.measured}};
  write_summary(cfg.out_dir, cfg, body, true, {});
  return 0;
}

int run_ward(const RunConfig& cfg) {
  const Lattice lat = build_lattice(cfg.lattice_d, cfg.lattice_sides);
  const ModelParams params = cfg.model_params();
  const ChainConfig ccfg = cfg.chain_config();
  const std::vector<ChainObservable> obs = {ward_observable(), t0_observable()};
  std::mt19937_64 rng = make_stream(cfg.seed, 0);
  const ChainResult res = run_chain(params, lat, ccfg, obs, rng);

  std::vector<BoundCheck> checks;
  checks.push_back(ward_check(res.estimates.at("ward")));
  double g00 = 0.0;
  const bool have_green = params.beta > 0.5;
  if (have_green) {
    g00 = reference_green(lat, params.beta, params.h)(0, 0);
    const auto& t0 = res.series.at("t0");
    for (double alpha : {0.5, 1.0, 2.0}) checks.push_back(moment_bound_check(t0, alpha, g00));
    for (double rho : {1.0, 2.0}) checks.push_back(tail_bound_check(t0, rho, g00));
    for (const auto& c : t0_sandwich_check(res.estimates.at("t0"), g00)) checks.push_back(c);
  }

  std::vector<std::string> failures;
  for (const auto& c : checks)
    if (!c.passed) failures.push_back(c.name);

  const auto pairs = cfg.resolved_pairs();
  {
    CsvWriter csv(cfg.out_dir + "/ward.csv", pairs,
                  {"check", "lhs", "rhs", "slack", "mc_error", "passed"});
    for (const auto& c : checks)
      csv.row({c.name, csv_cell(c.lhs), csv_cell(c.rhs), csv_cell(c.slack), csv_cell(c.mc_error),
               csv_cell(c.passed)});
  }
  json body;
  body["estimates"]["ward"] = estimate_json(res.estimates.at("ward"));
  body["estimates"]["t0"] = estimate_json(res.estimates.at("t0"));
  if (have_green) body["g00"] = g00;
  for (const auto& c : checks) body["bound_checks"].push_back(bound_check_json(c));
  body["chain"] = {{"accept_site", res.accept_site}, {"accept_aux", res.accept_aux}};
  write_summary(cfg.out_dir, cfg, body, failures.empty(), failures);
  return failures.empty() ? 0 : 1;
}

int run_certify(const RunConfig& cfg) {
  const Lattice lat = build_lattice(cfg.lattice_d, cfg.lattice_sides);
  const ChainConfig ccfg = cfg.chain_config();
  const int nbeta = static_cast<int>(cfg.certify_betas.size());
  const auto pairs = cfg.resolved_pairs();
  CsvWriter csv(cfg.out_dir + "/certificates.csv", pairs,
                {"seed", "config_index", "beta", "lambda_min", "rowsum_residual",
                 "max_edge_expectation", "k_min_entry", "psd_2u_minus_k", "r_max_eigenvalue",
                 "r_rowsum_residual", "pass_lambda", "pass_edge", "pass_rowsum", "passed"});

  std::vector<std::string> failures;
  int config_index = 0;
  double worst_lambda = std::numeric_limits<double>::max();
  for (int bi = 0; bi < nbeta; ++bi) {
    ModelParams params = cfg.model_params();
    params.beta = cfg.certify_betas[bi];
    params.ensemble = Ensemble::DeltaConstrained;
    const int count = cfg.certify_configs / nbeta + (bi < cfg.certify_configs % nbeta ? 1 : 0);
    if (count == 0) continue;
    Chain chain(lat, params, ccfg);
    std::mt19937_64 rng = make_stream(cfg.seed, static_cast<std::uint64_t>(bi));
    for (long sw = 0; sw < ccfg.burn_in; ++sw) chain.sweep(rng);
    for (int k = 0; k < count; ++k) {
      for (int sw = 0; sw < cfg.certify_stride; ++sw) chain.sweep(rng);
      const HessianReport rep = hessian_effective(chain.t(), params, lat);
      Matrix ref = (params.beta - 0.5) * laplacian(lat, Storage::Dense).dense();
      for (int i = 0; i < lat.num_sites; ++i) ref(i, i) += params.h;
      const double lam = smallest_eigenvalue(Matrix(rep.e_hess - ref));
      worst_lambda = std::min(worst_lambda, lam);
      const bool certifiable = params.beta >= 1.5;
      const bool pass_lambda = !certifiable || lam >= -1e-8;
      const bool pass_edge = rep.max_edge_expectation <= 0.5 + 1e-10;
      const bool pass_rowsum = rep.rowsum_residual <= 1e-10;
      const bool passed = pass_lambda && pass_edge && pass_rowsum;
      if (!passed)
        failures.push_back("config " + std::to_string(config_index) + " beta " +
                           format_g17(params.beta));
      csv.row({csv_cell(static_cast<long>(cfg.seed)), csv_cell(config_index),
               csv_cell(params.beta), csv_cell(lam), csv_cell(rep.rowsum_residual),
               csv_cell(rep.max_edge_expectation), csv_cell(rep.k_min_entry),
               csv_cell(rep.psd_2u_minus_k), csv_cell(rep.r_max_eigenvalue),
               csv_cell(rep.r_rowsum_residual), csv_cell(pass_lambda), csv_cell(pass_edge),
               csv_cell(pass_rowsum), csv_cell(passed)});
      ++config_index;
    }
  }
  json body;
  body["configs"] = config_index;
  body["worst_lambda_min"] = worst_lambda;
  write_summary(cfg.out_dir, cfg, body, failures.empty(), failures);
  return failures.empty() ? 0 : 1;
}

int run_study(const RunConfig& cfg) {
  const ModelParams params = cfg.model_params();
  const ChainConfig ccfg = cfg.chain_config();
  const auto pairs = cfg.resolved_pairs();
  CsvWriter csv(cfg.out_dir + "/study.csv", pairs,
                {"dimension", "side", "num_sites", "beta", "h", "obs_delta_mean", "obs_delta_err",
                 "obs_hmassed_mean", "obs_hmassed_err", "ess_fraction", "t0_mean", "t0_err", "g00",
                 "ward_mean", "ward_err", "accept_site"});
  std::vector<std::string> failures;
  json rows = json::array();
  for (size_t k = 0; k < cfg.study_sides.size(); ++k) {
    const StudyRow row = symmetry_breaking_study_row(cfg.lattice_d, cfg.study_sides[k], params,
                                                     ccfg, cfg.seed, static_cast<std::uint64_t>(k));
    if (row.ess_fraction < 0.10)
      failures.push_back("reweighting ESS " + format_g17(row.ess_fraction) + " < 0.10 at side " +
                         std::to_string(row.side));
    csv.row({csv_cell(row.dimension), csv_cell(row.side), csv_cell(row.num_sites),
             csv_cell(row.beta), csv_cell(row.h), csv_cell(row.obs_delta.mean),
             csv_cell(row.obs_delta.std_error), csv_cell(row.obs_hmassed.mean),
             csv_cell(row.obs_hmassed.std_error), csv_cell(row.ess_fraction),
             csv_cell(row.t0.mean), csv_cell(row.t0.std_error), csv_cell(row.g00),
             csv_cell(row.ward.mean), csv_cell(row.ward.std_error), csv_cell(row.accept_site)});
    rows.push_back({{"side", row.side},
                    {"obs_delta", estimate_json(row.obs_delta)},
                    {"obs_hmassed", estimate_json(row.obs_hmassed)},
                    {"ess_fraction", row.ess_fraction},
                    {"ward", estimate_json(row.ward)},
                    {"t0", estimate_json(row.t0)},
                    {"g00", row.g00}});
  }
  json body;
  body["rows"] = rows;
  write_summary(cfg.out_dir, cfg, body, failures.empty(), failures);
  return failures.empty() ? 0 : 1;
}

int run_rmt(const RunConfig& cfg) {
  const Lattice lat = build_lattice(cfg.lattice_d, cfg.lattice_sides);
  rmt::BandSpec spec;
  if (cfg.rmt_profile == "exponential") {
    spec = rmt::build_J_exponential(lat, cfg.rmt_orbitals, cfg.rmt_w);
  } else {
    const int w = static_cast<int>(cfg.rmt_w);
    if (static_cast<double>(w) != cfg.rmt_w)
      throw std::invalid_argument("rmt.w must be an integer cube side for the cubes profile");
    spec = rmt::build_J_cubes(lat, cfg.rmt_orbitals, w, cfg.rmt_j0, cfg.rmt_j1);
  }
  std::mt19937_64 rng0 = make_stream(cfg.seed, 0);
  const rmt::ResolventStats rs = rmt::resolvent_stats(spec, cfg.rmt_energy, cfg.rmt_eps,
                                                      cfg.rmt_site_x, cfg.rmt_site_y,
                                                      cfg.rmt_draws, rng0);
  std::mt19937_64 rng1 = make_stream(cfg.seed, 1);
  const rmt::B1Result b1 = rmt::deformed_average_B1(spec, cfg.rmt_energy, cfg.rmt_eps,
                                                    cfg.rmt_site_x, cfg.rmt_draws, rng1);
  std::mt19937_64 rng2 = make_stream(cfg.seed, 2);
  const rmt::B1Result b1_wide = rmt::deformed_average_B1(spec, cfg.rmt_energy, 2.0 * cfg.rmt_eps,
                                                         cfg.rmt_site_x, cfg.rmt_draws, rng2);
  const rmt::SaddleParams sp =
      rmt::saddle_params(cfg.rmt_orbitals, cfg.rmt_j0, cfg.rmt_j1, cfg.rmt_energy, cfg.rmt_eps);

  const auto pairs = cfg.resolved_pairs();
  {
    CsvWriter csv(cfg.out_dir + "/rmt.csv", pairs,
                  {"draws", "energy", "eps", "rho_mean", "rho_err", "abs2_mean", "abs2_err",
                   "b1_mean", "b1_err", "b1_ess_fraction", "b1_wide_mean", "b1_wide_err",
                   "saddle_rho", "saddle_beta", "saddle_h", "j_min_eigenvalue", "j_psd"});
    csv.row({csv_cell(cfg.rmt_draws), csv_cell(cfg.rmt_energy), csv_cell(cfg.rmt_eps),
             csv_cell(rs.rho.mean), csv_cell(rs.rho.std_error), csv_cell(rs.abs2.mean),
             csv_cell(rs.abs2.std_error), csv_cell(b1.b1.mean), csv_cell(b1.b1.std_error),
             csv_cell(b1.ess_fraction), csv_cell(b1_wide.b1.mean), csv_cell(b1_wide.b1.std_error),
             csv_cell(sp.rho), csv_cell(sp.beta), csv_cell(sp.h), csv_cell(spec.j_min_eigenvalue),
             csv_cell(spec.psd)});
  }
  json body;
  body["rho"] = estimate_json(rs.rho);
  body["abs2"] = estimate_json(rs.abs2);
  body["b1"] = estimate_json(b1.b1);
  body["b1_ess_fraction"] = b1.ess_fraction;
  body["b1_wide"] = estimate_json(b1_wide.b1);
  body["saddle"] = {{"rho", sp.rho}, {"beta", sp.beta}, {"h", sp.h}};
  body["j_min_eigenvalue"] = spec.j_min_eigenvalue;
  body["j_psd"] = spec.psd;
  write_summary(cfg.out_dir, cfg, body, true, {});
  return 0;
}

int run_pushforward(const RunConfig& cfg) {
  const std::vector<rmt::EigFn> fs = {
      [](const std::vector<double>& lam) {
        double s = 0.0;
        for (double l : lam) s += l;
        return std::exp(-s);
      },
      [](const std::vector<double>& lam) {
        double s = 0.0, p = 1.0;
        for (double l : lam) {
          s += l;
          p *= l;
        }
        return p * std::exp(-s);
      },
      [](const std::vector<double>& lam) {
        double s = 0.0;
        for (double l : lam) s += l;
        return (1.0 + s) * (1.0 + s) * std::exp(-1.5 * s);
      }};
  std::mt19937_64 rng = make_stream(cfg.seed, 0);
  const rmt::PushforwardResult res =
      rmt::pushforward_check(cfg.push_n, cfg.push_bign, fs, cfg.push_draws, rng);

  std::vector<std::string> failures;
  if (res.max_pair_z > 5.0)
    failures.push_back("ratio constancy: max pairwise z " + format_g17(res.max_pair_z) + " > 5");

  const auto pairs = cfg.resolved_pairs();
  {
    CsvWriter csv(cfg.out_dir + "/pushforward.csv", pairs,
                  {"fn", "l", "l_err", "r", "ratio", "ratio_err"});
    for (size_t k = 0; k < res.rows.size(); ++k) {
      const auto& r = res.rows[k];
      csv.row({csv_cell(static_cast<int>(k)), csv_cell(r.l), csv_cell(r.l_err), csv_cell(r.r),
               csv_cell(r.ratio), csv_cell(r.ratio_err)});
    }
  }
  json body;
  body["max_pair_z"] = res.max_pair_z;
  for (const auto& r : res.rows)
    body["rows"].push_back({{"l", r.l},
                            {"l_err", r.l_err},
                            {"r", r.r},
                            {"ratio", r.ratio},
                            {"ratio_err", r.ratio_err}});
  write_summary(cfg.out_dir, cfg, body, failures.empty(), failures);
  return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horosim: hyperbolic sigma-model simulation and verification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;

  for (const std::string& name : horosim::known_subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_override, "output directory");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().at(0)->get_name();

  std::string out_dir = "out";
  if (const char* env = std::getenv("HOROSIM_OUT")) out_dir = env;
  if (!out_override.empty()) out_dir = out_override;

  const auto fail_json = [&](const std::string& kind, const std::vector<std::string>& messages) {
    try {
      horosim::ensure_dir(out_dir);
      nlohmann::json j = {{"passed", false}, {"error", kind}, {"messages", messages}};
      std::ofstream out(out_dir + "/failure.json");
      out << j.dump(2) << "\n";
    } catch (...) {
    }
  };

  horosim::RunConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot read config file '" + config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = horosim::parse_config(ss.str(), subcommand);
  } catch (const horosim::ConfigError& e) {
    for (const auto& v : e.violations) std::cerr << "config error: " << v << "\n";
    fail_json("config", e.violations);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    fail_json("config", {e.what()});
    return 2;
  }
  if (seed_set) cfg.seed = seed_override;
  if (!cfg.out_dir.empty() && cfg.out_dir != "out" && out_override.empty() &&
      std::getenv("HOROSIM_OUT") == nullptr)
    out_dir = cfg.out_dir;
  cfg.out_dir = out_dir;
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";

  try {
    horosim::ensure_dir(cfg.out_dir);
    int rc = 0;
    if (subcommand == "simulate")
      rc = run_simulate(cfg);
    else if (subcommand == "certify")
      rc = run_certify(cfg);
    else if (subcommand == "ward")
      rc = run_ward(cfg);
    else if (subcommand == "study")
      rc = run_study(cfg);
    else if (subcommand == "rmt")
      rc = run_rmt(cfg);
    else
      rc = run_pushforward(cfg);
    if (rc != 0) std::cerr << subcommand << ": checks failed (see summary.json)\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    fail_json("runtime", {e.what()});
    return 3;
  }
}
