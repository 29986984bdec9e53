#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/lattice.hpp"
#include "horosim/model.hpp"
#include "horosim/rng.hpp"
#include "horosim/stats.hpp"

// MCMC over the t-field with the s-field handled exactly.
//
// GibbsAlternating (default): per sweep,
//   1. sequential per-site Metropolis updates of t_i at fixed s under the
//      joint density exp(-A(t,s)) prod_j e^{t_j} (the e^{t_j} measure factor
//      enters as -t_i in the local energy);
//   2. one global shift proposal t -> t + gamma (all sites), also at fixed s.
//      The shift direction is the soft mode of the effective action (its
//      curvature is only h per site), and a collective move keeps its
//      autocorrelation time O(10) sweeps instead of O(|Lambda|/step^2);
//   3. an exact Gaussian redraw of s given the updated t.
// Every step preserves the joint Gibbs measure, so the composition does too.
//
// MarginalLangevin: Metropolis-adjusted Langevin on the marginal effective
// action E(t), followed by the exact s redraw for observables.
//
// Step sizes are tuned during burn-in (55-60% acceptance per site move, ~55%
// for MALA) and frozen afterwards.  All draws come from one std::mt19937_64
// passed in by the caller, so a (seed, stream) pair fixes the trajectory.
namespace horosim {

enum class Kernel { GibbsAlternating, MarginalLangevin };

struct ChainConfig {
  long sweeps = 10000;
  long burn_in = 1000;
  int thin = 1;
  Kernel kernel = Kernel::GibbsAlternating;
  double step_size = 0.5;
  bool tune = true;

  void validate() const {
    if (sweeps <= 0 || burn_in < 0 || burn_in >= sweeps)
      throw std::invalid_argument("ChainConfig: need 0 <= burn_in < sweeps");
    if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be >= 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("ChainConfig: step_size must be > 0");
  }
};

inline double metropolis_accept_probability(double delta_e) {
  if (std::isnan(delta_e)) throw std::invalid_argument("metropolis_accept_probability: nan energy");
  return delta_e <= 0.0 ? 1.0 : std::exp(-delta_e);
}

// One logged per-site proposal, for reversibility spot checks.
struct ProposalRecord {
  int site;
  double t_old, t_new;
  double delta_e;
  double accept_prob;
  double u;
  bool accepted;
};

struct SweepStats {
  long site_proposed = 0, site_accepted = 0;
  long aux_proposed = 0, aux_accepted = 0;  // shift move or MALA proposal
};

class Chain {
 public:
  Chain(const Lattice& lat, const ModelParams& params, const ChainConfig& cfg)
      : lat_(lat), p_(params), cfg_(cfg), q_(helmert_basis(lat.num_sites)) {
    p_.validate();
    cfg_.validate();
    const int n = lat_.num_sites;
    t_ = Vector::Zero(n);
    s_ = Vector::Zero(n);
    step_site_ = cfg_.step_size;
    step_aux_ = cfg_.step_size;
    refactor();
  }

  const Vector& t() const { return t_; }
  const Vector& s() const { return s_; }
  double step_site() const { return step_site_; }
  double step_aux() const { return step_aux_; }

  void set_state(const Vector& t, const Vector& s) {
    if (t.size() != lat_.num_sites || s.size() != lat_.num_sites)
      throw std::invalid_argument("Chain::set_state: size mismatch");
    t_ = t;
    s_ = s;
    refactor();
    if (cfg_.kernel == Kernel::MarginalLangevin) eg_valid_ = false;
  }

  void set_proposal_log(std::vector<ProposalRecord>* log) { log_ = log; }

  // s-covariance (0,0) at the current t (physical ensemble); the factorization
  // is refreshed at the end of every sweep, so this matches t() exactly.
  double c00() const {
    const int n = lat_.num_sites;
    if (p_.ensemble == Ensemble::DeltaConstrained) {
      Vector q0 = q_.row(0).transpose();
      Vector y = llt_.matrixL().solve(q0);
      return y.squaredNorm();
    }
    Vector e0 = Vector::Zero(n);
    e0(0) = 1.0;
    Vector y = llt_.matrixL().solve(e0);
    return y.squaredNorm();
  }

  // log det of the s-precision matrix at the current t (projected
  // Q^T beta D Q for DeltaConstrained, beta D + h e^t for HMassed), read off
  // the factorization that is already in hand.
  double logdet_prec() const {
    double ld = 0.0;
    const auto& l = llt_.matrixLLT();
    for (int i = 0; i < l.rows(); ++i) ld += std::log(l(i, i));
    return 2.0 * ld;
  }

  SweepStats sweep(std::mt19937_64& rng) {
    SweepStats st;
    if (cfg_.kernel == Kernel::GibbsAlternating) {
      sweep_sites(rng, st);
      shift_move(rng, st);
    } else {
      mala_move(rng, st);
    }
    refactor();
    draw_s(rng);
    return st;
  }

  void tune_step(double site_rate, double aux_rate) {
    const auto adjust = [](double step, double rate, double target) {
      step *= std::exp(0.7 * (rate - target));
      return std::min(20.0, std::max(1e-4, step));
    };
    if (cfg_.kernel == Kernel::GibbsAlternating) {
      step_site_ = adjust(step_site_, site_rate, 0.575);
      step_aux_ = adjust(step_aux_, aux_rate, 0.50);
    } else {
      step_aux_ = adjust(step_aux_, aux_rate, 0.55);
    }
  }

 private:
  // Local joint energy of t_i at fixed s (includes the -t_i measure term).
  // Returns +inf on overflow so such proposals are rejected cleanly.
  double local_energy(int i, double ti) const {
    if (std::abs(ti) > 690.0) return std::numeric_limits<double>::infinity();
    double e = 0.0;
    for (int j : lat_.neighbors[i]) {
      const double sum = ti + t_(j);
      if (sum > 690.0) return std::numeric_limits<double>::infinity();
      const double ds = s_(i) - s_(j);
      e += p_.beta * (std::cosh(ti - t_(j)) + 0.5 * ds * ds * std::exp(sum));
    }
    e += p_.h * std::cosh(ti);
    if (p_.ensemble == Ensemble::HMassed) e += 0.5 * p_.h * s_(i) * s_(i) * std::exp(ti);
    return e - ti;
  }

  void sweep_sites(std::mt19937_64& rng, SweepStats& st) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < lat_.num_sites; ++i) {
      const double t_old = t_(i);
      const double t_new = t_old + step_site_ * normal(rng);
      const double de = local_energy(i, t_new) - local_energy(i, t_old);
      const double ap = metropolis_accept_probability(de);
      const double u = unif(rng);
      const bool acc = u < ap;
      if (log_) log_->push_back({i, t_old, t_new, de, ap, u, acc});
      if (acc) t_(i) = t_new;
      ++st.site_proposed;
      if (acc) ++st.site_accepted;
    }
  }

  // Global dilation move (t, s) -> (t + gamma, e^{-gamma} s).  The edge terms
  // cosh(t_i - t_j) and (s_i - s_j)^2 e^{t_i + t_j} are exactly invariant, so
  // the acceptance only sees the symmetry-breaking h terms, the site measure
  // e^{sum t}, and the Jacobian of the s rescaling; the resulting curvature
  // along the move is O(h |Lambda|) rather than O(|Lambda|), which keeps the
  // collective mode's autocorrelation time volume-independent.  Stationarity
  // of this move is precisely the h sum <sinh t> = 1 identity.
  void shift_move(std::mt19937_64& rng, SweepStats& st) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double gamma = step_aux_ * normal(rng);
    const int n = lat_.num_sites;
    ++st.aux_proposed;
    if (t_.cwiseAbs().maxCoeff() + std::abs(gamma) > 690.0 || std::abs(gamma) > 300.0)
      return;  // would risk overflow in cosh(t+gamma) or the s rescaling; reject
    double de = 0.0;
    for (int j = 0; j < n; ++j)
      de += p_.h * (std::cosh(t_(j) + gamma) - std::cosh(t_(j)));
    if (p_.ensemble == Ensemble::DeltaConstrained) {
      // measure e^{sum t} gives -n gamma, the (n-1)-dimensional s rescaling
      // Jacobian gives +(n-1) gamma.
      de -= gamma;
    } else {
      // the n-dimensional Jacobian cancels the measure term entirely; the s
      // mass term transforms as s^2 e^t -> e^{-gamma} s^2 e^t.
      double m = 0.0;
      for (int j = 0; j < n; ++j) m += s_(j) * s_(j) * std::exp(t_(j));
      de += 0.5 * p_.h * std::expm1(-gamma) * m;
    }
    if (unif(rng) < metropolis_accept_probability(de)) {
      t_.array() += gamma;
      s_ *= std::exp(-gamma);
      ++st.aux_accepted;
    }
  }

  void mala_move(std::mt19937_64& rng, SweepStats& st) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = lat_.num_sites;
    if (!eg_valid_) {
      eg_ = effective_action_and_grad(t_, p_, lat_);
      eg_valid_ = true;
    }
    const double tau = step_aux_;
    Vector xi(n);
    for (int i = 0; i < n; ++i) xi(i) = normal(rng);
    const Vector mean_fwd = t_ - 0.5 * tau * tau * eg_.grad;
    const Vector t_prop = mean_fwd + tau * xi;
    ++st.aux_proposed;
    EnergyGrad prop;
    try {
      prop = effective_action_and_grad(t_prop, p_, lat_);
    } catch (const std::domain_error&) {
      return;  // overflow region: reject
    }
    const Vector mean_rev = t_prop - 0.5 * tau * tau * prop.grad;
    const double log_q_fwd = -(t_prop - mean_fwd).squaredNorm() / (2.0 * tau * tau);
    const double log_q_rev = -(t_ - mean_rev).squaredNorm() / (2.0 * tau * tau);
    const double log_alpha = -prop.value + eg_.value + log_q_rev - log_q_fwd;
    if (std::log(std::max(unif(rng), 1e-300)) < log_alpha) {
      t_ = t_prop;
      eg_ = prop;
      ++st.aux_accepted;
    }
  }

  void refactor() {
    const int n = lat_.num_sites;
    if (p_.ensemble == Ensemble::DeltaConstrained) {
      const Matrix m = q_.transpose() * (p_.beta * build_D(t_, lat_, Storage::Dense).dense()) * q_;
      llt_.compute(m);
      if (llt_.info() != Eigen::Success)
        throw std::runtime_error("Chain: projected beta D(t) not positive definite");
    } else {
      llt_.compute(detail::massed_matrix(t_, p_, lat_));
      if (llt_.info() != Eigen::Success)
        throw std::runtime_error("Chain: beta D(t) + h e^t not positive definite");
    }
  }

  void draw_s(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = lat_.num_sites;
    if (p_.ensemble == Ensemble::DeltaConstrained) {
      Vector xi(n - 1);
      for (int i = 0; i < n - 1; ++i) xi(i) = normal(rng);
      s_ = q_ * llt_.matrixU().solve(xi);
    } else {
      Vector xi(n);
      for (int i = 0; i < n; ++i) xi(i) = normal(rng);
      s_ = llt_.matrixU().solve(xi);
    }
  }

  const Lattice& lat_;
  ModelParams p_;
  ChainConfig cfg_;
  Matrix q_;
  Vector t_, s_;
  double step_site_ = 0.5, step_aux_ = 0.5;
  Eigen::LLT<Matrix> llt_;
  EnergyGrad eg_;
  bool eg_valid_ = false;
  std::vector<ProposalRecord>* log_ = nullptr;
};

// Exact conditional draw of s given t (used stand-alone in tests).
inline Vector sample_s_given_t(const Vector& t, const ModelParams& p, const Lattice& lat,
                               std::mt19937_64& rng) {
  p.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = lat.num_sites;
  if (p.ensemble == Ensemble::DeltaConstrained) {
    const Matrix q = helmert_basis(n);
    const Matrix m = q.transpose() * (p.beta * build_D(t, lat, Storage::Dense).dense()) * q;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sample_s_given_t: projected beta D(t) not positive definite");
    Vector xi(n - 1);
    for (int i = 0; i < n - 1; ++i) xi(i) = normal(rng);
    return q * llt.matrixU().solve(xi);
  }
  Eigen::LLT<Matrix> llt(detail::massed_matrix(t, p, lat));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_s_given_t: beta D(t) + h e^t not positive definite");
  Vector xi(n);
  for (int i = 0; i < n; ++i) xi(i) = normal(rng);
  return llt.matrixU().solve(xi);
}

// One sweep applied to caller-owned state; returns the fraction of accepted
// per-site proposals (1.0 for an accepted MALA move).
inline double mcmc_step_t(Vector& t, Vector& s, const ModelParams& p, const Lattice& lat,
                          const ChainConfig& cfg, std::mt19937_64& rng) {
  Chain chain(lat, p, cfg);
  chain.set_state(t, s);
  const SweepStats st = chain.sweep(rng);
  t = chain.t();
  s = chain.s();
  if (cfg.kernel == Kernel::GibbsAlternating)
    return st.site_proposed > 0 ? static_cast<double>(st.site_accepted) / st.site_proposed : 0.0;
  return st.aux_proposed > 0 ? static_cast<double>(st.aux_accepted) / st.aux_proposed : 0.0;
}

struct SampleView {
  const Vector& t;
  const Vector& s;
  double c00;          // s-covariance (0,0) at this t
  double logdet_prec;  // log det of the s-precision matrix at this t
  const Lattice& lat;
  const ModelParams& params;
};

struct ChainObservable {
  std::string name;
  std::function<double(const SampleView&)> fn;
};

struct ChainResult {
  std::map<std::string, std::vector<double>> series;
  std::map<std::string, Estimate> estimates;
  double accept_site = 0.0;
  double accept_aux = 0.0;
  double step_site = 0.0;
  double step_aux = 0.0;
  long measured = 0;
};

inline ChainResult run_chain(const ModelParams& p, const Lattice& lat, const ChainConfig& cfg,
                             const std::vector<ChainObservable>& observables, std::mt19937_64& rng) {
  cfg.validate();
  Chain chain(lat, p, cfg);
  ChainResult res;
  for (const auto& ob : observables) {
    if (res.series.count(ob.name))
      throw std::invalid_argument("run_chain: duplicate observable " + ob.name);
    res.series[ob.name] = {};
  }
  long site_prop = 0, site_acc = 0, aux_prop = 0, aux_acc = 0;
  long tune_site_prop = 0, tune_site_acc = 0, tune_aux_prop = 0, tune_aux_acc = 0;
  for (long sweep = 0; sweep < cfg.sweeps; ++sweep) {
    const SweepStats st = chain.sweep(rng);
    site_prop += st.site_proposed;
    site_acc += st.site_accepted;
    aux_prop += st.aux_proposed;
    aux_acc += st.aux_accepted;
    if (cfg.tune && sweep < cfg.burn_in) {
      tune_site_prop += st.site_proposed;
      tune_site_acc += st.site_accepted;
      tune_aux_prop += st.aux_proposed;
      tune_aux_acc += st.aux_accepted;
      if ((sweep + 1) % 50 == 0) {
        const double sr = tune_site_prop > 0 ? static_cast<double>(tune_site_acc) / tune_site_prop : 0.5;
        const double ar = tune_aux_prop > 0 ? static_cast<double>(tune_aux_acc) / tune_aux_prop : 0.5;
        chain.tune_step(sr, ar);
        tune_site_prop = tune_site_acc = tune_aux_prop = tune_aux_acc = 0;
      }
    }
    if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) {
      const SampleView view{chain.t(), chain.s(), chain.c00(), chain.logdet_prec(), lat, p};
      for (const auto& ob : observables) res.series[ob.name].push_back(ob.fn(view));
      ++res.measured;
    }
  }
  for (const auto& ob : observables) res.estimates[ob.name] = estimate_from_series(res.series[ob.name]);
  res.accept_site = site_prop > 0 ? static_cast<double>(site_acc) / site_prop : 0.0;
  res.accept_aux = aux_prop > 0 ? static_cast<double>(aux_acc) / aux_prop : 0.0;
  res.step_site = chain.step_site();
  res.step_aux = chain.step_aux();
  return res;
}

}  // namespace horosim
