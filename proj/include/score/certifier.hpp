#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "score/dynamics.hpp"
#include "score/errors.hpp"
#include "score/evt.hpp"
#include "score/lyapunov.hpp"
#include "score/manifold_sampler.hpp"
#include "score/rng.hpp"

namespace score {

enum class Decision { kCertified, kRejected, kFailHeavyTail };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::kCertified:
      return "CERTIFIED";
    case Decision::kRejected:
      return "REJECTED";
    case Decision::kFailHeavyTail:
      return "FAIL_HEAVY_TAIL";
  }
  return "UNKNOWN";
}

struct Counterexample {
  StateVector state;
  double vdot = 0.0;
};

/// Complete outcome of one fixed-level certification attempt.
struct CertificationResult {
  Decision decision = Decision::kRejected;
  double rho = 0.0;
  double gamma_point = std::numeric_limits<double>::quiet_NaN();  ///< z*
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  KsResult ks;
  GevFitResult gev;
  BootstrapResult bootstrap;
  std::optional<Counterexample> counterexample;
  SamplerDiagnostics diagnostics;
  ResolvedPsgld resolved;
  bool degenerate = false;   ///< block maxima constant; decided by sign
  bool evt_applied = false;  ///< GEV/bootstrap/KS stages actually ran
  std::string reason;        ///< one-line explanation of the decision
  double wall_time = 0.0;
  double wall_time_sampling = 0.0;
  double wall_time_fitting = 0.0;
  double wall_time_bootstrap = 0.0;
  BlockMaximaSet maxima;
};

namespace detail {

inline double seconds_since(
    const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// Spread threshold below which block maxima count as a constant dataset.
inline bool is_degenerate(const std::vector<double>& values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double scale = std::max({std::abs(*lo), std::abs(*hi), 1e-12});
  return (*hi - *lo) <= 1e-7 * scale;
}

}  // namespace detail

/// Runs the four-stage certification at a fixed level rho:
///   1. harvest block maxima of Vdot on {V = rho} by projected Langevin
///      sampling, aborting on the first positive discovery (counterexample);
///   2. fit a GEV to the maxima by MLE; a non-negative shape is a heavy-tail
///      failure (the endpoint is not finite);
///   3. bootstrap an upper confidence bound for the endpoint z*;
///   4. gate on the Kolmogorov-Smirnov fit test.
/// CERTIFIED requires ci_upper < 0 AND the KS gate AND a reliable bootstrap.
/// A constant dataset short-circuits to the sign of the constant, since the
/// GEV likelihood is undefined there.
inline CertificationResult certify_level(const OdeSystem& sys,
                                         const GramCandidate& cand,
                                         double rho,
                                         const PsgldConfig& psgld_cfg,
                                         const EvtConfig& evt_cfg) {
  if (!(rho > 0.0)) {
    throw ArgumentError("certify_level: rho must be positive");
  }
  const auto t0 = std::chrono::steady_clock::now();
  CertificationResult res;
  res.rho = rho;

  const LieDerivative lie(cand, sys);
  CollectResult collected;
  try {
    collected = collect_block_maxima(lie, rho, psgld_cfg);
  } catch (const NonCompactError& e) {
    res.decision = Decision::kRejected;
    res.reason = std::string("level set not compact: ") + e.what();
    res.wall_time = res.wall_time_sampling = detail::seconds_since(t0);
    return res;
  }
  res.wall_time_sampling = detail::seconds_since(t0);
  res.diagnostics = collected.diagnostics;
  res.resolved = collected.resolved;
  res.maxima = collected.maxima;

  if (collected.positive_found) {
    res.decision = Decision::kRejected;
    res.counterexample =
        Counterexample{collected.empirical_argmax, collected.empirical_max};
    res.reason = "non-negative Lie derivative observed in block " +
                 std::to_string(collected.positive_block);
    res.wall_time = detail::seconds_since(t0);
    return res;
  }

  const std::vector<double>& maxima = collected.maxima.values;
  if (detail::is_degenerate(maxima)) {
    // Constant Vdot on the manifold: decide by its sign directly.
    const double level = *std::max_element(maxima.begin(), maxima.end());
    res.degenerate = true;
    res.gamma_point = level;
    res.ci_upper = level;
    res.decision =
        level < 0.0 ? Decision::kCertified : Decision::kRejected;
    res.reason = level < 0.0
                     ? "constant negative Lie derivative on the manifold"
                     : "constant non-negative Lie derivative on the manifold";
    res.wall_time = detail::seconds_since(t0);
    return res;
  }

  const auto t_fit = std::chrono::steady_clock::now();
  res.evt_applied = true;
  try {
    res.gev = fit_gev_mle(maxima, evt_cfg);
  } catch (const Error& e) {
    res.decision = Decision::kRejected;
    res.reason = std::string("extreme-value fit failed: ") + e.what();
    res.wall_time = detail::seconds_since(t0);
    return res;
  }
  res.wall_time_fitting = detail::seconds_since(t_fit);
  if (!res.gev.converged) {
    res.decision = Decision::kRejected;
    res.reason = "extreme-value fit did not converge";
    res.wall_time = detail::seconds_since(t0);
    return res;
  }
  if (res.gev.params.shape >= 0.0) {
    res.decision = Decision::kFailHeavyTail;
    res.reason = "fitted tail shape is non-negative (no finite endpoint)";
    res.wall_time = detail::seconds_since(t0);
    return res;
  }
  res.gamma_point = endpoint(res.gev.params);

  const auto t_boot = std::chrono::steady_clock::now();
  try {
    res.bootstrap = bootstrap_upper_ci(
        maxima, evt_cfg.b_resamples, evt_cfg.alpha,
        mix_seed(psgld_cfg.seed, 0xB007u), evt_cfg);
  } catch (const Error& e) {
    res.decision = Decision::kRejected;
    res.reason = std::string("bootstrap failed: ") + e.what();
    res.wall_time = detail::seconds_since(t0);
    return res;
  }
  res.wall_time_bootstrap = detail::seconds_since(t_boot);
  res.ci_upper = res.bootstrap.ci_upper;

  res.ks = ks_test(maxima, res.gev.params, evt_cfg,
                   mix_seed(psgld_cfg.seed, 0x4B53u));

  if (res.bootstrap.unreliable) {
    res.decision = Decision::kRejected;
    res.reason = "bootstrap unreliable (over 20% of refits lost the finite "
                 "endpoint)";
  } else if (res.ci_upper < 0.0 && res.ks.passed) {
    res.decision = Decision::kCertified;
    res.reason = "upper confidence bound negative and fit test passed";
  } else {
    res.decision = Decision::kRejected;
    res.reason = res.ks.passed
                     ? "upper confidence bound not negative"
                     : "goodness-of-fit gate failed";
  }
  res.wall_time = detail::seconds_since(t0);
  return res;
}

struct SearchTraceEntry {
  double rho = 0.0;
  Decision decision = Decision::kRejected;
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;
};

struct SearchResult {
  double rho_star = 0.0;
  std::vector<SearchTraceEntry> trace;
  int iterations = 0;
  CertificationResult final_certification;  ///< the run that certified rho_star
};

struct SearchConfig {
  double rho_low = 0.0;   ///< <= 0: derive from linearization_seed
  double rho_high = 0.0;  ///< <= 0: 100 * rho_low
  double rel_tol = 0.02;
  int max_iters = 64;
};

/// Probes levels near the origin, doubling while a dense direction sweep
/// keeps max Vdot strictly negative, and returns half the last passing
/// level — a certified-by-exhaustion starting point for the search.
/// The probe scale is the mean of V over unit directions, so behavior is
/// invariant to candidate rescaling.
inline double linearization_seed(const OdeSystem& sys,
                                 const GramCandidate& cand,
                                 std::uint64_t seed = 0x5EEDu,
                                 int n_dense = 10000) {
  const LieDerivative lie(cand, sys);
  const int n = sys.dimension;
  PhiloxStream scale_rng(seed, stream_id(StreamTag::kProbe, 0x5C));
  double v_mean = 0.0;
  StateVector u(n);
  for (int s = 0; s < 256; ++s) {
    double norm = 0.0;
    do {
      for (int i = 0; i < n; ++i) {
        u[i] = scale_rng.normal();
      }
      norm = u.norm();
    } while (norm < 1e-12);
    v_mean += cand.eval_v(u / norm);
  }
  v_mean /= 256.0;
  if (!(v_mean > 0.0)) {
    throw SeedError("linearization_seed: candidate is not positive on unit "
                    "directions");
  }

  const auto dense_check = [&](double rho) {
    PhiloxStream rng(seed, stream_id(StreamTag::kProbe, 0xD0));
    double vmax = -std::numeric_limits<double>::infinity();
    std::vector<double> mags;
    mags.reserve(static_cast<std::size_t>(n_dense));
    StateVector d(n);
    for (int s = 0; s < n_dense; ++s) {
      double norm = 0.0;
      do {
        for (int i = 0; i < n; ++i) {
          d[i] = rng.normal();
        }
        norm = d.norm();
      } while (norm < 1e-12);
      double val;
      try {
        val = lie.value(levelset_point(cand, rho, d / norm));
      } catch (const Error&) {
        return false;
      }
      vmax = std::max(vmax, val);
      mags.push_back(std::abs(val));
    }
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2,
                     mags.end());
    const double med = std::max(mags[mags.size() / 2], 1e-300);
    return vmax < 0.0 && -vmax > 1e-9 * med;
  };

  double rho = 1e-4 * v_mean;
  if (!dense_check(rho)) {
    throw SeedError("linearization_seed: no level near the origin passed the "
                    "dense decrease check");
  }
  double last_pass = rho;
  for (int d = 0; d < 60; ++d) {
    rho *= 2.0;
    if (!dense_check(rho)) {
      break;
    }
    last_pass = rho;
  }
  return 0.5 * last_pass;
}

/// Bisection for the largest certifiable level. The lower bracket must
/// certify (seed error otherwise); each midpoint evaluation re-namespaces
/// the master seed by its iteration index so the whole trace is
/// reproducible. Rejections and heavy-tail failures both shrink the upper
/// bracket.
inline SearchResult binary_search_rho(const OdeSystem& sys,
                                      const GramCandidate& cand,
                                      const SearchConfig& search_cfg,
                                      const PsgldConfig& psgld_cfg,
                                      const EvtConfig& evt_cfg) {
  double rho_low = search_cfg.rho_low;
  if (!(rho_low > 0.0)) {
    rho_low = linearization_seed(sys, cand, mix_seed(psgld_cfg.seed, 0x5EEDu));
  }
  double rho_high = search_cfg.rho_high;
  if (!(rho_high > 0.0)) {
    rho_high = 100.0 * rho_low;
  }
  if (!(rho_low < rho_high)) {
    throw ArgumentError("binary_search_rho: need rho_low < rho_high");
  }
  if (!(search_cfg.rel_tol > 0.0)) {
    throw ArgumentError("binary_search_rho: rel_tol must be positive");
  }

  SearchResult out;
  const auto evaluate = [&](double rho, int iter) {
    PsgldConfig cfg = psgld_cfg;
    cfg.seed = mix_seed(psgld_cfg.seed, static_cast<std::uint64_t>(iter));
    CertificationResult r = certify_level(sys, cand, rho, cfg, evt_cfg);
    out.trace.push_back(
        SearchTraceEntry{rho, r.decision, r.ci_upper, r.wall_time});
    return r;
  };

  CertificationResult low_res = evaluate(rho_low, 0);
  if (low_res.decision != Decision::kCertified) {
    throw SeedError("binary_search_rho: the lower bracket rho = " +
                    std::to_string(rho_low) + " failed its own certification");
  }
  out.final_certification = low_res;

  int iter = 1;
  while ((rho_high - rho_low) / rho_low > search_cfg.rel_tol &&
         iter <= search_cfg.max_iters) {
    const double mid = 0.5 * (rho_low + rho_high);
    CertificationResult r = evaluate(mid, iter);
    if (r.decision == Decision::kCertified) {
      rho_low = mid;
      out.final_certification = std::move(r);
    } else {
      rho_high = mid;
    }
    ++iter;
  }
  out.iterations = iter;
  out.rho_star = rho_low;
  return out;
}

}  // namespace score
