#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "score/errors.hpp"
#include "score/nelder_mead.hpp"
#include "score/rng.hpp"

namespace score {

/// Generalized extreme value parameters (shape xi, location mu, scale sigma).
/// Negative shape is the Weibull class with finite right endpoint
/// mu - sigma/xi.
struct GevParams {
  double shape = 0.0;
  double location = 0.0;
  double scale = 1.0;
};

struct GevFitResult {
  GevParams params;
  double log_likelihood = 0.0;
  bool converged = false;
  int n_samples = 0;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool passed = true;
};

struct BootstrapResult {
  double ci_upper = 0.0;
  std::vector<double> endpoint_samples;
  int n_resamples_requested = 0;
  int n_failed = 0;
  double alpha = 0.0;
  bool unreliable = false;  ///< more than 20% of refits failed
};

struct EvtConfig {
  double alpha = 0.01;        ///< one-sided bootstrap confidence level 1-alpha
  int b_resamples = 1000;     ///< bootstrap resample count
  double ks_alpha = 0.05;     ///< goodness-of-fit significance threshold
  bool ks_parametric = false; ///< true -> parametric-bootstrap KS p-value
  int ks_bootstrap = 200;     ///< simulations for the parametric KS p-value
  int min_blocks = 20;        ///< fit refuses fewer block maxima than this
};

/// GEV cumulative distribution function (Gumbel branch when |xi| < 1e-8).
inline double gev_cdf(const GevParams& p, double y) {
  if (!(p.scale > 0.0)) {
    throw ArgumentError("gev_cdf: scale must be positive");
  }
  const double u = (y - p.location) / p.scale;
  if (std::abs(p.shape) < 1e-8) {
    return std::exp(-std::exp(-u));
  }
  const double t = 1.0 + p.shape * u;
  if (t <= 0.0) {
    return p.shape < 0.0 ? 1.0 : 0.0;  // above/below the finite endpoint
  }
  return std::exp(-std::pow(t, -1.0 / p.shape));
}

/// GEV quantile function (inverse CDF), q in (0, 1).
inline double gev_quantile(const GevParams& p, double q) {
  if (!(p.scale > 0.0)) {
    throw ArgumentError("gev_quantile: scale must be positive");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw ArgumentError("gev_quantile: q must lie in (0,1)");
  }
  const double w = -std::log(q);
  if (std::abs(p.shape) < 1e-8) {
    return p.location - p.scale * std::log(w);
  }
  return p.location + p.scale * (std::pow(w, -p.shape) - 1.0) / p.shape;
}

/// Finite right endpoint  z* = mu - sigma/xi  of a Weibull-class fit.
inline double endpoint(const GevParams& p) {
  if (!(p.shape < 0.0)) {
    throw HeavyTailError("endpoint: shape " + std::to_string(p.shape) +
                         " is non-negative; no finite upper endpoint");
  }
  return p.location - p.scale / p.shape;
}

namespace detail {

/// Negative log-likelihood of GEV(theta) on data y; theta = (xi, mu, log s).
/// Support violations return a large penalty so the simplex backs away.
inline double gev_negloglik(const Eigen::Vector3d& theta,
                            const Eigen::VectorXd& y) {
  const double xi = theta[0];
  const double mu = theta[1];
  const double logs = theta[2];
  if (!(logs > -40.0 && logs < 40.0)) {
    return 1e100;
  }
  const double s = std::exp(logs);
  const auto n = static_cast<double>(y.size());
  if (std::abs(xi) < 1e-8) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double u = (y[i] - mu) / s;
      acc += u + std::exp(-u);
    }
    return n * logs + acc;
  }
  double sum_log_t = 0.0;
  double sum_pow = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = 1.0 + xi * (y[i] - mu) / s;
    if (t <= 0.0) {
      return 1e100;
    }
    const double lt = std::log(t);
    sum_log_t += lt;
    sum_pow += std::exp(-lt / xi);
  }
  return n * logs + (1.0 + 1.0 / xi) * sum_log_t + sum_pow;
}

}  // namespace detail

/// Maximum-likelihood GEV fit by multi-start Nelder-Mead on (xi, mu, log s).
///
/// The data are standardized first — the likelihood surface is viciously
/// ill-conditioned when the raw scale is far from one — and the optimum is
/// transformed back. Starts: moment-matched Gumbel location/scale with
/// shape in {-0.5, -0.1, 0.1}; best final likelihood wins.
inline GevFitResult fit_gev_mle(const std::vector<double>& values,
                                const EvtConfig& cfg = {}) {
  const auto n = static_cast<int>(values.size());
  if (n < cfg.min_blocks) {
    throw ArgumentError("fit_gev_mle: " + std::to_string(n) +
                        " samples, need at least " +
                        std::to_string(cfg.min_blocks));
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = values[static_cast<std::size_t>(i)];
  }
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / n);
  if (!(sd > 0.0) ||
      sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    throw DegenerateDataError("fit_gev_mle: data carry no variation");
  }
  y = (y.array() - mean) / sd;

  // Moment start on the standardized scale (Gumbel mean/variance relations).
  const double sigma0 = std::sqrt(6.0) / 3.14159265358979323846;
  const double mu0 = -0.57721566490153286 * sigma0;

  NelderMeadOptions opt;
  opt.xatol = 1e-8;
  opt.fatol = 1e-8;
  opt.max_iters = 2000;
  bool any = false;
  bool best_converged = false;
  double best_nll = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_theta = Eigen::Vector3d::Zero();
  for (const double xi0 : {-0.5, -0.1, 0.1}) {
    Eigen::Vector3d theta0(xi0, mu0, std::log(sigma0));
    auto run = nelder_mead(
        [&y](const Eigen::VectorXd& th) {
          return detail::gev_negloglik(Eigen::Vector3d(th), y);
        },
        theta0, opt);
    if (run.fval < 1e99 && run.fval < best_nll) {
      best_nll = run.fval;
      best_theta = run.x;
      best_converged = run.converged;
      any = true;
    }
  }

  GevFitResult fit;
  fit.n_samples = n;
  if (!any) {
    fit.converged = false;
    fit.params = GevParams{0.0, mean, sd};
    fit.log_likelihood = -std::numeric_limits<double>::infinity();
    return fit;
  }
  fit.params.shape = best_theta[0];
  fit.params.location = mean + sd * best_theta[1];
  fit.params.scale = sd * std::exp(best_theta[2]);
  // Change of variables y -> (y-mean)/sd shifts the log-density by -log(sd).
  fit.log_likelihood = -best_nll - n * std::log(sd);
  fit.converged = best_converged;
  return fit;
}

/// Kolmogorov limiting survival function  Q(u) = P(sup|B| > u).
///
/// Alternating series for large arguments, the theta-function dual for
/// small ones; the crossover at 1.18 keeps both branches short and accurate
/// to ~1e-14.
inline double kolmogorov_survival(double u) {
  if (u <= 0.0) {
    return 1.0;
  }
  constexpr double kPi = 3.14159265358979323846;
  if (u < 1.18) {
    // theta-function dual: 1 - sqrt(2 pi)/u * sum exp(-(2k-1)^2 pi^2/(8u^2))
    const double q = std::exp(-kPi * kPi / (8.0 * u * u));
    const double sum =
        q + std::pow(q, 9.0) + std::pow(q, 25.0) + std::pow(q, 49.0);
    return 1.0 - std::sqrt(2.0 * kPi) / u * sum;
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * u * u);
    sum += sign * term;
    if (term < 1e-16) {
      break;
    }
    sign = -sign;
  }
  return std::max(0.0, 2.0 * sum);
}

namespace detail {

/// One-sample KS statistic of sorted data against a fitted GEV.
inline double ks_statistic_sorted(const std::vector<double>& sorted,
                                  const GevParams& p) {
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = gev_cdf(p, sorted[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, std::abs(hi), std::abs(lo)});
  }
  return d;
}

}  // namespace detail

/// One-sample Kolmogorov-Smirnov test of block maxima against a fitted GEV.
///
/// The default p-value uses the asymptotic Kolmogorov distribution of
/// sqrt(n) D. With parameters estimated from the same data that p-value is
/// biased conservative (toward passing); set `ks_parametric` for a
/// parametric-bootstrap p-value that re-fits each simulated sample.
inline KsResult ks_test(const std::vector<double>& values, const GevParams& p,
                        const EvtConfig& cfg = {},
                        std::uint64_t seed = 0x4B53u) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  KsResult res;
  res.statistic = detail::ks_statistic_sorted(sorted, p);
  if (!cfg.ks_parametric) {
    res.p_value = kolmogorov_survival(
        std::sqrt(static_cast<double>(sorted.size())) * res.statistic);
  } else {
    const auto n = static_cast<int>(sorted.size());
    EvtConfig sub = cfg;
    sub.min_blocks = std::min(sub.min_blocks, n);
    int exceed = 0;
    for (int b = 0; b < cfg.ks_bootstrap; ++b) {
      PhiloxStream stream(seed, stream_id(StreamTag::kKs,
                                          static_cast<std::uint64_t>(b)));
      std::vector<double> sim(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        sim[static_cast<std::size_t>(i)] =
            gev_quantile(p, stream.uniform_open());
      }
      double d_b;
      try {
        const GevFitResult refit = fit_gev_mle(sim, sub);
        std::sort(sim.begin(), sim.end());
        d_b = detail::ks_statistic_sorted(sim, refit.params);
      } catch (const Error&) {
        continue;  // degenerate simulation; skip
      }
      if (d_b >= res.statistic) {
        ++exceed;
      }
    }
    res.p_value = (1.0 + exceed) / (1.0 + cfg.ks_bootstrap);
  }
  res.passed = res.p_value >= cfg.ks_alpha;
  return res;
}

/// Bootstrap upper confidence bound for the GEV right endpoint.
///
/// Each resample-with-replacement is refit; resamples whose fitted shape is
/// non-negative have no finite endpoint and are counted as failures rather
/// than mapped to +infinity. The bound is the (1-alpha) empirical quantile
/// of the surviving endpoints with the order statistic rounded up
/// (conservative for an upper bound). More than 20% failures flags the
/// result unreliable.
inline BootstrapResult bootstrap_upper_ci(const std::vector<double>& values,
                                          int b_resamples, double alpha,
                                          std::uint64_t seed,
                                          const EvtConfig& cfg = {}) {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw ArgumentError("bootstrap_upper_ci: alpha must lie in (0, 0.5]");
  }
  if (b_resamples < 1) {
    throw ArgumentError("bootstrap_upper_ci: need at least one resample");
  }
  const auto n = values.size();
  BootstrapResult res;
  res.n_resamples_requested = b_resamples;
  res.alpha = alpha;
  res.endpoint_samples.reserve(static_cast<std::size_t>(b_resamples));
  std::vector<double> resample(n);
  for (int b = 0; b < b_resamples; ++b) {
    PhiloxStream stream(
        seed, stream_id(StreamTag::kBootstrap, static_cast<std::uint64_t>(b)));
    for (std::size_t i = 0; i < n; ++i) {
      resample[i] = values[stream.uniform_index(n)];
    }
    try {
      const GevFitResult fit = fit_gev_mle(resample, cfg);
      if (fit.params.shape < 0.0) {
        res.endpoint_samples.push_back(endpoint(fit.params));
      } else {
        ++res.n_failed;
      }
    } catch (const Error&) {
      ++res.n_failed;
    }
  }
  if (res.endpoint_samples.empty()) {
    throw BootstrapError("bootstrap_upper_ci: no resample produced a finite "
                         "endpoint");
  }
  res.unreliable =
      res.n_failed > 0.2 * static_cast<double>(res.n_resamples_requested);
  std::vector<double> sorted = res.endpoint_samples;
  std::sort(sorted.begin(), sorted.end());
  const auto k = static_cast<double>(sorted.size() - 1);
  const auto idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * k));
  res.ci_upper = sorted[idx];
  return res;
}

}  // namespace score
