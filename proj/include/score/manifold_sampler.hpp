#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "score/errors.hpp"
#include "score/lyapunov.hpp"
#include "score/rng.hpp"

namespace score {

/// Hyperparameters of the projected Langevin sampler and the block-maxima
/// harvest. `eta` and `temperature` may be left unset, in which case they
/// resolve to scale-aware defaults at run time (see `resolve_psgld`); the
/// resolved values are what reports must echo.
struct PsgldConfig {
  std::optional<double> eta;          ///< step size; default 1e-3 * rho / N
  std::optional<double> temperature;  ///< noise level; default 1e-3 * med|Vdot|
  int k_steps = 500;                  ///< Langevin iterations per chain
  int block_size = 64;                ///< chains per block (m)
  int n_blocks = 100;                 ///< number of block maxima collected
  double grad_clip = -1.0;            ///< <0 auto (10 sqrt N), 0 off, >0 value
  double projection_tol = 1e-9;
  int projection_max_iters = 50;
  std::optional<int> reseed_period;   ///< reinitialize chains every p steps
  enum class Mode { kExactProjection, kSoftPenalty };
  Mode mode = Mode::kExactProjection;
  double penalty_weight = 1.0;        ///< soft-penalty constraint strength
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (eta && !(*eta >= 0.0)) {
      throw ConfigError("psgld: eta must be non-negative");
    }
    if (temperature && !(*temperature >= 0.0)) {
      throw ConfigError("psgld: temperature must be non-negative");
    }
    if (k_steps < 1 || block_size < 1 || n_blocks < 1) {
      throw ConfigError("psgld: k_steps, block_size, n_blocks must be >= 1");
    }
    if (!(projection_tol > 0.0)) {
      throw ConfigError("psgld: projection_tol must be positive");
    }
    if (projection_max_iters < 1) {
      throw ConfigError("psgld: projection_max_iters must be >= 1");
    }
    if (reseed_period && *reseed_period < 1) {
      throw ConfigError("psgld: reseed_period must be >= 1 when set");
    }
    if (threads < 1) {
      throw ConfigError("psgld: threads must be >= 1");
    }
  }
};

/// Concrete step size / temperature / clip for one (candidate, system, rho).
struct ResolvedPsgld {
  double eta = 0.0;
  double temperature = 0.0;
  double grad_clip = std::numeric_limits<double>::infinity();
};

/// One Langevin chain: a position on the level set and its private
/// counter-based random stream.
struct ChainState {
  StateVector position;
  PhiloxStream stream;
};

/// Projects x onto {V = rho} by damped Newton steps along grad V:
///   x <- x - lambda (V(x)-rho) grad V / ||grad V||^2.
/// Throws ProjectionError on a vanishing gradient or iteration cap.
inline StateVector project_to_levelset(const GramCandidate& cand,
                                       StateVector x, double rho,
                                       double tol = 1e-9,
                                       int max_iters = 50) {
  double err = std::abs(cand.eval_v(x) - rho);
  for (int it = 0; it < max_iters; ++it) {
    if (err <= tol) {
      return x;
    }
    const double v = cand.eval_v(x);
    const StateVector g = cand.grad_v(x);
    const double n2 = g.squaredNorm();
    if (n2 < 1e-20) {
      throw ProjectionError(
          "project_to_levelset: gradient vanished (critical point)");
    }
    const double newton = (v - rho) / n2;
    double lambda = 1.0;
    StateVector trial;
    double trial_err = err;
    for (int half = 0; half < 30; ++half) {
      trial = x - (lambda * newton) * g;
      trial_err = std::abs(cand.eval_v(trial) - rho);
      if (trial_err < err) {
        break;
      }
      lambda *= 0.5;
    }
    if (!(trial_err < err)) {
      throw ProjectionError("project_to_levelset: damped step stalled");
    }
    x = trial;
    err = trial_err;
  }
  if (err <= tol) {
    return x;
  }
  throw ProjectionError("project_to_levelset: iteration cap reached");
}

/// Finds the point t*u on {V = rho} along a unit ray u by doubling then
/// bisection (first crossing), polished by Newton projection.
inline StateVector levelset_point(const GramCandidate& cand, double rho,
                                  const StateVector& u, double tol = 1e-9) {
  double t_hi = 1.0;
  int doublings = 0;
  while (cand.eval_v(t_hi * u) < rho) {
    t_hi *= 2.0;
    if (++doublings > 60) {
      throw NonCompactError(
          "levelset_point: ray never reaches the level; the level set is "
          "unbounded in this direction");
    }
  }
  double t_lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (cand.eval_v(mid * u) >= rho) {
      t_hi = mid;
    } else {
      t_lo = mid;
    }
    if (t_hi - t_lo <= 1e-15 * t_hi) {
      break;
    }
  }
  StateVector x = t_hi * u;
  if (std::abs(cand.eval_v(x) - rho) <= tol) {
    return x;
  }
  return project_to_levelset(cand, std::move(x), rho, tol);
}

/// Draws `count` points on {V = rho}: directions uniform on the unit sphere
/// (normalized Gaussians), radii solved per ray. Uniform in direction, not
/// in surface measure, for anisotropic V — a documented stand-in.
inline std::vector<StateVector> sample_uniform_on_levelset(
    const GramCandidate& cand, double rho, int count, PhiloxStream& rng,
    double tol = 1e-9) {
  if (!(rho > 0.0)) {
    throw ArgumentError("sample_uniform_on_levelset: rho must be positive");
  }
  const int n = cand.dict.state_dim;
  std::vector<StateVector> out;
  out.reserve(static_cast<std::size_t>(count));
  StateVector u(n);
  for (int s = 0; s < count; ++s) {
    double norm = 0.0;
    do {
      for (int i = 0; i < n; ++i) {
        u[i] = rng.normal();
      }
      norm = u.norm();
    } while (norm < 1e-12);
    u /= norm;
    out.push_back(levelset_point(cand, rho, u, tol));
  }
  return out;
}

/// Resolves auto-scaled hyperparameters for a given problem:
///   eta         = 1e-3 * rho / N
///   temperature = 1e-3 * median |Vdot| over a 256-point probe of the set
///   grad_clip   = 10 sqrt(N)
/// Deterministic for a given seed; the probe uses a dedicated stream.
inline ResolvedPsgld resolve_psgld(const LieDerivative& lie, double rho,
                                   const PsgldConfig& cfg) {
  cfg.validate();
  const int n = lie.system().dimension;
  ResolvedPsgld r;
  r.eta = cfg.eta ? *cfg.eta : 1e-3 * rho / n;
  if (cfg.grad_clip < 0.0) {
    r.grad_clip = 10.0 * std::sqrt(static_cast<double>(n));
  } else if (cfg.grad_clip == 0.0) {
    r.grad_clip = std::numeric_limits<double>::infinity();
  } else {
    r.grad_clip = cfg.grad_clip;
  }
  if (cfg.temperature) {
    r.temperature = *cfg.temperature;
  } else {
    PhiloxStream probe(cfg.seed, stream_id(StreamTag::kProbe, 0x54));
    const auto pts = sample_uniform_on_levelset(lie.candidate(), rho, 256,
                                                probe, cfg.projection_tol);
    std::vector<double> mags;
    mags.reserve(pts.size());
    for (const auto& x : pts) {
      mags.push_back(std::abs(lie.value(x)));
    }
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    const double med = mags[mags.size() / 2];
    r.temperature = 1e-3 * std::max(med, 1e-9);
  }
  return r;
}

/// One Langevin step of a single chain (Eq.-of-motion form:
/// x+ = Pi_M(x + eta grad Vdot + sqrt(2 T eta) xi)). In soft-penalty mode
/// the constraint enters the drift instead and no projection is done.
/// A failed projection reseeds the chain from its own stream.
inline ChainState& psgld_step(const LieDerivative& lie, ChainState& state,
                              double rho, const PsgldConfig& cfg,
                              const ResolvedPsgld& rp,
                              long* projection_failures = nullptr,
                              long* reseeds = nullptr) {
  const GramCandidate& cand = lie.candidate();
  const int n = lie.system().dimension;
  StateVector g = lie.grad(state.position);
  if (cfg.mode == PsgldConfig::Mode::kSoftPenalty) {
    const double v = cand.eval_v(state.position);
    g -= cfg.penalty_weight * (v - rho) * cand.grad_v(state.position);
  }
  const double gnorm = g.norm();
  if (gnorm > rp.grad_clip) {
    g *= rp.grad_clip / gnorm;
  }
  StateVector proposal = state.position + rp.eta * g;
  const double sigma = std::sqrt(2.0 * rp.temperature * rp.eta);
  if (sigma > 0.0) {
    for (int i = 0; i < n; ++i) {
      proposal[i] += sigma * state.stream.normal();
    }
  }
  if (cfg.mode == PsgldConfig::Mode::kSoftPenalty) {
    state.position = std::move(proposal);
    return state;
  }
  try {
    state.position =
        project_to_levelset(cand, std::move(proposal), rho,
                            cfg.projection_tol, cfg.projection_max_iters);
  } catch (const ProjectionError&) {
    if (projection_failures) {
      ++*projection_failures;
    }
    state.position = sample_uniform_on_levelset(cand, rho, 1, state.stream,
                                                cfg.projection_tol)[0];
    if (reseeds) {
      ++*reseeds;
    }
  }
  return state;
}

/// Spec-level convenience overload; resolves hyperparameters on the fly.
inline ChainState& psgld_step(const LieDerivative& lie, ChainState& state,
                              double rho, const PsgldConfig& cfg) {
  const ResolvedPsgld rp = resolve_psgld(lie, rho, cfg);
  return psgld_step(lie, state, rho, cfg, rp);
}

/// Everything one block of chains produced.
struct BlockResult {
  Eigen::VectorXd finals;      ///< final Vdot per chain
  double block_max = 0.0;      ///< max of finals (the block maximum M_b)
  double empirical_max = 0.0;  ///< max Vdot over every on-manifold state seen
  StateVector empirical_argmax;
  long projection_failures = 0;
  long reseeds = 0;
};

namespace detail {

/// Batched exact projection for quadratic V = x^T Q x: the Newton ray
/// x - t grad V crosses the level set where a t^2 - b t + (v - rho) = 0,
/// solved in closed form per column (stable small root). Columns whose ray
/// misses or whose gradient degenerates fall back to damped Newton.
inline void project_columns_quadratic(const GramCandidate& cand,
                                      Eigen::MatrixXd& x, double rho,
                                      double tol, int max_iters,
                                      std::vector<PhiloxStream>& streams,
                                      long& projection_failures,
                                      long& reseeds) {
  const Eigen::MatrixXd& q = cand.gram;
  Eigen::MatrixXd qx = q * x;                       // gives v and grad V
  Eigen::MatrixXd qqx = q * qx;                     // gives a = g^T Q g / 4
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double v = x.col(j).dot(qx.col(j));
    const double b = 4.0 * qx.col(j).squaredNorm();       // ||grad V||^2
    const double a = 4.0 * qx.col(j).dot(qqx.col(j));     // g^T Q g
    const double disc = b * b - 4.0 * a * (v - rho);
    bool ok = b > 1e-20 && disc >= 0.0 && a > 0.0;
    if (ok) {
      const double t = 2.0 * (v - rho) / (b + std::sqrt(disc));
      x.col(j) -= (2.0 * t) * qx.col(j);  // grad V = 2 Q x
      ok = std::isfinite(x.col(j).sum());
    }
    if (!ok) {
      try {
        x.col(j) =
            project_to_levelset(cand, x.col(j), rho, tol, max_iters);
      } catch (const ProjectionError&) {
        ++projection_failures;
        x.col(j) = sample_uniform_on_levelset(
            cand, rho, 1, streams[static_cast<std::size_t>(j)], tol)[0];
        ++reseeds;
      }
    }
  }
}

}  // namespace detail

/// Runs one block: `block_size` chains initialized uniformly on {V = rho},
/// advanced `k_steps` Langevin iterations, final Vdot recorded per chain.
/// Also tracks the running maximum of Vdot over every on-manifold state it
/// visits, so a caller can abort on the first positive discovery.
/// Deterministic in (seed, block_index) alone.
inline BlockResult run_block_resolved(const LieDerivative& lie, double rho,
                                      const PsgldConfig& cfg,
                                      const ResolvedPsgld& rp,
                                      int block_index) {
  const GramCandidate& cand = lie.candidate();
  const int n = lie.system().dimension;
  const int m = cfg.block_size;
  const bool exact = cfg.mode == PsgldConfig::Mode::kExactProjection;
  const bool batched = lie.has_fast_path() && exact;

  BlockResult out;
  out.empirical_max = -std::numeric_limits<double>::infinity();
  out.empirical_argmax = StateVector::Zero(n);

  std::vector<PhiloxStream> streams;
  streams.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    streams.emplace_back(
        cfg.seed, stream_id(StreamTag::kChain,
                            static_cast<std::uint64_t>(block_index),
                            static_cast<std::uint64_t>(j)));
  }

  Eigen::MatrixXd x(n, m);
  StateVector u(n);
  auto init_chain = [&](int j) {
    auto& stream = streams[static_cast<std::size_t>(j)];
    double norm = 0.0;
    do {
      for (int i = 0; i < n; ++i) {
        u[i] = stream.normal();
      }
      norm = u.norm();
    } while (norm < 1e-12);
    x.col(j) = levelset_point(cand, rho, u / norm, cfg.projection_tol);
  };
  for (int j = 0; j < m; ++j) {
    init_chain(j);
  }

  Eigen::VectorXd vals(m);
  auto track = [&](const Eigen::VectorXd& v) {
    for (int j = 0; j < m; ++j) {
      if (v[j] > out.empirical_max) {
        out.empirical_max = v[j];
        out.empirical_argmax = x.col(j);
      }
    }
  };

  const double sigma = std::sqrt(2.0 * rp.temperature * rp.eta);
  if (batched) {
    Eigen::MatrixXd grads(n, m);
    for (int k = 0; k < cfg.k_steps; ++k) {
      lie.value_and_grad_batch(x, vals, grads);
      track(vals);
      for (int j = 0; j < m; ++j) {
        const double gnorm = grads.col(j).norm();
        if (gnorm > rp.grad_clip) {
          grads.col(j) *= rp.grad_clip / gnorm;
        }
        x.col(j) += rp.eta * grads.col(j);
        if (sigma > 0.0) {
          auto& stream = streams[static_cast<std::size_t>(j)];
          for (int i = 0; i < n; ++i) {
            x(i, j) += sigma * stream.normal();
          }
        }
      }
      detail::project_columns_quadratic(cand, x, rho, cfg.projection_tol,
                                        cfg.projection_max_iters, streams,
                                        out.projection_failures, out.reseeds);
      if (cfg.reseed_period && (k + 1) % *cfg.reseed_period == 0 &&
          k + 1 < cfg.k_steps) {
        for (int j = 0; j < m; ++j) {
          init_chain(j);
          ++out.reseeds;
        }
      }
    }
    lie.value_batch(x, vals);
    track(vals);
  } else {
    std::vector<ChainState> chains;
    chains.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      chains.push_back(
          ChainState{x.col(j), streams[static_cast<std::size_t>(j)]});
    }
    if (exact) {
      for (int j = 0; j < m; ++j) {
        vals[j] = lie.value(chains[static_cast<std::size_t>(j)].position);
      }
      track(vals);
    }
    for (int k = 0; k < cfg.k_steps; ++k) {
      for (int j = 0; j < m; ++j) {
        auto& ch = chains[static_cast<std::size_t>(j)];
        psgld_step(lie, ch, rho, cfg, rp, &out.projection_failures,
                   &out.reseeds);
        x.col(j) = ch.position;
        if (exact && k + 1 < cfg.k_steps) {
          vals[j] = lie.value(ch.position);
        }
      }
      if (exact && k + 1 < cfg.k_steps) {
        track(vals);
      }
      if (cfg.reseed_period && (k + 1) % *cfg.reseed_period == 0 &&
          k + 1 < cfg.k_steps) {
        for (int j = 0; j < m; ++j) {
          auto& ch = chains[static_cast<std::size_t>(j)];
          ch.position = sample_uniform_on_levelset(cand, rho, 1, ch.stream,
                                                   cfg.projection_tol)[0];
          x.col(j) = ch.position;
          ++out.reseeds;
        }
      }
    }
    if (!exact) {
      // Soft-penalty chains drift off the manifold; land them back once.
      for (int j = 0; j < m; ++j) {
        auto& ch = chains[static_cast<std::size_t>(j)];
        try {
          ch.position = project_to_levelset(cand, ch.position, rho,
                                            cfg.projection_tol,
                                            cfg.projection_max_iters);
        } catch (const ProjectionError&) {
          ++out.projection_failures;
          ch.position = sample_uniform_on_levelset(cand, rho, 1, ch.stream,
                                                   cfg.projection_tol)[0];
          ++out.reseeds;
        }
        x.col(j) = ch.position;
      }
    }
    for (int j = 0; j < m; ++j) {
      vals[j] = lie.value(chains[static_cast<std::size_t>(j)].position);
    }
    track(vals);
  }

  out.finals = vals;
  out.block_max = vals.maxCoeff();
  return out;
}

/// Spec-level entry point; resolves hyperparameters internally (cheap and
/// deterministic, so repeated calls agree with `collect_block_maxima`).
inline BlockResult run_block(const LieDerivative& lie, double rho,
                             const PsgldConfig& cfg, int block_index) {
  return run_block_resolved(lie, rho, cfg, resolve_psgld(lie, rho, cfg),
                            block_index);
}

/// The extreme-value dataset: one maximum per block, plus provenance.
struct BlockMaximaSet {
  std::vector<double> values;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct SamplerDiagnostics {
  long projection_failures = 0;
  long reseeds = 0;
  double mean_final_vdot = 0.0;
  double empirical_max = 0.0;
  int blocks_run = 0;
};

struct CollectResult {
  BlockMaximaSet maxima;
  SamplerDiagnostics diagnostics;
  double empirical_max = 0.0;
  StateVector empirical_argmax;
  ResolvedPsgld resolved;
  bool positive_found = false;  ///< some on-manifold state had Vdot >= 0
  int positive_block = -1;      ///< lowest block index where that happened
};

/// Fingerprint of the sampler configuration for CSV provenance headers.
inline std::uint64_t psgld_config_hash(const PsgldConfig& cfg, double rho) {
  std::ostringstream os;
  os.precision(17);
  os << rho << '|' << (cfg.eta ? *cfg.eta : -1.0) << '|'
     << (cfg.temperature ? *cfg.temperature : -1.0) << '|' << cfg.k_steps
     << '|' << cfg.block_size << '|' << cfg.n_blocks << '|' << cfg.grad_clip
     << '|' << cfg.projection_tol << '|' << cfg.projection_max_iters << '|'
     << (cfg.reseed_period ? *cfg.reseed_period : -1) << '|'
     << static_cast<int>(cfg.mode) << '|' << cfg.penalty_weight << '|'
     << cfg.seed;
  const std::string s = os.str();
  return fnv1a(s.data(), s.size());
}

/// Collects `n_blocks` block maxima. Blocks are independent (disjoint
/// chain streams) and are evaluated in wavefronts of `threads` blocks; after
/// each wavefront the completed prefix is scanned in block order and the
/// harvest stops at the first block that saw a non-negative Vdot. Results,
/// diagnostics, and the chosen counterexample therefore do not depend on the
/// thread count.
inline CollectResult collect_block_maxima(const LieDerivative& lie, double rho,
                                          const PsgldConfig& cfg) {
  cfg.validate();
  const ResolvedPsgld rp = resolve_psgld(lie, rho, cfg);
  const int nb = cfg.n_blocks;
  const int nt = std::max(1, cfg.threads);

  std::vector<BlockResult> slots(static_cast<std::size_t>(nb));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nb));
  int completed = 0;
  int first_positive = -1;
  for (int base = 0; base < nb && first_positive < 0; base += nt) {
    const int hi = std::min(nb, base + nt);
    if (hi - base == 1) {
      try {
        slots[static_cast<std::size_t>(base)] =
            run_block_resolved(lie, rho, cfg, rp, base);
      } catch (...) {
        errors[static_cast<std::size_t>(base)] = std::current_exception();
      }
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(hi - base));
      for (int b = base; b < hi; ++b) {
        pool.emplace_back([&, b]() {
          try {
            slots[static_cast<std::size_t>(b)] =
                run_block_resolved(lie, rho, cfg, rp, b);
          } catch (...) {
            errors[static_cast<std::size_t>(b)] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) {
        t.join();
      }
    }
    for (int b = base; b < hi; ++b) {
      if (errors[static_cast<std::size_t>(b)]) {
        std::rethrow_exception(errors[static_cast<std::size_t>(b)]);
      }
    }
    completed = hi;
    for (int b = base; b < hi; ++b) {
      if (slots[static_cast<std::size_t>(b)].empirical_max >= 0.0) {
        first_positive = b;
        break;
      }
    }
  }

  const int kept = first_positive >= 0 ? first_positive + 1 : completed;
  CollectResult out;
  out.resolved = rp;
  out.maxima.rho = rho;
  out.maxima.seed = cfg.seed;
  out.maxima.config_hash = psgld_config_hash(cfg, rho);
  out.maxima.values.reserve(static_cast<std::size_t>(kept));
  out.empirical_max = -std::numeric_limits<double>::infinity();
  double final_sum = 0.0;
  long final_count = 0;
  for (int b = 0; b < kept; ++b) {
    const auto& blk = slots[static_cast<std::size_t>(b)];
    out.maxima.values.push_back(blk.block_max);
    out.diagnostics.projection_failures += blk.projection_failures;
    out.diagnostics.reseeds += blk.reseeds;
    final_sum += blk.finals.sum();
    final_count += blk.finals.size();
    if (blk.empirical_max > out.empirical_max) {
      out.empirical_max = blk.empirical_max;
      out.empirical_argmax = blk.empirical_argmax;
    }
  }
  out.diagnostics.blocks_run = kept;
  out.diagnostics.mean_final_vdot =
      final_count > 0 ? final_sum / static_cast<double>(final_count) : 0.0;
  out.diagnostics.empirical_max = out.empirical_max;
  out.positive_found = first_positive >= 0;
  out.positive_block = first_positive;
  return out;
}

/// Writes the block maxima as CSV: a provenance header line, then one value
/// per line (full round-trip precision).
inline void export_block_maxima_csv(const std::string& path,
                                    const BlockMaximaSet& maxima) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("export_block_maxima_csv: cannot open '" + path + "'");
  }
  out << "# block_maxima config_hash=" << std::hex << maxima.config_hash
      << std::dec << " seed=" << maxima.seed << " rho=";
  out.precision(17);
  out << maxima.rho << " n_blocks=" << maxima.values.size() << "\n";
  for (const double v : maxima.values) {
    out << v << "\n";
  }
  if (!out) {
    throw IoError("export_block_maxima_csv: write failed");
  }
}

}  // namespace score
