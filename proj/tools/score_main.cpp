// score: statistical certification of regions of attraction for nonlinear
// ODE systems. Samples the Lyapunov decrease condition on level sets with
// projected Langevin dynamics, fits the extremes, and reports a
// conservative verdict with a bootstrap confidence bound.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "score/score.hpp"

namespace {

constexpr int kExitCertified = 0;
constexpr int kExitRejected = 1;
constexpr int kExitHeavyTail = 2;
constexpr int kExitError = 3;

int decision_exit_code(score::Decision d) {
  switch (d) {
    case score::Decision::kCertified:
      return kExitCertified;
    case score::Decision::kRejected:
      return kExitRejected;
    case score::Decision::kFailHeavyTail:
      return kExitHeavyTail;
  }
  return kExitError;
}

void print_certification(const score::CertificationResult& res) {
  std::printf("rho:          %.12g\n", res.rho);
  std::printf("decision:     %s\n", score::to_string(res.decision));
  if (!res.reason.empty()) {
    std::printf("reason:       %s\n", res.reason.c_str());
  }
  std::printf("gamma_point:  %.12g\n", res.gamma_point);
  std::printf("ci_upper:     %.12g\n", res.ci_upper);
  if (res.evt_applied) {
    std::printf("gev:          shape=%.6g location=%.6g scale=%.6g\n",
                res.gev.params.shape, res.gev.params.location,
                res.gev.params.scale);
    std::printf("ks:           D=%.6g p=%.6g (%s)\n", res.ks.statistic,
                res.ks.p_value, res.ks.passed ? "passed" : "failed");
    std::printf("bootstrap:    %d resamples, %d failed%s\n",
                res.bootstrap.n_resamples_requested, res.bootstrap.n_failed,
                res.bootstrap.unreliable ? " [unreliable]" : "");
  }
  if (res.counterexample) {
    std::printf("counterexample: Vdot=%.12g at [", res.counterexample->vdot);
    for (Eigen::Index i = 0; i < res.counterexample->state.size(); ++i) {
      std::printf("%s%.9g", i ? ", " : "", res.counterexample->state(i));
    }
    std::printf("]\n");
  }
  std::printf("sampler:      eta=%.6g T=%.6g blocks=%d proj_failures=%ld\n",
              res.resolved.eta, res.resolved.temperature,
              res.diagnostics.blocks_run,
              res.diagnostics.projection_failures);
  std::printf("wall time:    %.3fs (sampling %.3fs, fit %.3fs, "
              "bootstrap %.3fs)\n",
              res.wall_time, res.wall_time_sampling, res.wall_time_fitting,
              res.wall_time_bootstrap);
}

void maybe_export_blockmax(const score::RunConfig& cfg,
                           const score::BlockMaximaSet& maxima) {
  if (!cfg.export_blockmax_path.empty()) {
    score::export_block_maxima_csv(cfg.export_blockmax_path, maxima);
    std::printf("block maxima written to %s\n",
                cfg.export_blockmax_path.c_str());
  }
}

int run_certify(const score::RunConfig& cfg) {
  const score::OdeSystem sys = score::build_system(cfg.system);
  const score::GramCandidate cand = score::build_candidate(cfg, sys);
  std::printf("system:       %s (N=%d)\n", sys.name.c_str(), sys.dimension);
  std::printf("candidate:    %s\n", cfg.candidate.source.c_str());
  const score::CertificationResult res =
      score::certify_level(sys, cand, cfg.rho, cfg.psgld, cfg.evt);
  print_certification(res);
  maybe_export_blockmax(cfg, res.maxima);
  if (!cfg.report_path.empty()) {
    score::write_report(cfg.report_path, score::make_report(cfg, res));
    std::printf("report written to %s\n", cfg.report_path.c_str());
  }
  return decision_exit_code(res.decision);
}

int run_search(const score::RunConfig& cfg) {
  const score::OdeSystem sys = score::build_system(cfg.system);
  const score::GramCandidate cand = score::build_candidate(cfg, sys);
  std::printf("system:       %s (N=%d)\n", sys.name.c_str(), sys.dimension);
  std::printf("candidate:    %s\n", cfg.candidate.source.c_str());
  const score::SearchResult res = score::binary_search_rho(
      sys, cand, cfg.search, cfg.psgld, cfg.evt);
  for (const auto& entry : res.trace) {
    std::printf("  rho=%-14.8g %-16s ci_upper=%-12.6g %.2fs\n", entry.rho,
                score::to_string(entry.decision), entry.ci_upper,
                entry.wall_time);
  }
  std::printf("rho_star:     %.12g  (%d bisection iterations)\n",
              res.rho_star, res.iterations);
  print_certification(res.final_certification);
  maybe_export_blockmax(cfg, res.final_certification.maxima);
  if (!cfg.report_path.empty()) {
    score::write_report(cfg.report_path, score::make_report(cfg, res));
    std::printf("report written to %s\n", cfg.report_path.c_str());
  }
  return decision_exit_code(res.final_certification.decision);
}

int run_synth(const score::RunConfig& cfg) {
  if (cfg.candidate.path.empty()) {
    throw score::ConfigError("synth mode needs candidate.path for the output");
  }
  const score::OdeSystem sys = score::build_system(cfg.system);
  score::SynthesisConfig scfg = cfg.synthesis;
  if (scfg.seed == 0) {
    scfg.seed = cfg.seed;
  }
  const score::BasisDictionary dict =
      score::make_poly_dictionary(sys.dimension, cfg.candidate.degree);
  std::printf("system:       %s (N=%d)\n", sys.name.c_str(), sys.dimension);
  std::printf("dictionary:   degree %d, %d terms\n", dict.degree, dict.size);
  const score::SynthesisResult res = score::synthesize(sys, dict, scfg);
  std::printf("training loss: %.6e after %d iterations (%s)\n",
              res.training_loss, res.iterations,
              res.converged ? "converged" : "max iterations");
  score::save_candidate(cfg.candidate.path, res.candidate);
  std::printf("candidate written to %s\n", cfg.candidate.path.c_str());
  return kExitCertified;
}

int run_validate(const score::RunConfig& cfg) {
  const score::OdeSystem sys = score::build_system(cfg.system);
  if (cfg.candidate.source == "load") {
    score::GramCandidate cand = score::load_candidate(cfg.candidate.path);
    if (cand.dict.state_dim != sys.dimension) {
      throw score::ConfigError(
          "candidate: file dimension does not match the system");
    }
  }
  cfg.psgld.validate();
  cfg.synthesis.validate();
  std::printf("config OK: mode=%s system=%s (N=%d) candidate=%s rho=%g\n",
              cfg.mode.c_str(), sys.name.c_str(), sys.dimension,
              cfg.candidate.source.c_str(), cfg.rho);
  return kExitCertified;
}

/// Scaling benchmark: certify the unit level set of a dense stable linear
/// system at each requested dimension, under a shared wall-clock budget.
/// Dimensions that would start past the budget are reported as TIMEOUT.
int run_bench(const score::RunConfig& cfg) {
  std::printf("%-6s %-16s %-14s %-14s %-10s %s\n", "N", "decision",
              "gamma_point", "ci_upper", "seconds", "status");
  double elapsed = 0.0;
  for (const int n : cfg.bench_dimensions) {
    if (elapsed >= cfg.bench_budget_seconds) {
      std::printf("%-6d %-16s %-14s %-14s %-10s %s\n", n, "-", "-", "-", "-",
                  "TIMEOUT");
      continue;
    }
    score::SystemSpec sspec;
    sspec.kind = "dense_hurwitz";
    sspec.dimension = n;
    sspec.seed = cfg.system.seed + static_cast<std::uint64_t>(n);
    const score::OdeSystem sys = score::build_system(sspec);
    const score::GramCandidate cand = score::make_identity_candidate(n);
    score::PsgldConfig pcfg = cfg.psgld;
    if (!pcfg.eta) {
      // Benchmark default: step length matched to the O(1) gradients of a
      // unit-sphere linear problem rather than the conservative generic rule.
      pcfg.eta = 0.02 / std::sqrt(static_cast<double>(n));
    }
    const score::CertificationResult res =
        score::certify_level(sys, cand, cfg.rho, pcfg, cfg.evt);
    elapsed += res.wall_time;
    const bool in_budget = elapsed <= cfg.bench_budget_seconds;
    std::printf("%-6d %-16s %-14.6g %-14.6g %-10.2f %s\n", n,
                score::to_string(res.decision), res.gamma_point, res.ci_upper,
                res.wall_time, in_budget ? "OK" : "OVER_BUDGET");
  }
  std::printf("total: %.2fs of %.0fs budget\n", elapsed,
              cfg.bench_budget_seconds);
  return kExitCertified;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score: region-of-attraction certification by extreme-value "
               "analysis of the Lyapunov decrease condition"};
  app.set_version_flag("--version", score::kVersion);
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string report_path;
  std::string blockmax_path;
  app.add_option("--config", config_path, "JSON run configuration");
  auto* seed_opt =
      app.add_option("--seed", seed, "override the configured master seed");
  auto* threads_opt =
      app.add_option("--threads", threads, "sampler worker threads")
          ->envname("SCORE_THREADS");
  app.add_option("--report", report_path, "write a JSON report here");
  app.add_option("--export-blockmax", blockmax_path,
                 "write the harvested block maxima as CSV");

  auto* sub_certify =
      app.add_subcommand("certify", "certify a fixed level set");
  auto* sub_search =
      app.add_subcommand("search", "binary-search the largest certifiable "
                                   "level");
  auto* sub_synth =
      app.add_subcommand("synth", "synthesize a Lyapunov candidate");
  auto* sub_validate =
      app.add_subcommand("validate", "check a configuration and exit");
  auto* sub_bench =
      app.add_subcommand("bench", "scaling benchmark on stable linear "
                                  "systems");

  CLI11_PARSE(app, argc, argv);

  try {
    score::RunConfig cfg;
    if (!config_path.empty()) {
      cfg = score::load_config(config_path);
    }
    if (sub_certify->parsed()) {
      cfg.mode = "certify";
    } else if (sub_search->parsed()) {
      cfg.mode = "search";
    } else if (sub_synth->parsed()) {
      cfg.mode = "synth";
    } else if (sub_validate->parsed()) {
      cfg.mode = "validate";
    } else if (sub_bench->parsed()) {
      cfg.mode = "bench";
    }
    if (seed_opt->count() > 0) {
      cfg.seed = seed;
      cfg.psgld.seed = seed;
    }
    if (threads_opt->count() > 0) {
      if (threads < 1) {
        throw score::ConfigError("--threads must be >= 1");
      }
      cfg.threads = threads;
      cfg.psgld.threads = threads;
    }
    if (!report_path.empty()) {
      cfg.report_path = report_path;
    }
    if (!blockmax_path.empty()) {
      cfg.export_blockmax_path = blockmax_path;
    }

    if (cfg.mode == "certify") {
      if (config_path.empty()) {
        throw score::ConfigError("certify needs --config");
      }
      return run_certify(cfg);
    }
    if (cfg.mode == "search") {
      if (config_path.empty()) {
        throw score::ConfigError("search needs --config");
      }
      return run_search(cfg);
    }
    if (cfg.mode == "synth") {
      if (config_path.empty()) {
        throw score::ConfigError("synth needs --config");
      }
      return run_synth(cfg);
    }
    if (cfg.mode == "validate") {
      if (config_path.empty()) {
        throw score::ConfigError("validate needs --config");
      }
      return run_validate(cfg);
    }
    if (cfg.mode == "bench") {
      return run_bench(cfg);
    }
    throw score::ConfigError("unknown mode '" + cfg.mode + "'");
  } catch (const score::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
