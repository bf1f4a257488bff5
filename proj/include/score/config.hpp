#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "score/certifier.hpp"
#include "score/dynamics.hpp"
#include "score/errors.hpp"
#include "score/evt.hpp"
#include "score/lyapunov.hpp"
#include "score/manifold_sampler.hpp"
#include "score/synthesis.hpp"

namespace score {

/// Which ODE system a run certifies.
struct SystemSpec {
  std::string kind = "dense_hurwitz";  ///< vdp_reversed | dense_hurwitz |
                                       ///< scalar_cubic | linear
  int dimension = 2;
  std::uint64_t seed = 1;
  double lambda_min = -2.0;
  double lambda_max = -0.1;
  std::vector<double> diag;  ///< kind "linear": diagonal of M
};

/// Where the Lyapunov candidate comes from.
struct CandidateSpec {
  std::string source = "identity";  ///< identity | load | synthesize
  std::string path;                 ///< for load / synthesize output
  int degree = 1;                   ///< dictionary degree for synthesize
};

struct RunConfig {
  std::string mode = "certify";  ///< certify | search | synth | validate |
                                 ///< bench
  SystemSpec system;
  CandidateSpec candidate;
  SynthesisConfig synthesis;
  PsgldConfig psgld;
  EvtConfig evt;
  double rho = 1.0;
  SearchConfig search;
  std::uint64_t seed = 42;
  int threads = 1;
  std::string report_path;
  std::string export_blockmax_path;
  // bench mode
  std::vector<int> bench_dimensions = {10, 50, 100};
  double bench_budget_seconds = 600.0;
};

inline OdeSystem build_system(const SystemSpec& spec) {
  if (spec.kind == "vdp_reversed") {
    return make_reversed_vdp();
  }
  if (spec.kind == "scalar_cubic") {
    return make_scalar_cubic();
  }
  if (spec.kind == "dense_hurwitz") {
    HurwitzSpec hs;
    hs.dimension = spec.dimension;
    hs.lambda_min = spec.lambda_min;
    hs.lambda_max = spec.lambda_max;
    hs.seed = spec.seed;
    return make_dense_hurwitz(hs);
  }
  if (spec.kind == "linear") {
    if (spec.diag.empty()) {
      throw ConfigError("system: kind 'linear' needs a 'diag' array");
    }
    const auto n = static_cast<int>(spec.diag.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      m(i, i) = spec.diag[static_cast<std::size_t>(i)];
    }
    return make_linear(std::move(m), "linear_diag");
  }
  throw ConfigError("system: unknown kind '" + spec.kind + "'");
}

/// Builds (or loads, or synthesizes) the candidate for a run.
inline GramCandidate build_candidate(const RunConfig& cfg,
                                     const OdeSystem& sys,
                                     SynthesisResult* synth_out = nullptr) {
  const CandidateSpec& spec = cfg.candidate;
  if (spec.source == "identity") {
    return make_identity_candidate(sys.dimension);
  }
  if (spec.source == "load") {
    if (spec.path.empty()) {
      throw ConfigError("candidate: source 'load' needs a 'path'");
    }
    GramCandidate cand = load_candidate(spec.path);
    if (cand.dict.state_dim != sys.dimension) {
      throw ConfigError("candidate: file dimension does not match the system");
    }
    return cand;
  }
  if (spec.source == "synthesize") {
    SynthesisConfig scfg = cfg.synthesis;
    if (scfg.seed == 0) {
      scfg.seed = cfg.seed;
    }
    const BasisDictionary dict =
        make_poly_dictionary(sys.dimension, spec.degree);
    SynthesisResult res = synthesize(sys, dict, scfg);
    if (synth_out) {
      *synth_out = res;
    }
    return res.candidate;
  }
  throw ConfigError("candidate: unknown source '" + spec.source + "'");
}

namespace detail {

using nlohmann::json;

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " +
                        e.what());
    }
  }
}

/// Accepts a number, "auto", or null for optionally-resolved knobs.
inline void get_auto(const json& j, const char* key,
                     std::optional<double>& out) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return;
  }
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") {
      out.reset();
      return;
    }
    throw ConfigError(std::string("config field '") + key +
                      "': expected a number or \"auto\"");
  }
  out = v.get<double>();
}

}  // namespace detail

/// Parses a run configuration from JSON text. Unknown keys are rejected at
/// the top level so typos fail loudly.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::get_if;
  RunConfig cfg;
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known = {
        "mode",      "system", "candidate", "synthesis",
        "psgld",     "evt",    "rho",       "search",
        "seed",      "threads", "report",   "export_blockmax",
        "bench"};
    if (!known.count(key)) {
      throw ConfigError("config: unknown top-level key '" + key + "'");
    }
  }
  get_if(j, "mode", cfg.mode);
  get_if(j, "rho", cfg.rho);
  get_if(j, "seed", cfg.seed);
  get_if(j, "threads", cfg.threads);
  get_if(j, "report", cfg.report_path);
  get_if(j, "export_blockmax", cfg.export_blockmax_path);

  if (j.contains("system")) {
    const auto& s = j.at("system");
    get_if(s, "kind", cfg.system.kind);
    get_if(s, "dimension", cfg.system.dimension);
    get_if(s, "seed", cfg.system.seed);
    get_if(s, "diag", cfg.system.diag);
    if (s.contains("eigenvalue_range")) {
      const auto range = s.at("eigenvalue_range").get<std::vector<double>>();
      if (range.size() != 2) {
        throw ConfigError("system.eigenvalue_range: expected [min, max]");
      }
      cfg.system.lambda_min = range[0];
      cfg.system.lambda_max = range[1];
    }
  }
  if (j.contains("candidate")) {
    const auto& c = j.at("candidate");
    get_if(c, "source", cfg.candidate.source);
    get_if(c, "path", cfg.candidate.path);
    get_if(c, "degree", cfg.candidate.degree);
  }
  if (j.contains("synthesis")) {
    const auto& s = j.at("synthesis");
    get_if(s, "epsilon", cfg.synthesis.epsilon);
    get_if(s, "n_train", cfg.synthesis.n_train);
    get_if(s, "train_radius", cfg.synthesis.train_radius);
    get_if(s, "learning_rate", cfg.synthesis.learning_rate);
    get_if(s, "max_iters", cfg.synthesis.max_iters);
    get_if(s, "delta", cfg.synthesis.delta);
    get_if(s, "loss_tol", cfg.synthesis.loss_tol);
    get_if(s, "seed", cfg.synthesis.seed);
  }
  if (j.contains("psgld")) {
    const auto& p = j.at("psgld");
    detail::get_auto(p, "eta", cfg.psgld.eta);
    detail::get_auto(p, "temperature", cfg.psgld.temperature);
    get_if(p, "k_steps", cfg.psgld.k_steps);
    get_if(p, "block_size", cfg.psgld.block_size);
    get_if(p, "n_blocks", cfg.psgld.n_blocks);
    if (p.contains("grad_clip")) {
      const auto& g = p.at("grad_clip");
      if (g.is_string()) {
        const auto s = g.get<std::string>();
        if (s == "auto") {
          cfg.psgld.grad_clip = -1.0;
        } else if (s == "none") {
          cfg.psgld.grad_clip = 0.0;
        } else {
          throw ConfigError("psgld.grad_clip: number, \"auto\", or \"none\"");
        }
      } else {
        cfg.psgld.grad_clip = g.get<double>();
        if (cfg.psgld.grad_clip <= 0.0) {
          throw ConfigError("psgld.grad_clip: numeric value must be positive");
        }
      }
    }
    get_if(p, "projection_tol", cfg.psgld.projection_tol);
    get_if(p, "projection_max_iters", cfg.psgld.projection_max_iters);
    if (p.contains("reseed_period") && !p.at("reseed_period").is_null()) {
      cfg.psgld.reseed_period = p.at("reseed_period").get<int>();
    }
    if (p.contains("mode")) {
      const auto m = p.at("mode").get<std::string>();
      if (m == "exact_projection") {
        cfg.psgld.mode = PsgldConfig::Mode::kExactProjection;
      } else if (m == "soft_penalty") {
        cfg.psgld.mode = PsgldConfig::Mode::kSoftPenalty;
      } else {
        throw ConfigError("psgld.mode: 'exact_projection' or 'soft_penalty'");
      }
    }
    get_if(p, "penalty_weight", cfg.psgld.penalty_weight);
  }
  if (j.contains("evt")) {
    const auto& e = j.at("evt");
    get_if(e, "alpha", cfg.evt.alpha);
    get_if(e, "b_resamples", cfg.evt.b_resamples);
    get_if(e, "ks_alpha", cfg.evt.ks_alpha);
    get_if(e, "min_blocks", cfg.evt.min_blocks);
    get_if(e, "ks_bootstrap", cfg.evt.ks_bootstrap);
    if (e.contains("ks_mode")) {
      const auto m = e.at("ks_mode").get<std::string>();
      if (m == "asymptotic") {
        cfg.evt.ks_parametric = false;
      } else if (m == "parametric_bootstrap") {
        cfg.evt.ks_parametric = true;
      } else {
        throw ConfigError("evt.ks_mode: 'asymptotic' or "
                          "'parametric_bootstrap'");
      }
    }
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    get_if(s, "rho_low", cfg.search.rho_low);
    get_if(s, "rho_high", cfg.search.rho_high);
    get_if(s, "rel_tol", cfg.search.rel_tol);
    get_if(s, "max_iters", cfg.search.max_iters);
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    get_if(b, "dimensions", cfg.bench_dimensions);
    get_if(b, "budget_seconds", cfg.bench_budget_seconds);
  }

  if (!(cfg.evt.alpha > 0.0 && cfg.evt.alpha <= 0.5)) {
    throw ConfigError("evt.alpha must lie in (0, 0.5]");
  }
  if (cfg.threads < 1) {
    throw ConfigError("threads must be >= 1");
  }
  cfg.psgld.seed = cfg.seed;
  cfg.psgld.threads = cfg.threads;
  cfg.psgld.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

/// Serializes a config back to JSON (the report's reproducibility echo).
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["rho"] = cfg.rho;
  j["system"] = {{"kind", cfg.system.kind},
                 {"dimension", cfg.system.dimension},
                 {"seed", cfg.system.seed},
                 {"eigenvalue_range",
                  {cfg.system.lambda_min, cfg.system.lambda_max}}};
  if (!cfg.system.diag.empty()) {
    j["system"]["diag"] = cfg.system.diag;
  }
  j["candidate"] = {{"source", cfg.candidate.source},
                    {"degree", cfg.candidate.degree}};
  if (!cfg.candidate.path.empty()) {
    j["candidate"]["path"] = cfg.candidate.path;
  }
  j["synthesis"] = {{"epsilon", cfg.synthesis.epsilon},
                    {"n_train", cfg.synthesis.n_train},
                    {"train_radius", cfg.synthesis.train_radius},
                    {"learning_rate", cfg.synthesis.learning_rate},
                    {"max_iters", cfg.synthesis.max_iters},
                    {"delta", cfg.synthesis.delta},
                    {"loss_tol", cfg.synthesis.loss_tol},
                    {"seed", cfg.synthesis.seed}};
  nlohmann::json p;
  if (cfg.psgld.eta) {
    p["eta"] = *cfg.psgld.eta;
  } else {
    p["eta"] = "auto";
  }
  if (cfg.psgld.temperature) {
    p["temperature"] = *cfg.psgld.temperature;
  } else {
    p["temperature"] = "auto";
  }
  p["k_steps"] = cfg.psgld.k_steps;
  p["block_size"] = cfg.psgld.block_size;
  p["n_blocks"] = cfg.psgld.n_blocks;
  if (cfg.psgld.grad_clip < 0.0) {
    p["grad_clip"] = "auto";
  } else if (cfg.psgld.grad_clip == 0.0) {
    p["grad_clip"] = "none";
  } else {
    p["grad_clip"] = cfg.psgld.grad_clip;
  }
  p["projection_tol"] = cfg.psgld.projection_tol;
  p["projection_max_iters"] = cfg.psgld.projection_max_iters;
  if (cfg.psgld.reseed_period) {
    p["reseed_period"] = *cfg.psgld.reseed_period;
  }
  p["mode"] = cfg.psgld.mode == PsgldConfig::Mode::kExactProjection
                  ? "exact_projection"
                  : "soft_penalty";
  p["penalty_weight"] = cfg.psgld.penalty_weight;
  j["psgld"] = p;
  j["evt"] = {{"alpha", cfg.evt.alpha},
              {"b_resamples", cfg.evt.b_resamples},
              {"ks_alpha", cfg.evt.ks_alpha},
              {"ks_mode",
               cfg.evt.ks_parametric ? "parametric_bootstrap" : "asymptotic"},
              {"min_blocks", cfg.evt.min_blocks}};
  j["search"] = {{"rho_low", cfg.search.rho_low},
                 {"rho_high", cfg.search.rho_high},
                 {"rel_tol", cfg.search.rel_tol},
                 {"max_iters", cfg.search.max_iters}};
  j["bench"] = {{"dimensions", cfg.bench_dimensions},
                {"budget_seconds", cfg.bench_budget_seconds}};
  return j;
}

}  // namespace score
