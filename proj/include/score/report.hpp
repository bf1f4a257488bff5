#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "score/certifier.hpp"
#include "score/config.hpp"
#include "score/version.hpp"

namespace score {

namespace detail {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i));
  }
  return arr;
}

inline nlohmann::json certification_to_json(const CertificationResult& res) {
  nlohmann::json j;
  j["decision"] = to_string(res.decision);
  j["rho"] = res.rho;
  j["gamma_point"] = res.gamma_point;
  j["ci_upper"] = res.ci_upper;
  j["degenerate"] = res.degenerate;
  j["evt_applied"] = res.evt_applied;
  if (!res.reason.empty()) {
    j["reason"] = res.reason;
  }
  if (res.evt_applied) {
    j["gev"] = {{"shape", res.gev.params.shape},
                {"location", res.gev.params.location},
                {"scale", res.gev.params.scale},
                {"log_likelihood", res.gev.log_likelihood},
                {"converged", res.gev.converged},
                {"n_samples", res.gev.n_samples}};
    j["ks"] = {{"statistic", res.ks.statistic},
               {"p_value", res.ks.p_value},
               {"passed", res.ks.passed}};
    j["bootstrap"] = {{"ci_upper", res.bootstrap.ci_upper},
                      {"n_resamples", res.bootstrap.n_resamples_requested},
                      {"n_failed", res.bootstrap.n_failed},
                      {"alpha", res.bootstrap.alpha},
                      {"unreliable", res.bootstrap.unreliable}};
  }
  if (res.counterexample) {
    j["counterexample"] = {
        {"state", vector_to_json(res.counterexample->state)},
        {"vdot", res.counterexample->vdot}};
  }
  j["sampler"] = {{"eta", res.resolved.eta},
                  {"temperature", res.resolved.temperature},
                  {"grad_clip", res.resolved.grad_clip},
                  {"projection_failures", res.diagnostics.projection_failures},
                  {"reseeds", res.diagnostics.reseeds},
                  {"blocks_run", res.diagnostics.blocks_run},
                  {"empirical_max", res.diagnostics.empirical_max},
                  {"mean_final_vdot", res.diagnostics.mean_final_vdot}};
  j["timing"] = {{"total_seconds", res.wall_time},
                 {"sampling_seconds", res.wall_time_sampling},
                 {"fitting_seconds", res.wall_time_fitting},
                 {"bootstrap_seconds", res.wall_time_bootstrap}};
  return j;
}

inline nlohmann::json search_to_json(const SearchResult& res) {
  nlohmann::json j;
  j["rho_star"] = res.rho_star;
  j["iterations"] = res.iterations;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& entry : res.trace) {
    trace.push_back({{"rho", entry.rho},
                     {"decision", to_string(entry.decision)},
                     {"ci_upper", entry.ci_upper},
                     {"wall_time", entry.wall_time}});
  }
  j["trace"] = trace;
  j["final"] = certification_to_json(res.final_certification);
  return j;
}

}  // namespace detail

/// Assembles the reproducibility report for a certify run.
inline nlohmann::json make_report(const RunConfig& cfg,
                                  const CertificationResult& res) {
  nlohmann::json j;
  j["tool"] = "score";
  j["version"] = kVersion;
  j["mode"] = cfg.mode;
  j["config"] = config_to_json(cfg);
  j["result"] = detail::certification_to_json(res);
  return j;
}

/// Assembles the reproducibility report for a search run.
inline nlohmann::json make_report(const RunConfig& cfg,
                                  const SearchResult& res) {
  nlohmann::json j;
  j["tool"] = "score";
  j["version"] = kVersion;
  j["mode"] = cfg.mode;
  j["config"] = config_to_json(cfg);
  j["result"] = detail::search_to_json(res);
  return j;
}

inline void write_report(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open report file '" + path + "'");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("failed writing report file '" + path + "'");
  }
}

}  // namespace score
