#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>

#include "score/config.hpp"

using nlohmann::json;
using score::ConfigError;
using score::parse_config;
using score::RunConfig;

TEST_CASE("empty config yields the documented defaults", "[config]") {
  const RunConfig cfg = parse_config(json::object());
  CHECK(cfg.mode == "certify");
  CHECK(cfg.rho == 1.0);
  CHECK(cfg.seed == 42u);
  CHECK(cfg.threads == 1);
  CHECK(cfg.system.kind == "dense_hurwitz");
  CHECK(cfg.candidate.source == "identity");
  CHECK_FALSE(cfg.psgld.eta.has_value());
  CHECK_FALSE(cfg.psgld.temperature.has_value());
  CHECK(cfg.psgld.grad_clip < 0.0);  // auto
  CHECK(cfg.evt.alpha == 0.01);
  // the master seed and thread count flow into the sampler config
  CHECK(cfg.psgld.seed == cfg.seed);
  CHECK(cfg.psgld.threads == cfg.threads);
}

TEST_CASE("unknown top-level keys fail loudly", "[config]") {
  json j = {{"mode", "certify"}, {"rho_star", 1.0}};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  CHECK_THROWS_WITH(parse_config(j),
                    Catch::Matchers::ContainsSubstring("rho_star"));
}

TEST_CASE("eta and temperature accept number, auto, and null", "[config]") {
  CHECK(parse_config({{"psgld", {{"eta", 0.015}}}}).psgld.eta.value() ==
        0.015);
  CHECK_FALSE(parse_config({{"psgld", {{"eta", "auto"}}}})
                  .psgld.eta.has_value());
  CHECK_FALSE(parse_config({{"psgld", {{"eta", nullptr}}}})
                  .psgld.eta.has_value());
  CHECK(parse_config({{"psgld", {{"temperature", 0.25}}}})
            .psgld.temperature.value() == 0.25);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"eta", "fast"}}}}), ConfigError);
}

TEST_CASE("grad_clip understands auto, none, and positive numbers",
          "[config]") {
  CHECK(parse_config({{"psgld", {{"grad_clip", "auto"}}}}).psgld.grad_clip <
        0.0);
  CHECK(parse_config({{"psgld", {{"grad_clip", "none"}}}}).psgld.grad_clip ==
        0.0);
  CHECK(parse_config({{"psgld", {{"grad_clip", 7.5}}}}).psgld.grad_clip ==
        7.5);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"grad_clip", -3.0}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"grad_clip", "big"}}}}),
                  ConfigError);
}

TEST_CASE("sampler mode strings map onto the enum", "[config]") {
  CHECK(parse_config({{"psgld", {{"mode", "soft_penalty"}}}}).psgld.mode ==
        score::PsgldConfig::Mode::kSoftPenalty);
  CHECK(parse_config({{"psgld", {{"mode", "exact_projection"}}}}).psgld.mode ==
        score::PsgldConfig::Mode::kExactProjection);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"mode", "projected"}}}}),
                  ConfigError);
}

TEST_CASE("ks_mode strings map onto the parametric flag", "[config]") {
  CHECK(parse_config({{"evt", {{"ks_mode", "parametric_bootstrap"}}}})
            .evt.ks_parametric);
  CHECK_FALSE(
      parse_config({{"evt", {{"ks_mode", "asymptotic"}}}}).evt.ks_parametric);
  CHECK_THROWS_AS(parse_config({{"evt", {{"ks_mode", "exact"}}}}),
                  ConfigError);
}

TEST_CASE("eigenvalue_range parses as [min, max]", "[config]") {
  const RunConfig cfg =
      parse_config({{"system", {{"eigenvalue_range", {-3.0, -0.5}}}}});
  CHECK(cfg.system.lambda_min == -3.0);
  CHECK(cfg.system.lambda_max == -0.5);
  CHECK_THROWS_AS(
      parse_config({{"system", {{"eigenvalue_range", {-3.0}}}}}), ConfigError);
}

TEST_CASE("bounds on alpha, threads, and sampler sizes are enforced",
          "[config]") {
  CHECK_THROWS_AS(parse_config({{"evt", {{"alpha", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"evt", {{"alpha", 0.7}}}}), ConfigError);
  CHECK_NOTHROW(parse_config({{"evt", {{"alpha", 0.5}}}}));
  CHECK_THROWS_AS(parse_config({{"threads", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"block_size", 0}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"psgld", {{"reseed_period", 0}}}}),
                  ConfigError);
}

TEST_CASE("a full config survives the serialize-parse round trip",
          "[config]") {
  json j = {
      {"mode", "search"},
      {"seed", 1234},
      {"threads", 2},
      {"rho", 0.75},
      {"system",
       {{"kind", "dense_hurwitz"},
        {"dimension", 7},
        {"seed", 99},
        {"eigenvalue_range", {-2.5, -0.25}}}},
      {"candidate", {{"source", "identity"}, {"degree", 2}}},
      {"psgld",
       {{"eta", 0.01},
        {"temperature", "auto"},
        {"k_steps", 333},
        {"block_size", 24},
        {"n_blocks", 111},
        {"grad_clip", 5.0},
        {"reseed_period", 4},
        {"mode", "exact_projection"},
        {"penalty_weight", 12.0}}},
      {"evt",
       {{"alpha", 0.1},
        {"b_resamples", 555},
        {"ks_alpha", 0.02},
        {"ks_mode", "parametric_bootstrap"},
        {"min_blocks", 60}}},
      {"search", {{"rho_low", 0.1}, {"rho_high", 9.0}, {"rel_tol", 0.01}}},
  };
  const RunConfig a = parse_config(j);
  const RunConfig b = parse_config(score::config_to_json(a));

  CHECK(b.mode == "search");
  CHECK(b.seed == 1234u);
  CHECK(b.threads == 2);
  CHECK(b.rho == 0.75);
  CHECK(b.system.dimension == 7);
  CHECK(b.system.seed == 99u);
  CHECK(b.system.lambda_min == -2.5);
  CHECK(b.system.lambda_max == -0.25);
  CHECK(b.candidate.degree == 2);
  CHECK(b.psgld.eta.value() == 0.01);
  CHECK_FALSE(b.psgld.temperature.has_value());
  CHECK(b.psgld.k_steps == 333);
  CHECK(b.psgld.block_size == 24);
  CHECK(b.psgld.n_blocks == 111);
  CHECK(b.psgld.grad_clip == 5.0);
  CHECK(b.psgld.reseed_period.value() == 4);
  CHECK(b.evt.alpha == 0.1);
  CHECK(b.evt.b_resamples == 555);
  CHECK(b.evt.ks_alpha == 0.02);
  CHECK(b.evt.ks_parametric);
  CHECK(b.evt.min_blocks == 60);
  CHECK(b.search.rho_low == 0.1);
  CHECK(b.search.rho_high == 9.0);
  CHECK(b.search.rel_tol == 0.01);
}

TEST_CASE("build_system covers every kind", "[config]") {
  score::SystemSpec spec;
  spec.kind = "scalar_cubic";
  CHECK(score::build_system(spec).dimension == 1);

  spec.kind = "vdp_reversed";
  CHECK(score::build_system(spec).dimension == 2);

  spec.kind = "dense_hurwitz";
  spec.dimension = 5;
  spec.seed = 3;
  const score::OdeSystem h1 = score::build_system(spec);
  const score::OdeSystem h2 = score::build_system(spec);
  CHECK(h1.dimension == 5);
  // same spec, same matrix
  score::StateVector x = score::StateVector::Ones(5);
  CHECK(score::eval_field(h1, x) == score::eval_field(h2, x));

  spec.kind = "linear";
  spec.diag = {-1.0, -4.0};
  const score::OdeSystem lin = score::build_system(spec);
  score::StateVector y(2);
  y << 1.0, 1.0;
  const score::StateVector fy = score::eval_field(lin, y);
  CHECK(fy[0] == -1.0);
  CHECK(fy[1] == -4.0);

  spec.diag.clear();
  CHECK_THROWS_AS(score::build_system(spec), ConfigError);
  spec.kind = "duffing";
  CHECK_THROWS_AS(score::build_system(spec), ConfigError);
}

TEST_CASE("build_candidate loads and validates dimensions", "[config]") {
  RunConfig cfg = parse_config(json::object());
  score::SystemSpec spec;
  spec.kind = "linear";
  spec.diag = {-1.0, -2.0, -3.0};
  const score::OdeSystem sys3 = score::build_system(spec);

  cfg.candidate.source = "identity";
  const score::GramCandidate ident = score::build_candidate(cfg, sys3);
  CHECK(ident.dict.state_dim == 3);
  CHECK(ident.eval_v(score::StateVector::Ones(3)) == Catch::Approx(3.0));

  // a 2-state candidate on disk cannot serve a 3-state system
  const std::string path = "build_candidate_roundtrip.json";
  score::save_candidate(path, score::make_identity_candidate(2));
  cfg.candidate.source = "load";
  cfg.candidate.path = path;
  CHECK_THROWS_AS(score::build_candidate(cfg, sys3), ConfigError);

  spec.diag = {-1.0, -2.0};
  const score::OdeSystem sys2 = score::build_system(spec);
  const score::GramCandidate loaded = score::build_candidate(cfg, sys2);
  CHECK(loaded.dict.state_dim == 2);
  std::remove(path.c_str());

  cfg.candidate.path.clear();
  CHECK_THROWS_AS(score::build_candidate(cfg, sys2), ConfigError);
  cfg.candidate.source = "guess";
  CHECK_THROWS_AS(score::build_candidate(cfg, sys2), ConfigError);
}

TEST_CASE("build_candidate can synthesize and report the trace", "[config]") {
  RunConfig cfg = parse_config(json::object());
  cfg.seed = 7;
  cfg.candidate.source = "synthesize";
  cfg.candidate.degree = 1;
  cfg.synthesis.n_train = 256;
  cfg.synthesis.max_iters = 400;
  cfg.synthesis.train_radius = 1.0;

  score::SystemSpec spec;
  spec.kind = "linear";
  spec.diag = {-1.0};
  const score::OdeSystem sys = score::build_system(spec);

  score::SynthesisResult out;
  const score::GramCandidate cand = score::build_candidate(cfg, sys, &out);
  CHECK(out.converged);
  CHECK(cand.eval_v(score::StateVector::Ones(1)) > 0.0);
  // the synthesis seed defaults to the run seed, so reruns are bitwise equal
  const score::GramCandidate again = score::build_candidate(cfg, sys);
  CHECK(cand.gram == again.gram);
}

TEST_CASE("load_config rejects missing and malformed files", "[config]") {
  CHECK_THROWS_AS(score::load_config("no_such_config_file.json"),
                  ConfigError);
  const std::string path = "malformed_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(score::load_config(path), ConfigError);
  std::remove(path.c_str());

  const std::string good = "good_config.json";
  {
    std::ofstream out(good);
    out << R"({"mode": "validate", "seed": 5})";
  }
  const RunConfig cfg = score::load_config(good);
  CHECK(cfg.mode == "validate");
  CHECK(cfg.seed == 5u);
  std::remove(good.c_str());
}
