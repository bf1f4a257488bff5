#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "score/certifier.hpp"
#include "score/dynamics.hpp"
#include "score/lyapunov.hpp"
#include "score/oracle.hpp"

using score::CertificationResult;
using score::Decision;
using score::EvtConfig;
using score::GramCandidate;
using score::OdeSystem;
using score::PsgldConfig;

namespace {

PsgldConfig quick(std::uint64_t seed) {
  PsgldConfig cfg;
  cfg.k_steps = 120;
  cfg.block_size = 16;
  cfg.n_blocks = 40;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("isotropic shrink certifies with the exact constant bound",
          "[certifier]") {
  Eigen::MatrixXd m = -Eigen::MatrixXd::Identity(2, 2);
  const OdeSystem sys = score::make_linear(m);
  const GramCandidate ident = score::make_identity_candidate(2);

  const CertificationResult res =
      score::certify_level(sys, ident, 1.0, quick(17), EvtConfig{});
  CHECK(res.decision == Decision::kCertified);
  CHECK(res.degenerate);
  CHECK_FALSE(res.evt_applied);
  CHECK(std::abs(res.ci_upper + 2.0) <= 1e-9);
  CHECK(std::abs(res.gamma_point + 2.0) <= 1e-9);
  CHECK_FALSE(res.counterexample.has_value());
  CHECK(res.wall_time > 0.0);
}

TEST_CASE("supercritical scalar cubic is rejected with a counterexample",
          "[certifier]") {
  const OdeSystem sys = score::make_scalar_cubic();
  const GramCandidate ident = score::make_identity_candidate(1);

  // rho = 1.21 > 1: Vdot = 2 rho (rho - 1) = +0.5082 on the set
  const CertificationResult res =
      score::certify_level(sys, ident, 1.21, quick(3), EvtConfig{});
  CHECK(res.decision == Decision::kRejected);
  REQUIRE(res.counterexample.has_value());
  CHECK(res.counterexample->vdot > 0.0);
  CHECK(res.counterexample->vdot ==
        Catch::Approx(2.0 * 1.21 * 0.21).margin(1e-6));
  CHECK(std::abs(res.counterexample->state[0]) ==
        Catch::Approx(1.1).margin(1e-6));
  CHECK_FALSE(res.evt_applied);
}

TEST_CASE("subcritical scalar cubic certifies by the constant path",
          "[certifier]") {
  const OdeSystem sys = score::make_scalar_cubic();
  const GramCandidate ident = score::make_identity_candidate(1);
  const CertificationResult res =
      score::certify_level(sys, ident, 0.81, quick(3), EvtConfig{});
  CHECK(res.decision == Decision::kCertified);
  CHECK(res.degenerate);
  CHECK(res.ci_upper == Catch::Approx(2.0 * 0.81 * (0.81 - 1.0)).margin(1e-7));
}

TEST_CASE("anisotropic linear certification brackets the spectral bound",
          "[certifier]") {
  Eigen::MatrixXd m(2, 2);
  m << -1.0, 0.0, 0.0, -3.0;
  const OdeSystem sys = score::make_linear(m);
  const GramCandidate ident = score::make_identity_candidate(2);

  PsgldConfig cfg = quick(29);
  cfg.k_steps = 400;
  cfg.block_size = 32;
  cfg.n_blocks = 80;
  cfg.eta = 0.02;
  // deep quench: every chain settles onto the argmax +-e1, the block maxima
  // collapse to a constant, and the sign test decides
  cfg.temperature = 1e-9;
  EvtConfig evt;
  evt.b_resamples = 200;

  const CertificationResult res =
      score::certify_level(sys, ident, 1.0, cfg, evt);
  // gamma* = -2; the bound must be negative, close to the truth from
  // below, and never above zero
  CHECK(res.ci_upper < 0.0);
  CHECK(res.ci_upper >= -2.0 - 1e-6);
  CHECK(res.ci_upper <= -1.5);
  CHECK(res.decision == Decision::kCertified);
}

TEST_CASE("non-compact level sets are rejected, not crashed", "[certifier]") {
  Eigen::MatrixXd m = -Eigen::MatrixXd::Identity(2, 2);
  const OdeSystem sys = score::make_linear(m);
  GramCandidate saddle;
  saddle.dict = score::make_poly_dictionary(2, 1);
  saddle.gram = Eigen::MatrixXd::Zero(2, 2);
  saddle.gram(0, 0) = 1.0;
  saddle.gram(1, 1) = -1.0;  // V = x1^2 - x2^2: hyperbolic, unbounded set

  const CertificationResult res =
      score::certify_level(sys, saddle, 1.0, quick(5), EvtConfig{});
  CHECK(res.decision == Decision::kRejected);
  CHECK(res.reason.find("compact") != std::string::npos);
}

TEST_CASE("binary search brackets the scalar cubic boundary", "[certifier]") {
  const OdeSystem sys = score::make_scalar_cubic();
  const GramCandidate ident = score::make_identity_candidate(1);

  score::SearchConfig scfg;
  scfg.rel_tol = 0.02;
  const auto res = score::binary_search_rho(sys, ident, scfg, quick(23),
                                            EvtConfig{});
  CHECK(res.rho_star >= 0.85);
  CHECK(res.rho_star < 1.0);
  CHECK(res.final_certification.decision == Decision::kCertified);
  CHECK(res.final_certification.rho == Catch::Approx(res.rho_star));
  CHECK(res.iterations >= 3);

  // the trace must be consistent: every certified level below every
  // rejected level
  double max_cert = 0.0, min_rej = 1e300;
  for (const auto& e : res.trace) {
    if (e.decision == Decision::kCertified) {
      max_cert = std::max(max_cert, e.rho);
    } else {
      min_rej = std::min(min_rej, e.rho);
    }
  }
  CHECK(max_cert < min_rej);
  CHECK(max_cert == Catch::Approx(res.rho_star));
}

TEST_CASE("search demands a certifiable lower bracket", "[certifier]") {
  const OdeSystem sys = score::make_scalar_cubic();
  const GramCandidate ident = score::make_identity_candidate(1);
  score::SearchConfig scfg;
  scfg.rho_low = 4.0;  // far outside the region of attraction
  scfg.rho_high = 8.0;
  CHECK_THROWS_AS(
      score::binary_search_rho(sys, ident, scfg, quick(1), EvtConfig{}),
      score::SeedError);
}

TEST_CASE("linearization seed finds a certified-by-inspection level",
          "[certifier]") {
  const OdeSystem sys = score::make_scalar_cubic();
  const GramCandidate ident = score::make_identity_candidate(1);
  const double rho0 = score::linearization_seed(sys, ident);
  CHECK(rho0 > 0.0);
  CHECK(rho0 < 1.0);  // cannot cross the true boundary

  // the seeded level must itself certify
  const CertificationResult res =
      score::certify_level(sys, ident, rho0, quick(2), EvtConfig{});
  CHECK(res.decision == Decision::kCertified);

  // scale invariance: doubling the candidate scale must not change the
  // geometry of the choice (rho scales linearly with V)
  GramCandidate twice = ident;
  twice.gram *= 2.0;
  const double rho_twice = score::linearization_seed(sys, twice);
  CHECK(rho_twice == Catch::Approx(2.0 * rho0).epsilon(1e-9));
}

TEST_CASE("rejected levels above the supremum shrink the search bracket",
          "[certifier]") {
  Eigen::MatrixXd m(1, 1);
  m << 1.0;  // unstable: nothing certifies
  const OdeSystem sys = score::make_linear(m);
  const GramCandidate ident = score::make_identity_candidate(1);
  const CertificationResult res =
      score::certify_level(sys, ident, 1.0, quick(10), EvtConfig{});
  CHECK(res.decision == Decision::kRejected);
  REQUIRE(res.counterexample.has_value());
  CHECK(res.counterexample->vdot == Catch::Approx(2.0).margin(1e-7));
}

TEST_CASE("certification requires a positive level", "[certifier]") {
  Eigen::MatrixXd m = -Eigen::MatrixXd::Identity(2, 2);
  const OdeSystem sys = score::make_linear(m);
  const GramCandidate ident = score::make_identity_candidate(2);
  CHECK_THROWS_AS(
      score::certify_level(sys, ident, 0.0, quick(1), EvtConfig{}),
      score::ArgumentError);
  CHECK_THROWS_AS(
      score::certify_level(sys, ident, -1.0, quick(1), EvtConfig{}),
      score::ArgumentError);
}
