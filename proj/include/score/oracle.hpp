#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "score/dynamics.hpp"
#include "score/errors.hpp"
#include "score/lyapunov.hpp"
#include "score/manifold_sampler.hpp"
#include "score/rng.hpp"

namespace score {

/// Ground-truth maximizer of Vdot on {V = rho} at desk scale.
struct OracleResult {
  double gamma_true = 0.0;
  StateVector argmax_state;
  enum class Method { kGridPolish, kEigenExact };
  Method method = Method::kGridPolish;
  int resolution = 0;
};

namespace detail {

/// Projected gradient ascent on Vdot over {V = rho} at zero temperature,
/// with backtracking; polishes one grid candidate to a local maximum.
inline std::pair<StateVector, double> polish_ascent(const LieDerivative& lie,
                                                    StateVector x, double rho,
                                                    double tol = 1e-9) {
  const GramCandidate& cand = lie.candidate();
  double best = lie.value(x);
  double eta = 1e-2 * rho / std::max(1, lie.system().dimension);
  int stalls = 0;
  for (int it = 0; it < 20000 && stalls < 40; ++it) {
    const StateVector g = lie.grad(x);
    StateVector trial;
    double val = best;
    bool improved = false;
    double step = eta;
    for (int k = 0; k < 25; ++k) {
      try {
        trial = project_to_levelset(cand, x + step * g, rho, tol);
      } catch (const ProjectionError&) {
        step *= 0.5;
        continue;
      }
      val = lie.value(trial);
      if (val > best) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      ++stalls;
      eta *= 0.5;
      if (eta < 1e-16) {
        break;
      }
      continue;
    }
    stalls = 0;
    x = std::move(trial);
    if (val - best < 1e-15 * (1.0 + std::abs(best))) {
      best = val;
      break;
    }
    best = val;
    eta = std::min(step * 2.0, 1.0);
  }
  return {x, best};
}

}  // namespace detail

/// Dense angular grid search for max Vdot on {V = rho} (N <= 3), refined by
/// zero-temperature projected ascent from the ten best grid candidates.
inline OracleResult grid_max_vdot(const OdeSystem& sys,
                                  const GramCandidate& cand, double rho,
                                  int resolution = 720) {
  const int n = sys.dimension;
  if (n > 3) {
    throw ArgumentError("grid_max_vdot: supported only for N <= 3");
  }
  if (resolution < 4) {
    throw ArgumentError("grid_max_vdot: resolution too small");
  }
  const LieDerivative lie(cand, sys);
  constexpr double kPi = 3.14159265358979323846;

  std::vector<StateVector> dirs;
  if (n == 1) {
    StateVector d(1);
    d[0] = 1.0;
    dirs.push_back(d);
    d[0] = -1.0;
    dirs.push_back(d);
  } else if (n == 2) {
    dirs.reserve(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
      const double th = 2.0 * kPi * i / resolution;
      StateVector d(2);
      d << std::cos(th), std::sin(th);
      dirs.push_back(d);
    }
  } else {
    dirs.reserve(static_cast<std::size_t>(resolution) * resolution);
    for (int i = 0; i < resolution; ++i) {
      const double phi = kPi * (i + 0.5) / resolution;  // polar
      for (int j = 0; j < resolution; ++j) {
        const double th = 2.0 * kPi * j / resolution;  // azimuth
        StateVector d(3);
        d << std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th),
            std::cos(phi);
        dirs.push_back(d);
      }
    }
  }

  std::vector<std::pair<double, StateVector>> scored;
  scored.reserve(dirs.size());
  for (const auto& d : dirs) {
    StateVector x = levelset_point(cand, rho, d);
    scored.emplace_back(lie.value(x), std::move(x));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });

  OracleResult res;
  res.method = OracleResult::Method::kGridPolish;
  res.resolution = resolution;
  res.gamma_true = -std::numeric_limits<double>::infinity();
  const std::size_t n_polish = std::min<std::size_t>(10, scored.size());
  for (std::size_t i = 0; i < n_polish; ++i) {
    auto [x, val] = detail::polish_ascent(lie, scored[i].second, rho);
    if (val > res.gamma_true) {
      res.gamma_true = val;
      res.argmax_state = std::move(x);
    }
  }
  return res;
}

/// Exact maximum of Vdot = x^T (M^T P + P M) x over {x^T P x = rho} for a
/// linear system:  gamma* = rho * lambda_max(P^{-1/2} (M^T P + P M) P^{-1/2}).
/// Valid in any dimension.
inline OracleResult eigen_exact_linear(const Eigen::MatrixXd& m_matrix,
                                       const Eigen::MatrixXd& p_matrix,
                                       double rho) {
  if (m_matrix.rows() != m_matrix.cols() ||
      p_matrix.rows() != p_matrix.cols() ||
      m_matrix.rows() != p_matrix.rows()) {
    throw ArgumentError("eigen_exact_linear: M and P must be square and of "
                        "equal size");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> p_eig(
      0.5 * (p_matrix + p_matrix.transpose()));
  if (p_eig.info() != Eigen::Success ||
      p_eig.eigenvalues().minCoeff() <= 0.0) {
    throw ArgumentError("eigen_exact_linear: P must be positive definite");
  }
  const Eigen::MatrixXd p_inv_half =
      p_eig.eigenvectors() *
      p_eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      p_eig.eigenvectors().transpose();
  const Eigen::MatrixXd lie_form =
      m_matrix.transpose() * p_matrix + p_matrix * m_matrix;
  Eigen::MatrixXd s = p_inv_half * lie_form * p_inv_half;
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s_eig(s);
  const Eigen::Index top = s.rows() - 1;  // eigenvalues sorted ascending
  OracleResult res;
  res.method = OracleResult::Method::kEigenExact;
  res.gamma_true = rho * s_eig.eigenvalues()[top];
  res.argmax_state =
      std::sqrt(rho) * (p_inv_half * s_eig.eigenvectors().col(top));
  return res;
}

/// The true region-of-attraction boundary of the reversed Van der Pol
/// oscillator: its unstable limit cycle, obtained by integrating the
/// time-reversed (classic) oscillator forward with RK4 until the orbit
/// settles on the attracting cycle, then recording one full revolution
/// between successive upward crossings of the x2 = 0, x1 < 0 section.
/// Returned as a closed polyline (first point not repeated); cached.
inline const std::vector<Eigen::Vector2d>& vdp_roa_boundary() {
  static const std::vector<Eigen::Vector2d> polyline = [] {
    const auto f = [](const Eigen::Vector2d& x) {
      // classic Van der Pol, mu = 1 (time reversal of the benchmark field)
      return Eigen::Vector2d(x[1], -x[0] + (1.0 - x[0] * x[0]) * x[1]);
    };
    const double h = 1e-3;
    const auto rk4 = [&](Eigen::Vector2d x) {
      const Eigen::Vector2d k1 = f(x);
      const Eigen::Vector2d k2 = f(x + 0.5 * h * k1);
      const Eigen::Vector2d k3 = f(x + 0.5 * h * k2);
      const Eigen::Vector2d k4 = f(x + h * k3);
      return Eigen::Vector2d(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    };
    Eigen::Vector2d x(2.0, 0.0);
    for (int i = 0; i < 40000; ++i) {
      x = rk4(x);  // settle onto the attracting cycle
    }
    const auto upward_left_crossing = [](const Eigen::Vector2d& prev,
                                         const Eigen::Vector2d& cur) {
      return prev[1] <= 0.0 && cur[1] > 0.0 && cur[0] < 0.0;
    };
    Eigen::Vector2d prev = x;
    for (int i = 0; i < 200000; ++i) {
      const Eigen::Vector2d cur = rk4(prev);
      if (upward_left_crossing(prev, cur)) {
        x = cur;
        break;
      }
      prev = cur;
    }
    std::vector<Eigen::Vector2d> poly;
    poly.push_back(x);
    prev = x;
    for (int i = 0; i < 200000; ++i) {
      const Eigen::Vector2d cur = rk4(prev);
      if (i > 100 && upward_left_crossing(prev, cur)) {
        break;
      }
      poly.push_back(cur);
      prev = cur;
    }
    return poly;
  }();
  return polyline;
}

/// Shoelace area of a closed polyline.
inline double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    acc += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * std::abs(acc);
}

/// Even-odd point-in-polygon with edges bucketed into y slabs, so a million
/// queries against a several-thousand-edge cycle stay cheap.
class PointInPolygon {
 public:
  explicit PointInPolygon(const std::vector<Eigen::Vector2d>& poly,
                          int n_bins = 512)
      : poly_(poly), bins_(static_cast<std::size_t>(n_bins)) {
    y_min_ = std::numeric_limits<double>::infinity();
    y_max_ = -y_min_;
    for (const auto& p : poly) {
      y_min_ = std::min(y_min_, p[1]);
      y_max_ = std::max(y_max_, p[1]);
    }
    const double span = std::max(y_max_ - y_min_, 1e-12);
    inv_bin_ = static_cast<double>(n_bins) / span;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double lo = std::min(poly[i][1], poly[j][1]);
      const double hi = std::max(poly[i][1], poly[j][1]);
      const int b_lo = bin_index(lo);
      const int b_hi = bin_index(hi);
      for (int b = b_lo; b <= b_hi; ++b) {
        bins_[static_cast<std::size_t>(b)].push_back(
            {static_cast<int>(i), static_cast<int>(j)});
      }
    }
  }

  [[nodiscard]] bool contains(double x, double y) const {
    if (y < y_min_ || y > y_max_) {
      return false;
    }
    bool inside = false;
    for (const auto& [i, j] : bins_[static_cast<std::size_t>(bin_index(y))]) {
      const auto& a = poly_[static_cast<std::size_t>(i)];
      const auto& b = poly_[static_cast<std::size_t>(j)];
      if ((a[1] > y) != (b[1] > y)) {
        const double x_cross =
            a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
        if (x < x_cross) {
          inside = !inside;
        }
      }
    }
    return inside;
  }

 private:
  [[nodiscard]] int bin_index(double y) const {
    const int b = static_cast<int>((y - y_min_) * inv_bin_);
    return std::clamp(b, 0, static_cast<int>(bins_.size()) - 1);
  }

  std::vector<Eigen::Vector2d> poly_;
  std::vector<std::vector<std::pair<int, int>>> bins_;
  double y_min_ = 0.0, y_max_ = 0.0, inv_bin_ = 0.0;
};

struct KappaResult {
  double kappa = 0.0;
  double std_error = 0.0;
  long n_roa = 0;     ///< Monte Carlo points inside the true region
  long n_omega = 0;   ///< points inside the certified sublevel set
  long n_outside = 0; ///< certified points that escape the true region
};

/// Fraction of the true region of attraction captured by {V <= rho},
/// measured by Monte Carlo over the boundary polyline's bounding box.
/// Only the reversed Van der Pol system has a stored true boundary.
inline KappaResult measure_kappa(const OdeSystem& sys,
                                 const GramCandidate& cand,
                                 double rho_certified,
                                 long n_points = 1000000,
                                 std::uint64_t seed = 0x6B61u) {
  if (sys.dimension != 2 || sys.name != "vdp_reversed") {
    throw ArgumentError("measure_kappa: only the reversed Van der Pol system "
                        "has a reference boundary");
  }
  if (n_points < 1000) {
    throw ArgumentError("measure_kappa: need at least 1000 points");
  }
  const auto& poly = vdp_roa_boundary();
  const PointInPolygon pip(poly);
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& p : poly) {
    x_min = std::min(x_min, p[0]);
    x_max = std::max(x_max, p[0]);
    y_min = std::min(y_min, p[1]);
    y_max = std::max(y_max, p[1]);
  }
  const double margin = 0.05;
  x_min -= margin;
  x_max += margin;
  y_min -= margin;
  y_max += margin;

  PhiloxStream rng(seed, stream_id(StreamTag::kOracle, 0x6B));
  KappaResult res;
  StateVector x(2);
  if (rho_certified > 0.0) {
    for (long s = 0; s < n_points; ++s) {
      x[0] = rng.uniform(x_min, x_max);
      x[1] = rng.uniform(y_min, y_max);
      const bool in_roa = pip.contains(x[0], x[1]);
      const bool in_omega = cand.eval_v(x) <= rho_certified;
      res.n_roa += in_roa;
      res.n_omega += in_omega;
      res.n_outside += (in_omega && !in_roa);
    }
  } else {
    res.kappa = 0.0;  // empty sublevel set
    return res;
  }
  if (res.n_roa == 0) {
    throw NumericError("measure_kappa: no Monte Carlo point fell inside the "
                       "reference region");
  }
  // Captured fraction counts only the overlap, so a sublevel set leaking
  // outside the true region is not rewarded for the leak.
  res.kappa = static_cast<double>(res.n_omega - res.n_outside) /
              static_cast<double>(res.n_roa);
  const double k = std::min(std::max(res.kappa, 1e-12), 1.0 - 1e-12);
  res.std_error =
      std::sqrt(k * (1.0 - k) / static_cast<double>(res.n_roa));
  return res;
}

}  // namespace score
