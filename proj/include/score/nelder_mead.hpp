#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace score {

struct NelderMeadOptions {
  int max_iters = 0;     ///< 0 -> 200 * dimension
  double xatol = 1e-8;   ///< simplex spread tolerance (infinity norm)
  double fatol = 1e-8;   ///< function value spread tolerance
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fval = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free Nelder-Mead simplex minimizer.
///
/// Standard coefficients (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) and the usual relative initial simplex: vertex i displaces
/// coordinate i by 5% (or by 2.5e-4 if that coordinate is zero). Terminates
/// when both the simplex spread and the value spread drop below tolerance.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  const int max_iters = opt.max_iters > 0 ? opt.max_iters : 200 * n;
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5,
                   kShrink = 0.5;

  std::vector<Eigen::VectorXd> sim(n + 1, x0);
  std::vector<double> fsim(n + 1);
  for (int i = 0; i < n; ++i) {
    if (sim[i + 1][i] != 0.0) {
      sim[i + 1][i] *= 1.05;
    } else {
      sim[i + 1][i] = 2.5e-4;
    }
  }
  for (int i = 0; i <= n; ++i) {
    fsim[i] = f(sim[i]);
  }

  std::vector<int> order(n + 1);
  NelderMeadResult res;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fsim[a] < fsim[b]; });
    {
      std::vector<Eigen::VectorXd> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (int i = 0; i <= n; ++i) {
        s2[i] = sim[order[i]];
        f2[i] = fsim[order[i]];
      }
      sim.swap(s2);
      fsim.swap(f2);
    }

    double xspread = 0.0, fspread = 0.0;
    for (int i = 1; i <= n; ++i) {
      xspread = std::max(xspread, (sim[i] - sim[0]).cwiseAbs().maxCoeff());
      fspread = std::max(fspread, std::abs(fsim[i] - fsim[0]));
    }
    if (xspread <= opt.xatol && fspread <= opt.fatol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      centroid += sim[i];
    }
    centroid /= n;

    const Eigen::VectorXd xr = centroid + kReflect * (centroid - sim[n]);
    const double fr = f(xr);
    bool shrink = false;
    if (fr < fsim[0]) {
      const Eigen::VectorXd xe =
          centroid + kReflect * kExpand * (centroid - sim[n]);
      const double fe = f(xe);
      if (fe < fr) {
        sim[n] = xe;
        fsim[n] = fe;
      } else {
        sim[n] = xr;
        fsim[n] = fr;
      }
    } else if (fr < fsim[n - 1]) {
      sim[n] = xr;
      fsim[n] = fr;
    } else if (fr < fsim[n]) {
      // outside contraction
      const Eigen::VectorXd xc =
          centroid + kContract * kReflect * (centroid - sim[n]);
      const double fc = f(xc);
      if (fc <= fr) {
        sim[n] = xc;
        fsim[n] = fc;
      } else {
        shrink = true;
      }
    } else {
      // inside contraction
      const Eigen::VectorXd xc = centroid - kContract * (centroid - sim[n]);
      const double fc = f(xc);
      if (fc < fsim[n]) {
        sim[n] = xc;
        fsim[n] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (int i = 1; i <= n; ++i) {
        sim[i] = sim[0] + kShrink * (sim[i] - sim[0]);
        fsim[i] = f(sim[i]);
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (fsim[i] < fsim[best]) {
      best = i;
    }
  }
  res.x = sim[best];
  res.fval = fsim[best];
  res.iterations = iter;
  return res;
}

}  // namespace score
