#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "score/errors.hpp"
#include "score/rng.hpp"

namespace score {

using StateVector = Eigen::VectorXd;

/// Autonomous ODE  dx/dt = f(x)  with an analytic Jacobian.
///
/// Evaluators are pure closures, immutable after construction, so a single
/// system can be shared by many sampler chains concurrently. When the field
/// is exactly linear (f(x) = Mx) the matrix is exposed through
/// `linear_matrix`; downstream code uses it to switch to a batched
/// matrix-matrix hot path and to exact spectral oracles.
struct OdeSystem {
  int dimension = 0;
  std::string name;
  std::function<StateVector(const StateVector&)> field;
  std::function<Eigen::MatrixXd(const StateVector&)> jacobian;
  std::shared_ptr<const Eigen::MatrixXd> linear_matrix;  ///< set iff f(x)=Mx

  [[nodiscard]] bool is_linear() const { return linear_matrix != nullptr; }
};

/// Evaluates f(x) with dimension and finiteness checks.
inline StateVector eval_field(const OdeSystem& sys, const StateVector& x) {
  if (x.size() != sys.dimension) {
    throw ArgumentError("eval_field: state has length " +
                        std::to_string(x.size()) + ", system dimension is " +
                        std::to_string(sys.dimension));
  }
  StateVector f = sys.field(x);
  if (!f.allFinite()) {
    throw NumericError("eval_field: non-finite vector field value");
  }
  return f;
}

/// Evaluates the Jacobian J_f(x) with a dimension check.
inline Eigen::MatrixXd eval_jacobian(const OdeSystem& sys,
                                     const StateVector& x) {
  if (x.size() != sys.dimension) {
    throw ArgumentError("eval_jacobian: dimension mismatch");
  }
  return sys.jacobian(x);
}

/// Central finite-difference Jacobian; fallback for user-defined fields
/// without an analytic Jacobian, and the oracle for testing analytic ones.
inline std::function<Eigen::MatrixXd(const StateVector&)>
finite_difference_jacobian(std::function<StateVector(const StateVector&)> f,
                           int dimension) {
  return [f = std::move(f), dimension](const StateVector& x) {
    Eigen::MatrixXd jac(dimension, dimension);
    for (int j = 0; j < dimension; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      StateVector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
  };
}

/// Linear system  dx/dt = M x.
inline OdeSystem make_linear(Eigen::MatrixXd m, std::string name = "linear") {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw ArgumentError("make_linear: matrix must be square and non-empty");
  }
  OdeSystem sys;
  sys.dimension = static_cast<int>(m.rows());
  sys.name = std::move(name);
  auto shared = std::make_shared<const Eigen::MatrixXd>(std::move(m));
  sys.field = [shared](const StateVector& x) -> StateVector {
    return (*shared) * x;
  };
  sys.jacobian = [shared](const StateVector&) { return *shared; };
  sys.linear_matrix = shared;
  return sys;
}

/// Reversed Van der Pol oscillator (mu = 1):
///   dx1/dt = -x2
///   dx2/dt =  x1 + (x1^2 - 1) x2
/// Time reversal of the classic oscillator: the origin is asymptotically
/// stable and the (now unstable) limit cycle bounds the true region of
/// attraction.
inline OdeSystem make_reversed_vdp() {
  OdeSystem sys;
  sys.dimension = 2;
  sys.name = "vdp_reversed";
  sys.field = [](const StateVector& x) -> StateVector {
    StateVector f(2);
    f[0] = -x[1];
    f[1] = x[0] + (x[0] * x[0] - 1.0) * x[1];
    return f;
  };
  sys.jacobian = [](const StateVector& x) {
    Eigen::MatrixXd j(2, 2);
    j(0, 0) = 0.0;
    j(0, 1) = -1.0;
    j(1, 0) = 1.0 + 2.0 * x[0] * x[1];
    j(1, 1) = x[0] * x[0] - 1.0;
    return j;
  };
  return sys;
}

/// Scalar cubic  dx/dt = -x + x^3; the true region of attraction is |x| < 1.
inline OdeSystem make_scalar_cubic() {
  OdeSystem sys;
  sys.dimension = 1;
  sys.name = "scalar_cubic";
  sys.field = [](const StateVector& x) -> StateVector {
    StateVector f(1);
    f[0] = -x[0] + x[0] * x[0] * x[0];
    return f;
  };
  sys.jacobian = [](const StateVector& x) {
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = -1.0 + 3.0 * x[0] * x[0];
    return j;
  };
  return sys;
}

/// Recipe for a dense symmetric Hurwitz matrix M = U diag(lambda) U^T.
struct HurwitzSpec {
  int dimension = 0;
  double lambda_min = -2.0;  ///< lower end of the (negative) eigenvalue range
  double lambda_max = -0.1;  ///< upper end; must stay below zero
  std::uint64_t seed = 0;
};

/// Builds the dense Hurwitz benchmark system  dx/dt = M x.
///
/// Eigenvalues are drawn uniformly from [lambda_min, lambda_max] and
/// conjugated by the orthogonal factor of a seeded Gaussian QR decomposition
/// (column signs fixed so the factorization is canonical). The result is
/// symmetric negative definite, hence Hurwitz, and bitwise reproducible for
/// a given seed.
inline OdeSystem make_dense_hurwitz(const HurwitzSpec& spec) {
  if (spec.dimension < 1) {
    throw ArgumentError("make_dense_hurwitz: dimension must be positive");
  }
  if (!(spec.lambda_min <= spec.lambda_max) || !(spec.lambda_max < 0.0)) {
    throw ArgumentError(
        "make_dense_hurwitz: need lambda_min <= lambda_max < 0");
  }
  const int n = spec.dimension;
  PhiloxStream rng(spec.seed, stream_id(StreamTag::kGeneric, 0x48574Du));
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      g(i, j) = rng.normal();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd u = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) {
      u.col(j) = -u.col(j);
    }
  }
  Eigen::VectorXd lambda(n);
  for (int i = 0; i < n; ++i) {
    lambda[i] = rng.uniform(spec.lambda_min, spec.lambda_max);
  }
  Eigen::MatrixXd m = u * lambda.asDiagonal() * u.transpose();
  m = 0.5 * (m + m.transpose());  // scrub rounding asymmetry
  return make_linear(std::move(m), "dense_hurwitz");
}

}  // namespace score
