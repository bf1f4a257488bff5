#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "score/dynamics.hpp"
#include "score/errors.hpp"

namespace score {

/// Monomial basis dictionary z(x) of total degree 1 (z = x) or degree <= 2
/// (z = all monomials x_i and x_i x_j). Jacobians are analytic; monomial
/// Hessians are constant and folded into `hessian_contraction`.
struct BasisDictionary {
  int state_dim = 0;
  int size = 0;    ///< number of basis functions p
  int degree = 1;  ///< 1 or 2
  /// Quadratic monomials as index pairs (i <= j); empty for degree 1.
  std::vector<std::pair<int, int>> quad_terms;

  [[nodiscard]] Eigen::VectorXd eval(const StateVector& x) const {
    check_dim(x);
    Eigen::VectorXd z(size);
    z.head(state_dim) = x;
    for (std::size_t k = 0; k < quad_terms.size(); ++k) {
      const auto [i, j] = quad_terms[k];
      z[state_dim + static_cast<int>(k)] = x[i] * x[j];
    }
    return z;
  }

  /// p x N Jacobian J_z(x).
  [[nodiscard]] Eigen::MatrixXd jacobian(const StateVector& x) const {
    check_dim(x);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(size, state_dim);
    jac.topLeftCorner(state_dim, state_dim).setIdentity();
    for (std::size_t k = 0; k < quad_terms.size(); ++k) {
      const auto [i, j] = quad_terms[k];
      const int row = state_dim + static_cast<int>(k);
      if (i == j) {
        jac(row, i) = 2.0 * x[i];
      } else {
        jac(row, i) = x[j];
        jac(row, j) = x[i];
      }
    }
    return jac;
  }

  /// Sum_i c_i H_{z_i} for a coefficient vector c (N x N, constant in x).
  [[nodiscard]] Eigen::MatrixXd hessian_contraction(
      const Eigen::VectorXd& c) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(state_dim, state_dim);
    for (std::size_t k = 0; k < quad_terms.size(); ++k) {
      const auto [i, j] = quad_terms[k];
      const double ck = c[state_dim + static_cast<int>(k)];
      if (i == j) {
        h(i, i) += 2.0 * ck;
      } else {
        h(i, j) += ck;
        h(j, i) += ck;
      }
    }
    return h;
  }

 private:
  void check_dim(const StateVector& x) const {
    if (x.size() != state_dim) {
      throw ArgumentError("BasisDictionary: state has length " +
                          std::to_string(x.size()) + ", expected " +
                          std::to_string(state_dim));
    }
  }
};

/// Monomial dictionary of total degree `degree` over R^n.
inline BasisDictionary make_poly_dictionary(int n, int degree) {
  if (n < 1) {
    throw ArgumentError("make_poly_dictionary: dimension must be positive");
  }
  if (degree != 1 && degree != 2) {
    throw ArgumentError("make_poly_dictionary: supported degrees are 1 and 2");
  }
  BasisDictionary dict;
  dict.state_dim = n;
  dict.degree = degree;
  if (degree == 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        dict.quad_terms.emplace_back(i, j);
      }
    }
  }
  dict.size = n + static_cast<int>(dict.quad_terms.size());
  return dict;
}

/// Lyapunov candidate  V(x) = z(x)^T Q z(x)  with Q symmetric positive
/// definite. Immutable after construction; evaluators are pure.
struct GramCandidate {
  BasisDictionary dict;
  Eigen::MatrixXd gram;  ///< p x p symmetric PD matrix Q

  [[nodiscard]] double eval_v(const StateVector& x) const {
    const Eigen::VectorXd z = dict.eval(x);
    return z.dot(gram * z);
  }

  /// grad V(x) = 2 J_z(x)^T Q z(x).
  [[nodiscard]] StateVector grad_v(const StateVector& x) const {
    const Eigen::VectorXd z = dict.eval(x);
    return 2.0 * (dict.jacobian(x).transpose() * (gram * z));
  }
};

/// Quadratic candidate V(x) = x^T P x (degree-1 dictionary).
inline GramCandidate make_quadratic_candidate(Eigen::MatrixXd p) {
  if (p.rows() != p.cols() || p.rows() < 1) {
    throw ArgumentError("make_quadratic_candidate: P must be square");
  }
  GramCandidate cand;
  cand.dict = make_poly_dictionary(static_cast<int>(p.rows()), 1);
  cand.gram = 0.5 * (p + p.transpose());
  return cand;
}

/// V(x) = ||x||^2.
inline GramCandidate make_identity_candidate(int n) {
  return make_quadratic_candidate(Eigen::MatrixXd::Identity(n, n));
}

/// The Lie derivative  Vdot(x) = grad V(x) . f(x)  of a candidate along a
/// system, with its state gradient
///   grad Vdot(x) = H_V(x) f(x) + J_f(x)^T grad V(x),
///   H_V(x) = 2 J_z^T Q J_z + 2 sum_i (Q z)_i H_{z_i}.
///
/// For a linear field f(x) = Mx with a degree-1 dictionary this collapses to
/// the quadratic form Vdot = x^T S x, grad Vdot = 2 S x with
/// S = QM + M^T Q (symmetric), evaluated for whole chain batches by a single
/// matrix product. That fast path is what makes the high-dimensional
/// benchmarks run on one core; `value_and_grad_batch` is the sampler's hot
/// loop.
class LieDerivative {
 public:
  LieDerivative(GramCandidate candidate, OdeSystem system)
      : cand_(std::move(candidate)), sys_(std::move(system)) {
    if (cand_.dict.state_dim != sys_.dimension) {
      throw ArgumentError("LieDerivative: candidate is over R^" +
                          std::to_string(cand_.dict.state_dim) +
                          " but the system has dimension " +
                          std::to_string(sys_.dimension));
    }
    if (sys_.is_linear() && cand_.dict.degree == 1) {
      const Eigen::MatrixXd& m = *sys_.linear_matrix;
      s_ = cand_.gram * m + m.transpose() * cand_.gram;
      fast_ = true;
    }
  }

  [[nodiscard]] const GramCandidate& candidate() const { return cand_; }
  [[nodiscard]] const OdeSystem& system() const { return sys_; }
  [[nodiscard]] bool has_fast_path() const { return fast_; }

  [[nodiscard]] double value(const StateVector& x) const {
    if (fast_) {
      return x.dot(s_ * x);
    }
    return cand_.grad_v(x).dot(eval_field(sys_, x));
  }

  [[nodiscard]] StateVector grad(const StateVector& x) const {
    if (fast_) {
      return 2.0 * (s_ * x);
    }
    const Eigen::VectorXd z = cand_.dict.eval(x);
    const Eigen::MatrixXd jz = cand_.dict.jacobian(x);
    const Eigen::VectorXd qz = cand_.gram * z;
    const StateVector f = eval_field(sys_, x);
    const StateVector grad_v = 2.0 * (jz.transpose() * qz);
    // H_V f  =  2 J_z^T Q (J_z f)  +  2 (sum_i (Qz)_i H_{z_i}) f
    StateVector hvf = 2.0 * (jz.transpose() * (cand_.gram * (jz * f)));
    if (cand_.dict.degree > 1) {
      hvf += 2.0 * (cand_.dict.hessian_contraction(qz) * f);
    }
    return hvf + sys_.jacobian(x).transpose() * grad_v;
  }

  /// Vdot for each column of X (states stored column-wise).
  void value_batch(const Eigen::MatrixXd& x, Eigen::VectorXd& out) const {
    if (fast_) {
      out = (x.array() * (s_ * x).array()).colwise().sum().transpose();
      return;
    }
    out.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      out[c] = value(x.col(c));
    }
  }

  /// Vdot values and gradients for each column of X, sharing intermediates.
  void value_and_grad_batch(const Eigen::MatrixXd& x, Eigen::VectorXd& values,
                            Eigen::MatrixXd& grads) const {
    if (fast_) {
      grads.noalias() = s_ * x;
      values = (x.array() * grads.array()).colwise().sum().transpose();
      grads *= 2.0;
      return;
    }
    values.resize(x.cols());
    grads.resize(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      values[c] = value(x.col(c));
      grads.col(c) = grad(x.col(c));
    }
  }

 private:
  GramCandidate cand_;
  OdeSystem sys_;
  Eigen::MatrixXd s_;
  bool fast_ = false;
};

/// Writes a candidate as a flat text file. Entries are hexfloats, so the
/// round trip through `load_candidate` is bit-exact.
inline void save_candidate(const std::string& path,
                           const GramCandidate& cand) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("save_candidate: cannot open '" + path + "' for writing");
  }
  out << "score_candidate v1\n";
  out << "dimension " << cand.dict.state_dim << "\n";
  out << "degree " << cand.dict.degree << "\n";
  out << "gram_size " << cand.gram.rows() << "\n";
  out << std::hexfloat;
  for (Eigen::Index i = 0; i < cand.gram.rows(); ++i) {
    for (Eigen::Index j = 0; j < cand.gram.cols(); ++j) {
      out << cand.gram(i, j) << (j + 1 == cand.gram.cols() ? "" : " ");
    }
    out << "\n";
  }
  if (!out) {
    throw IoError("save_candidate: write to '" + path + "' failed");
  }
}

/// Reads a candidate written by `save_candidate`.
inline GramCandidate load_candidate(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("load_candidate: cannot open '" + path + "'");
  }
  std::string magic, version, key;
  in >> magic >> version;
  if (magic != "score_candidate" || version != "v1") {
    throw IoError("load_candidate: '" + path + "' is not a candidate file");
  }
  int dim = 0, degree = 0, p = 0;
  in >> key >> dim;
  if (key != "dimension") throw IoError("load_candidate: expected dimension");
  in >> key >> degree;
  if (key != "degree") throw IoError("load_candidate: expected degree");
  in >> key >> p;
  if (key != "gram_size") throw IoError("load_candidate: expected gram_size");
  GramCandidate cand;
  cand.dict = make_poly_dictionary(dim, degree);
  if (cand.dict.size != p) {
    throw IoError("load_candidate: gram_size does not match the dictionary");
  }
  cand.gram.resize(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      std::string tok;
      if (!(in >> tok)) {
        throw IoError("load_candidate: truncated Gram matrix");
      }
      cand.gram(i, j) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return cand;
}

}  // namespace score
