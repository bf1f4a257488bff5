#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "score/dynamics.hpp"
#include "score/errors.hpp"
#include "score/lyapunov.hpp"
#include "score/rng.hpp"

namespace score {

struct SynthesisConfig {
  double epsilon = 0.05;      ///< strict-decrease margin in Vdot + eps V <= 0
  int n_train = 4096;         ///< training sample count
  double train_radius = 2.0;  ///< sampling ball radius
  double learning_rate = 1e-2;
  int max_iters = 2000;
  double delta = 1e-3;        ///< positive-definite floor: Q = L L^T + delta I
  double loss_tol = 1e-8;     ///< below this the run counts as converged
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0) || !(train_radius > 0.0) ||
        !(learning_rate > 0.0) || !(delta > 0.0)) {
      throw ConfigError("synthesis: epsilon, train_radius, learning_rate, "
                        "delta must be positive");
    }
    if (n_train < 1 || max_iters < 1) {
      throw ConfigError("synthesis: n_train and max_iters must be >= 1");
    }
  }
};

struct SynthesisResult {
  GramCandidate candidate;
  double training_loss = 0.0;  ///< hinge loss of the returned candidate
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss_trace;  ///< loss after each accepted step
};

/// Fits the Gram matrix Q of V = z^T Q z by full-batch gradient descent on
/// the hinge loss  mean(max(0, Vdot(x_i) + eps V(x_i)))  over points drawn
/// uniformly from a ball (origin excluded). Q is parameterized as
/// L L^T + delta I with L lower-triangular, so positive definiteness is
/// unconditional; a backtracking line search keeps the loss monotone.
///
/// The hinge is 1-homogeneous in Q, so descent tends to shrink the scale
/// while shaping the level sets. The returned Q is therefore rescaled
/// (factor >= 1 on the L L^T part, aiming at trace p) purely for numerical
/// conditioning — the rescaling cannot create new hinge violations and the
/// certified family {V <= rho} is unchanged up to relabeling rho.
inline SynthesisResult synthesize(const OdeSystem& sys,
                                  const BasisDictionary& dict,
                                  const SynthesisConfig& cfg) {
  cfg.validate();
  if (dict.state_dim != sys.dimension) {
    throw ArgumentError("synthesize: dictionary/system dimension mismatch");
  }
  const int n = sys.dimension;
  const int p = dict.size;
  const int nt = cfg.n_train;

  // Training set: uniform in the ball, rejecting a tiny origin neighborhood
  // where Vdot(0) = 0 carries no information.
  PhiloxStream rng(cfg.seed, stream_id(StreamTag::kSynthesis));
  Eigen::MatrixXd z(nt, p);  // rows z(x_i)
  Eigen::MatrixXd w(nt, p);  // rows J_z(x_i) f(x_i)
  StateVector x(n);
  for (int i = 0; i < nt; ++i) {
    double r = 0.0;
    do {
      for (int d = 0; d < n; ++d) {
        x[d] = rng.uniform(-cfg.train_radius, cfg.train_radius);
      }
      r = x.norm();
    } while (r > cfg.train_radius || r < 1e-3);
    z.row(i) = dict.eval(x);
    w.row(i) = dict.jacobian(x) * eval_field(sys, x);
  }

  // With h_i = z_i^T Q (2 w_i + eps z_i) = Vdot + eps V, the loss gradient
  // in Q over the active set is sym(Z^T W + eps/2 Z^T Z)-style; through
  // Q = L L^T it becomes 2 G L restricted to the lower triangle.
  const auto hinge_values = [&](const Eigen::MatrixXd& q) {
    const Eigen::MatrixXd zq = z * q;  // row i is z_i^T Q
    const Eigen::VectorXd vdot = 2.0 * (zq.array() * w.array()).rowwise().sum();
    const Eigen::VectorXd v = (zq.array() * z.array()).rowwise().sum();
    return Eigen::VectorXd(vdot + cfg.epsilon * v);
  };

  const auto loss_grad = [&](const Eigen::MatrixXd& l, Eigen::MatrixXd* grad) {
    Eigen::MatrixXd q = l * l.transpose();
    q.diagonal().array() += cfg.delta;
    const Eigen::VectorXd h = hinge_values(q);
    double loss = 0.0;
    std::vector<int> active;
    for (int i = 0; i < nt; ++i) {
      if (h[i] > 0.0) {
        loss += h[i];
        active.push_back(i);
      }
    }
    loss /= nt;
    if (grad) {
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
      for (const int i : active) {
        const Eigen::VectorXd zi = z.row(i).transpose();
        const Eigen::VectorXd wi = w.row(i).transpose();
        g.noalias() += wi * zi.transpose() + zi * wi.transpose() +
                       cfg.epsilon * (zi * zi.transpose());
      }
      g /= nt;
      *grad = (2.0 * (g * l)).triangularView<Eigen::Lower>();
    }
    return loss;
  };

  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd grad(p, p);
  double loss = loss_grad(l, &grad);
  double lr = cfg.learning_rate;
  SynthesisResult res;
  res.loss_trace.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  res.loss_trace.push_back(loss);
  int it = 0;
  for (; it < cfg.max_iters && loss > 0.0; ++it) {
    Eigen::MatrixXd l_next;
    Eigen::MatrixXd grad_next(p, p);
    double loss_next = loss;
    while (true) {
      l_next = (l - lr * grad).triangularView<Eigen::Lower>();
      loss_next = loss_grad(l_next, &grad_next);
      if (loss_next <= loss || lr < 1e-14) {
        break;
      }
      lr *= 0.5;
    }
    l = std::move(l_next);
    loss = loss_next;
    grad = grad_next;
    res.loss_trace.push_back(loss);
    lr = std::min(lr * 1.5, 1.0);
  }
  res.iterations = it;
  res.converged = loss <= cfg.loss_tol;

  // Conditioning rescale (see doc comment); factor clamped to >= 1 so the
  // minimum eigenvalue never drops below delta and zero loss stays zero.
  Eigen::MatrixXd llt = l * l.transpose();
  const double tr = llt.trace();
  const double target = static_cast<double>(p) * (1.0 - cfg.delta);
  const double c = tr > 0.0 ? std::max(1.0, target / tr) : 1.0;
  Eigen::MatrixXd q = c * llt;
  q.diagonal().array() += cfg.delta;
  q = 0.5 * (q + q.transpose());

  res.candidate.dict = dict;
  res.candidate.gram = std::move(q);
  // Report the hinge loss of what we actually return.
  res.training_loss =
      hinge_values(res.candidate.gram).array().max(0.0).sum() / nt;
  return res;
}

}  // namespace score
