#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "mondeq/linalg.hpp"
#include "mondeq/net.hpp"

namespace mondeq {

struct FixpointOptions {
  double tol = 1e-10;
  int max_iter = 5000;
  /// Picard damping; 0 selects min(1, m / ||W||_2^2), plain Picard when ||W||_2 < 1.
  double damping = 0;
};

struct EquilibriumResult {
  Eigen::VectorXd z;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
};

inline Eigen::VectorXd preactivation(const MonDeq& net, const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& x) {
  return net.W * z + net.U * x + net.u;
}

inline double picard_damping(const MonDeq& net) {
  const double wnorm = spectral_norm(net.W);
  if (wnorm < 1.0) return 1.0;
  return std::min(1.0, net.m / (wnorm * wnorm));
}

/// Damped Picard iteration z <- (1 - a) z + a ReLU(Wz + Ux + u).
/// Non-convergence returns the best iterate with converged = false.
inline EquilibriumResult solve_equilibrium(const MonDeq& net, const Eigen::VectorXd& x,
                                           const FixpointOptions& opts = {},
                                           const Eigen::VectorXd* warm_start = nullptr) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("input length does not match network p0");
  const double alpha = opts.damping > 0 ? opts.damping : picard_damping(net);
  const Eigen::VectorXd ux = net.U * x + net.u;

  EquilibriumResult res;
  res.z = warm_start ? *warm_start : Eigen::VectorXd::Zero(net.hidden_dim());
  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::VectorXd t = (net.W * res.z + ux).cwiseMax(0.0);
    res.residual = (res.z - t).norm();
    res.iterations = it + 1;
    if (res.residual <= opts.tol) {
      res.converged = true;
      return res;
    }
    res.z = (1.0 - alpha) * res.z + alpha * t;
  }
  Eigen::VectorXd t = (net.W * res.z + ux).cwiseMax(0.0);
  res.residual = (res.z - t).norm();
  res.converged = res.residual <= opts.tol;
  return res;
}

inline Eigen::VectorXd forward(const MonDeq& net, const Eigen::VectorXd& x,
                               const FixpointOptions& opts = {}) {
  const EquilibriumResult eq = solve_equilibrium(net, x, opts);
  if (!eq.converged)
    throw std::runtime_error("equilibrium solve did not converge (residual " +
                             std::to_string(eq.residual) + ")");
  return net.C * eq.z + net.c;
}

/// Predicted label: argmax of the logits, ties broken by lowest index.
inline int predict(const MonDeq& net, const Eigen::VectorXd& x, const FixpointOptions& opts = {}) {
  const Eigen::VectorXd logits = forward(net, x, opts);
  int best = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

/// Jacobian of F at x:  C (I - diag(s) W)^{-1} diag(s) U  with
/// s_i = 1 iff the preactivation is strictly positive (0 at kinks).
inline Eigen::MatrixXd implicit_jacobian(const MonDeq& net, const Eigen::VectorXd& x,
                                         const FixpointOptions& opts = {}) {
  const EquilibriumResult eq = solve_equilibrium(net, x, opts);
  if (!eq.converged) throw std::runtime_error("equilibrium solve did not converge");
  const Eigen::VectorXd pre = preactivation(net, eq.z, x);
  Eigen::VectorXd s(net.hidden_dim());
  for (int i = 0; i < s.size(); ++i) s[i] = pre[i] > 0 ? 1.0 : 0.0;
  const int p = net.hidden_dim();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(p, p) - s.asDiagonal() * net.W;
  Eigen::MatrixXd rhs = s.asDiagonal() * net.U;
  return net.C * lhs.partialPivLu().solve(rhs);
}

}  // namespace mondeq
