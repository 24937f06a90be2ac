#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mondeq/equilibrium.hpp"
#include "mondeq/net.hpp"
#include "mondeq/rng.hpp"

namespace mondeq {

struct AttackOptions {
  int steps = 100;
  int restarts = 10;
  double step_size = 0;  // 0 selects 2.5 * eps / steps
  std::uint64_t seed = 0;
  bool clamp_pixels = false;  // clip iterates to the normalized pixel range
  double clamp_lo = -0.42;
  double clamp_hi = 2.82;
  FixpointOptions fixpoint;
};

struct AttackResult {
  bool success = false;
  Eigen::VectorXd x_adv;
  int adversarial_label = -1;
  int iterations = 0;
  std::vector<double> margin_trace;  // best margin after each step of the winning restart
  int restarts_used = 0;
};

namespace detail {

inline void project_ball(Eigen::VectorXd& x, const Eigen::VectorXd& center, double eps,
                         LqNorm q) {
  if (q.is_inf()) {
    x = x.array().max(center.array() - eps).min(center.array() + eps).matrix();
  } else {
    const Eigen::VectorXd d = x - center;
    const double n = d.norm();
    if (n > eps) x = center + (eps / n) * d;
  }
}

/// Margin gradient d/dx (F_i - F_y0) through the implicit layer: one
/// adjoint solve (I - diag(s) W)' eta = xi, gradient U' diag(s) eta.
inline Eigen::VectorXd margin_gradient(const MonDeq& net, const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& x, int y0, int i) {
  const Eigen::VectorXd pre = preactivation(net, z, x);
  Eigen::VectorXd s(net.hidden_dim());
  for (int j = 0; j < s.size(); ++j) s[j] = pre[j] > 0 ? 1.0 : 0.0;
  const Eigen::VectorXd xi = (net.C.row(i) - net.C.row(y0)).transpose();
  const int p = net.hidden_dim();
  const Eigen::MatrixXd lhs =
      (Eigen::MatrixXd::Identity(p, p) - s.asDiagonal() * net.W).transpose();
  const Eigen::VectorXd eta = lhs.partialPivLu().solve(xi);
  return net.U.transpose() * (s.asDiagonal() * eta);
}

}  // namespace detail

/// Projected gradient ascent on the logit margin max_{i != y0} F_i - F_y0.
/// Any reported success is re-verified with an independent forward pass and
/// a norm check before it is returned.
inline AttackResult pgd_attack(const MonDeq& net, const Eigen::VectorXd& x0, double eps,
                               LqNorm q, const AttackOptions& opts = {}) {
  if (eps < 0) throw std::invalid_argument("attack radius must be nonnegative");
  if (!(q.q == 2 || q.is_inf()))
    throw std::invalid_argument("attack supports q in {2, inf} only");
  const int y0 = predict(net, x0, opts.fixpoint);
  AttackResult best;
  best.x_adv = x0;
  if (net.num_labels() < 2) return best;

  const double step = opts.step_size > 0 ? opts.step_size : 2.5 * eps / opts.steps;
  double best_margin = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < opts.restarts; ++restart) {
    Rng rng(opts.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(restart));
    Eigen::VectorXd x = x0;
    if (restart > 0 && eps > 0) {
      x = rng.ball_point(x0, eps, q.q == 2);
      if (opts.clamp_pixels)
        x = x.cwiseMax(opts.clamp_lo).cwiseMin(opts.clamp_hi);
    }
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(net.hidden_dim());
    std::vector<double> trace;
    trace.reserve(opts.steps);
    bool aborted = false;

    for (int it = 0; it < opts.steps; ++it) {
      const EquilibriumResult eq = solve_equilibrium(net, x, opts.fixpoint, &warm);
      if (!eq.converged) {
        aborted = true;
        break;
      }
      warm = eq.z;
      const Eigen::VectorXd logits = net.C * eq.z + net.c;
      int target = y0 == 0 ? 1 : 0;
      for (int i = 0; i < net.num_labels(); ++i)
        if (i != y0 && logits[i] - logits[y0] > logits[target] - logits[y0]) target = i;
      const double margin = logits[target] - logits[y0];
      trace.push_back(margin);

      if (margin > best_margin) {
        best_margin = margin;
        best.x_adv = x;
        best.margin_trace = trace;
        best.iterations = it + 1;
        best.restarts_used = restart + 1;
      }
      if (margin > 0) break;  // candidate found, verified below

      Eigen::VectorXd g = detail::margin_gradient(net, eq.z, x, y0, target);
      if (q.is_inf()) {
        x += step * g.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
      } else {
        const double n = g.norm();
        if (n < 1e-14) break;  // flat spot, next restart
        x += (step / n) * g;
      }
      detail::project_ball(x, x0, eps, q);
      if (opts.clamp_pixels) {
        x = x.cwiseMax(opts.clamp_lo).cwiseMin(opts.clamp_hi);
        detail::project_ball(x, x0, eps, q);
      }
    }
    (void)aborted;
    if (best_margin > 0) break;
  }

  // Independent verification before reporting success.
  if (best_margin > 0) {
    const double dist = q.eval(best.x_adv - x0);
    const int label = predict(net, best.x_adv, opts.fixpoint);
    if (dist <= eps + 1e-9 && label != y0) {
      best.success = true;
      best.adversarial_label = label;
    }
  }
  return best;
}

}  // namespace mondeq
