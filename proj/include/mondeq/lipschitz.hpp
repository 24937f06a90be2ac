#pragma once

#include <string>

#include "mondeq/equilibrium.hpp"
#include "mondeq/linalg.hpp"
#include "mondeq/net.hpp"
#include "mondeq/shor.hpp"

namespace mondeq {

/// Domain ball S for the Lipschitz bound (must contain every query ball).
struct BallSpec {
  Eigen::VectorXd center;
  double radius = 0;
  LqNorm norm;
};

/// Operator norm |||A|||_q for q in {2, inf}.
inline double operator_norm(const Eigen::MatrixXd& a, LqNorm q) {
  if (q.is_inf()) return max_abs_row_sum(a);
  if (q.q == 2) return spectral_norm(a);
  throw std::invalid_argument("operator norm implemented for q in {2, inf} only");
}

/// Weight-only upper bound |||C|||_q * UB_z^q with UB_z^2 = |||U|||_2 / m and
/// UB_z^inf = sqrt(p0) * UB_z^2.
inline double baseline_bound(const MonDeq& net, LqNorm q) {
  const double ub_z2 = spectral_norm(net.U) / net.m;
  if (q.q == 2) return spectral_norm(net.C) * ub_z2;
  if (q.is_inf())
    return max_abs_row_sum(net.C) * std::sqrt(static_cast<double>(net.input_dim())) * ub_z2;
  throw std::invalid_argument("baseline bound implemented for q in {2, inf} only");
}

namespace detail {

inline void add_norm_le_one(QpBuilder& qb, int block, LqNorm q) {
  const VarBlock& blk = qb.block(block);
  if (q.q == 2) {
    QuadExpr e;
    e.constant = 1.0;
    for (int i = 0; i < blk.dim; ++i) e.add_quad(qb.var(block, i), qb.var(block, i), -1.0);
    qb.add_geq(std::move(e), blk.name + "_ball");
    return;
  }
  for (int i = 0; i < blk.dim; ++i) {
    QuadExpr e;
    e.constant = 1.0;
    e.add_quad(qb.var(block, i), qb.var(block, i), -1.0);
    qb.add_geq(std::move(e), blk.name + "_box");
  }
}

}  // namespace detail

/// Jacobian-based Lipschitz model with the redundant strengthening
/// constraints; variables (t, x, s, z, y, r, v, w), objective t'U'y.
///
/// The dual-norm cap on v (||v||_2 <= 1 for q = 2, ||v||_1 <= 1 via the w
/// block for q = inf) is stated in the derivation of the redundant bounds
/// and is required for the model to be bounded at all.
inline QuadraticProgramSpec build_lipmon(const MonDeq& net, const BallSpec& domain, LqNorm q) {
  if (!(q.q == 2 || q.is_inf()))
    throw std::invalid_argument("lipschitz model supports q in {2, inf} only");
  if (domain.norm.q != q.q)
    throw std::invalid_argument("domain ball norm must match the query norm");
  if (domain.radius <= 0) throw std::invalid_argument("domain radius must be positive");
  const int p0 = net.input_dim(), p = net.hidden_dim(), k = net.num_labels();
  if (domain.center.size() != p0) throw std::invalid_argument("domain center has wrong length");

  QpBuilder qb;
  const int tb = qb.add_block("t", p0);
  const int xb = qb.add_block("x", p0);
  const int sb = qb.add_block("s", p);
  const int zb = qb.add_block("z", p);
  const int yb = qb.add_block("y", p);
  const int rb = qb.add_block("r", p);
  const int vb = qb.add_block("v", k);
  const int wb = qb.add_block("w", k);

  // Objective t'U'y = sum_{a,j} U(j,a) t_a y_j.
  QuadExpr obj;
  for (int a = 0; a < p0; ++a)
    for (int j = 0; j < p; ++j)
      if (net.U(j, a) != 0) obj.add_quad(qb.var(tb, a), qb.var(yb, j), net.U(j, a));
  qb.maximize(std::move(obj));

  // (a) unit balls on t and w, the pairing w'v <= 1, and the dual-norm cap on v.
  detail::add_norm_le_one(qb, tb, q);
  detail::add_norm_le_one(qb, wb, q);
  {
    QuadExpr e;  // 1 - w'v >= 0
    e.constant = 1.0;
    for (int i = 0; i < k; ++i) e.add_quad(qb.var(wb, i), qb.var(vb, i), -1.0);
    qb.add_geq(std::move(e), "wv_pair");
  }
  if (q.q == 2) {
    detail::add_norm_le_one(qb, vb, q);  // ||v||_2 <= 1
  } else {
    // ||v||_1 <= 1 lifted through w: w_i >= 0, v_i^2 <= w_i^2, sum w <= 1.
    QuadExpr sum;
    sum.constant = 1.0;
    for (int i = 0; i < k; ++i) {
      QuadExpr nn;
      nn.add_lin(qb.var(wb, i), 1.0);
      qb.add_geq(std::move(nn), "w_nonneg");
      QuadExpr dom;
      dom.add_quad(qb.var(wb, i), qb.var(wb, i), 1.0);
      dom.add_quad(qb.var(vb, i), qb.var(vb, i), -1.0);
      qb.add_geq(std::move(dom), "v_abs_le_w");
      sum.add_lin(qb.var(wb, i), -1.0);
    }
    qb.add_geq(std::move(sum), "w_sum");
  }

  // (b) x in S.
  add_lq_ball(qb, xb, domain.center, domain.radius, q);

  // (c) equilibrium and subgradient systems at the shared preactivation.
  const std::vector<AffineRow> preact = affine_rows(qb, {{zb, &net.W}, {xb, &net.U}}, net.u);
  add_relu_graph(qb, zb, preact);
  add_relu_subgradient(qb, sb, preact);

  // (d) r - W'y = C'v (linear) and y = diag(s) r (quadratic).
  std::vector<AffineRow> resid(p);  // (r - W'y - C'v)_j
  for (int j = 0; j < p; ++j) {
    resid[j].add(qb.var(rb, j), 1.0);
    for (int i = 0; i < p; ++i)
      if (net.W(i, j) != 0) resid[j].add(qb.var(yb, i), -net.W(i, j));
    for (int i = 0; i < k; ++i)
      if (net.C(i, j) != 0) resid[j].add(qb.var(vb, i), -net.C(i, j));
    qb.add_eq(affine_expr(resid[j]), "jacobian_lin");
  }
  for (int j = 0; j < p; ++j) {
    QuadExpr e;  // y_j - s_j r_j = 0
    e.add_lin(qb.var(yb, j), 1.0);
    e.add_quad(qb.var(sb, j), qb.var(rb, j), -1.0);
    qb.add_eq(std::move(e), "y_eq_sr");
  }

  // (e) norm caps on y and r. From r = (I - W' diag(s))^{-1} C'v:
  // ||r|| <= kappa |||C|||_2 ||v|| with kappa bounding the inverse norm over
  // s in [0,1]^p. kappa = 1 + |||W|||_2 / min(m, 1) is valid for every
  // monotone net (||diag(s) x|| <= ||(I - W'diag(s)) x|| / min(m, 1), then
  // triangle inequality); the constant-free version ||r|| <= |||C|||_2 ||v||
  // requires sigma_min(I - W'diag(s)) >= 1, which fails already for
  // W = 0.5, m = 0.5 and would cut the true optimum.
  const double kappa = 1.0 + spectral_norm(net.W) / std::min(net.m, 1.0);
  const double cap2 = kappa * kappa * spectral_norm(net.C) * spectral_norm(net.C);
  for (int which = 0; which < 2; ++which) {
    const int blk = which == 0 ? yb : rb;
    QuadExpr e;
    for (int i = 0; i < k; ++i) e.add_quad(qb.var(vb, i), qb.var(vb, i), cap2);
    for (int j = 0; j < p; ++j) e.add_quad(qb.var(blk, j), qb.var(blk, j), -1.0);
    qb.add_geq(std::move(e), which == 0 ? "y_norm_cap" : "r_norm_cap");
  }

  // (f) coordinate products of the linear identity with s, z, y, r.
  for (int blk : {sb, zb, yb, rb}) {
    for (int j = 0; j < p; ++j) {
      AffineRow mult;
      mult.add(qb.var(blk, j), 1.0);
      qb.add_eq(product(mult, resid[j]), "resid_product");
    }
  }

  return qb.take();
}

struct LipschitzBound {
  LqNorm q;
  BallSpec domain;
  double value = 0;
  SolveStatus status = SolveStatus::kSolverError;
  double solve_time_s = 0;
};

/// Shor relaxation of the Lipschitz model; throws if the solve fails
/// (a failed solve never yields a usable bound).
inline LipschitzBound lipschitz_bound(const MonDeq& net, const BallSpec& domain, LqNorm q,
                                      const SolverSettings& settings = default_solver_settings()) {
  const auto res = solve_shor(build_lipmon(net, domain, q), settings);
  if (!solved(res.conic.status))
    throw std::runtime_error("lipschitz bound solve failed with status " +
                             std::string(status_name(res.conic.status)) +
                             (res.conic.message.empty() ? "" : ": " + res.conic.message));
  LipschitzBound out;
  out.q = q;
  out.domain = domain;
  out.value = std::max(0.0, res.bound);
  out.status = res.conic.status;
  out.solve_time_s = res.conic.solve_time_s;
  return out;
}

struct LipschitzCertificate {
  double delta = 0;  // eps * L_hat
  double tau = 0;    // clean-logit margin of y0
  bool certified = false;
};

/// The 2 delta < tau criterion; requires B(x0, eps, q) to be inside the
/// bound's domain ball.
inline LipschitzCertificate certify_via_lipschitz(const MonDeq& net, const Eigen::VectorXd& x0,
                                                  double eps, LqNorm q,
                                                  const LipschitzBound& bound,
                                                  double tol_margin = kDefaultCertMargin,
                                                  const FixpointOptions& fp = {}) {
  if (bound.q.q != q.q)
    throw std::invalid_argument("bound was computed for a different norm");
  if (eps <= 0) throw std::invalid_argument("eps must be positive");
  const double dist = q.eval(x0 - bound.domain.center);
  if (dist + eps > bound.domain.radius + 1e-12)
    throw std::invalid_argument(
        "query ball is not contained in the bound's domain (distance " + std::to_string(dist) +
        " + eps " + std::to_string(eps) + " > radius " + std::to_string(bound.domain.radius) +
        ")");

  const Eigen::VectorXd logits = forward(net, x0, fp);
  int y0 = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[y0]) y0 = i;
  double runner_up = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logits.size(); ++i)
    if (i != y0) runner_up = std::max(runner_up, logits[i]);

  LipschitzCertificate cert;
  cert.delta = eps * bound.value;
  cert.tau = logits.size() > 1 ? logits[y0] - runner_up
                               : std::numeric_limits<double>::infinity();
  cert.certified = 2.0 * cert.delta < cert.tau - tol_margin;
  return cert;
}

}  // namespace mondeq
