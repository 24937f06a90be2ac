#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mondeq/equilibrium.hpp"
#include "mondeq/net.hpp"
#include "mondeq/shor.hpp"

namespace mondeq {

/// Score-gap model for one competing label i != y0:
///   maximize (C_i - C_y0) z + (c_i - c_y0)
///   s.t.  z = ReLU(Wz + Ux + u),  x in B(x0, eps, q).
/// The constant readout-bias difference shifts the gap and must be kept:
/// F_i - F_y0 = xi'z + (c_i - c_y0).
inline QuadraticProgramSpec build_certmon(const MonDeq& net, const PerturbationSpec& pert,
                                          int y0, int i) {
  if (i == y0) throw std::invalid_argument("competing label must differ from y0");
  if (y0 < 0 || y0 >= net.num_labels() || i < 0 || i >= net.num_labels())
    throw std::invalid_argument("label out of range");
  validate(pert);

  QpBuilder qb;
  const int xb = qb.add_block("x", net.input_dim());
  const int zb = qb.add_block("z", net.hidden_dim());

  const Eigen::VectorXd xi = (net.C.row(i) - net.C.row(y0)).transpose();
  QuadExpr obj;
  obj.constant = net.c[i] - net.c[y0];
  for (int j = 0; j < net.hidden_dim(); ++j)
    if (xi[j] != 0) obj.add_lin(qb.var(zb, j), xi[j]);
  qb.maximize(std::move(obj));

  const std::vector<AffineRow> preact =
      affine_rows(qb, {{zb, &net.W}, {xb, &net.U}}, net.u);
  add_relu_graph(qb, zb, preact);
  add_lq_ball(qb, xb, pert.center, pert.eps, pert.norm);
  return qb.take();
}

struct LabelBound {
  int label = -1;
  double bound = 0;
  SolveStatus status = SolveStatus::kSolverError;
  double solve_time_s = 0;
};

struct RobustnessReport {
  int y0 = -1;
  std::vector<LabelBound> bounds;  // labels actually solved (early exit may stop short)
  bool certified = false;
  bool all_solved = true;  // every solved problem reached (near-)optimality
  std::string failure_reason;
};

struct CertifyOptions {
  double tol_margin = kDefaultCertMargin;
  bool early_exit = true;
  SolverSettings solver = default_solver_settings();
  FixpointOptions fixpoint;
};

/// Equilibrium z at x (throws on non-convergence); shared by the reports.
inline Eigen::VectorXd solve_and_check(const MonDeq& net, const Eigen::VectorXd& x,
                                       const FixpointOptions& opts) {
  const EquilibriumResult eq = solve_equilibrium(net, x, opts);
  if (!eq.converged)
    throw std::runtime_error("equilibrium solve at the input center did not converge");
  return eq.z;
}

/// Solves the K-1 label gaps; certified iff every relaxation bound is
/// below -tol_margin with a (near-)optimal solver status.
inline RobustnessReport certify_robustness(const MonDeq& net, const PerturbationSpec& pert,
                                           const CertifyOptions& opts = {}) {
  RobustnessReport rep;
  const Eigen::VectorXd logits = net.C * solve_and_check(net, pert.center, opts.fixpoint) + net.c;
  rep.y0 = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[rep.y0]) rep.y0 = i;

  // Most competitive label first (largest clean gap toward y0).
  std::vector<int> order;
  for (int i = 0; i < net.num_labels(); ++i)
    if (i != rep.y0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return logits[a] - logits[rep.y0] > logits[b] - logits[rep.y0];
  });

  rep.certified = true;  // empty conjunction holds for K = 1
  for (int label : order) {
    const auto spec = build_certmon(net, pert, rep.y0, label);
    const auto res = solve_shor(spec, opts.solver);
    LabelBound lb;
    lb.label = label;
    lb.status = res.conic.status;
    lb.solve_time_s = res.conic.solve_time_s;
    lb.bound = solved(res.conic.status) ? res.bound
                                        : std::numeric_limits<double>::quiet_NaN();
    rep.bounds.push_back(lb);
    if (!solved(res.conic.status)) {
      rep.certified = false;
      rep.all_solved = false;
      rep.failure_reason = "label " + std::to_string(label) +
                           " solve ended with status " + status_name(res.conic.status) +
                           (res.conic.message.empty() ? "" : ": " + res.conic.message);
      if (opts.early_exit) break;
      continue;
    }
    if (lb.bound >= -opts.tol_margin) {
      rep.certified = false;
      if (opts.early_exit) break;
    }
  }
  return rep;
}

}  // namespace mondeq
