#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "mondeq/conic.hpp"
#include "mondeq/net.hpp"

namespace mondeq {

inline constexpr int kMaxOraclePatternBits = 12;

/// One ReLU activation pattern: over its feasible cell the equilibrium
/// system is linear, z_A = (I - W_AA)^{-1} (U_A x + u_A) and z on the
/// complement is zero, subject to sign consistency.
struct PatternCell {
  std::uint32_t pattern = 0;
  bool feasible = false;
  double gap = -std::numeric_limits<double>::infinity();
};

namespace detail {

struct PatternSystem {
  Eigen::MatrixXd z_coeff;   // |A| x p0, z_A = z_coeff x + z_const
  Eigen::VectorXd z_const;   // |A|
  Eigen::MatrixXd ineq_lhs;  // rows: sign constraints, lhs x <= rhs
  Eigen::VectorXd ineq_rhs;
  std::vector<int> active;
};

inline PatternSystem pattern_system(const MonDeq& net, std::uint32_t pattern) {
  const int p = net.hidden_dim();
  const int p0 = net.input_dim();
  PatternSystem sys;
  std::vector<int> inactive;
  for (int i = 0; i < p; ++i)
    ((pattern >> i) & 1u ? sys.active : inactive).push_back(i);
  const int na = static_cast<int>(sys.active.size());

  Eigen::MatrixXd waa(na, na), ua(na, p0);
  Eigen::VectorXd uca(na);
  for (int r = 0; r < na; ++r) {
    for (int c = 0; c < na; ++c) waa(r, c) = net.W(sys.active[r], sys.active[c]);
    ua.row(r) = net.U.row(sys.active[r]);
    uca[r] = net.u[sys.active[r]];
  }
  if (na > 0) {
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(na, na) - waa;
    const auto lu = lhs.partialPivLu();
    sys.z_coeff = lu.solve(ua);
    sys.z_const = lu.solve(uca);
  } else {
    sys.z_coeff.resize(0, p0);
    sys.z_const.resize(0);
  }

  // Sign consistency: z_A >= 0 on the active set, preactivation <= 0 off it.
  const int ni = static_cast<int>(inactive.size());
  sys.ineq_lhs.resize(na + ni, p0);
  sys.ineq_rhs.resize(na + ni);
  for (int r = 0; r < na; ++r) {
    sys.ineq_lhs.row(r) = -sys.z_coeff.row(r);
    sys.ineq_rhs[r] = sys.z_const[r];
  }
  for (int k = 0; k < ni; ++k) {
    const int i = inactive[k];
    Eigen::RowVectorXd wrow(na);
    for (int c = 0; c < na; ++c) wrow[c] = net.W(i, sys.active[c]);
    sys.ineq_lhs.row(na + k) = wrow * sys.z_coeff + net.U.row(i);
    sys.ineq_rhs[na + k] = -(wrow.dot(sys.z_const) + net.u[i]);
  }
  return sys;
}

/// max f'x + g over the cell and ball; LP for q = inf, SOCP for q = 2.
inline PatternCell solve_cell(const MonDeq& net, const PerturbationSpec& pert,
                              const Eigen::VectorXd& objective_x, double objective_const,
                              const PatternSystem& sys, std::uint32_t pattern,
                              const SolverSettings& settings) {
  const int p0 = net.input_dim();
  if (!pert.norm.is_inf() && pert.norm.q != 2)
    throw std::invalid_argument("oracle supports q in {2, inf} only");

  // Stack all linear inequalities lhs x <= rhs: the cell's sign system
  // plus, for q = inf, the box faces of the ball.
  Eigen::MatrixXd g = sys.ineq_lhs;
  Eigen::VectorXd h = sys.ineq_rhs;
  if (pert.norm.is_inf()) {
    const long base = g.rows();
    g.conservativeResize(base + 2 * p0, p0);
    h.conservativeResize(base + 2 * p0);
    g.bottomRows(2 * p0).setZero();
    for (int i = 0; i < p0; ++i) {
      g(base + 2 * i, i) = 1.0;
      h[base + 2 * i] = pert.center[i] + pert.eps;
      g(base + 2 * i + 1, i) = -1.0;
      h[base + 2 * i + 1] = -(pert.center[i] - pert.eps);
    }
  }

  ConicBuilder cb;
  const int xv = cb.add_cone(ConeKind::kFree, p0);
  const int nrows = static_cast<int>(g.rows());
  const int slack = nrows > 0 ? cb.add_cone(ConeKind::kNonneg, nrows) : 0;
  for (int i = 0; i < p0; ++i) cb.add_cost(xv + i, -objective_x[i]);
  cb.set_offset(-objective_const);
  for (int r = 0; r < nrows; ++r) {
    const int row = cb.add_row(h[r]);
    for (int c = 0; c < p0; ++c) cb.add_entry(row, xv + c, g(r, c));
    cb.add_entry(row, slack + r, 1.0);
  }
  if (!pert.norm.is_inf()) {
    const int soc = cb.add_cone(ConeKind::kSoc, p0 + 1);
    int row = cb.add_row(pert.eps);
    cb.add_entry(row, soc, 1.0);
    for (int i = 0; i < p0; ++i) {
      row = cb.add_row(-pert.center[i]);  // soc_{i+1} = x_i - c_i
      cb.add_entry(row, soc + 1 + i, 1.0);
      cb.add_entry(row, xv + i, -1.0);
    }
  }

  PatternCell cell;
  cell.pattern = pattern;
  const ConicSolution sol = solve(cb.take(), settings);
  if (solved(sol.status)) {
    cell.feasible = true;
    cell.gap = -sol.objective;
  } else if (sol.status != SolveStatus::kInfeasible) {
    throw std::runtime_error("oracle cell solve failed with status " +
                             std::string(status_name(sol.status)));
  }
  return cell;
}

}  // namespace detail

/// Sign-consistency check of one pattern at a concrete input.
inline bool pattern_feasible_at(const MonDeq& net, std::uint32_t pattern,
                                const Eigen::VectorXd& x, double tol = 1e-7) {
  const auto sys = detail::pattern_system(net, pattern);
  const Eigen::VectorXd resid = sys.ineq_lhs * x - sys.ineq_rhs;
  return resid.maxCoeff() <= tol;
}

/// All 2^p activation-pattern cells of (CertMON-i)'s feasible set.
inline std::vector<PatternCell> enumerate_patterns(
    const MonDeq& net, const PerturbationSpec& pert, int y0, int i,
    const SolverSettings& settings = default_solver_settings()) {
  const int p = net.hidden_dim();
  if (p > kMaxOraclePatternBits)
    throw std::invalid_argument("oracle caps the hidden width at " +
                                std::to_string(kMaxOraclePatternBits) + " neurons");
  if (i == y0) throw std::invalid_argument("competing label must differ from y0");
  validate(pert);

  const Eigen::VectorXd xi = (net.C.row(i) - net.C.row(y0)).transpose();
  std::vector<PatternCell> cells;
  cells.reserve(static_cast<size_t>(1) << p);
  for (std::uint32_t pattern = 0; pattern < (1u << p); ++pattern) {
    const auto sys = detail::pattern_system(net, pattern);
    // Objective xi'z + (c_i - c_y0) restricted to the cell: affine in x.
    Eigen::VectorXd fx = Eigen::VectorXd::Zero(net.input_dim());
    double fc = net.c[i] - net.c[y0];
    for (size_t r = 0; r < sys.active.size(); ++r) {
      fx += xi[sys.active[r]] * sys.z_coeff.row(static_cast<int>(r)).transpose();
      fc += xi[sys.active[r]] * sys.z_const[static_cast<int>(r)];
    }
    cells.push_back(detail::solve_cell(net, pert, fx, fc, sys, pattern, settings));
  }
  return cells;
}

/// Exact optimum of (CertMON-i) by exhaustive pattern enumeration.
inline double exact_gap(const MonDeq& net, const PerturbationSpec& pert, int y0, int i,
                        const SolverSettings& settings = default_solver_settings()) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& cell : enumerate_patterns(net, pert, y0, i, settings))
    if (cell.feasible) best = std::max(best, cell.gap);
  if (!std::isfinite(best))
    throw std::runtime_error("no feasible activation pattern found (unexpected: the "
                             "equilibrium pattern of any x in E is feasible)");
  return best;
}

}  // namespace mondeq
