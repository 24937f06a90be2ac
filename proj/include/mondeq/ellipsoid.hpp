#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "mondeq/conic.hpp"
#include "mondeq/equilibrium.hpp"
#include "mondeq/linalg.hpp"
#include "mondeq/net.hpp"
#include "mondeq/shor.hpp"

namespace mondeq {

/// Output-space ellipsoid {xi : ||Q xi + b||_2 <= 1}, Q symmetric PSD.
struct Ellipsoid {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;

  double norm_at(const Eigen::VectorXd& xi) const { return (Q * xi + b).norm(); }
  bool contains(const Eigen::VectorXd& xi, double tol = 1e-9) const {
    return norm_at(xi) <= 1.0 + tol;
  }
};

/// Certificate multipliers. sigma_ball is scalar for q = 2 and a length-p0
/// vector for q = inf; sigma_affine multiplies z - Wz - Ux - u >= 0 and
/// sigma_zpos multiplies z >= 0 (the appendix prints these as sigma_3 and
/// sigma_2 respectively). lambda holds the slope-restriction weights for
/// pairs i < j in row-major order and may be empty.
struct MultiplierSet {
  Eigen::VectorXd sigma_ball;
  Eigen::VectorXd sigma_affine;
  Eigen::VectorXd sigma_zpos;
  Eigen::VectorXd tau;
  Eigen::VectorXd lambda;
};

inline int lambda_index(int i, int j, int p) {
  // pairs (0,1), (0,2), ..., (0,p-1), (1,2), ... in row-major order
  return i * p - i * (i + 1) / 2 + (j - i - 1);
}

namespace detail {

/// Pair-difference matrix T = sum_{i<j} lambda_ij (e_i - e_j)(e_i - e_j)'.
inline Eigen::MatrixXd pair_laplacian(const Eigen::VectorXd& lambda, int p) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(p, p);
  if (lambda.size() == 0) return t;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const double l = lambda[lambda_index(i, j, p)];
      t(i, i) += l;
      t(j, j) += l;
      t(i, j) -= l;
      t(j, i) -= l;
    }
  return t;
}

}  // namespace detail

/// Linear-in-multipliers part of the Gram matrix in basis [x', z', 1]:
/// the -1 corner of the ellipsoid membership plus M2..M6. The readout
/// block is excluded (it is N'N with N from readout_factor).
inline Eigen::MatrixXd gram_linear(const MonDeq& net, const PerturbationSpec& pert,
                                   const MultiplierSet& mult) {
  const int p0 = net.input_dim(), p = net.hidden_dim();
  const int n0 = p0 + p + 1;
  const int last = n0 - 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n0, n0);
  m(last, last) = -1.0;

  // M2: input-ball multiplier, one branch per norm.
  if (pert.norm.is_inf()) {
    if (mult.sigma_ball.size() != p0)
      throw std::invalid_argument("sigma_ball must have length p0 for the sup norm");
    for (int i = 0; i < p0; ++i) {
      const double s = mult.sigma_ball[i];
      m(i, i) -= s;
      m(i, last) += s * pert.center[i];
      m(last, i) += s * pert.center[i];
      m(last, last) += s * (pert.eps * pert.eps - pert.center[i] * pert.center[i]);
    }
  } else if (pert.norm.q == 2) {
    if (mult.sigma_ball.size() != 1)
      throw std::invalid_argument("sigma_ball must be scalar for the L2 norm");
    const double s = mult.sigma_ball[0];
    m.topLeftCorner(p0, p0) -= s * Eigen::MatrixXd::Identity(p0, p0);
    m.block(0, last, p0, 1) += s * pert.center;
    m.block(last, 0, 1, p0) += s * pert.center.transpose();
    m(last, last) += s * (pert.eps * pert.eps - pert.center.squaredNorm());
  } else {
    throw std::invalid_argument("ellipsoid model supports q in {2, inf} only");
  }

  // M3: tau' (z (z - Wz - Ux - u)); the (z, z) block is symmetrized.
  if (mult.tau.size() != p) throw std::invalid_argument("tau must have length p");
  {
    const Eigen::MatrixXd dt = mult.tau.asDiagonal();
    const Eigen::MatrixXd iw = Eigen::MatrixXd::Identity(p, p) - net.W;
    m.block(0, p0, p0, p) += -0.5 * net.U.transpose() * dt;
    m.block(p0, 0, p, p0) += -0.5 * dt * net.U;
    m.block(p0, p0, p, p) += 0.5 * (dt * iw + iw.transpose() * dt);
    m.block(p0, last, p, 1) += -0.5 * dt * net.u;
    m.block(last, p0, 1, p) += (-0.5 * dt * net.u).transpose();
  }

  // M4: sigma_affine' (z - Wz - Ux - u).
  if (mult.sigma_affine.size() != p) throw std::invalid_argument("sigma_affine must have length p");
  {
    const Eigen::VectorXd& s = mult.sigma_affine;
    m.block(0, last, p0, 1) += -0.5 * net.U.transpose() * s;
    m.block(last, 0, 1, p0) += (-0.5 * net.U.transpose() * s).transpose();
    const Eigen::VectorXd zs = 0.5 * (Eigen::MatrixXd::Identity(p, p) - net.W.transpose()) * s;
    m.block(p0, last, p, 1) += zs;
    m.block(last, p0, 1, p) += zs.transpose();
    m(last, last) += -s.dot(net.u);
  }

  // M5: sigma_zpos' z.
  if (mult.sigma_zpos.size() != p) throw std::invalid_argument("sigma_zpos must have length p");
  m.block(p0, last, p, 1) += 0.5 * mult.sigma_zpos;
  m.block(last, p0, 1, p) += 0.5 * mult.sigma_zpos.transpose();

  // M6: slope restriction, congruence of the pair Laplacian with
  // [U W u; 0 I 0; 0 0 1]; the preactivation rows act through P below.
  if (mult.lambda.size() > 0) {
    if (mult.lambda.size() != p * (p - 1) / 2)
      throw std::invalid_argument("lambda must have length p(p-1)/2");
    const Eigen::MatrixXd t = detail::pair_laplacian(mult.lambda, p);
    Eigen::MatrixXd pmat(p, n0);  // rows of the preactivation in the basis
    pmat << net.U, net.W, net.u;
    Eigen::MatrixXd zsel = Eigen::MatrixXd::Zero(p, n0);
    zsel.block(0, p0, p, p) = Eigen::MatrixXd::Identity(p, p);
    m += pmat.transpose() * t * zsel + zsel.transpose() * t * pmat -
         2.0 * zsel.transpose() * t * zsel;
  }
  return m;
}

/// Readout factor N = [0, QC, Qc + b]; the quadratic-in-Q part of the Gram
/// matrix is exactly N'N - corner(1).
inline Eigen::MatrixXd readout_factor(const MonDeq& net, const Eigen::MatrixXd& q,
                                      const Eigen::VectorXd& b) {
  const int p0 = net.input_dim(), p = net.hidden_dim(), k = net.num_labels();
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(k, p0 + p + 1);
  n.block(0, p0, k, p) = q * net.C;
  n.col(p0 + p) = q * net.c + b;
  return n;
}

/// Full Gram matrix M = M1 + ... + M6 in basis [x', z', 1]; the feasibility
/// condition of the containment certificate is -M >= 0.
inline Eigen::MatrixXd assemble_gram(const MonDeq& net, const PerturbationSpec& pert,
                                     const Eigen::MatrixXd& q, const Eigen::VectorXd& b,
                                     const MultiplierSet& mult) {
  const Eigen::MatrixXd n = readout_factor(net, q, b);
  return n.transpose() * n + gram_linear(net, pert, mult);
}

/// Schur-complement form of -M >= 0: [[-M_lin, N'], [N, I_K]] >= 0,
/// linear in every decision variable.
inline Eigen::MatrixXd schur_lmi(const MonDeq& net, const PerturbationSpec& pert,
                                 const Eigen::MatrixXd& q, const Eigen::VectorXd& b,
                                 const MultiplierSet& mult) {
  const int n0 = net.input_dim() + net.hidden_dim() + 1;
  const int k = net.num_labels();
  const Eigen::MatrixXd nmat = readout_factor(net, q, b);
  Eigen::MatrixXd lmi(n0 + k, n0 + k);
  lmi.topLeftCorner(n0, n0) = -gram_linear(net, pert, mult);
  lmi.topRightCorner(n0, k) = nmat.transpose();
  lmi.bottomLeftCorner(k, n0) = nmat;
  lmi.bottomRightCorner(k, k) = Eigen::MatrixXd::Identity(k, k);
  return lmi;
}

struct EllipsoidOptions {
  bool slope_restriction = true;
  SolverSettings solver = default_solver_settings();
  FixpointOptions fixpoint;
  double degenerate_det = 1e-12;
  double trace_reg = 1e-6;
  /// Rescale (Q, b) after the solve if solver tolerance left -M >= 0
  /// violated, so sampled containment is certified, not just approximate.
  bool shrink_to_certify = true;
};

struct EllipsoidResult {
  Ellipsoid ell;
  MultiplierSet mult;
  SolveStatus status = SolveStatus::kSolverError;
  std::string message;
  double log_det = 0;
  double solve_time_s = 0;
  bool regularized = false;
  double shrink = 1.0;
  int gram_side = 0;
};

namespace detail {

struct EllipsoidLayout {
  int k = 0, p0 = 0, p = 0, nlam = 0, nball = 0;
  int svec_q = -1, s_lmi = -1, s_det = -1;
  int sball = -1, saff = -1, szpos = -1, lam = -1;
  int bvec = -1, tau = -1, ztri = -1, tvec = -1, exp0 = -1;
  int lmi_side = 0;
};

inline int ztri_index(int i, int j) { return i * (i + 1) / 2 + j; }  // i >= j

/// Assembles the log-det SDP (or, with `fixed`, the multiplier feasibility
/// problem at a fixed (Q, b)).
inline std::pair<ConicProblem, EllipsoidLayout> build_ellipsoid_conic(
    const MonDeq& net, const PerturbationSpec& pert, const EllipsoidOptions& opts,
    const Ellipsoid* fixed = nullptr) {
  validate(pert);
  const int p0 = net.input_dim(), p = net.hidden_dim(), k = net.num_labels();
  const int n0 = p0 + p + 1;
  EllipsoidLayout lay;
  lay.k = k;
  lay.p0 = p0;
  lay.p = p;
  lay.nball = pert.norm.is_inf() ? p0 : 1;
  lay.nlam = opts.slope_restriction ? p * (p - 1) / 2 : 0;
  lay.lmi_side = n0 + k;

  ConicBuilder cb;
  if (!fixed) lay.svec_q = cb.add_cone(ConeKind::kPsd, k);
  lay.s_lmi = cb.add_cone(ConeKind::kPsd, lay.lmi_side);
  lay.sball = cb.add_cone(ConeKind::kNonneg, lay.nball);
  lay.saff = cb.add_cone(ConeKind::kNonneg, p);
  lay.szpos = cb.add_cone(ConeKind::kNonneg, p);
  if (lay.nlam > 0) lay.lam = cb.add_cone(ConeKind::kNonneg, lay.nlam);
  lay.tau = cb.add_cone(ConeKind::kFree, p);
  if (!fixed) {
    lay.bvec = cb.add_cone(ConeKind::kFree, k);
    lay.s_det = cb.add_cone(ConeKind::kPsd, 2 * k);
    lay.ztri = cb.add_cone(ConeKind::kFree, k * (k + 1) / 2);
    lay.tvec = cb.add_cone(ConeKind::kFree, k);
    lay.exp0 = cb.num_vars();
    for (int i = 0; i < k; ++i) cb.add_cone(ConeKind::kExp, 3);
    for (int i = 0; i < k; ++i) cb.add_cost(lay.tvec + i, -1.0);
  }

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  // Coefficient of a PSD block's svec variable for matrix entry (i, j).
  auto psd_coeff = [&](int offset, int i, int j) {
    if (i > j) std::swap(i, j);
    return std::pair<int, double>(offset + svec_index(i, j), i == j ? 1.0 : inv_sqrt2);
  };

  // --- LMI equalities: S_lmi = [[-M_lin, N'], [N, I]] ------------------------
  // Entry-wise affine expansion; per-entry variable contributions collected
  // first, then emitted as rows  S_lmi(i,j) - sum coeff * var = const(i,j).
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> contrib;
  Eigen::MatrixXd cst = Eigen::MatrixXd::Zero(lay.lmi_side, lay.lmi_side);
  auto add_var = [&](int i, int j, int var, double coeff) {
    if (i > j) std::swap(i, j);
    if (coeff != 0) contrib[{i, j}].push_back({var, coeff});
  };
  const int last = n0 - 1;

  // Constant parts: +1 corner of -M_lin, the identity block, and for the
  // fixed-(Q, b) variant the whole readout factor.
  cst(last, last) = 1.0;
  for (int i = 0; i < k; ++i) cst(n0 + i, n0 + i) = 1.0;
  if (fixed) {
    const Eigen::MatrixXd nmat = readout_factor(net, fixed->Q, fixed->b);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < n0; ++c) cst(c, n0 + r) += nmat(r, c);
  }

  // -M2 in the top-left block.
  if (pert.norm.is_inf()) {
    for (int i = 0; i < p0; ++i) {
      add_var(i, i, lay.sball + i, 1.0);
      add_var(i, last, lay.sball + i, -pert.center[i]);
      add_var(last, last, lay.sball + i,
              -(pert.eps * pert.eps - pert.center[i] * pert.center[i]));
    }
  } else {
    for (int i = 0; i < p0; ++i) {
      add_var(i, i, lay.sball, 1.0);
      add_var(i, last, lay.sball, -pert.center[i]);
    }
    add_var(last, last, lay.sball, -(pert.eps * pert.eps - pert.center.squaredNorm()));
  }

  // -M3: tau couplings.
  for (int j = 0; j < p; ++j) {
    const int tv = lay.tau + j;
    for (int a = 0; a < p0; ++a) add_var(a, p0 + j, tv, 0.5 * net.U(j, a));
    // symmetrized (z, z) block: 0.5 (dt (I - W) + (I - W') dt)
    for (int l = 0; l < p; ++l) {
      const double iw_jl = (j == l ? 1.0 : 0.0) - net.W(j, l);
      if (j == l) {
        add_var(p0 + j, p0 + j, tv, -iw_jl);
      } else {
        add_var(p0 + j, p0 + l, tv, -0.5 * iw_jl);
      }
    }
    add_var(p0 + j, last, tv, 0.5 * net.u[j]);
  }

  // -M4: sigma_affine.
  for (int j = 0; j < p; ++j) {
    const int sv = lay.saff + j;
    for (int a = 0; a < p0; ++a) add_var(a, last, sv, 0.5 * net.U(j, a));
    for (int l = 0; l < p; ++l) {
      const double iw_lj = (l == j ? 1.0 : 0.0) - net.W(j, l);  // ((I - W')s)_l picks W(j, l)
      add_var(p0 + l, last, sv, -0.5 * iw_lj);
    }
    add_var(last, last, sv, net.u[j]);
  }

  // -M5: sigma_zpos.
  for (int j = 0; j < p; ++j) add_var(p0 + j, last, lay.szpos + j, -0.5);

  // -M6: slope restriction pairs.
  if (lay.nlam > 0) {
    Eigen::MatrixXd pmat(p, n0);
    pmat << net.U, net.W, net.u;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        const int lv = lay.lam + lambda_index(i, j, p);
        const Eigen::RowVectorXd dd = pmat.row(i) - pmat.row(j);
        // gg is the indicator difference e_i - e_j in the z region.
        // G = outer(dd, gg) + outer(gg, dd) - 2 outer(gg, gg); emit -G.
        auto emit_outer_sym = [&](int zrow, double gsign) {
          // contribution of gg entry (z index zrow, sign gsign) against dd
          for (int c = 0; c < n0; ++c) {
            const double val = gsign * dd[c];
            if (val == 0) continue;
            const int rr = p0 + zrow;
            if (rr == c) {
              add_var(rr, rr, lv, -2.0 * val);  // both outer terms hit the diagonal
            } else {
              add_var(rr, c, lv, -val);
            }
          }
        };
        emit_outer_sym(i, 1.0);
        emit_outer_sym(j, -1.0);
        // -(-2 gg gg'): +2 at (i,i), (j,j); -2 at (i,j) doubled sign
        add_var(p0 + i, p0 + i, lv, 2.0);
        add_var(p0 + j, p0 + j, lv, 2.0);
        add_var(p0 + i, p0 + j, lv, -2.0);
      }
  }

  // N blocks (decision Q, b): N(r, p0 + jz) = sum_l Q(r, l) C(l, jz),
  // N(r, last) = sum_l Q(r, l) c_l + b_r, placed at LMI entries
  // (p0 + jz, n0 + r) and (last, n0 + r).
  if (!fixed) {
    for (int r = 0; r < k; ++r) {
      for (int l = 0; l < k; ++l) {
        const auto [qvar, qcoeff] = psd_coeff(lay.svec_q, r, l);
        for (int jz = 0; jz < p; ++jz)
          if (net.C(l, jz) != 0) add_var(p0 + jz, n0 + r, qvar, -qcoeff * net.C(l, jz));
        if (net.c[l] != 0) add_var(last, n0 + r, qvar, -qcoeff * net.c[l]);
      }
      add_var(last, n0 + r, lay.bvec + r, -1.0);
    }
  }

  // Emit the rows.
  for (int j = 0; j < lay.lmi_side; ++j)
    for (int i = 0; i <= j; ++i) {
      const int row = cb.add_row(cst(i, j));
      const auto [svar, scoeff] = psd_coeff(lay.s_lmi, i, j);
      cb.add_entry(row, svar, scoeff);
      const auto it = contrib.find({i, j});
      if (it != contrib.end()) {
        std::map<int, double> acc;
        for (const auto& [var, coeff] : it->second) acc[var] += coeff;
        for (const auto& [var, coeff] : acc) cb.add_entry(row, var, -coeff);
      }
    }

  // --- determinant machinery: S_det = [[Q, Z], [Z', diag(Z)]] ---------------
  if (!fixed) {
    for (int j = 0; j < 2 * k; ++j)
      for (int i = 0; i <= j; ++i) {
        const int row = cb.add_row(0.0);
        const auto [svar, scoeff] = psd_coeff(lay.s_det, i, j);
        cb.add_entry(row, svar, scoeff);
        if (i < k && j < k) {
          const auto [qvar, qcoeff] = psd_coeff(lay.svec_q, i, j);
          cb.add_entry(row, qvar, -qcoeff);
        } else if (i < k && j >= k) {
          const int zc = j - k;
          if (i >= zc) cb.add_entry(row, lay.ztri + ztri_index(i, zc), -1.0);
        } else {
          if (i == j) cb.add_entry(row, lay.ztri + ztri_index(i - k, i - k), -1.0);
        }
      }
    for (int i = 0; i < k; ++i) {
      const int base = lay.exp0 + 3 * i;
      int row = cb.add_row(0.0);  // e1 = t_i
      cb.add_entry(row, base + 0, 1.0);
      cb.add_entry(row, lay.tvec + i, -1.0);
      row = cb.add_row(1.0);  // e2 = 1
      cb.add_entry(row, base + 1, 1.0);
      row = cb.add_row(0.0);  // e3 = Z_ii
      cb.add_entry(row, base + 2, 1.0);
      cb.add_entry(row, lay.ztri + ztri_index(i, i), -1.0);
    }
  }

  return {cb.take(), lay};
}

inline Eigen::MatrixXd unpack_q(const Eigen::VectorXd& x, const EllipsoidLayout& lay) {
  Eigen::MatrixXd q(lay.k, lay.k);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < lay.k; ++j)
    for (int i = 0; i <= j; ++i) {
      const double v = x[lay.svec_q + svec_index(i, j)];
      q(i, j) = q(j, i) = (i == j) ? v : v * inv_sqrt2;
    }
  return q;
}

inline MultiplierSet unpack_multipliers(const Eigen::VectorXd& x, const EllipsoidLayout& lay) {
  MultiplierSet m;
  m.sigma_ball = x.segment(lay.sball, lay.nball);
  m.sigma_affine = x.segment(lay.saff, lay.p);
  m.sigma_zpos = x.segment(lay.szpos, lay.p);
  m.tau = x.segment(lay.tau, lay.p);
  m.lambda = lay.nlam > 0 ? x.segment(lay.lam, lay.nlam) : Eigen::VectorXd(0);
  return m;
}

}  // namespace detail

/// Upper bound of sup_{x in E} ||(x, z(x), 1)||^2 from the z-Lipschitz
/// baseline; used by the post-solve containment guard.
inline double basis_norm_bound(const MonDeq& net, const PerturbationSpec& pert,
                               const FixpointOptions& fp = {}) {
  const double eps2 =
      pert.norm.is_inf() ? pert.eps * std::sqrt(static_cast<double>(net.input_dim()))
                         : pert.eps;
  const double xmax = pert.center.norm() + eps2;
  const EquilibriumResult eq = solve_equilibrium(net, pert.center, fp);
  if (!eq.converged) throw std::runtime_error("equilibrium solve at the center did not converge");
  const double zmax = eq.z.norm() + spectral_norm(net.U) / net.m * eps2;
  return 1.0 + xmax * xmax + zmax * zmax;
}

/// Minimum-volume (maximum log-det) outer ellipsoid of F(E) via the
/// Schur-form LMI with exponential-cone log-det machinery.
inline EllipsoidResult min_volume_ellipsoid(const MonDeq& net, const PerturbationSpec& pert,
                                            const EllipsoidOptions& opts = {}) {
  EllipsoidResult out;
  out.gram_side = net.input_dim() + net.hidden_dim() + 1;

  auto run = [&](bool with_trace_reg) {
    auto [prob, lay] = detail::build_ellipsoid_conic(net, pert, opts);
    if (with_trace_reg) {
      // tr(Q) >= trace_reg, appended as an extra inequality row.
      const int slack_var = static_cast<int>(prob.cost.size());
      prob.cones.push_back({ConeKind::kNonneg, 1});
      Eigen::VectorXd cost = Eigen::VectorXd::Zero(slack_var + 1);
      cost.head(slack_var) = prob.cost;
      prob.cost = cost;
      const int row = static_cast<int>(prob.rhs.size());
      Eigen::VectorXd rhs(row + 1);
      rhs.head(row) = prob.rhs;
      rhs[row] = opts.trace_reg;
      prob.rhs = rhs;
      for (int i = 0; i < lay.k; ++i)
        prob.entries.emplace_back(row, lay.svec_q + svec_index(i, i), 1.0);
      prob.entries.emplace_back(row, slack_var, -1.0);
    }
    const ConicSolution sol = solve(prob, opts.solver);
    return std::make_pair(sol, lay);
  };

  auto [sol, lay] = run(false);
  out.status = sol.status;
  out.message = sol.message;
  out.solve_time_s = sol.solve_time_s;
  if (!solved(sol.status)) return out;

  Eigen::MatrixXd q = detail::unpack_q(sol.primal, lay);
  Eigen::VectorXd b = sol.primal.segment(lay.bvec, lay.k);
  MultiplierSet mult = detail::unpack_multipliers(sol.primal, lay);

  auto det_of = [](const Eigen::MatrixXd& m) {
    return m.llt().info() == Eigen::Success ? m.determinant() : -1.0;
  };
  if (det_of(q) < opts.degenerate_det) {
    auto [sol2, lay2] = run(true);
    out.solve_time_s += sol2.solve_time_s;
    if (!solved(sol2.status)) {
      out.status = SolveStatus::kSolverError;
      out.message = "degenerate Q and regularized rerun failed";
      return out;
    }
    q = detail::unpack_q(sol2.primal, lay2);
    b = sol2.primal.segment(lay2.bvec, lay2.k);
    mult = detail::unpack_multipliers(sol2.primal, lay2);
    out.regularized = true;
    if (det_of(q) < opts.degenerate_det) {
      out.status = SolveStatus::kSolverError;
      out.message = "Q remains degenerate after trace regularization";
      return out;
    }
    out.status = sol2.status;
  }

  if (opts.shrink_to_certify) {
    const Eigen::MatrixXd gram = assemble_gram(net, pert, q, b, mult);
    const double lmax = max_eig_symmetric(gram);
    if (lmax > 0) {
      const double factor =
          1.0 / std::sqrt(1.0 + lmax * basis_norm_bound(net, pert, opts.fixpoint));
      q *= factor;
      b *= factor;
      out.shrink = factor;
    }
  }

  out.ell = {q, b};
  out.mult = mult;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
  out.log_det = 0;
  for (int i = 0; i < lay.k; ++i) out.log_det += std::log(std::max(es.eigenvalues()[i], 1e-300));
  return out;
}

/// Feasibility of the containment certificate at a fixed (Q, b): searches
/// the multipliers only. Used to cross-check the Schur form.
inline SolveStatus certificate_feasible(const MonDeq& net, const PerturbationSpec& pert,
                                        const Ellipsoid& fixed,
                                        const EllipsoidOptions& opts = {}) {
  auto [prob, lay] = detail::build_ellipsoid_conic(net, pert, opts, &fixed);
  return solve(prob, opts.solver).status;
}

/// max { xi_i - xi_y0 : ||Q xi + b|| <= 1 } in closed form:
/// -a'Q^{-1}b + ||Q^{-1}a|| with a = e_i - e_y0.
inline double ellipsoid_label_gap(const Ellipsoid& ell, int y0, int i) {
  const int k = static_cast<int>(ell.Q.rows());
  if (y0 < 0 || y0 >= k || i < 0 || i >= k || i == y0)
    throw std::invalid_argument("bad label pair");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ell.Q);
  if (!lu.isInvertible()) throw std::runtime_error("singular Q in label gap");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
  a[i] = 1.0;
  a[y0] = -1.0;
  const Eigen::VectorXd qia = lu.solve(a);
  return -qia.dot(ell.b) + qia.norm();
}

struct EllipsoidCertification {
  EllipsoidResult ellipsoid;
  int y0 = -1;
  std::vector<std::pair<int, double>> gaps;  // (label, gap)
  bool certified = false;
};

inline EllipsoidCertification certify_via_ellipsoid(const MonDeq& net,
                                                    const PerturbationSpec& pert,
                                                    const EllipsoidOptions& opts = {},
                                                    double tol_margin = kDefaultCertMargin) {
  EllipsoidCertification cert;
  const EquilibriumResult eq = solve_equilibrium(net, pert.center, opts.fixpoint);
  if (!eq.converged)
    throw std::runtime_error("equilibrium solve at the input center did not converge");
  const Eigen::VectorXd logits = net.C * eq.z + net.c;
  cert.y0 = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[cert.y0]) cert.y0 = i;

  cert.ellipsoid = min_volume_ellipsoid(net, pert, opts);
  if (!solved(cert.ellipsoid.status)) {
    cert.certified = false;
    return cert;
  }
  cert.certified = true;
  for (int i = 0; i < net.num_labels(); ++i) {
    if (i == cert.y0) continue;
    const double gap = ellipsoid_label_gap(cert.ellipsoid.ell, cert.y0, i);
    cert.gaps.push_back({i, gap});
    if (!(gap < -tol_margin)) cert.certified = false;
  }
  return cert;
}

/// 2-D shadow of the ellipsoid on coordinates (a, b):
/// { y : (y - center)'shape(y - center) <= 1 }.
struct ProjectedEllipse {
  Eigen::Matrix2d shape;
  Eigen::Vector2d center;
};

inline ProjectedEllipse project_ellipsoid(const Ellipsoid& ell, int coord_a, int coord_b) {
  const int k = static_cast<int>(ell.Q.rows());
  if (k < 2) throw std::invalid_argument("projection needs K >= 2");
  if (coord_a == coord_b || coord_a < 0 || coord_b < 0 || coord_a >= k || coord_b >= k)
    throw std::invalid_argument("bad projection coordinates");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ell.Q);
  if (!lu.isInvertible()) throw std::runtime_error("singular Q in projection");
  const Eigen::VectorXd center = -lu.solve(ell.b);
  const Eigen::MatrixXd shape_full = ell.Q * ell.Q;  // (xi - c)' Q^2 (xi - c) <= 1

  std::vector<int> sel = {coord_a, coord_b}, rest;
  for (int i = 0; i < k; ++i)
    if (i != coord_a && i != coord_b) rest.push_back(i);
  Eigen::Matrix2d pii;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) pii(r, c) = shape_full(sel[r], sel[c]);
  ProjectedEllipse out;
  if (rest.empty()) {
    out.shape = pii;
  } else {
    const int nr = static_cast<int>(rest.size());
    Eigen::MatrixXd pij(2, nr), pjj(nr, nr);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < nr; ++c) pij(r, c) = shape_full(sel[r], rest[c]);
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nr; ++c) pjj(r, c) = shape_full(rest[r], rest[c]);
    out.shape = pii - pij * pjj.ldlt().solve(pij.transpose());
  }
  out.center = Eigen::Vector2d(center[coord_a], center[coord_b]);
  return out;
}

}  // namespace mondeq
