#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mondeq/conic.hpp"
#include "mondeq/qps.hpp"

namespace mondeq {

/// Monomial basis [1, v_1, ..., v_n] of the order-1 moment matrix; the
/// leading entry is pinned to 1 and variable k sits at row/column k + 1.
struct MomentMatrixLayout {
  std::vector<VarBlock> blocks;
  int n = 0;

  int side() const { return n + 1; }
  int index_of(int flat_var) const { return flat_var + 1; }
};

enum class ModelKind { kRobustness, kLipschitz, kEllipsoid };

struct ModelSizes {
  long num_vars = 0;
  long max_psd_side = 0;
};

/// Variable counts and largest PSD side of each model family.
inline ModelSizes model_sizes(ModelKind kind, long p0, long p, long k) {
  if (p0 < 1 || p < 1 || k < 1) throw std::invalid_argument("dimensions must be >= 1");
  switch (kind) {
    case ModelKind::kRobustness: return {p0 + p, 1 + p0 + p};
    case ModelKind::kLipschitz: return {2 * p0 + 4 * p + 2 * k, 1 + 2 * p0 + 4 * p + 2 * k};
    case ModelKind::kEllipsoid: return {p0 + 3 * p + k + k * k, 1 + p0 + p};
  }
  throw std::invalid_argument("unknown model kind");
}

namespace detail {

/// Adds the svec coefficient of symmetric-matrix entry (i, j) = (j, i) with
/// matrix value `coeff` to an equality/cost row; the stored svec variable is
/// sqrt(2) * M_ij off the diagonal, so <A, M> = svec(A)'svec(M).
struct SvecTarget {
  ConicBuilder* cb;
  int var_offset;
  void row_entry(int row, int i, int j, double coeff) const {
    if (i > j) std::swap(i, j);
    const double scale = (i == j) ? 1.0 : std::sqrt(2.0);
    cb->add_entry(row, var_offset + mondeq::svec_index(i, j), scale * coeff);
  }
  void cost_entry(int i, int j, double coeff) const {
    if (i > j) std::swap(i, j);
    const double scale = (i == j) ? 1.0 : std::sqrt(2.0);
    cb->add_cost(var_offset + mondeq::svec_index(i, j), scale * coeff);
  }
};

}  // namespace detail

struct ShorRelaxation {
  ConicProblem problem;
  MomentMatrixLayout layout;
  int moment_offset = 0;  // svec(M) lives at the front of the variable vector
};

/// Order-1 moment (Shor) relaxation: one PSD moment matrix M of side n+1 with
/// M[0,0] = 1, each constraint linearized with its sense, objective
/// linearized and negated into minimization form.
inline ShorRelaxation shor_relax(const QuadraticProgramSpec& spec) {
  ShorRelaxation rel;
  rel.layout.blocks = spec.blocks;
  rel.layout.n = spec.total_dim();
  const int side = rel.layout.side();

  ConicBuilder cb;
  rel.moment_offset = cb.add_cone(ConeKind::kPsd, side);
  detail::SvecTarget mom{&cb, rel.moment_offset};

  // Objective: maximize <A_obj, M>  ->  minimize -<A_obj, M>.
  {
    const QuadExpr& o = spec.objective;
    if (o.constant != 0) mom.cost_entry(0, 0, -o.constant);
    for (const auto& t : o.lin) mom.cost_entry(0, rel.layout.index_of(t.index), -t.value / 2.0);
    for (const auto& t : o.quad) {
      const int i = rel.layout.index_of(t.i), j = rel.layout.index_of(t.j);
      mom.cost_entry(i, j, i == j ? -t.value : -t.value / 2.0);
    }
  }

  // Pin M[0,0] = 1.
  {
    const int row = cb.add_row(1.0);
    mom.row_entry(row, 0, 0, 1.0);
  }

  for (const auto& con : spec.constraints) {
    const int row = cb.add_row(0.0);
    const QuadExpr& g = con.expr;
    if (g.constant != 0) mom.row_entry(row, 0, 0, g.constant);
    for (const auto& t : g.lin) mom.row_entry(row, 0, rel.layout.index_of(t.index), t.value / 2.0);
    for (const auto& t : g.quad) {
      const int i = rel.layout.index_of(t.i), j = rel.layout.index_of(t.j);
      mom.row_entry(row, i, j, i == j ? t.value : t.value / 2.0);
    }
    if (con.sense == Sense::kGeq) {
      const int slack = cb.add_cone(ConeKind::kNonneg, 1);
      cb.add_entry(row, slack, -1.0);
    }
  }

  rel.problem = cb.take();
  return rel;
}

struct ShorResult {
  ConicSolution conic;
  double bound = 0;                // relaxation optimum of the *maximization*
  Eigen::VectorXd first_moments;   // M[0, 1:], candidate point
};

inline ShorResult solve_shor(const QuadraticProgramSpec& spec,
                             const SolverSettings& settings = default_solver_settings()) {
  const ShorRelaxation rel = shor_relax(spec);
  ShorResult out;
  out.conic = solve(rel.problem, settings);
  if (solved(out.conic.status)) {
    out.bound = -out.conic.objective;
    out.first_moments.resize(rel.layout.n);
    for (int k = 0; k < rel.layout.n; ++k) {
      const int idx = rel.moment_offset + svec_index(0, rel.layout.index_of(k));
      out.first_moments[k] = out.conic.primal[idx] / std::sqrt(2.0);
    }
  } else if (out.conic.status == SolveStatus::kUnbounded) {
    // Dual infeasibility of the minimization means the relaxation is +inf.
    out.bound = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace mondeq
