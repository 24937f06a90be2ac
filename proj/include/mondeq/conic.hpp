#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mondeq {

// C ABI provided by solver_ffi (Clarabel). Problem form:
//   min q'x  s.t.  A x + s = b,  s in K.
extern "C" int mondeq_conic_solve(
    std::int64_t n, std::int64_t m, const double* q, const std::int64_t* a_colptr,
    const std::int64_t* a_rowval, const double* a_nzval, const double* b, std::int64_t n_cones,
    const std::int32_t* cone_kind, const std::int64_t* cone_dim, double tol,
    std::int64_t max_iter, std::int32_t verbose, double* x_out, double* z_out, double* s_out,
    double* obj_out, double* solve_time_out, std::int64_t* iterations_out);

enum class ConeKind { kFree, kNonneg, kSoc, kPsd, kExp };

/// svec position of symmetric entry (i, j), i <= j, column-stacked upper
/// triangle. Off-diagonal svec entries carry sqrt(2) times the matrix value.
inline int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }

struct Cone {
  ConeKind kind;
  int size;  // kPsd: matrix side; kExp: must be 3; otherwise variable count

  /// Number of entries this cone occupies in the variable vector.
  int dim() const { return kind == ConeKind::kPsd ? size * (size + 1) / 2 : size; }
};

inline const char* cone_name(ConeKind k) {
  switch (k) {
    case ConeKind::kFree: return "free";
    case ConeKind::kNonneg: return "nonneg";
    case ConeKind::kSoc: return "soc";
    case ConeKind::kPsd: return "psd";
    case ConeKind::kExp: return "exp";
  }
  return "?";
}

/// Standard-form conic program
///   minimize cost'x   s.t.   A x = rhs,   x in cone_1 x cone_2 x ...
/// PSD blocks are stored as scaled upper triangles (svec: column-major,
/// off-diagonal entries times sqrt(2)).
struct ConicProblem {
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs;
  Eigen::VectorXd cost;
  std::vector<Cone> cones;
  double objective_offset = 0;

  int num_vars() const { return static_cast<int>(cost.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }
};

enum class SolveStatus { kOptimal, kNearOptimal, kInfeasible, kUnbounded, kSolverError };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kNearOptimal: return "near_optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kSolverError: return "solver_error";
  }
  return "?";
}

inline bool solved(SolveStatus s) {
  return s == SolveStatus::kOptimal || s == SolveStatus::kNearOptimal;
}

struct ConicSolution {
  SolveStatus status = SolveStatus::kSolverError;
  double objective = 0;  // cost'x + objective_offset, meaningful when solved()
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;  // multipliers of the equality rows
  double solve_time_s = 0;
  int iterations = 0;
  std::string message;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 500;
  bool verbose = false;
};

/// Default settings; MONDEQ_SOLVER_TOL overrides the tolerance.
inline SolverSettings default_solver_settings() {
  SolverSettings s;
  if (const char* env = std::getenv("MONDEQ_SOLVER_TOL")) {
    const double v = std::atof(env);
    if (v > 0) s.tol = v;
  }
  return s;
}

/// Incremental assembly of a ConicProblem.
class ConicBuilder {
 public:
  /// Appends a cone block; returns the first variable index of the block.
  int add_cone(ConeKind kind, int size) {
    Cone c{kind, size};
    const int offset = n_;
    n_ += c.dim();
    cones_.push_back(c);
    return offset;
  }

  int add_row(double rhs) {
    rhs_.push_back(rhs);
    return static_cast<int>(rhs_.size()) - 1;
  }

  void add_entry(int row, int var, double coeff) {
    if (coeff != 0) entries_.emplace_back(row, var, coeff);
  }

  void add_cost(int var, double coeff) { cost_.emplace_back(var, coeff); }
  void set_offset(double v) { offset_ = v; }

  int num_vars() const { return n_; }

  ConicProblem take() {
    ConicProblem p;
    p.entries = std::move(entries_);
    p.rhs = Eigen::Map<Eigen::VectorXd>(rhs_.data(), static_cast<long>(rhs_.size()));
    p.cost = Eigen::VectorXd::Zero(n_);
    for (const auto& [var, coeff] : cost_) p.cost[var] += coeff;
    p.cones = std::move(cones_);
    p.objective_offset = offset_;
    return p;
  }

 private:
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<double> rhs_;
  std::vector<std::pair<int, double>> cost_;
  std::vector<Cone> cones_;
  int n_ = 0;
  double offset_ = 0;
};

/// Solves through the Clarabel backend. Adapter: our equalities become zero
/// cone rows; each non-free variable block gets membership rows -I x + s = 0.
inline ConicSolution solve(const ConicProblem& prob, const SolverSettings& settings = {}) {
  const int n = prob.num_vars();
  const int m_eq = prob.num_rows();

  int m_total = m_eq;
  int n_cones_ffi = m_eq > 0 ? 1 : 0;
  for (const auto& c : prob.cones) {
    if (c.kind == ConeKind::kFree) continue;
    m_total += c.dim();
    ++n_cones_ffi;
  }

  // Build the stacked constraint matrix in triplet form, then CSC.
  std::vector<Eigen::Triplet<double>> trips = prob.entries;
  std::vector<double> b(static_cast<size_t>(m_total), 0.0);
  for (int i = 0; i < m_eq; ++i) b[static_cast<size_t>(i)] = prob.rhs[i];

  std::vector<std::int32_t> kinds;
  std::vector<std::int64_t> dims;
  kinds.reserve(static_cast<size_t>(n_cones_ffi));
  dims.reserve(static_cast<size_t>(n_cones_ffi));
  if (m_eq > 0) {
    kinds.push_back(0);  // zero cone
    dims.push_back(m_eq);
  }
  int row = m_eq;
  int var = 0;
  for (const auto& c : prob.cones) {
    const int d = c.dim();
    if (c.kind != ConeKind::kFree) {
      for (int i = 0; i < d; ++i) trips.emplace_back(row + i, var + i, -1.0);
      switch (c.kind) {
        case ConeKind::kNonneg: kinds.push_back(1); dims.push_back(d); break;
        case ConeKind::kSoc: kinds.push_back(2); dims.push_back(d); break;
        case ConeKind::kPsd: kinds.push_back(3); dims.push_back(c.size); break;
        case ConeKind::kExp: kinds.push_back(4); dims.push_back(3); break;
        default: break;
      }
      row += d;
    }
    var += d;
  }

  Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t> a(m_total, n);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();

  std::vector<std::int64_t> rowval(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
  std::vector<std::int64_t> colptr(a.outerIndexPtr(), a.outerIndexPtr() + n + 1);

  ConicSolution sol;
  sol.primal.resize(n);
  Eigen::VectorXd z(m_total), s(m_total);
  double obj = 0, t = 0;
  std::int64_t iters = 0;
  const int code = mondeq_conic_solve(
      n, m_total, prob.cost.data(), colptr.data(), rowval.data(), a.valuePtr(), b.data(),
      static_cast<std::int64_t>(kinds.size()), kinds.data(), dims.data(), settings.tol,
      settings.max_iter, settings.verbose ? 1 : 0, sol.primal.data(), z.data(), s.data(), &obj,
      &t, &iters);

  sol.solve_time_s = t;
  sol.iterations = static_cast<int>(iters);
  sol.dual = z.head(m_eq);
  switch (code) {
    case 0: sol.status = SolveStatus::kOptimal; break;
    case 1: sol.status = SolveStatus::kNearOptimal; break;
    case 2: sol.status = SolveStatus::kInfeasible; break;
    case 3: sol.status = SolveStatus::kUnbounded; break;
    case 4:
      sol.status = SolveStatus::kSolverError;
      sol.message = "iteration limit reached";
      break;
    case 5:
      sol.status = SolveStatus::kSolverError;
      sol.message = "numerical error / insufficient progress";
      break;
    default:
      sol.status = SolveStatus::kSolverError;
      sol.message = "backend rejected the problem (code " + std::to_string(code) + ")";
      break;
  }
  if (solved(sol.status)) sol.objective = obj + prob.objective_offset;
  return sol;
}

/// Text dump (sparse triplets) for cross-checking with independent solvers.
inline void dump_problem(const ConicProblem& prob, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SDP dump: " + path.string());
  out.precision(17);
  out << "conic problem: minimize cost'x s.t. A x = rhs, x in cones\n";
  out << "vars " << prob.num_vars() << "\n";
  out << "cones " << prob.cones.size() << "\n";
  for (const auto& c : prob.cones) out << cone_name(c.kind) << " " << c.size << "\n";
  int nnz_cost = 0;
  for (int i = 0; i < prob.cost.size(); ++i)
    if (prob.cost[i] != 0) ++nnz_cost;
  out << "objective " << nnz_cost << " offset " << prob.objective_offset << "\n";
  for (int i = 0; i < prob.cost.size(); ++i)
    if (prob.cost[i] != 0) out << i << " " << prob.cost[i] << "\n";
  out << "equalities " << prob.num_rows() << " nnz " << prob.entries.size() << "\n";
  for (const auto& e : prob.entries) out << e.row() << " " << e.col() << " " << e.value() << "\n";
  out << "rhs\n";
  for (int i = 0; i < prob.rhs.size(); ++i) out << i << " " << prob.rhs[i] << "\n";
}

}  // namespace mondeq
