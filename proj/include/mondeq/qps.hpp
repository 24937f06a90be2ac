#pragma once

#include <Eigen/Core>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mondeq/types.hpp"

namespace mondeq {

/// Named contiguous slice of the flat variable vector.
struct VarBlock {
  std::string name;
  int dim = 0;
  int offset = 0;
};

enum class Sense { kEq, kGeq };  // expr = 0  /  expr >= 0

struct LinTerm {
  int index;
  double value;
};

/// Monomial coefficient of v_i * v_j, stored once per unordered pair (i <= j).
/// Repeated (i, j) entries accumulate.
struct QuadTerm {
  int i, j;
  double value;
};

/// Polynomial of degree <= 2 over the flat variable vector.
struct QuadExpr {
  std::vector<QuadTerm> quad;
  std::vector<LinTerm> lin;
  double constant = 0;

  double eval(const Eigen::VectorXd& v) const {
    double s = constant;
    for (const auto& t : lin) s += t.value * v[t.index];
    for (const auto& t : quad) s += t.value * v[t.i] * v[t.j];
    return s;
  }

  QuadExpr& add_lin(int index, double value) {
    lin.push_back({index, value});
    return *this;
  }
  QuadExpr& add_quad(int i, int j, double value) {
    if (i > j) std::swap(i, j);
    quad.push_back({i, j, value});
    return *this;
  }
};

struct QuadConstraint {
  Sense sense = Sense::kGeq;
  QuadExpr expr;
  std::string tag;

  bool satisfied(const Eigen::VectorXd& v, double tol = 1e-9) const {
    const double g = expr.eval(v);
    return sense == Sense::kEq ? std::abs(g) <= tol : g >= -tol;
  }
};

/// QCQP over named variable blocks; the objective is maximized.
struct QuadraticProgramSpec {
  std::vector<VarBlock> blocks;
  QuadExpr objective;
  std::vector<QuadConstraint> constraints;

  int total_dim() const {
    int n = 0;
    for (const auto& b : blocks) n += b.dim;
    return n;
  }
  const VarBlock& block(std::string_view name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw std::invalid_argument("no variable block named '" + std::string(name) + "'");
  }
};

/// Sparse affine functional a'v + b used while assembling constraints.
struct AffineRow {
  std::vector<LinTerm> terms;
  double offset = 0;

  AffineRow& add(int index, double value) {
    terms.push_back({index, value});
    return *this;
  }
  double eval(const Eigen::VectorXd& v) const {
    double s = offset;
    for (const auto& t : terms) s += t.value * v[t.index];
    return s;
  }
};

/// (a'v + b)(c'v + d) expanded to a QuadExpr.
inline QuadExpr product(const AffineRow& a, const AffineRow& b) {
  QuadExpr e;
  e.constant = a.offset * b.offset;
  for (const auto& t : a.terms)
    if (b.offset != 0) e.add_lin(t.index, t.value * b.offset);
  for (const auto& t : b.terms)
    if (a.offset != 0) e.add_lin(t.index, t.value * a.offset);
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms) e.add_quad(ta.index, tb.index, ta.value * tb.value);
  return e;
}

inline QuadExpr affine_expr(const AffineRow& a) {
  QuadExpr e;
  e.constant = a.offset;
  for (const auto& t : a.terms) e.lin.push_back(t);
  return e;
}

class QpBuilder {
 public:
  int add_block(const std::string& name, int dim) {
    if (dim <= 0) throw std::invalid_argument("block dimension must be positive");
    for (const auto& b : spec_.blocks)
      if (b.name == name) throw std::invalid_argument("duplicate block name '" + name + "'");
    VarBlock b{name, dim, next_offset_};
    next_offset_ += dim;
    spec_.blocks.push_back(b);
    return static_cast<int>(spec_.blocks.size()) - 1;
  }

  int var(int block, int i) const {
    const VarBlock& b = spec_.blocks.at(block);
    if (i < 0 || i >= b.dim) throw std::out_of_range("variable index out of block range");
    return b.offset + i;
  }
  const VarBlock& block(int idx) const { return spec_.blocks.at(idx); }
  int total_dim() const { return next_offset_; }

  void maximize(QuadExpr e) { spec_.objective = std::move(e); }
  void add_eq(QuadExpr e, std::string tag = {}) {
    spec_.constraints.push_back({Sense::kEq, std::move(e), std::move(tag)});
  }
  void add_geq(QuadExpr e, std::string tag = {}) {
    spec_.constraints.push_back({Sense::kGeq, std::move(e), std::move(tag)});
  }

  QuadraticProgramSpec take() { return std::move(spec_); }

 private:
  QuadraticProgramSpec spec_;
  int next_offset_ = 0;
};

/// Rows of (coeff_1 * block_1 + coeff_2 * block_2 + ... + offset).
struct BlockLin {
  int block;
  const Eigen::MatrixXd* coeff;
};

inline std::vector<AffineRow> affine_rows(const QpBuilder& qb, const std::vector<BlockLin>& parts,
                                          const Eigen::VectorXd& offset) {
  const int rows = static_cast<int>(offset.size());
  std::vector<AffineRow> out(rows);
  for (int i = 0; i < rows; ++i) out[i].offset = offset[i];
  for (const auto& part : parts) {
    const Eigen::MatrixXd& a = *part.coeff;
    if (a.rows() != rows) throw std::invalid_argument("affine_rows: row count mismatch");
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < a.cols(); ++j)
        if (a(i, j) != 0) out[i].add(qb.var(part.block, j), a(i, j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semialgebraic building blocks shared by all three models.
// ---------------------------------------------------------------------------

/// ReLU graph z = ReLU(preact), per coordinate:
///   z (z - preact) = 0,  z - preact >= 0,  z >= 0.
inline void add_relu_graph(QpBuilder& qb, int z_block, const std::vector<AffineRow>& preact) {
  const VarBlock& z = qb.block(z_block);
  if (static_cast<int>(preact.size()) != z.dim)
    throw std::invalid_argument("relu_graph: preactivation dimension mismatch");
  for (int i = 0; i < z.dim; ++i) {
    const int zi = qb.var(z_block, i);
    AffineRow z_minus_pre;
    z_minus_pre.offset = -preact[i].offset;
    z_minus_pre.add(zi, 1.0);
    for (const auto& t : preact[i].terms) z_minus_pre.add(t.index, -t.value);
    AffineRow zrow;
    zrow.add(zi, 1.0);
    qb.add_eq(product(zrow, z_minus_pre), "relu_comp");
    qb.add_geq(affine_expr(z_minus_pre), "relu_above");
    qb.add_geq(affine_expr(zrow), "relu_nonneg");
  }
}

/// ReLU subgradient s in dReLU(preact), per coordinate:
///   s (s - 1) <= 0,  s * preact >= 0,  (s - 1) * preact >= 0.
inline void add_relu_subgradient(QpBuilder& qb, int s_block,
                                 const std::vector<AffineRow>& preact) {
  const VarBlock& s = qb.block(s_block);
  if (static_cast<int>(preact.size()) != s.dim)
    throw std::invalid_argument("relu_subgradient: preactivation dimension mismatch");
  for (int i = 0; i < s.dim; ++i) {
    const int si = qb.var(s_block, i);
    AffineRow srow;
    srow.add(si, 1.0);
    AffineRow one_minus_s;
    one_minus_s.offset = 1.0;
    one_minus_s.add(si, -1.0);
    AffineRow s_minus_one;
    s_minus_one.offset = -1.0;
    s_minus_one.add(si, 1.0);
    qb.add_geq(product(srow, one_minus_s), "drelu_box");  // s(1 - s) >= 0
    qb.add_geq(product(srow, preact[i]), "drelu_pos");
    qb.add_geq(product(s_minus_one, preact[i]), "drelu_neg");
  }
}

/// Membership of the block x in B(center, eps, L_q); q in {1, 2, inf}.
/// For q = 1 an auxiliary absolute-value block "<name>_abs" is added and its
/// block index returned; otherwise returns -1.
inline int add_lq_ball(QpBuilder& qb, int x_block, const Eigen::VectorXd& center, double eps,
                       LqNorm q) {
  const VarBlock& x = qb.block(x_block);
  if (static_cast<int>(center.size()) != x.dim)
    throw std::invalid_argument("lq_ball: center dimension mismatch");
  if (eps <= 0) throw std::invalid_argument("lq_ball: radius must be positive");

  if (q.is_inf()) {
    for (int i = 0; i < x.dim; ++i) {
      QuadExpr e;  // eps^2 - (x_i - c_i)^2 >= 0
      e.constant = eps * eps - center[i] * center[i];
      e.add_lin(qb.var(x_block, i), 2.0 * center[i]);
      e.add_quad(qb.var(x_block, i), qb.var(x_block, i), -1.0);
      qb.add_geq(std::move(e), "ball_inf");
    }
    return -1;
  }
  if (q.q == 2) {
    QuadExpr e;  // eps^2 - ||x - c||^2 >= 0
    e.constant = eps * eps - center.squaredNorm();
    for (int i = 0; i < x.dim; ++i) {
      e.add_lin(qb.var(x_block, i), 2.0 * center[i]);
      e.add_quad(qb.var(x_block, i), qb.var(x_block, i), -1.0);
    }
    qb.add_geq(std::move(e), "ball_l2");
    return -1;
  }
  if (q.q == 1) {
    // Lifted: a_i >= +-(x_i - c_i), sum a_i <= eps.
    const int a_block = qb.add_block(x.name + "_abs", x.dim);
    QuadExpr sum;
    sum.constant = eps;
    for (int i = 0; i < x.dim; ++i) {
      const int ai = qb.var(a_block, i);
      const int xi = qb.var(x_block, i);
      QuadExpr upper;  // a_i - x_i + c_i >= 0
      upper.constant = center[i];
      upper.add_lin(ai, 1.0).add_lin(xi, -1.0);
      qb.add_geq(std::move(upper), "ball_l1_abs");
      QuadExpr lower;  // a_i + x_i - c_i >= 0
      lower.constant = -center[i];
      lower.add_lin(ai, 1.0).add_lin(xi, 1.0);
      qb.add_geq(std::move(lower), "ball_l1_abs");
      sum.add_lin(ai, -1.0);
    }
    qb.add_geq(std::move(sum), "ball_l1_sum");
    return a_block;
  }
  throw std::invalid_argument("unsupported norm index q = " + q.str() +
                              " for the quadratic pipeline (use 1, 2 or inf)");
}

}  // namespace mondeq
