#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>
#include <string>

namespace mondeq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Slack below zero a certification bound must clear; guards against
/// solver tolerance turning a numerically-zero bound into a certificate.
inline constexpr double kDefaultCertMargin = 1e-6;

/// L_q norm index, q >= 1 or infinity.
struct LqNorm {
  static constexpr int kInf = std::numeric_limits<int>::max();

  int q = 2;

  static LqNorm l1() { return {1}; }
  static LqNorm l2() { return {2}; }
  static LqNorm linf() { return {kInf}; }

  bool is_inf() const { return q == kInf; }

  double eval(const VectorXd& v) const {
    if (is_inf()) return v.lpNorm<Eigen::Infinity>();
    if (q == 1) return v.lpNorm<1>();
    if (q == 2) return v.norm();
    double s = 0;
    for (int i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), q);
    return std::pow(s, 1.0 / q);
  }

  std::string str() const { return is_inf() ? "inf" : std::to_string(q); }

  static LqNorm parse(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF") return linf();
    int v = std::stoi(s);
    if (v < 1) throw std::invalid_argument("norm index must be >= 1, got " + s);
    return {v};
  }

  bool operator==(const LqNorm& o) const { return q == o.q; }
};

/// Input region: the L_q ball B(center, eps).
struct PerturbationSpec {
  VectorXd center;
  double eps = 0;
  LqNorm norm;
};

inline void validate(const PerturbationSpec& pert) {
  if (pert.eps <= 0) throw std::invalid_argument("perturbation radius must be positive");
  if (!pert.norm.is_inf() && pert.norm.q < 1)
    throw std::invalid_argument("norm index must be >= 1");
}

}  // namespace mondeq
