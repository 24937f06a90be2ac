#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace mondeq {

/// Largest singular value by power iteration on A'A, relative tolerance 1e-10.
inline double spectral_norm(const Eigen::MatrixXd& a, double rel_tol = 1e-10,
                            int max_iter = 20000) {
  if (a.size() == 0 || a.isZero(0)) return 0.0;
  const Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(ata.rows());
  // Deterministic tie-breaker so the start vector is never orthogonal
  // to the dominant eigenspace in structured cases.
  for (int i = 0; i < v.size(); ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = ata * v;
    double next = v.dot(w);
    double nrm = w.norm();
    if (nrm == 0) return 0.0;
    v = w / nrm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(0.0, lambda));
}

/// Operator norm for the sup norm: maximum absolute row sum.
inline double max_abs_row_sum(const Eigen::MatrixXd& a) {
  double best = 0;
  for (int i = 0; i < a.rows(); ++i) best = std::max(best, a.row(i).cwiseAbs().sum());
  return best;
}

/// Smallest eigenvalue of the symmetric part of A.
inline double min_eig_symmetric_part(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return es.eigenvalues().minCoeff();
}

inline double max_eig_symmetric(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

}  // namespace mondeq
