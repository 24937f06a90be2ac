#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace mondeq {

/// Seeded generator with explicit transforms so that streams are
/// bit-identical across standard library implementations
/// (std::normal_distribution is not pinned by the standard).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(int rows, int cols) {
    Eigen::MatrixXd a(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a(i, j) = normal();
    return a;
  }

  Eigen::VectorXd uniform_vector(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  /// Uniform point in the L_q ball of given radius around center.
  Eigen::VectorXd ball_point(const Eigen::VectorXd& center, double radius, bool l2) {
    const int n = static_cast<int>(center.size());
    if (!l2) return center + uniform_vector(n, -radius, radius);
    // Direction times a radius with the correct volumetric density.
    Eigen::VectorXd dir = normal_vector(n);
    double nrm = dir.norm();
    if (nrm == 0) return center;
    double r = radius * std::pow(uniform(), 1.0 / n);
    return center + (r / nrm) * dir;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace mondeq
