#include <catch2/catch_amalgamated.hpp>

#include "mondeq/equilibrium.hpp"
#include "mondeq/rng.hpp"

using namespace mondeq;

namespace {

MonDeq identity_net(int n) {
  MonDeq net;
  net.W = Eigen::MatrixXd::Zero(n, n);
  net.U = Eigen::MatrixXd::Identity(n, n);
  net.u = Eigen::VectorXd::Zero(n);
  net.C = Eigen::MatrixXd::Identity(n, n);
  net.c = Eigen::VectorXd::Zero(n);
  net.m = 1.0;
  return net;
}

MonDeq scalar_net() {
  MonDeq net;
  net.W = Eigen::MatrixXd::Constant(1, 1, 0.5);
  net.U = Eigen::MatrixXd::Ones(1, 1);
  net.u = Eigen::VectorXd::Zero(1);
  net.C = Eigen::MatrixXd::Constant(1, 1, 3.0);
  net.c = Eigen::VectorXd::Constant(1, -1.0);
  net.m = 0.5;
  return net;
}

}  // namespace

TEST_CASE("ReLU of affine map converges immediately") {
  const MonDeq net = identity_net(2);
  const auto res = solve_equilibrium(net, Eigen::Vector2d(1.0, -2.0));
  REQUIRE(res.converged);
  REQUIRE(res.z.isApprox(Eigen::Vector2d(1.0, 0.0)));
  REQUIRE(res.iterations <= 2);
}

TEST_CASE("scalar fixed point z = ReLU(0.5 z + 1)") {
  const MonDeq net = scalar_net();
  const auto res = solve_equilibrium(net, Eigen::VectorXd::Ones(1));
  REQUIRE(res.converged);
  REQUIRE(res.z[0] == Catch::Approx(2.0).margin(1e-9));
  REQUIRE(forward(net, Eigen::VectorXd::Ones(1))[0] == Catch::Approx(5.0).margin(1e-8));
}

TEST_CASE("forward output has K entries") {
  const MonDeq net = generate_network(3, 5, 4, 1.0, 11, 0.8);
  REQUIRE(forward(net, Eigen::VectorXd::Zero(3)).size() == 4);
}

TEST_CASE("prediction with tie goes to the lowest index") {
  MonDeq net = identity_net(2);
  REQUIRE(predict(net, Eigen::Vector2d(0.1, 0.9)) == 1);
  REQUIRE(predict(net, Eigen::Vector2d(0.5, 0.5)) == 0);
  const MonDeq s = scalar_net();
  REQUIRE(predict(s, Eigen::VectorXd::Ones(1)) == 0);
}

TEST_CASE("equilibrium is initialization independent") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const MonDeq net = generate_network(3, 6, 2, 0.8, 100 + trial, 0.9);
    const Eigen::VectorXd x = rng.normal_vector(3);
    FixpointOptions opts;
    const auto base = solve_equilibrium(net, x, opts);
    REQUIRE(base.converged);
    for (int init = 0; init < 10; ++init) {
      Eigen::VectorXd z0 = 5.0 * rng.normal_vector(6);
      const auto other = solve_equilibrium(net, x, opts, &z0);
      REQUIRE(other.converged);
      REQUIRE((base.z - other.z).lpNorm<Eigen::Infinity>() <= 10 * opts.tol);
    }
  }
}

TEST_CASE("implicit Jacobian on closed-form cases") {
  const MonDeq net = identity_net(2);
  const Eigen::MatrixXd j = implicit_jacobian(net, Eigen::Vector2d(1.0, -2.0));
  REQUIRE(j.isApprox(Eigen::Vector2d(1.0, 0.0).asDiagonal().toDenseMatrix(), 1e-9));

  MonDeq s = scalar_net();
  s.c = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd js = implicit_jacobian(s, Eigen::VectorXd::Ones(1));
  REQUIRE(js(0, 0) == Catch::Approx(6.0).margin(1e-8));
}

TEST_CASE("implicit Jacobian matches finite differences away from kinks") {
  Rng rng(23);
  FixpointOptions tight;
  tight.tol = 1e-13;
  tight.max_iter = 20000;
  int tested = 0;
  while (tested < 25) {
    const MonDeq net = generate_network(3, 5, 2, 1.0, rng.uniform_int(0, 1 << 20), 0.8);
    const Eigen::VectorXd x = rng.normal_vector(3);
    const auto eq = solve_equilibrium(net, x, tight);
    if (!eq.converged) continue;
    const Eigen::VectorXd pre = preactivation(net, eq.z, x);
    if (pre.cwiseAbs().minCoeff() < 1e-2) continue;  // stay away from kinks
    ++tested;
    const Eigen::MatrixXd j = implicit_jacobian(net, x, tight);
    const double h = 1e-4;
    for (int col = 0; col < 3; ++col) {
      Eigen::VectorXd xp = x, xm = x;
      xp[col] += h;
      xm[col] -= h;
      const Eigen::VectorXd fd = (forward(net, xp, tight) - forward(net, xm, tight)) / (2 * h);
      for (int row = 0; row < j.rows(); ++row) {
        const double scale = std::max(1.0, std::abs(j(row, col)));
        REQUIRE(std::abs(fd[row] - j(row, col)) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("global Lipschitz sanity bound") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const MonDeq net = generate_network(3, 4, 2, 1.0, 500 + trial, 0.7);
    const double bound = spectral_norm(net.U) / net.m * spectral_norm(net.C);
    for (int pair = 0; pair < 20; ++pair) {
      const Eigen::VectorXd x = rng.normal_vector(3), y = rng.normal_vector(3);
      const double lhs = (forward(net, x) - forward(net, y)).norm();
      REQUIRE(lhs <= bound * (x - y).norm() + 1e-7);
    }
  }
}

TEST_CASE("non-convergence is reported, not thrown, by solve_equilibrium") {
  const MonDeq net = scalar_net();  // fixed point z = 2, far from the zero start
  FixpointOptions opts;
  opts.max_iter = 1;
  const auto res = solve_equilibrium(net, Eigen::VectorXd::Ones(1), opts);
  REQUIRE_FALSE(res.converged);
  REQUIRE_THROWS(forward(net, Eigen::VectorXd::Ones(1), opts));
}
