#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mondeq/ellipsoid.hpp"
#include "mondeq/oracle.hpp"
#include "mondeq/robustness.hpp"
#include "mondeq/rng.hpp"
#include "mondeq/svg.hpp"

using namespace mondeq;

namespace {

/// Direct evaluation of f1 + ... + f5 + the slope-restriction combination
/// at a concrete (x, z); the independent side of the Gram identity.
double direct_poly_sum(const MonDeq& net, const PerturbationSpec& pert,
                       const Eigen::MatrixXd& q, const Eigen::VectorXd& b,
                       const MultiplierSet& mult, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& z) {
  const Eigen::VectorXd pre = net.W * z + net.U * x + net.u;
  double f1 = (q * (net.C * z + net.c) + b).squaredNorm() - 1.0;
  double f2 = 0;
  if (pert.norm.is_inf()) {
    for (int i = 0; i < x.size(); ++i)
      f2 += mult.sigma_ball[i] *
            (pert.eps * pert.eps - (x[i] - pert.center[i]) * (x[i] - pert.center[i]));
  } else {
    f2 = mult.sigma_ball[0] * (pert.eps * pert.eps - (x - pert.center).squaredNorm());
  }
  double f3 = 0, f4 = 0, f5 = 0;
  for (int i = 0; i < z.size(); ++i) {
    f3 += mult.tau[i] * z[i] * (z[i] - pre[i]);
    f4 += mult.sigma_affine[i] * (z[i] - pre[i]);
    f5 += mult.sigma_zpos[i] * z[i];
  }
  double f6 = 0;
  if (mult.lambda.size() > 0) {
    const int p = static_cast<int>(z.size());
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        const double zd = z[i] - z[j];
        const double pd = pre[i] - pre[j];
        f6 += 2.0 * mult.lambda[lambda_index(i, j, p)] * (zd * pd - zd * zd);
      }
  }
  return f1 + f2 + f3 + f4 + f5 + f6;
}

MultiplierSet random_multipliers(Rng& rng, int p0, int p, LqNorm qn, bool slope) {
  MultiplierSet m;
  m.sigma_ball = rng.uniform_vector(qn.is_inf() ? p0 : 1, 0.0, 2.0);
  m.sigma_affine = rng.uniform_vector(p, 0.0, 2.0);
  m.sigma_zpos = rng.uniform_vector(p, 0.0, 2.0);
  m.tau = rng.normal_vector(p);
  m.lambda = slope ? rng.uniform_vector(p * (p - 1) / 2, 0.0, 2.0).eval() : Eigen::VectorXd(0);
  return m;
}

Eigen::MatrixXd random_sym(Rng& rng, int k) {
  const Eigen::MatrixXd a = rng.normal_matrix(k, k);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("gram matrix with everything zero has only the -1 corner") {
  const MonDeq net = generate_network(2, 3, 2, 1.0, 1, 0.8);
  PerturbationSpec pert{Eigen::Vector2d(0.3, -0.2), 0.5, LqNorm::l2()};
  MultiplierSet mult;
  mult.sigma_ball = Eigen::VectorXd::Zero(1);
  mult.sigma_affine = Eigen::VectorXd::Zero(3);
  mult.sigma_zpos = Eigen::VectorXd::Zero(3);
  mult.tau = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd m = assemble_gram(net, pert, Eigen::MatrixXd::Zero(2, 2),
                                          Eigen::VectorXd::Zero(2), mult);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  expected(5, 5) = -1.0;
  REQUIRE((m - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram matrix is symmetric and matches direct polynomial evaluation") {
  Rng rng(97);
  for (int trial = 0; trial < 50; ++trial) {
    const int p0 = 2 + trial % 2, p = 3 + trial % 3, k = 2 + trial % 2;
    const LqNorm qn = trial % 2 ? LqNorm::l2() : LqNorm::linf();
    const bool slope = trial % 3 != 0;
    const MonDeq net = generate_network(p0, p, k, 1.0, 1000 + trial, 0.9);
    PerturbationSpec pert{rng.normal_vector(p0), rng.uniform(0.1, 1.0), qn};
    const Eigen::MatrixXd q = random_sym(rng, k);
    const Eigen::VectorXd b = rng.normal_vector(k);
    const MultiplierSet mult = random_multipliers(rng, p0, p, qn, slope);

    const Eigen::MatrixXd m = assemble_gram(net, pert, q, b, mult);
    REQUIRE((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    for (int e = 0; e < 20; ++e) {
      const Eigen::VectorXd x = rng.normal_vector(p0);
      const Eigen::VectorXd z = rng.normal_vector(p);
      Eigen::VectorXd basis(p0 + p + 1);
      basis << x, z, 1.0;
      const double via_gram = basis.dot(m * basis);
      const double direct = direct_poly_sum(net, pert, q, b, mult, x, z);
      REQUIRE(std::abs(via_gram - direct) < 1e-10 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("schur LMI is positive semidefinite exactly when -M is") {
  Rng rng(131);
  int agreements = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p0 = 2, p = 3, k = 2;
    const LqNorm qn = trial % 2 ? LqNorm::l2() : LqNorm::linf();
    const MonDeq net = generate_network(p0, p, k, 1.0, 2000 + trial, 0.8);
    PerturbationSpec pert{rng.normal_vector(p0), rng.uniform(0.2, 0.8), qn};
    Eigen::MatrixXd q;
    Eigen::VectorXd b;
    MultiplierSet mult;
    if (trial % 4 == 0) {
      // known-feasible corner: everything zero
      q = Eigen::MatrixXd::Zero(k, k);
      b = Eigen::VectorXd::Zero(k);
      mult.sigma_ball = Eigen::VectorXd::Zero(qn.is_inf() ? p0 : 1);
      mult.sigma_affine = Eigen::VectorXd::Zero(p);
      mult.sigma_zpos = Eigen::VectorXd::Zero(p);
      mult.tau = Eigen::VectorXd::Zero(p);
    } else {
      q = 0.3 * random_sym(rng, k);
      b = 0.3 * rng.normal_vector(k);
      mult = random_multipliers(rng, p0, p, qn, true);
      mult.sigma_ball *= 0.1;
      mult.sigma_affine *= 0.1;
      mult.sigma_zpos *= 0.1;
      mult.tau *= 0.1;
      mult.lambda *= 0.1;
    }
    const double m_min = -max_eig_symmetric(assemble_gram(net, pert, q, b, mult));
    const double lmi_min =
        -max_eig_symmetric(-schur_lmi(net, pert, q, b, mult));
    if (std::abs(m_min) < 1e-9 || std::abs(lmi_min) < 1e-9) continue;  // boundary, skip
    REQUIRE((m_min > 0) == (lmi_min > 0));
    ++agreements;
  }
  REQUIRE(agreements > 50);
}

TEST_CASE("sampled containment of F(E) in the computed ellipsoid") {
  Rng rng(177);
  for (int trial = 0; trial < 6; ++trial) {
    const LqNorm qn = trial % 2 ? LqNorm::l2() : LqNorm::linf();
    const MonDeq net = generate_network(2, 4, 2, 1.0, 3000 + trial, 0.8);
    PerturbationSpec pert{rng.normal_vector(2), rng.uniform(0.1, 0.5), qn};
    const auto res = min_volume_ellipsoid(net, pert);
    REQUIRE(solved(res.status));
    REQUIRE(res.gram_side == model_sizes(ModelKind::kEllipsoid, 2, 4, 2).max_psd_side);
    for (int s = 0; s < 2000; ++s) {
      const Eigen::VectorXd x = rng.ball_point(pert.center, pert.eps, qn.q == 2);
      const Eigen::VectorXd fx = forward(net, x);
      REQUIRE(res.ell.norm_at(fx) <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("oversized fixed ellipsoid certificates are infeasible") {
  Rng rng(211);
  const MonDeq net = generate_network(2, 3, 2, 1.0, 555, 0.8);
  PerturbationSpec pert{rng.normal_vector(2), 0.4, LqNorm::l2()};
  const auto good = min_volume_ellipsoid(net, pert);
  REQUIRE(solved(good.status));
  REQUIRE(solved(certificate_feasible(net, pert, good.ell)));

  // Scaling Q up shrinks the ellipsoid until some output escapes.
  Ellipsoid tight{8.0 * good.ell.Q, 8.0 * good.ell.b};
  bool violated = false;
  for (int s = 0; s < 2000 && !violated; ++s) {
    const Eigen::VectorXd x = rng.ball_point(pert.center, pert.eps, true);
    violated = !tight.contains(forward(net, x), 1e-9);
  }
  REQUIRE(violated);
  REQUIRE(certificate_feasible(net, pert, tight) == SolveStatus::kInfeasible);
}

TEST_CASE("affine-only net: ellipsoid volume close to the exact image") {
  // With W = 0 and a large bias the ReLU is affine on E, so F(E) is an
  // exact ellipsoid. With an identity readout and orthogonal input rows
  // the order-1 certificate admits the exact ellipsoid as a feasible
  // point, so the solved volume must land within 10% of it.
  MonDeq net;
  const int p0 = 2, p = 2, k = 2;
  net.W = Eigen::MatrixXd::Zero(p, p);
  net.U.resize(p, p0);
  net.U << 1.5 * 0.8, 1.5 * 0.6, -0.7 * 0.6, 0.7 * 0.8;  // diag(1.5, 0.7) * rotation
  net.u = Eigen::VectorXd::Constant(p, 25.0);
  net.C = Eigen::MatrixXd::Identity(k, p);
  net.c = Eigen::VectorXd(k);
  net.c << 0.4, -0.2;
  net.m = 1.0;
  PerturbationSpec pert{Eigen::Vector2d(0.1, -0.3), 0.5, LqNorm::l2()};

  const auto res = min_volume_ellipsoid(net, pert);
  REQUIRE(solved(res.status));
  const Eigen::MatrixXd a = net.C * net.U;  // image radius matrix eps * A
  const double exact_log_vol = std::log((pert.eps * pert.eps * a * a.transpose()).determinant()) / 2.0;
  const double got_log_vol = -res.log_det;  // log vol ratio to the unit ball
  INFO("exact log-vol " << exact_log_vol << " computed " << got_log_vol);
  REQUIRE(got_log_vol >= exact_log_vol - 1e-6);  // cannot be smaller than the image
  REQUIRE(got_log_vol <= exact_log_vol + std::log(1.10));
}

TEST_CASE("label gap closed forms") {
  {
    Ellipsoid e{Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    REQUIRE(ellipsoid_label_gap(e, 0, 1) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  }
  {
    Ellipsoid e{Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.0, -10.0)};
    REQUIRE(ellipsoid_label_gap(e, 0, 1) == Catch::Approx(10.0 + std::sqrt(2.0)).margin(1e-12));
  }
  {
    Ellipsoid e{2.0 * Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    REQUIRE(ellipsoid_label_gap(e, 0, 1) == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-12));
  }
  Ellipsoid singular{Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero()};
  REQUIRE_THROWS(ellipsoid_label_gap(singular, 0, 1));
}

TEST_CASE("certification agrees with the robustness model on easy instances") {
  const MonDeq net = generate_network(2, 4, 2, 1.0, 777, 0.6);
  const Eigen::Vector2d x0(0.4, -0.1);
  for (double eps : {0.01, 2.0}) {
    PerturbationSpec pert{x0, eps, LqNorm::l2()};
    const auto ecert = certify_via_ellipsoid(net, pert);
    const auto rcert = certify_robustness(net, pert);
    if (ecert.certified) {
      // ellipsoid certificates are sound: the exact oracle must agree
      for (int i = 0; i < 2; ++i) {
        if (i == ecert.y0) continue;
        REQUIRE(exact_gap(net, pert, ecert.y0, i) < 0.0);
      }
    }
    // the direct gap model is at least as tight as the ellipsoid route
    if (ecert.certified) REQUIRE(rcert.certified);
  }
}

TEST_CASE("K = 1 ellipsoid is an interval containing the scalar range") {
  MonDeq net = generate_network(2, 3, 1, 1.0, 31, 0.8);
  PerturbationSpec pert{Eigen::Vector2d(0.2, 0.1), 0.4, LqNorm::l2()};
  const auto res = min_volume_ellipsoid(net, pert);
  REQUIRE(solved(res.status));
  // interval [lo, hi] from ||q xi + b|| <= 1
  const double q = res.ell.Q(0, 0), b = res.ell.b[0];
  REQUIRE(q > 0);
  const double lo = (-b - 1.0) / q, hi = (-b + 1.0) / q;

  // scalar range of F over E via +-objective robustness-style solves
  Rng rng(5);
  double smin = 1e100, smax = -1e100;
  for (int s = 0; s < 3000; ++s) {
    const double v = forward(net, rng.ball_point(pert.center, pert.eps, true))[0];
    smin = std::min(smin, v);
    smax = std::max(smax, v);
  }
  REQUIRE(lo <= smin + 1e-6);
  REQUIRE(hi >= smax - 1e-6);
}

TEST_CASE("projection closed forms and figure output") {
  {
    Ellipsoid e{Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    const auto pe = project_ellipsoid(e, 0, 1);
    REQUIRE(pe.shape.isApprox(Eigen::Matrix2d::Identity(), 1e-12));
    REQUIRE(pe.center.norm() < 1e-12);
  }
  {
    Eigen::Matrix3d q = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
    Ellipsoid e{q, Eigen::Vector3d::Zero()};
    const auto pe = project_ellipsoid(e, 0, 1);
    // axis-aligned: semi-axes 1 and 1/2 on coordinates (0, 1)
    REQUIRE(pe.shape(0, 0) == Catch::Approx(1.0));
    REQUIRE(pe.shape(1, 1) == Catch::Approx(4.0));
    REQUIRE(std::abs(pe.shape(0, 1)) < 1e-12);
  }
  // figure: samples must fall inside the drawn ellipse for a valid run
  Rng rng(303);
  const MonDeq net = generate_network(2, 3, 2, 1.0, 99, 0.7);
  PerturbationSpec pert{Eigen::Vector2d::Zero(), 0.3, LqNorm::l2()};
  const auto res = min_volume_ellipsoid(net, pert);
  REQUIRE(solved(res.status));
  std::vector<Eigen::Vector2d> pts;
  const auto pe = project_ellipsoid(res.ell, 0, 1);
  for (int s = 0; s < 200; ++s) {
    const Eigen::VectorXd fx = forward(net, rng.ball_point(pert.center, pert.eps, true));
    pts.push_back(Eigen::Vector2d(fx[0], fx[1]));
    const Eigen::Vector2d d = pts.back() - pe.center;
    REQUIRE(d.dot(pe.shape * d) <= 1.0 + 1e-5);
  }
  const auto path = std::filesystem::temp_directory_path() / "mondeq_proj.svg";
  write_projection_svg(path, pe, pts, 0, 1);
  REQUIRE(std::filesystem::file_size(path) > 500);
  std::filesystem::remove(path);
}
