#pragma once

#include <nlohmann/json.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "mondeq/linalg.hpp"
#include "mondeq/rng.hpp"
#include "mondeq/types.hpp"

namespace mondeq {

inline constexpr double kDefaultMonoTol = 1e-8;

/// Dataset normalization carried alongside a network; the effective
/// perturbation radius is eps / sigma.
struct NormalizationSpec {
  double mu = 0;
  double sigma = 1;
};

/// Single-implicit-layer monotone equilibrium network
///   z = ReLU(W z + U x + u),  F(x) = C z + c,
/// with I - W >= m I (strong monotonicity margin m > 0).
struct MonDeq {
  Eigen::MatrixXd W;  // p x p
  Eigen::MatrixXd U;  // p x p0
  Eigen::VectorXd u;  // p
  Eigen::MatrixXd C;  // K x p
  Eigen::VectorXd c;  // K
  double m = 0;
  std::optional<NormalizationSpec> normalization;

  int input_dim() const { return static_cast<int>(U.cols()); }
  int hidden_dim() const { return static_cast<int>(W.rows()); }
  int num_labels() const { return static_cast<int>(C.rows()); }
};

struct MonotoneCheck {
  double lambda_min = 0;
  bool ok = false;
};

inline void check_shapes(const MonDeq& net) {
  const int p = net.hidden_dim();
  const int p0 = net.input_dim();
  const int k = net.num_labels();
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("network dimension mismatch: " + what);
  };
  if (p < 1 || p0 < 1 || k < 1) fail("p0, p, K must all be >= 1");
  if (net.W.cols() != p) fail("W must be square p x p");
  if (net.U.rows() != p) fail("U must be p x p0");
  if (net.u.size() != p) fail("u must have length p");
  if (net.C.cols() != p) fail("C must be K x p");
  if (net.c.size() != k) fail("c must have length K");
  if (net.m <= 0) throw std::invalid_argument("monotonicity margin m must be positive");
  if (net.normalization && net.normalization->sigma <= 0)
    throw std::invalid_argument("normalization sigma must be positive");
}

/// Smallest eigenvalue of sym(I - W) against the declared margin m.
inline MonotoneCheck validate_monotone(const MonDeq& net, double tol_mono = kDefaultMonoTol) {
  const int p = net.hidden_dim();
  Eigen::MatrixXd iw = Eigen::MatrixXd::Identity(p, p) - net.W;
  MonotoneCheck out;
  out.lambda_min = min_eig_symmetric_part(iw);
  out.ok = out.lambda_min >= net.m - tol_mono;
  return out;
}

inline void validate(const MonDeq& net, double tol_mono = kDefaultMonoTol) {
  check_shapes(net);
  const MonotoneCheck chk = validate_monotone(net, tol_mono);
  if (!chk.ok) {
    std::ostringstream msg;
    msg << "monotonicity violation: lambda_min(sym(I - W)) = " << chk.lambda_min
        << " < m = " << net.m;
    throw std::invalid_argument(msg.str());
  }
}

namespace detail {

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& a) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int i = 0; i < a.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols,
                                        const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw std::runtime_error("field '" + name + "' must be a " + std::to_string(rows) +
                             "-row array");
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw std::runtime_error("row " + std::to_string(i) + " of '" + name + "' must have " +
                               std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) a(i, c) = row.at(c).get<double>();
  }
  return a;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, int n, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw std::runtime_error("field '" + name + "' must be an array of length " +
                             std::to_string(n));
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const MonDeq& net) {
  nlohmann::ordered_json j;
  j["p0"] = net.input_dim();
  j["p"] = net.hidden_dim();
  j["K"] = net.num_labels();
  j["m"] = net.m;
  j["W"] = detail::matrix_json(net.W);
  j["U"] = detail::matrix_json(net.U);
  j["u"] = detail::vector_json(net.u);
  j["C"] = detail::matrix_json(net.C);
  j["c"] = detail::vector_json(net.c);
  if (net.normalization) {
    j["normalization"] = {{"mu", net.normalization->mu}, {"sigma", net.normalization->sigma}};
  }
  return j;
}

inline MonDeq network_from_json(const nlohmann::json& j) {
  MonDeq net;
  int p0, p, k;
  try {
    p0 = j.at("p0").get<int>();
    p = j.at("p").get<int>();
    k = j.at("K").get<int>();
    net.m = j.at("m").get<double>();
    net.W = detail::matrix_from_json(j.at("W"), p, p, "W");
    net.U = detail::matrix_from_json(j.at("U"), p, p0, "U");
    net.u = detail::vector_from_json(j.at("u"), p, "u");
    net.C = detail::matrix_from_json(j.at("C"), k, p, "C");
    net.c = detail::vector_from_json(j.at("c"), k, "c");
    if (j.contains("normalization")) {
      NormalizationSpec ns;
      ns.mu = j.at("normalization").at("mu").get<double>();
      ns.sigma = j.at("normalization").at("sigma").get<double>();
      net.normalization = ns;
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("network parse error: ") + e.what());
  }
  validate(net);
  return net;
}

inline MonDeq load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("network parse error in " + path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

inline void save_network(const MonDeq& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network file: " + path.string());
  out << to_json(net).dump(1) << "\n";
}

/// Random network satisfying I - W >= m I exactly by construction:
///   W = (1 - m) I - A'A + B - B'   with A, B ~ N(0, scale^2 / p),
/// so sym(I - W) = m I + A'A >= m I. Deterministic in the seed.
inline MonDeq generate_network(int p0, int p, int k, double m, std::uint64_t seed,
                               double scale = 1.0) {
  if (p0 < 1 || p < 1 || k < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (m <= 0) throw std::invalid_argument("monotonicity margin m must be positive");
  if (scale <= 0) throw std::invalid_argument("scale must be positive");
  Rng rng(seed);
  const double sw = scale / std::sqrt(static_cast<double>(p));
  Eigen::MatrixXd a = sw * rng.normal_matrix(p, p);
  Eigen::MatrixXd b = sw * rng.normal_matrix(p, p);
  MonDeq net;
  net.W = (1.0 - m) * Eigen::MatrixXd::Identity(p, p) - a.transpose() * a + b - b.transpose();
  net.U = (scale / std::sqrt(static_cast<double>(p0))) * rng.normal_matrix(p, p0);
  net.u = scale * rng.normal_vector(p);
  net.C = (scale / std::sqrt(static_cast<double>(p))) * rng.normal_matrix(k, p);
  net.c = scale * rng.normal_vector(k);
  net.m = m;
  check_shapes(net);
  return net;
}

}  // namespace mondeq
