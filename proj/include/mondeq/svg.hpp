#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "mondeq/ellipsoid.hpp"

namespace mondeq {

namespace detail {

struct SvgCanvas {
  double xmin, xmax, ymin, ymax;
  double width = 640, height = 640, margin = 48;

  double sx(double x) const {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  }
  double sy(double y) const {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  }
};

}  // namespace detail

/// Projection figure: the shadow ellipse on (label y0, label i), the sampled
/// output scatter and the decision threshold xi_a = xi_b.
inline void write_projection_svg(const std::filesystem::path& path, const ProjectedEllipse& pe,
                                 const std::vector<Eigen::Vector2d>& samples, int label_a,
                                 int label_b) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(pe.shape);
  if (es.info() != Eigen::Success) throw std::runtime_error("ellipse eigensolver failed");
  const double ax1 = 1.0 / std::sqrt(std::max(es.eigenvalues()[0], 1e-300));
  const double ax2 = 1.0 / std::sqrt(std::max(es.eigenvalues()[1], 1e-300));
  const Eigen::Vector2d dir = es.eigenvectors().col(0);
  const double angle_deg = std::atan2(dir[1], dir[0]) * 180.0 / M_PI;

  detail::SvgCanvas cv{pe.center[0], pe.center[0], pe.center[1], pe.center[1]};
  const double reach = std::max(ax1, ax2);
  cv.xmin = pe.center[0] - reach;
  cv.xmax = pe.center[0] + reach;
  cv.ymin = pe.center[1] - reach;
  cv.ymax = pe.center[1] + reach;
  for (const auto& s : samples) {
    cv.xmin = std::min(cv.xmin, s[0]);
    cv.xmax = std::max(cv.xmax, s[0]);
    cv.ymin = std::min(cv.ymin, s[1]);
    cv.ymax = std::max(cv.ymax, s[1]);
  }
  const double padx = 0.08 * (cv.xmax - cv.xmin + 1e-9);
  const double pady = 0.08 * (cv.ymax - cv.ymin + 1e-9);
  cv.xmin -= padx;
  cv.xmax += padx;
  cv.ymin -= pady;
  cv.ymax += pady;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cv.width << "\" height=\""
      << cv.height << "\" viewBox=\"0 0 " << cv.width << " " << cv.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // threshold line xi_a = xi_b, clipped to the view box
  {
    const double lo = std::max(cv.xmin, cv.ymin), hi = std::min(cv.xmax, cv.ymax);
    if (hi > lo)
      svg << "<line x1=\"" << cv.sx(lo) << "\" y1=\"" << cv.sy(lo) << "\" x2=\"" << cv.sx(hi)
          << "\" y2=\"" << cv.sy(hi)
          << "\" stroke=\"#1f4e9c\" stroke-dasharray=\"8 6\" stroke-width=\"1.5\"/>\n";
  }

  for (const auto& s : samples)
    svg << "<circle cx=\"" << cv.sx(s[0]) << "\" cy=\"" << cv.sy(s[1])
        << "\" r=\"2\" fill=\"#c23b3b\" fill-opacity=\"0.55\"/>\n";

  const double rx = ax1 / (cv.xmax - cv.xmin) * (cv.width - 2 * cv.margin);
  const double ry = ax2 / (cv.ymax - cv.ymin) * (cv.height - 2 * cv.margin);
  svg << "<g transform=\"translate(" << cv.sx(pe.center[0]) << "," << cv.sy(pe.center[1])
      << ") rotate(" << -angle_deg << ")\">"
      << "<ellipse rx=\"" << rx << "\" ry=\"" << ry
      << "\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/></g>\n";

  svg << "<text x=\"" << cv.width / 2 << "\" y=\"" << cv.height - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">label " << label_a << "</text>\n";
  svg << "<text x=\"16\" y=\"" << cv.height / 2 << "\" font-size=\"14\" transform=\"rotate(-90 16 "
      << cv.height / 2 << ")\" text-anchor=\"middle\">label " << label_b << "</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write figure: " + path.string());
  out << svg.str();
}

/// Greyscale grid rendering of an input vector (square when p0 is a
/// perfect square, one row otherwise); values mapped through the optional
/// normalization back to [0, 1].
inline void write_image_grid_svg(const std::filesystem::path& path, const Eigen::VectorXd& v,
                                 const NormalizationSpec* norm = nullptr, int cell = 8) {
  const int n = static_cast<int>(v.size());
  int side = static_cast<int>(std::round(std::sqrt(static_cast<double>(n))));
  if (side * side != n) side = 0;
  const int cols = side > 0 ? side : n;
  const int rows = side > 0 ? side : 1;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell << "\" height=\""
      << rows * cell << "\">\n";
  for (int i = 0; i < n; ++i) {
    double value = v[i];
    if (norm) value = value * norm->sigma + norm->mu;
    value = std::clamp(value, 0.0, 1.0);
    const int grey = static_cast<int>(std::lround(255.0 * value));
    svg << "<rect x=\"" << (i % cols) * cell << "\" y=\"" << (i / cols) * cell << "\" width=\""
        << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << grey << "," << grey << ","
        << grey << ")\"/>\n";
  }
  svg << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write figure: " + path.string());
  out << svg.str();
}

}  // namespace mondeq
