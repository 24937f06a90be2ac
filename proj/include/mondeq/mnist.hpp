#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mondeq/net.hpp"

namespace mondeq {

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated IDX file");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

/// Raw ubyte images from an IDX3 file, one vector per image, values 0..255.
inline std::vector<Eigen::VectorXd> read_idx_images(const std::filesystem::path& path,
                                                    int max_count = -1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file: " + path.string());
  if (detail::read_be32(in) != 2051u)
    throw std::runtime_error("not an IDX3 image file: " + path.string());
  const std::uint32_t count = detail::read_be32(in);
  const std::uint32_t rows = detail::read_be32(in);
  const std::uint32_t cols = detail::read_be32(in);
  const std::uint32_t take =
      max_count >= 0 ? std::min<std::uint32_t>(count, static_cast<std::uint32_t>(max_count))
                     : count;
  std::vector<Eigen::VectorXd> out;
  out.reserve(take);
  std::vector<unsigned char> buf(rows * cols);
  for (std::uint32_t i = 0; i < take; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("truncated IDX image data");
    Eigen::VectorXd v(rows * cols);
    for (size_t j = 0; j < buf.size(); ++j) v[static_cast<long>(j)] = buf[j];
    out.push_back(std::move(v));
  }
  return out;
}

/// Labels from an IDX1 file.
inline std::vector<int> read_idx_labels(const std::filesystem::path& path, int max_count = -1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file: " + path.string());
  if (detail::read_be32(in) != 2049u)
    throw std::runtime_error("not an IDX1 label file: " + path.string());
  const std::uint32_t count = detail::read_be32(in);
  const std::uint32_t take =
      max_count >= 0 ? std::min<std::uint32_t>(count, static_cast<std::uint32_t>(max_count))
                     : count;
  std::vector<int> out(take);
  for (std::uint32_t i = 0; i < take; ++i) {
    char c;
    in.read(&c, 1);
    if (!in) throw std::runtime_error("truncated IDX label data");
    out[i] = static_cast<unsigned char>(c);
  }
  return out;
}

/// Pixel preprocessing (v / 255 - mu) / sigma.
inline Eigen::VectorXd normalize_pixels(const Eigen::VectorXd& raw, const NormalizationSpec& ns) {
  return ((raw / 255.0).array() - ns.mu) / ns.sigma;
}

}  // namespace mondeq
