// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// Text checkpoints for ToyModelParams:
//
//   {"format": "warden-toy-model", "version": 1,
//    "vocab_size": V, "embed_dim": d,
//    "embed": [V*d numbers, row-major], "out": [d*V numbers, row-major]}
//
// Numbers are written with 17 significant digits so a read-back is exact.

#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "warden/toy_model.hpp"

namespace warden {

inline constexpr const char* kCheckpointFormat = "warden-toy-model";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string format_g17(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  if (ec != std::errc{}) throw std::runtime_error("format_g17: conversion failed");
  return std::string(buf, end);
}

inline void write_row_major(std::ostream& os, const Matrix& m) {
  os << '[';
  bool first = true;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!first) os << ',';
      first = false;
      os << format_g17(m(r, c));
    }
  }
  os << ']';
}

inline Matrix read_row_major(const nlohmann::json& arr, std::size_t rows, std::size_t cols,
                             const char* field) {
  if (!arr.is_array() || arr.size() != rows * cols) {
    throw std::runtime_error(std::string("checkpoint: field '") + field + "' must hold " +
                             std::to_string(rows * cols) + " numbers");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t k = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = arr[k++].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ToyModelParams& params) {
  params.validate();
  os << "{\"format\":\"" << kCheckpointFormat << "\",\"version\":" << kCheckpointVersion
     << ",\"vocab_size\":" << params.vocab_size() << ",\"embed_dim\":" << params.embed_dim()
     << ",\n\"embed\":";
  detail::write_row_major(os, params.embed);
  os << ",\n\"out\":";
  detail::write_row_major(os, params.out);
  os << "}\n";
}

inline ToyModelParams read_checkpoint(std::istream& is) {
  const nlohmann::json doc = nlohmann::json::parse(is);
  if (doc.value("format", std::string{}) != kCheckpointFormat) {
    throw std::runtime_error("checkpoint: not a warden-toy-model document");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  const auto v = doc.at("vocab_size").get<std::size_t>();
  const auto d = doc.at("embed_dim").get<std::size_t>();
  ToyModelParams p{detail::read_row_major(doc.at("embed"), v, d, "embed"),
                   detail::read_row_major(doc.at("out"), d, v, "out")};
  p.validate();
  return p;
}

inline void save_checkpoint(const std::string& path, const ToyModelParams& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(os, params);
}

inline ToyModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace warden
