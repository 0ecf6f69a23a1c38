#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "invr/errors.hpp"
#include "invr/linops.hpp"

namespace invr {

static_assert(std::endian::native == std::endian::little,
              "the raw binary container is little-endian");

// Raw binary container: 16-byte header (magic "INVR", u32 rank,
// u32 dims[2]; dims[1] = 1 for vectors), then rank-major float64 payload.
inline constexpr char kTensorMagic[4] = {'I', 'N', 'V', 'R'};

inline void write_tensor(const std::filesystem::path& path, const MatrixXd& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("write_tensor: cannot open " + path.string());
  const std::uint32_t rank = data.cols() == 1 ? 1 : 2;
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(data.rows()),
                                 static_cast<std::uint32_t>(data.cols())};
  out.write(kTensorMagic, 4);
  out.write(reinterpret_cast<const char*>(&rank), 4);
  out.write(reinterpret_cast<const char*>(dims), 8);
  // row-major payload so the file layout is independent of Eigen's default
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j) {
      const double v = data(i, j);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!out) throw io_error("write_tensor: write failed for " + path.string());
}

inline void write_tensor(const std::filesystem::path& path, const VectorXd& data) {
  write_tensor(path, MatrixXd(data));
}

inline MatrixXd read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("read_tensor: cannot open " + path.string());
  char magic[4];
  std::uint32_t rank = 0, dims[2] = {0, 0};
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rank), 4);
  in.read(reinterpret_cast<char*>(dims), 8);
  if (!in || std::string(magic, 4) != std::string(kTensorMagic, 4))
    throw io_error("read_tensor: bad header in " + path.string());
  if (rank != 1 && rank != 2) throw io_error("read_tensor: unsupported rank");
  MatrixXd data(dims[0], rank == 1 ? 1 : dims[1]);
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      data(i, j) = v;
    }
  if (!in) throw io_error("read_tensor: truncated payload in " + path.string());
  return data;
}

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double parsed = 0.0;
  std::sscanf(buf, "%lf", &parsed);
  if (parsed == v) {
    char shorter[32];
    for (int prec = 1; prec < 17; ++prec) {
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &parsed);
      if (parsed == v) return shorter;
    }
  }
  return buf;
}

/// One vector per row, comma-separated, full precision.
inline void write_csv_vectors(const std::filesystem::path& path,
                              const std::vector<VectorXd>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("write_csv_vectors: cannot open " + path.string());
  for (const auto& row : rows) {
    for (Index i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << format_double(row(i));
    }
    out << '\n';
  }
  if (!out) throw io_error("write_csv_vectors: write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw io_error("write_text: cannot open " + path.string());
  out << text;
  if (!out) throw io_error("write_text: write failed for " + path.string());
}

inline nlohmann::json filter_to_json(const SpectralFilter& filter) {
  nlohmann::json j;
  j["kind"] = filter.kind_name();
  switch (filter.kind) {
    case SpectralFilter::Kind::truncated_svd:
      j["parameters"] = {filter.threshold};
      break;
    case SpectralFilter::Kind::tikhonov:
      j["parameters"] = {filter.alpha};
      break;
    case SpectralFilter::Kind::per_index:
    case SpectralFilter::Kind::custom_table: {
      std::vector<double> table(filter.table.data(), filter.table.data() + filter.table.size());
      j["parameters"] = table;
      break;
    }
  }
  return j;
}

inline SpectralFilter filter_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (kind == "truncated-svd")
    return SpectralFilter::truncated(params.empty() ? 0.0 : params[0]);
  if (kind == "tikhonov-filter") {
    if (params.empty()) throw io_error("filter_from_json: tikhonov-filter needs alpha");
    return SpectralFilter::tikhonov_filter(params[0]);
  }
  VectorXd table = Eigen::Map<const VectorXd>(params.data(), static_cast<Index>(params.size()));
  if (kind == "per-index") return SpectralFilter::per_index(table);
  if (kind == "custom-table") return SpectralFilter::custom(table);
  throw io_error("filter_from_json: unknown kind " + kind);
}

}  // namespace invr
