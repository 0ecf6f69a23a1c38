#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "invr/io.hpp"
#include "invr/random.hpp"

using namespace invr;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "invr_io_test";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST_CASE("matrix tensor round-trips exactly") {
  Rng rng(1);
  MatrixXd m(5, 7);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  const auto path = temp_file("matrix.bin");
  write_tensor(path, m);
  const MatrixXd back = read_tensor(path);
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 7);
  REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vector tensor round-trips exactly") {
  VectorXd v(4);
  v << 1.5, -2.25, 0.0, 1e-300;
  const auto path = temp_file("vector.bin");
  write_tensor(path, v);
  const MatrixXd back = read_tensor(path);
  REQUIRE(back.cols() == 1);
  REQUIRE((back.col(0) - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("container header starts with the magic bytes") {
  const auto path = temp_file("magic.bin");
  write_tensor(path, VectorXd(VectorXd::Zero(3)));
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  REQUIRE(std::string(magic, 4) == "INVR");
}

TEST_CASE("bad magic is rejected") {
  const auto path = temp_file("bad.bin");
  std::ofstream(path, std::ios::binary) << "NOPExxxxxxxxxxxxxxxx";
  REQUIRE_THROWS_AS(read_tensor(path), io_error);
}

TEST_CASE("truncated payload is rejected") {
  const auto good = temp_file("good.bin");
  write_tensor(good, MatrixXd(MatrixXd::Ones(4, 4)));
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto bad = temp_file("trunc.bin");
  std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  REQUIRE_THROWS_AS(read_tensor(bad), io_error);
}

TEST_CASE("missing file is an io error") {
  REQUIRE_THROWS_AS(read_tensor(temp_file("does_not_exist.bin")), io_error);
}

TEST_CASE("format_double round-trips through text") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.gaussian() * std::pow(10.0, rng.integer(-30, 30));
    REQUIRE(std::stod(format_double(v)) == v);
  }
  REQUIRE(std::stod(format_double(0.1)) == 0.1);
  REQUIRE(std::stod(format_double(-0.0)) == 0.0);
}

TEST_CASE("csv rows preserve full precision") {
  const auto path = temp_file("rows.csv");
  VectorXd a(3), b(3);
  a << 0.1, 0.2, 0.3;
  b << 1e-17, -2.5, 4.0;
  write_csv_vectors(path, {a, b});
  std::ifstream in(path);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  REQUIRE(line1 == format_double(0.1) + "," + format_double(0.2) + "," + format_double(0.3));
  REQUIRE(line2.find(format_double(1e-17)) == 0);
}

TEST_CASE("spectral filter json round-trips") {
  const SpectralFilter original = SpectralFilter::tikhonov_filter(0.25);
  const SpectralFilter back = filter_from_json(filter_to_json(original));
  for (double s : {0.1, 1.0, 3.0}) REQUIRE(back(s, 0) == Catch::Approx(original(s, 0)).epsilon(0));

  VectorXd table(3);
  table << 0.5, 0.25, 0.0;
  const SpectralFilter per = SpectralFilter::per_index(table);
  const SpectralFilter per_back = filter_from_json(filter_to_json(per));
  for (Index i = 0; i < 3; ++i) REQUIRE(per_back(1.0, i) == table(i));
}
