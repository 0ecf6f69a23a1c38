#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "invr/random.hpp"

using invr::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.uniform() == b.uniform());
    REQUIRE(a.gaussian() == b.gaussian());
    REQUIRE(a.integer(0, 100) == b.integer(0, 100));
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.uniform() == b.uniform() ? 1 : 0;
  REQUIRE(equal == 0);
}

TEST_CASE("uniform lies in [0, 1) with mean near one half") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // standard error is 1/(sqrt(12 n)) ~ 6.5e-4; allow 5 sigma
  REQUIRE(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("ranged uniform respects its bounds") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-3.0, 2.0);
    REQUIRE(u >= -3.0);
    REQUIRE(u < 2.0);
  }
}

TEST_CASE("gaussian matches the first two moments") {
  Rng rng(3);
  const int n = 400000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("gaussian accepts mean and standard deviation") {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const double g = b.gaussian();
    REQUIRE(a.gaussian(2.0, 3.0) == Catch::Approx(2.0 + 3.0 * g).margin(0.0));
  }
}

TEST_CASE("integer covers the inclusive range uniformly enough") {
  Rng rng(5);
  std::array<int, 4> counts{};
  for (int i = 0; i < 40000; ++i) {
    const int v = static_cast<int>(rng.integer(10, 13));
    REQUIRE(v >= 10);
    REQUIRE(v <= 13);
    counts[static_cast<std::size_t>(v - 10)]++;
  }
  for (int c : counts) REQUIRE(std::abs(c - 10000) < 500);  // ~5 sigma
}

TEST_CASE("integer handles a single-point range") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) REQUIRE(rng.integer(4, 4) == 4);
}

TEST_CASE("sampling without replacement yields distinct in-range values") {
  Rng rng(13);
  const auto sample = rng.sample_without_replacement(1, 50, 5);
  REQUIRE(sample.size() == 5);
  std::set<std::int64_t> seen(sample.begin(), sample.end());
  REQUIRE(seen.size() == 5);
  for (auto v : sample) {
    REQUIRE(v >= 1);
    REQUIRE(v <= 50);
  }
}

TEST_CASE("sampling the whole range is a permutation") {
  Rng rng(17);
  auto sample = rng.sample_without_replacement(0, 9, 10);
  std::sort(sample.begin(), sample.end());
  for (int i = 0; i < 10; ++i) REQUIRE(sample[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("generator identifies its algorithm") {
  REQUIRE(std::string(Rng::algorithm) == "mt19937_64/box-muller/v1");
}
