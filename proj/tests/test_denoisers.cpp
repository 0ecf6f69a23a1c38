#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "invr/denoisers.hpp"
#include "invr/random.hpp"

using namespace invr;

namespace {

/// Independent oracle for min_x 1/2||x - y||^2 + lambda ||Dx||_1 via its
/// dual: min_z 1/2 ||y - D^T z||^2 subject to |z_i| <= lambda, solved with
/// accelerated projected gradient (x = y - D^T z at the optimum). D is the
/// forward-difference matrix, so ||D D^T||_2 <= 4.
VectorXd tv_denoise_dual_oracle(const VectorXd& y, double lambda, int iterations = 200000) {
  const Index n = y.size();
  if (n < 2 || lambda == 0.0) return y;
  VectorXd z = VectorXd::Zero(n - 1), z_prev = z, momentum = z;
  const double step = 0.25;
  auto dt = [n](const VectorXd& v) {  // D^T v
    VectorXd out = VectorXd::Zero(n);
    out.head(n - 1) -= v;
    out.tail(n - 1) += v;
    return out;
  };
  auto d = [n](const VectorXd& v) {  // D v
    return VectorXd(v.tail(n - 1) - v.head(n - 1));
  };
  double t_prev = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const VectorXd grad = -d(y - dt(momentum));
    VectorXd z_next = momentum - step * grad;
    z_next = z_next.cwiseMax(-lambda).cwiseMin(lambda);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
    momentum = z_next + ((t_prev - 1.0) / t_next) * (z_next - z);
    z_prev = z;
    z = z_next;
    t_prev = t_next;
  }
  return y - dt(z);
}

double tv_objective(const VectorXd& x, const VectorXd& y, double lambda) {
  double tv = 0.0;
  for (Index i = 1; i < x.size(); ++i) tv += std::abs(x(i) - x(i - 1));
  return 0.5 * (x - y).squaredNorm() + lambda * tv;
}

}  // namespace

TEST_CASE("tv prox matches the dual projected-gradient oracle") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed);
    VectorXd y(30);
    for (Index i = 0; i < 30; ++i) y(i) = rng.gaussian();
    for (double lambda : {0.05, 0.3, 1.0, 5.0}) {
      const VectorXd fast = tv_prox_1d(y, lambda);
      const VectorXd oracle = tv_denoise_dual_oracle(y, lambda);
      REQUIRE((fast - oracle).lpNorm<Eigen::Infinity>() < 1e-6);
      // and the direct algorithm never has a higher objective
      REQUIRE(tv_objective(fast, y, lambda) <=
              tv_objective(oracle, y, lambda) + 1e-10);
    }
  }
}

TEST_CASE("tv prox optimality certificate holds") {
  // at the optimum, y - x = D^T z with z in [-lambda, lambda]^(n-1) and
  // z_i = lambda * sign(x_{i+1} - x_i) wherever x jumps
  Rng rng(42);
  VectorXd y(50);
  for (Index i = 0; i < 50; ++i) y(i) = rng.gaussian();
  const double lambda = 0.4;
  const VectorXd x = tv_prox_1d(y, lambda);
  // reconstruct z from the running sum: (y - x)_i = z_{i-1} - z_i
  VectorXd z(49);
  double running = 0.0;
  for (Index i = 0; i < 49; ++i) {
    running -= (y(i) - x(i));
    z(i) = running;
  }
  // last component of y - x must close the telescoping sum
  REQUIRE(y(49) - x(49) == Catch::Approx(z(48)).margin(1e-9));
  for (Index i = 0; i < 49; ++i) {
    REQUIRE(std::abs(z(i)) <= lambda + 1e-9);
    const double jump = x(i + 1) - x(i);
    if (std::abs(jump) > 1e-9)
      REQUIRE(z(i) == Catch::Approx(lambda * (jump > 0 ? 1.0 : -1.0)).margin(1e-9));
  }
}

TEST_CASE("tv prox leaves constants unchanged") {
  const VectorXd c = VectorXd::Constant(20, 3.25);
  REQUIRE((tv_prox_1d(c, 0.7) - c).norm() <= 1e-12);  // cumulative-sum rounding only
}

TEST_CASE("tv prox with zero lambda is the identity") {
  Rng rng(3);
  VectorXd y(15);
  for (Index i = 0; i < 15; ++i) y(i) = rng.gaussian();
  REQUIRE((tv_prox_1d(y, 0.0) - y).norm() == 0.0);
}

TEST_CASE("tv prox with a huge lambda returns the mean") {
  Rng rng(4);
  VectorXd y(25);
  for (Index i = 0; i < 25; ++i) y(i) = rng.gaussian();
  const VectorXd x = tv_prox_1d(y, 1e6);
  for (Index i = 0; i < 25; ++i) REQUIRE(x(i) == Catch::Approx(y.mean()).margin(1e-9));
}

TEST_CASE("two-sample tv prox matches the closed form") {
  // min over (x1, x2): shrink the gap |y2 - y1| by 2 lambda, clamped at 0
  VectorXd y(2);
  y << 1.0, 4.0;
  const VectorXd x = tv_prox_1d(y, 0.5);
  REQUIRE(x(0) == Catch::Approx(1.5).margin(1e-12));
  REQUIRE(x(1) == Catch::Approx(3.5).margin(1e-12));
  const VectorXd collapsed = tv_prox_1d(y, 10.0);
  REQUIRE(collapsed(0) == Catch::Approx(2.5).margin(1e-12));
  REQUIRE(collapsed(1) == Catch::Approx(2.5).margin(1e-12));
}

TEST_CASE("tv prox rejects a negative lambda") {
  REQUIRE_THROWS_AS(tv_prox_1d(VectorXd::Zero(4), -0.1), parameter_error);
}

TEST_CASE("tv prox is nonexpansive") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd a(40), b(40);
    for (Index i = 0; i < 40; ++i) {
      a(i) = rng.gaussian();
      b(i) = rng.gaussian();
    }
    REQUIRE((tv_prox_1d(a, 0.6) - tv_prox_1d(b, 0.6)).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("named denoisers behave as documented") {
  Rng rng(6);
  VectorXd y(21);
  for (Index i = 0; i < 21; ++i) y(i) = rng.gaussian();

  REQUIRE((Denoiser::identity()(y) - y).norm() == 0.0);
  REQUIRE((Denoiser::tv_prox(0.3)(y) - tv_prox_1d(y, 0.3)).norm() == 0.0);

  const Denoiser ma = Denoiser::moving_average(5);
  const VectorXd smooth = ma(y);
  REQUIRE(smooth(10) == Catch::Approx(y.segment(8, 5).mean()).margin(1e-14));
  REQUIRE(smooth(0) == Catch::Approx(y.segment(0, 3).mean()).margin(1e-14));
  REQUIRE_THROWS_AS(Denoiser::moving_average(4), parameter_error);
  REQUIRE_THROWS_AS(Denoiser::moving_average(0), parameter_error);
}
