#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "invr/linops.hpp"
#include "invr/random.hpp"

namespace invr {

/// Piecewise-constant ground truth. `jumps` records every index i (>= 1)
/// where values[i] != values[i-1], together with the signed height.
struct Signal {
  VectorXd values;
  std::vector<std::pair<Index, double>> jumps;
  std::uint64_t seed = 0;

  double total_variation() const {
    double tv = 0.0;
    for (const auto& [idx, height] : jumps) tv += std::abs(height);
    return tv;
  }
};

struct Measurement {
  VectorXd values;  // clean + noise, exactly
  VectorXd noise;
  VectorXd clean;  // A * u
  struct Provenance {
    std::uint64_t signal_seed = 0;
    std::uint64_t operator_seed = 0;
    std::uint64_t noise_seed = 0;
  } provenance;
};

/// Random piecewise-constant signal: jump count uniform on the given range,
/// positions uniform without replacement over {1, ..., n-1}, heights uniform
/// on height_range. Baseline value is 0.
inline Signal generate_signal(Index n, std::pair<int, int> jump_count_range,
                              std::pair<double, double> height_range, std::uint64_t seed) {
  if (n < 2) throw parameter_error("generate_signal: n must be >= 2");
  if (jump_count_range.first < 0 || jump_count_range.second > n - 1 ||
      jump_count_range.first > jump_count_range.second)
    throw parameter_error("generate_signal: jump_count_range must lie within [0, n-1]");
  if (height_range.first > height_range.second)
    throw parameter_error("generate_signal: invalid height_range");

  Rng rng(seed);
  const auto count = static_cast<std::size_t>(
      rng.integer(jump_count_range.first, jump_count_range.second));
  const auto positions = rng.sample_without_replacement(1, n - 1, count);

  Signal sig;
  sig.seed = seed;
  sig.values = VectorXd::Zero(n);
  double level = 0.0;
  std::size_t next = 0;
  for (Index i = 0; i < n; ++i) {
    if (next < positions.size() && positions[next] == i) {
      const double height = rng.uniform(height_range.first, height_range.second);
      if (height != 0.0) {  // a zero draw is not a jump
        level += height;
        sig.jumps.emplace_back(i, height);
      }
      ++next;
    }
    sig.values(i) = level;
  }
  return sig;
}

/// m x n operator with i.i.d. Gaussian entries.
inline LinearOperator generate_operator(Index m, Index n, double mean, double variance,
                                        std::uint64_t seed) {
  if (m < 1 || n < 1) throw parameter_error("generate_operator: dimensions must be positive");
  if (variance <= 0.0) throw parameter_error("generate_operator: variance must be > 0");
  Rng rng(seed);
  const double stddev = std::sqrt(variance);
  MatrixXd entries(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) entries(i, j) = rng.gaussian(mean, stddev);
  return LinearOperator(std::move(entries),
                        GenerationInfo{"gaussian", mean, variance, seed, Rng::algorithm});
}

/// f = A u + n with i.i.d. Gaussian noise of the given standard deviation.
inline Measurement measure(const LinearOperator& a, const Signal& u, double noise_std,
                           std::uint64_t seed) {
  if (u.values.size() != a.cols()) throw parameter_error("measure: dimension mismatch");
  if (noise_std < 0.0) throw parameter_error("measure: noise_std must be >= 0");
  Measurement meas;
  meas.clean = a.apply(u.values);
  meas.noise = VectorXd::Zero(a.rows());
  if (noise_std > 0.0) {
    Rng rng(seed);
    for (Index i = 0; i < a.rows(); ++i) meas.noise(i) = rng.gaussian(0.0, noise_std);
  }
  meas.values = meas.clean + meas.noise;
  meas.provenance = {u.seed, a.generation().seed, seed};
  return meas;
}

}  // namespace invr
