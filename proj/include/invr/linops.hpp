#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invr/errors.hpp"

namespace invr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct GenerationInfo {
  std::string distribution;  // e.g. "gaussian"
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t seed = 0;
  std::string rng;
};

struct SvdFactors {
  MatrixXd u;                // m x r, measurement-space basis
  VectorXd singular_values;  // r, non-increasing, >= 0
  MatrixXd v;                // n x r, data-space basis
};

/// Dense forward operator with a lazily cached economy SVD. Immutable after
/// construction; copies share the cache, so the decomposition runs at most
/// once per underlying matrix even under concurrent first access.
class LinearOperator {
 public:
  LinearOperator() : impl_(std::make_shared<Impl>()) {}

  explicit LinearOperator(MatrixXd entries, GenerationInfo generation = {})
      : impl_(std::make_shared<Impl>()) {
    if (entries.size() == 0) throw parameter_error("LinearOperator: empty matrix");
    if (!entries.allFinite()) throw parameter_error("LinearOperator: non-finite entries");
    impl_->entries = std::move(entries);
    impl_->generation = std::move(generation);
  }

  const MatrixXd& entries() const { return impl_->entries; }
  Index rows() const { return impl_->entries.rows(); }
  Index cols() const { return impl_->entries.cols(); }
  const GenerationInfo& generation() const { return impl_->generation; }

  const SvdFactors& svd() const {
    std::call_once(impl_->svd_once, [this] {
      Eigen::BDCSVD<MatrixXd> dec(impl_->entries, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (dec.info() != Eigen::Success)
        throw compute_error("svd: decomposition failed for " +
                            std::to_string(impl_->entries.rows()) + "x" +
                            std::to_string(impl_->entries.cols()) + " operator (distribution=" +
                            impl_->generation.distribution + ")");
      impl_->svd = SvdFactors{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    });
    return *impl_->svd;
  }

  /// Singular values below max(m,n) * sigma_max * 1e-12 count as zero.
  double rank_tolerance() const {
    const auto& s = svd().singular_values;
    const double smax = s.size() > 0 ? s(0) : 0.0;
    return static_cast<double>(std::max(rows(), cols())) * smax * 1e-12;
  }

  Index numerical_rank() const {
    const auto& s = svd().singular_values;
    const double tol = rank_tolerance();
    Index r = 0;
    while (r < s.size() && s(r) > tol) ++r;
    return r;
  }

  VectorXd apply(const VectorXd& x) const {
    if (x.size() != cols()) throw parameter_error("LinearOperator::apply: dimension mismatch");
    return impl_->entries * x;
  }

  VectorXd apply_adjoint(const VectorXd& y) const {
    if (y.size() != rows())
      throw parameter_error("LinearOperator::apply_adjoint: dimension mismatch");
    return impl_->entries.transpose() * y;
  }

  /// Pseudo-inverse applied through the cached SVD with the rank tolerance.
  VectorXd pinv_apply(const VectorXd& f) const {
    if (f.size() != rows()) throw parameter_error("pinv_apply: dimension mismatch");
    const auto& fac = svd();
    const Index r = numerical_rank();
    VectorXd coeff = fac.u.leftCols(r).transpose() * f;
    coeff.array() /= fac.singular_values.head(r).array();
    return fac.v.leftCols(r) * coeff;
  }

 private:
  struct Impl {
    MatrixXd entries;
    GenerationInfo generation;
    mutable std::once_flag svd_once;
    mutable std::optional<SvdFactors> svd;
  };
  std::shared_ptr<Impl> impl_;
};

inline const SvdFactors& svd(const LinearOperator& a) { return a.svd(); }

inline double condition_number(const LinearOperator& a) {
  const auto& s = a.svd().singular_values;
  const Index r = a.numerical_rank();
  if (r == 0) throw compute_error("condition_number: operator is numerically zero");
  return s(0) / s(r - 1);
}

/// Bounded replacement for 1/sigma in the pseudo-inverse expansion.
struct SpectralFilter {
  enum class Kind { truncated_svd, tikhonov, per_index, custom_table };

  Kind kind = Kind::truncated_svd;
  double threshold = 0.0;  // truncated_svd: sigma <= threshold is dropped
  double alpha = 0.0;      // tikhonov: g(sigma) = sigma / (sigma^2 + alpha)
  VectorXd table;          // per_index / custom_table: g value per index

  static SpectralFilter truncated(double threshold = 0.0) {
    SpectralFilter f;
    f.kind = Kind::truncated_svd;
    f.threshold = threshold;
    return f;
  }

  static SpectralFilter tikhonov_filter(double alpha) {
    if (alpha <= 0.0) throw parameter_error("tikhonov filter: alpha must be > 0");
    SpectralFilter f;
    f.kind = Kind::tikhonov;
    f.alpha = alpha;
    return f;
  }

  static SpectralFilter per_index(VectorXd values) {
    SpectralFilter f;
    f.kind = Kind::per_index;
    f.table = std::move(values);
    return f;
  }

  static SpectralFilter custom(VectorXd values) {
    SpectralFilter f;
    f.kind = Kind::custom_table;
    f.table = std::move(values);
    return f;
  }

  double operator()(double sigma, Index i) const {
    switch (kind) {
      case Kind::truncated_svd:
        return sigma > threshold ? 1.0 / sigma : 0.0;
      case Kind::tikhonov:
        return sigma / (sigma * sigma + alpha);
      case Kind::per_index:
      case Kind::custom_table:
        if (i >= table.size())
          throw compute_error("spectral filter: no table entry for index " + std::to_string(i));
        return table(i);
    }
    throw parameter_error("spectral filter: unknown kind");
  }

  const char* kind_name() const {
    switch (kind) {
      case Kind::truncated_svd: return "truncated-svd";
      case Kind::tikhonov: return "tikhonov-filter";
      case Kind::per_index: return "per-index";
      case Kind::custom_table: return "custom-table";
    }
    return "unknown";
  }
};

/// Reconstruction sum_i g(sigma_i) <f, u_i> v_i. The inner product uses the
/// measurement-space basis (columns of U) and the output lives in the
/// data-space basis (columns of V).
inline VectorXd spectral_reconstruct(const LinearOperator& a, const VectorXd& f,
                                     const SpectralFilter& filter) {
  if (f.size() != a.rows()) throw parameter_error("spectral_reconstruct: dimension mismatch");
  const auto& fac = a.svd();
  VectorXd coeff = fac.u.transpose() * f;
  for (Index i = 0; i < coeff.size(); ++i) {
    const double g = filter(fac.singular_values(i), i);
    if (!std::isfinite(g))
      throw compute_error("spectral_reconstruct: filter not finite at sigma=" +
                          std::to_string(fac.singular_values(i)));
    coeff(i) *= g;
  }
  return fac.v * coeff;
}

/// Per-index least-squares-optimal filter over a dataset of (signal,
/// measurement) coefficient pairs in the SVD bases of A. Each index is an
/// independent scalar problem with closed-form solution
/// g_i = sum_k a_ik b_ik / sum_k b_ik^2.
inline SpectralFilter fit_spectral_filter(const std::vector<std::pair<VectorXd, VectorXd>>& dataset,
                                          const LinearOperator& a) {
  if (dataset.empty()) throw parameter_error("fit_spectral_filter: empty dataset");
  const auto& fac = a.svd();
  const Index r = fac.singular_values.size();
  VectorXd num = VectorXd::Zero(r), den = VectorXd::Zero(r);
  for (const auto& [u, f] : dataset) {
    if (u.size() != a.cols() || f.size() != a.rows())
      throw parameter_error("fit_spectral_filter: dimension mismatch");
    const VectorXd ucoef = fac.v.transpose() * u;
    const VectorXd fcoef = fac.u.transpose() * f;
    num += ucoef.cwiseProduct(fcoef);
    den += fcoef.cwiseAbs2();
  }
  VectorXd g(r);
  for (Index i = 0; i < r; ++i) g(i) = den(i) > 0.0 ? num(i) / den(i) : 0.0;
  return SpectralFilter::per_index(std::move(g));
}

/// (n-1) x n forward-difference matrix with rows (..., -1, +1, ...).
/// Constants are exactly in the null space.
inline LinearOperator finite_difference_matrix(Index n) {
  if (n < 2) throw parameter_error("finite_difference_matrix: n must be >= 2");
  MatrixXd d = MatrixXd::Zero(n - 1, n);
  for (Index i = 0; i < n - 1; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return LinearOperator(std::move(d), GenerationInfo{"finite-difference", 0.0, 0.0, 0, ""});
}

/// u_hat = A^+ f + (I - A^+ A) u: exact agreement with the measurable part
/// of f while keeping the null-space component of u.
inline VectorXd data_consistency_project(const LinearOperator& a, const VectorXd& f,
                                         const VectorXd& u) {
  if (f.size() != a.rows() || u.size() != a.cols())
    throw parameter_error("data_consistency_project: dimension mismatch");
  const auto& fac = a.svd();
  const Index r = a.numerical_rank();
  const MatrixXd vr = fac.v.leftCols(r);
  VectorXd coeff = fac.u.leftCols(r).transpose() * f;
  coeff.array() /= fac.singular_values.head(r).array();
  return vr * coeff + (u - vr * (vr.transpose() * u));
}

}  // namespace invr
