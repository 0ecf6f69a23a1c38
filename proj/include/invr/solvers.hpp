#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "invr/denoisers.hpp"
#include "invr/errors.hpp"
#include "invr/linops.hpp"
#include "invr/signals.hpp"

namespace invr {

enum class SolverId { tikhonov, tv_admm, pnp_pgd, learned_linear, spectral };

inline const char* solver_name(SolverId id) {
  switch (id) {
    case SolverId::tikhonov: return "tikhonov";
    case SolverId::tv_admm: return "tv-admm";
    case SolverId::pnp_pgd: return "pnp-pgd";
    case SolverId::learned_linear: return "learned-linear";
    case SolverId::spectral: return "spectral";
  }
  return "unknown";
}

inline SolverId solver_from_name(const std::string& name) {
  if (name == "tikhonov") return SolverId::tikhonov;
  if (name == "tv-admm") return SolverId::tv_admm;
  if (name == "pnp-pgd") return SolverId::pnp_pgd;
  if (name == "learned-linear") return SolverId::learned_linear;
  if (name == "spectral") return SolverId::spectral;
  throw parameter_error("unknown solver id: " + name);
}

struct Diagnostics {
  int iterations = 0;
  double final_residual = 0.0;  // optimality / fixed-point residual, >= 0
  bool converged = true;
  std::vector<double> primal_residuals;
  std::vector<double> dual_residuals;
  std::vector<double> objective_history;  // best-so-far envelope, non-increasing
  double certificate_residual = std::numeric_limits<double>::quiet_NaN();
};

struct Reconstruction {
  VectorXd values;
  SolverId solver_id = SolverId::tikhonov;
  double regularization_strength = 0.0;
  std::optional<VectorXd> subgradient;  // certificate p in dR(u_hat) with p = A^T(f - A u_hat)
  Diagnostics diagnostics;
};

struct SolverParams {
  double alpha = 1.0;            // regularization strength
  double admm_penalty = 1.0;     // initial rho
  int max_iterations = 5000;
  double primal_tolerance = 1e-6;  // relative part of the stopping rule
  double dual_tolerance = 1e-6;
  double absolute_tolerance = 1e-9;
  double step_size = 0.0;   // PnP tau; 0 = auto (1.9 / sigma_max^2)
  int pnp_iterations = 200;

  void validate() const {
    if (alpha < 0.0) throw parameter_error("SolverParams: alpha must be >= 0");
    if (admm_penalty <= 0.0) throw parameter_error("SolverParams: admm_penalty must be > 0");
    if (max_iterations < 1) throw parameter_error("SolverParams: max_iterations must be >= 1");
    if (primal_tolerance <= 0.0 || primal_tolerance >= 1.0 || dual_tolerance <= 0.0 ||
        dual_tolerance >= 1.0)
      throw parameter_error("SolverParams: tolerances must be in (0, 1)");
    if (pnp_iterations < 0) throw parameter_error("SolverParams: pnp_iterations must be >= 0");
  }
};

namespace detail {

// Solves M x = b for SPD M with iterative refinement; the residual is
// accumulated in long double so badly conditioned systems (alpha ~ 1e-7)
// still reach a normal-equation residual near machine precision.
inline VectorXd refined_spd_solve(const MatrixXd& m, const Eigen::LDLT<MatrixXd>& factor,
                                  const VectorXd& b, double* residual_norm = nullptr) {
  VectorXd x = factor.solve(b);
  const Index n = b.size();
  VectorXd r(n);
  double rnorm = 0.0;
  for (int pass = 0; pass < 4; ++pass) {
    for (Index i = 0; i < n; ++i) {
      long double acc = static_cast<long double>(b(i));
      for (Index j = 0; j < n; ++j)
        acc -= static_cast<long double>(m(i, j)) * static_cast<long double>(x(j));
      r(i) = static_cast<double>(acc);
    }
    rnorm = r.norm();
    if (rnorm <= 1e-15 * b.norm()) break;
    x += factor.solve(r);
  }
  if (residual_norm) *residual_norm = rnorm;
  return x;
}

}  // namespace detail

/// Closed-form quadratic reconstruction u = (A^T A + alpha D^T D)^{-1} A^T f.
/// Holds the factorization so repeated solves and the explicit linear map
/// are cheap; instances are immutable and safe to share across threads.
class TikhonovOperator {
 public:
  TikhonovOperator(LinearOperator a, LinearOperator d, double alpha)
      : a_(std::move(a)), d_(std::move(d)), alpha_(alpha) {
    if (alpha <= 0.0) throw parameter_error("tikhonov: alpha must be > 0");
    if (d_.cols() != a_.cols()) throw parameter_error("tikhonov: A/D column mismatch");
    dtd_ = d_.entries().transpose() * d_.entries();
    system_ = a_.entries().transpose() * a_.entries() + alpha * dtd_;
    factor_.compute(system_);
    if (factor_.info() != Eigen::Success || !factor_.isPositive())
      throw compute_error(
          "tikhonov: A^T A + alpha D^T D is not positive definite "
          "(null(A) and null(D) intersect)");
  }

  const LinearOperator& a() const { return a_; }
  const LinearOperator& d() const { return d_; }
  double alpha() const { return alpha_; }

  Reconstruction solve(const VectorXd& f) const {
    if (f.size() != a_.rows()) throw parameter_error("tikhonov: dimension mismatch");
    const VectorXd atf = a_.entries().transpose() * f;
    Reconstruction rec;
    rec.solver_id = SolverId::tikhonov;
    rec.regularization_strength = alpha_;
    double residual = 0.0;
    rec.values = detail::refined_spd_solve(system_, factor_, atf, &residual);
    // gradient of R(u) = (alpha/2)||Du||^2; equals A^T(f - Au) up to `residual`
    rec.subgradient = alpha_ * (dtd_ * rec.values);
    rec.diagnostics.iterations = 1;
    rec.diagnostics.final_residual = residual;
    rec.diagnostics.certificate_residual = residual;
    const double scale = atf.norm();
    rec.diagnostics.converged = residual <= 1e-8 * (scale > 0.0 ? scale : 1.0);
    return rec;
  }

  /// Explicit n x m reconstruction matrix (A^T A + alpha D^T D)^{-1} A^T.
  const MatrixXd& matrix() const {
    std::call_once(matrix_once_, [this] {
      matrix_ = factor_.solve(a_.entries().transpose());
    });
    return matrix_;
  }

 private:
  LinearOperator a_, d_;
  double alpha_;
  MatrixXd dtd_, system_;
  Eigen::LDLT<MatrixXd> factor_;
  mutable std::once_flag matrix_once_;
  mutable MatrixXd matrix_;
};

inline Reconstruction tikhonov(const LinearOperator& a, const LinearOperator& d,
                               const VectorXd& f, double alpha) {
  return TikhonovOperator(a, d, alpha).solve(f);
}

/// Frozen replay data for one ADMM run: enough to re-execute the iteration
/// sequence as an affine map and to reverse-accumulate its adjoint.
struct TvAdmmTrace {
  std::vector<double> rho;             // penalty used at each iteration
  std::vector<double> w_rescale;       // dual rescale applied before each iteration
  std::vector<Eigen::ArrayXd> mask;    // shrinkage activity per iteration (0/1)
  int iterations = 0;
};

/// ADMM for min_u 1/2 ||Au - f||^2 + alpha ||Du||_1 with the split z = Du.
/// D is the forward-difference matrix; factorizations of A^T A + rho D^T D
/// are cached per rho so residual balancing stays cheap.
class TvAdmmSolver {
 public:
  TvAdmmSolver(LinearOperator a, double alpha, SolverParams params = {})
      : a_(std::move(a)), alpha_(alpha), params_(params) {
    params_.validate();
    if (alpha < 0.0) throw parameter_error("tv_admm: alpha must be >= 0");
    n_ = a_.cols();
    ata_ = a_.entries().transpose() * a_.entries();
  }

  double alpha() const { return alpha_; }
  const LinearOperator& a() const { return a_; }

  Reconstruction solve(const VectorXd& f, TvAdmmTrace* trace = nullptr) const {
    if (f.size() != a_.rows()) throw parameter_error("tv_admm: dimension mismatch");
    if (alpha_ == 0.0) return least_squares_min_norm(f);

    const VectorXd atf = a_.entries().transpose() * f;
    double rho = params_.admm_penalty;
    VectorXd u = VectorXd::Zero(n_);
    VectorXd z = VectorXd::Zero(n_ - 1), w = VectorXd::Zero(n_ - 1);
    VectorXd z_prev = z;

    Reconstruction rec;
    rec.solver_id = SolverId::tv_admm;
    rec.regularization_strength = alpha_;
    auto& diag = rec.diagnostics;

    double best_objective = std::numeric_limits<double>::infinity();
    VectorXd best_u = u;
    bool converged = false;
    int iter = 0;

    for (; iter < params_.max_iterations; ++iter) {
      double rescale = 1.0;
      if (iter > 0 && iter % 10 == 0 && !diag.primal_residuals.empty()) {
        const double rp = diag.primal_residuals.back();
        const double rd = diag.dual_residuals.back();
        if (rp > 10.0 * rd) {
          rescale = 0.5;
          rho *= 2.0;
        } else if (rd > 10.0 * rp) {
          rescale = 2.0;
          rho *= 0.5;
        }
        w *= rescale;
      }

      const auto& factor = cached_factor(rho);
      u = factor.solve(atf + rho * apply_dt(z - w));
      if (!u.allFinite()) throw compute_error("tv_admm: NaN in iterates");

      const VectorXd du = apply_d(u);
      const VectorXd t = du + w;
      Eigen::ArrayXd mask(n_ - 1);
      const double kappa = alpha_ / rho;
      for (Index i = 0; i < n_ - 1; ++i) {
        if (t(i) > kappa) {
          z(i) = t(i) - kappa;
          mask(i) = 1.0;
        } else if (t(i) < -kappa) {
          z(i) = t(i) + kappa;
          mask(i) = 1.0;
        } else {
          z(i) = 0.0;
          mask(i) = 0.0;
        }
      }
      w = t - z;

      if (trace) {
        trace->rho.push_back(rho);
        trace->w_rescale.push_back(rescale);
        trace->mask.push_back(std::move(mask));
      }

      const double primal = (du - z).norm();
      const double dual = rho * apply_dt(z - z_prev).norm();
      z_prev = z;
      diag.primal_residuals.push_back(primal);
      diag.dual_residuals.push_back(dual);

      const double objective = 0.5 * (a_.entries() * u - f).squaredNorm() + alpha_ * du.lpNorm<1>();
      if (objective < best_objective) {
        best_objective = objective;
        best_u = u;
      }
      diag.objective_history.push_back(best_objective);

      const double eps_pri = std::sqrt(static_cast<double>(n_ - 1)) * params_.absolute_tolerance +
                             params_.primal_tolerance * std::max(du.norm(), z.norm());
      const double eps_dual = std::sqrt(static_cast<double>(n_)) * params_.absolute_tolerance +
                              params_.dual_tolerance * rho * apply_dt(w).norm();
      if (primal <= eps_pri && dual <= eps_dual) {
        converged = true;
        ++iter;
        break;
      }
    }

    rec.values = converged ? u : best_u;
    diag.iterations = iter;
    diag.converged = converged;
    if (trace) trace->iterations = static_cast<int>(trace->rho.size());

    rec.subgradient = a_.entries().transpose() * (f - a_.entries() * rec.values);
    diag.certificate_residual = certificate_membership_residual(rec.values, *rec.subgradient);
    diag.final_residual = diag.primal_residuals.empty() ? 0.0 : diag.primal_residuals.back();
    return rec;
  }

  /// Gradient of <gbar, G(f)> with respect to f: runs the solver once to
  /// record the iteration schedule, then reverse-accumulates through the
  /// frozen affine iteration sequence (shrinkage sign pattern fixed).
  VectorXd adjoint_gradient(const VectorXd& f, const VectorXd& gbar) const {
    if (alpha_ == 0.0) {
      // min-norm least squares is linear: gradient is (A^+)^T gbar
      const auto& fac = a_.svd();
      const Index r = a_.numerical_rank();
      VectorXd coeff = fac.v.leftCols(r).transpose() * gbar;
      coeff.array() /= fac.singular_values.head(r).array();
      return fac.u.leftCols(r) * coeff;
    }
    TvAdmmTrace trace;
    (void)solve(f, &trace);
    return replay_adjoint(trace, gbar);
  }

  /// Reverse pass through a recorded run. gbar is the gradient w.r.t. the
  /// final iterate; the return value is the gradient w.r.t. f.
  VectorXd replay_adjoint(const TvAdmmTrace& trace, const VectorXd& gbar) const {
    VectorXd zbar = VectorXd::Zero(n_ - 1);
    VectorXd wbar = VectorXd::Zero(n_ - 1);
    VectorXd cbar = VectorXd::Zero(n_);  // gradient w.r.t. A^T f
    for (int k = trace.iterations - 1; k >= 0; --k) {
      const double rho = trace.rho[static_cast<std::size_t>(k)];
      const auto& mask = trace.mask[static_cast<std::size_t>(k)];
      // z_{k+1} = mask .* (t -+ kappa), w_{k+1} = t - z_{k+1}
      const VectorXd tbar =
          (mask * zbar.array() + (1.0 - mask) * wbar.array()).matrix();
      VectorXd ubar = apply_dt(tbar);
      if (k == trace.iterations - 1) ubar += gbar;
      const VectorXd s = cached_factor(rho).solve(ubar);
      cbar += s;
      zbar = rho * apply_d(s);
      wbar = tbar - rho * apply_d(s);
      wbar *= trace.w_rescale[static_cast<std::size_t>(k)];
    }
    return a_.entries() * cbar;
  }

 private:
  Reconstruction least_squares_min_norm(const VectorXd& f) const {
    Reconstruction rec;
    rec.solver_id = SolverId::tv_admm;
    rec.regularization_strength = 0.0;
    rec.values = a_.pinv_apply(f);
    rec.subgradient = a_.entries().transpose() * (f - a_.entries() * rec.values);
    rec.diagnostics.iterations = 0;
    rec.diagnostics.final_residual = 0.0;
    return rec;
  }

  VectorXd apply_d(const VectorXd& u) const {
    return u.tail(n_ - 1) - u.head(n_ - 1);
  }

  VectorXd apply_dt(const VectorXd& v) const {
    VectorXd out = VectorXd::Zero(n_);
    out.head(n_ - 1) -= v;
    out.tail(n_ - 1) += v;
    return out;
  }

  const Eigen::LDLT<MatrixXd>& cached_factor(double rho) const {
    std::scoped_lock lock(cache_mutex_);
    auto it = factors_.find(rho);
    if (it == factors_.end()) {
      MatrixXd system = ata_;
      // add rho * D^T D (tridiagonal) in place
      for (Index i = 0; i < n_; ++i) {
        const double diagonal = (i == 0 || i == n_ - 1) ? 1.0 : 2.0;
        system(i, i) += rho * diagonal;
        if (i + 1 < n_) {
          system(i, i + 1) -= rho;
          system(i + 1, i) -= rho;
        }
      }
      it = factors_.emplace(rho, std::make_unique<Eigen::LDLT<MatrixXd>>(system)).first;
      if (it->second->info() != Eigen::Success)
        throw compute_error("tv_admm: factorization failed at rho=" + std::to_string(rho));
    }
    return *it->second;
  }

  // Distance from the certificate p to alpha * D^T s over multipliers s with
  // |s_i| <= 1 and s_i fixed to sign((Du)_i) on the active set. Solved by
  // projected gradient on the free coordinates.
  double certificate_membership_residual(const VectorXd& u, const VectorXd& p) const {
    const VectorXd du = apply_d(u);
    const double jump_tol = 1e-6 * du.cwiseAbs().maxCoeff();
    VectorXd s(n_ - 1);
    std::vector<bool> fixed(static_cast<std::size_t>(n_ - 1));
    for (Index i = 0; i < n_ - 1; ++i) {
      const bool active = std::abs(du(i)) > jump_tol;
      fixed[static_cast<std::size_t>(i)] = active;
      s(i) = active ? (du(i) > 0.0 ? 1.0 : -1.0) : 0.0;
    }
    const double step = 1.0 / (4.0 * alpha_ * alpha_);  // 1/L, L = alpha^2 ||D D^T||
    for (int it = 0; it < 400; ++it) {
      const VectorXd grad = alpha_ * apply_d(alpha_ * apply_dt(s) - p);
      for (Index i = 0; i < n_ - 1; ++i) {
        if (fixed[static_cast<std::size_t>(i)]) continue;
        s(i) = std::clamp(s(i) - step * grad(i), -1.0, 1.0);
      }
    }
    return (p - alpha_ * apply_dt(s)).norm();
  }

  LinearOperator a_;
  double alpha_;
  SolverParams params_;
  Index n_ = 0;
  MatrixXd ata_;
  mutable std::mutex cache_mutex_;
  mutable std::map<double, std::unique_ptr<Eigen::LDLT<MatrixXd>>> factors_;
};

inline Reconstruction tv_admm(const LinearOperator& a, const VectorXd& f, double alpha,
                              const SolverParams& params = {}) {
  SolverParams p = params;
  p.alpha = alpha;
  return TvAdmmSolver(a, alpha, p).solve(f);
}

/// Plug-and-play proximal gradient: u <- denoiser(u - tau A^T (A u - f)),
/// run for a fixed number of iterations from u0.
inline Reconstruction pnp_pgd(const LinearOperator& a, const VectorXd& f,
                              const Denoiser& denoiser, double tau, int iterations,
                              const VectorXd& u0) {
  if (f.size() != a.rows() || u0.size() != a.cols())
    throw parameter_error("pnp_pgd: dimension mismatch");
  if (iterations < 0) throw parameter_error("pnp_pgd: iterations must be >= 0");
  const double sigma_max = a.svd().singular_values(0);
  if (tau <= 0.0 || tau >= 2.0 / (sigma_max * sigma_max))
    throw parameter_error("pnp_pgd: step size must satisfy 0 < tau < 2/sigma_max^2");

  Reconstruction rec;
  rec.solver_id = SolverId::pnp_pgd;
  VectorXd u = u0, prev = u0;
  for (int k = 0; k < iterations; ++k) {
    prev = u;
    const VectorXd grad_step = u - tau * (a.entries().transpose() * (a.entries() * u - f));
    u = denoiser(grad_step);
    if (u.size() != a.cols())
      throw compute_error("pnp_pgd: denoiser changed the signal dimension");
    if (!u.allFinite()) throw compute_error("pnp_pgd: NaN in iterates");
  }
  rec.values = u;
  rec.diagnostics.iterations = iterations;
  rec.diagnostics.final_residual = iterations > 0 ? (u - prev).norm() : 0.0;
  return rec;
}

/// Ridge-regression fit of a linear reconstructor L (n x m) minimizing
/// sum_k ||L f_k - u_k||^2 + ridge ||L||_F^2. ridge = 0 returns the
/// minimum-Frobenius-norm exact minimizer via the pseudo-inverse.
inline MatrixXd learned_linear_fit(const std::vector<std::pair<Signal, Measurement>>& train,
                                   double ridge) {
  if (train.empty()) throw parameter_error("learned_linear_fit: empty training set");
  if (ridge < 0.0) throw parameter_error("learned_linear_fit: ridge must be >= 0");
  const Index n = train.front().first.values.size();
  const Index m = train.front().second.values.size();
  const Index k = static_cast<Index>(train.size());
  MatrixXd signals(n, k), measurements(m, k);
  for (Index j = 0; j < k; ++j) {
    const auto& [u, f] = train[static_cast<std::size_t>(j)];
    if (u.values.size() != n || f.values.size() != m)
      throw parameter_error("learned_linear_fit: inconsistent dimensions");
    signals.col(j) = u.values;
    measurements.col(j) = f.values;
  }
  if (ridge == 0.0) {
    Eigen::BDCSVD<MatrixXd> dec(measurements, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = dec.singularValues();
    const double tol = static_cast<double>(std::max(m, k)) * (s.size() ? s(0) : 0.0) * 1e-12;
    Index r = 0;
    while (r < s.size() && s(r) > tol) ++r;
    // L = U_mat F^+ = U_mat V_f diag(1/s) U_f^T
    MatrixXd coeff = signals * dec.matrixV().leftCols(r);
    for (Index i = 0; i < r; ++i) coeff.col(i) /= s(i);
    return coeff * dec.matrixU().leftCols(r).transpose();
  }
  const MatrixXd gram =
      measurements * measurements.transpose() + ridge * MatrixXd::Identity(m, m);
  const MatrixXd cross = signals * measurements.transpose();  // n x m
  return gram.ldlt().solve(cross.transpose()).transpose();
}

/// Everything the dispatch facade may need beyond (A, f, params).
struct ReconstructContext {
  std::optional<LinearOperator> d;      // tikhonov smoothness operator
  std::optional<MatrixXd> learned;      // fitted linear reconstructor
  std::optional<SpectralFilter> filter;
  std::optional<Denoiser> denoiser;     // pnp (default: tv-prox)
  std::optional<VectorXd> u0;           // pnp start (default: tikhonov solve)
};

inline Reconstruction reconstruct(SolverId id, const LinearOperator& a, const VectorXd& f,
                                  const SolverParams& params, const ReconstructContext& ctx = {}) {
  params.validate();
  switch (id) {
    case SolverId::tikhonov: {
      const LinearOperator d = ctx.d ? *ctx.d : finite_difference_matrix(a.cols());
      return tikhonov(a, d, f, params.alpha);
    }
    case SolverId::tv_admm:
      return tv_admm(a, f, params.alpha, params);
    case SolverId::pnp_pgd: {
      const double sigma_max = a.svd().singular_values(0);
      const double tau =
          params.step_size > 0.0 ? params.step_size : 1.9 / (sigma_max * sigma_max);
      const Denoiser den = ctx.denoiser ? *ctx.denoiser : Denoiser::tv_prox(params.alpha * tau);
      VectorXd u0;
      if (ctx.u0) {
        u0 = *ctx.u0;
      } else {
        const LinearOperator d = ctx.d ? *ctx.d : finite_difference_matrix(a.cols());
        u0 = tikhonov(a, d, f, params.alpha > 0.0 ? params.alpha : 1.0).values;
      }
      return pnp_pgd(a, f, den, tau, params.pnp_iterations, u0);
    }
    case SolverId::learned_linear: {
      if (!ctx.learned) throw parameter_error("reconstruct: learned map not provided");
      if (ctx.learned->cols() != f.size())
        throw parameter_error("reconstruct: learned map dimension mismatch");
      Reconstruction rec;
      rec.solver_id = SolverId::learned_linear;
      rec.values = *ctx.learned * f;
      return rec;
    }
    case SolverId::spectral: {
      if (!ctx.filter) throw parameter_error("reconstruct: spectral filter not provided");
      Reconstruction rec;
      rec.solver_id = SolverId::spectral;
      rec.values = spectral_reconstruct(a, f, *ctx.filter);
      return rec;
    }
  }
  throw parameter_error("reconstruct: unknown solver id");
}

}  // namespace invr
