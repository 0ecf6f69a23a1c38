#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "invr/errors.hpp"
#include "invr/random.hpp"
#include "invr/solvers.hpp"

namespace invr {

enum class AttackObjective { deviation_from_clean, deviation_from_ground_truth };
enum class GradientBackend { closed_form, unrolled_adjoint, finite_difference };

inline const char* objective_name(AttackObjective o) {
  return o == AttackObjective::deviation_from_clean ? "deviation-from-clean"
                                                    : "deviation-from-ground-truth";
}

inline const char* backend_name(GradientBackend b) {
  switch (b) {
    case GradientBackend::closed_form: return "closed-form";
    case GradientBackend::unrolled_adjoint: return "unrolled-adjoint";
    case GradientBackend::finite_difference: return "finite-difference";
  }
  return "unknown";
}

struct AttackConfig {
  double epsilon = 0.2;
  double step_size = 0.0;  // 0 = default epsilon/4
  int steps = 40;
  int restarts = 4;
  AttackObjective objective = AttackObjective::deviation_from_ground_truth;
  GradientBackend backend = GradientBackend::closed_form;
  std::uint64_t seed = 0;
  bool monotone_acceptance = false;  // PGD keeps a step only if the objective did not drop

  double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }

  void validate() const {
    if (epsilon < 0.0) throw parameter_error("AttackConfig: epsilon must be >= 0");
    if (steps < 1) throw parameter_error("AttackConfig: steps must be >= 1");
    if (restarts < 0) throw parameter_error("AttackConfig: restarts must be >= 0");
    if (effective_step() > 2.0 * epsilon && epsilon > 0.0)
      throw parameter_error("AttackConfig: step_size must be <= 2 * epsilon");
  }
};

struct GradCheck {
  double max_relative_error = 0.0;
  int probes = 0;
};

struct AttackResult {
  VectorXd delta;
  VectorXd f_adv;
  Reconstruction reconstruction_adv;
  double objective_value = 0.0;            // ||G(f + delta) - target||_2
  std::vector<double> objective_trace;
  double measurement_consistency = 0.0;    // ||A u_adv - f_adv||^2
  GradientBackend backend_used = GradientBackend::closed_form;
  std::optional<GradCheck> grad_check;
};

/// A reconstruction operator as seen by the attack engine: a pure forward
/// map plus whatever differentiable structure the solver can offer.
struct ReconOp {
  std::string name;
  SolverId solver_id = SolverId::tikhonov;
  std::function<Reconstruction(const VectorXd&)> apply;
  // closed-form backend: G(f) = linear_map() * f
  std::function<const MatrixXd*()> linear_map;
  // unrolled-adjoint backend: gradient of <gbar, G(f)> w.r.t. f
  std::function<VectorXd(const VectorXd& f, const VectorXd& gbar)> vjp;
};

/// Downgrades the requested backend to one the operator actually supports
/// (closed form needs a linear map, unrolled adjoint needs a vjp; finite
/// differences always work). Explicit single-attack calls keep the strict
/// error path in attack_gradient; batch drivers use this.
inline GradientBackend compatible_backend(const ReconOp& op, GradientBackend requested);

namespace detail {
inline std::string alpha_tag(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", alpha);
  return buf;
}
}  // namespace detail

inline ReconOp make_tikhonov_op(const LinearOperator& a, const LinearOperator& d, double alpha) {
  auto solver = std::make_shared<TikhonovOperator>(a, d, alpha);
  ReconOp op;
  op.name = "tikhonov(alpha=" + detail::alpha_tag(alpha) + ")";
  op.solver_id = SolverId::tikhonov;
  op.apply = [solver](const VectorXd& f) { return solver->solve(f); };
  op.linear_map = [solver]() { return &solver->matrix(); };
  op.vjp = [solver](const VectorXd&, const VectorXd& gbar) -> VectorXd {
    return solver->matrix().transpose() * gbar;
  };
  return op;
}

inline ReconOp make_tv_op(const LinearOperator& a, double alpha, const SolverParams& params = {}) {
  SolverParams p = params;
  p.alpha = alpha;
  auto solver = std::make_shared<TvAdmmSolver>(a, alpha, p);
  ReconOp op;
  op.name = "tv-admm(alpha=" + detail::alpha_tag(alpha) + ")";
  op.solver_id = SolverId::tv_admm;
  op.apply = [solver](const VectorXd& f) { return solver->solve(f); };
  op.vjp = [solver](const VectorXd& f, const VectorXd& gbar) {
    return solver->adjoint_gradient(f, gbar);
  };
  return op;
}

inline ReconOp make_learned_linear_op(MatrixXd l) {
  auto map = std::make_shared<MatrixXd>(std::move(l));
  ReconOp op;
  op.name = "learned-linear";
  op.solver_id = SolverId::learned_linear;
  op.apply = [map](const VectorXd& f) {
    Reconstruction rec;
    rec.solver_id = SolverId::learned_linear;
    rec.values = *map * f;
    return rec;
  };
  op.linear_map = [map]() { return map.get(); };
  op.vjp = [map](const VectorXd&, const VectorXd& gbar) -> VectorXd {
    return map->transpose() * gbar;
  };
  return op;
}

inline ReconOp make_pnp_op(const LinearOperator& a, const Denoiser& denoiser, double tau,
                           int iterations, VectorXd u0) {
  auto start = std::make_shared<VectorXd>(std::move(u0));
  ReconOp op;
  op.name = "pnp-pgd(" + denoiser.name + ")";
  op.solver_id = SolverId::pnp_pgd;
  op.apply = [=](const VectorXd& f) { return pnp_pgd(a, f, denoiser, tau, iterations, *start); };
  return op;
}

/// PnP proximal gradient with the exact 1D TV prox as denoiser, set up so the
/// unrolled-adjoint backend works: the prox is locally a segment-averaging
/// map, so reverse accumulation only needs the plateau structure of each
/// forward iterate. `init` is an optional linear warm start u0 = init * f
/// (e.g. the Tikhonov reconstruction matrix); without it u0 = 0.
inline ReconOp make_pnp_tv_op(const LinearOperator& a, double alpha, double tau, int iterations,
                              std::shared_ptr<const MatrixXd> init = nullptr) {
  struct State {
    LinearOperator a;
    double lambda;
    double tau;
    int iterations;
    std::shared_ptr<const MatrixXd> init;

    // segments[k]: start index of each plateau of iterate u^{k+1}
    VectorXd forward(const VectorXd& f, std::vector<std::vector<Index>>* segments) const {
      VectorXd u = init ? VectorXd(*init * f) : VectorXd::Zero(a.cols());
      for (int k = 0; k < iterations; ++k) {
        const VectorXd step = u - tau * (a.entries().transpose() * (a.entries() * u - f));
        u = tv_prox_1d(step, lambda);
        if (segments) {
          std::vector<Index> starts = {0};
          for (Index i = 1; i < u.size(); ++i)
            if (u(i) != u(i - 1)) starts.push_back(i);
          segments->push_back(std::move(starts));
        }
      }
      return u;
    }

    static VectorXd segment_average(const VectorXd& g, const std::vector<Index>& starts) {
      VectorXd out(g.size());
      for (std::size_t s = 0; s < starts.size(); ++s) {
        const Index lo = starts[s];
        const Index hi = s + 1 < starts.size() ? starts[s + 1] : g.size();
        out.segment(lo, hi - lo).setConstant(g.segment(lo, hi - lo).mean());
      }
      return out;
    }

    VectorXd vjp(const VectorXd& f, const VectorXd& gbar) const {
      std::vector<std::vector<Index>> segments;
      (void)forward(f, &segments);
      VectorXd ubar = gbar;
      VectorXd fbar = VectorXd::Zero(a.rows());
      for (int k = iterations - 1; k >= 0; --k) {
        const VectorXd vbar = segment_average(ubar, segments[static_cast<std::size_t>(k)]);
        const VectorXd avbar = a.entries() * vbar;
        fbar += tau * avbar;
        ubar = vbar - tau * (a.entries().transpose() * avbar);
      }
      if (init) fbar += init->transpose() * ubar;
      return fbar;
    }
  };

  auto state = std::make_shared<State>(State{a, alpha * tau, tau, iterations, std::move(init)});
  ReconOp op;
  op.name = "pnp-pgd(tv-prox)";
  op.solver_id = SolverId::pnp_pgd;
  op.apply = [state](const VectorXd& f) {
    Reconstruction rec;
    rec.solver_id = SolverId::pnp_pgd;
    rec.regularization_strength = state->lambda / state->tau;
    rec.values = state->forward(f, nullptr);
    rec.diagnostics.iterations = state->iterations;
    return rec;
  };
  op.vjp = [state](const VectorXd& f, const VectorXd& gbar) { return state->vjp(f, gbar); };
  return op;
}

inline GradientBackend compatible_backend(const ReconOp& op, GradientBackend requested) {
  if (requested == GradientBackend::closed_form && !op.linear_map)
    requested = GradientBackend::unrolled_adjoint;
  if (requested == GradientBackend::unrolled_adjoint && !op.vjp)
    requested = GradientBackend::finite_difference;
  return requested;
}

namespace detail {

inline double attack_objective(const ReconOp& g, const VectorXd& f, const VectorXd& delta,
                               const VectorXd& target) {
  return (g.apply(f + delta).values - target).norm();
}

}  // namespace detail

/// Gradient of ||G(f + delta) - target||_2 with respect to delta.
/// A zero residual is a nondifferentiable point; the zero vector is returned
/// and `zero_residual`, when given, is set.
inline VectorXd attack_gradient(const ReconOp& g, const VectorXd& f, const VectorXd& delta,
                                const VectorXd& target, GradientBackend backend,
                                bool* zero_residual = nullptr) {
  if (zero_residual) *zero_residual = false;
  const VectorXd point = f + delta;
  switch (backend) {
    case GradientBackend::closed_form: {
      if (!g.linear_map)
        throw backend_error("attack_gradient: closed-form backend unavailable for " + g.name);
      const MatrixXd& m = *g.linear_map();
      const VectorXd r = m * point - target;
      const double rnorm = r.norm();
      if (rnorm == 0.0) {
        if (zero_residual) *zero_residual = true;
        return VectorXd::Zero(f.size());
      }
      return m.transpose() * (r / rnorm);
    }
    case GradientBackend::unrolled_adjoint: {
      if (!g.vjp)
        throw backend_error("attack_gradient: unrolled-adjoint backend unavailable for " + g.name);
      const VectorXd r = g.apply(point).values - target;
      const double rnorm = r.norm();
      if (rnorm == 0.0) {
        if (zero_residual) *zero_residual = true;
        return VectorXd::Zero(f.size());
      }
      return g.vjp(point, r / rnorm);
    }
    case GradientBackend::finite_difference: {
      const double h = 1e-5 * (1.0 + point.cwiseAbs().maxCoeff());
      VectorXd grad(f.size());
      VectorXd d = delta;
      for (Index i = 0; i < f.size(); ++i) {
        d(i) = delta(i) + h;
        const double plus = detail::attack_objective(g, f, d, target);
        d(i) = delta(i) - h;
        const double minus = detail::attack_objective(g, f, d, target);
        d(i) = delta(i);
        grad(i) = (plus - minus) / (2.0 * h);
      }
      if (grad.norm() == 0.0 && zero_residual) *zero_residual = true;
      return grad;
    }
  }
  throw parameter_error("attack_gradient: unknown backend");
}

namespace detail {

inline VectorXd resolve_target(const ReconOp& g, const VectorXd& f,
                               const std::optional<VectorXd>& u_gt, const AttackConfig& config) {
  if (config.objective == AttackObjective::deviation_from_ground_truth) {
    if (!u_gt)
      throw parameter_error("attack: deviation-from-ground-truth objective requires u_gt");
    return *u_gt;
  }
  return g.apply(f).values;
}

// The deviation-from-clean objective has gradient 0/0 at delta = 0; probe a
// tiny seeded offset so the sign pattern is defined without changing the
// attack at first order.
inline VectorXd gradient_with_probe(const ReconOp& g, const VectorXd& f, const VectorXd& delta,
                                    const VectorXd& target, const AttackConfig& config,
                                    std::uint64_t probe_seed) {
  bool zero_residual = false;
  VectorXd grad = attack_gradient(g, f, delta, target, config.backend, &zero_residual);
  if (zero_residual && config.epsilon > 0.0) {
    Rng rng(probe_seed);
    VectorXd probe = delta;
    const double magnitude = 1e-6 * config.epsilon;
    for (Index i = 0; i < probe.size(); ++i) probe(i) += magnitude * rng.uniform(-1.0, 1.0);
    grad = attack_gradient(g, f, probe, target, config.backend, &zero_residual);
  }
  return grad;
}

inline void finalize(AttackResult& result, const ReconOp& g, const LinearOperator& a,
                     const VectorXd& f, const VectorXd& target, const AttackConfig& config) {
  result.f_adv = f + result.delta;
  result.reconstruction_adv = g.apply(result.f_adv);
  result.objective_value = (result.reconstruction_adv.values - target).norm();
  result.measurement_consistency =
      (a.apply(result.reconstruction_adv.values) - result.f_adv).squaredNorm();
  result.backend_used = config.backend;
}

}  // namespace detail

/// Single sign step: delta = epsilon * sign(grad objective at delta = 0).
inline AttackResult fgsm(const ReconOp& g, const LinearOperator& a, const VectorXd& f,
                         const std::optional<VectorXd>& u_gt, const AttackConfig& config) {
  config.validate();
  const VectorXd target = detail::resolve_target(g, f, u_gt, config);
  AttackResult result;
  if (config.epsilon == 0.0) {
    result.delta = VectorXd::Zero(f.size());
  } else {
    const VectorXd grad =
        detail::gradient_with_probe(g, f, VectorXd::Zero(f.size()), target, config, config.seed);
    result.delta = config.epsilon * grad.array().sign().matrix();
  }
  detail::finalize(result, g, a, f, target, config);
  result.objective_trace = {result.objective_value};
  return result;
}

/// Iterated sign steps with per-step clipping to the l-inf ball. Candidate
/// starting points are 0, the FGSM point, and `restarts` uniform draws; the
/// best delta seen anywhere along any trajectory is returned, so the PGD
/// objective dominates FGSM whenever the FGSM point is among the starts.
inline AttackResult pgd(const ReconOp& g, const LinearOperator& a, const VectorXd& f,
                        const std::optional<VectorXd>& u_gt, const AttackConfig& config) {
  config.validate();
  const VectorXd target = detail::resolve_target(g, f, u_gt, config);
  const Index m = f.size();

  AttackResult result;
  if (config.epsilon == 0.0) {
    result.delta = VectorXd::Zero(m);
    detail::finalize(result, g, a, f, target, config);
    result.objective_trace = {result.objective_value};
    return result;
  }

  std::vector<VectorXd> starts;
  starts.push_back(VectorXd::Zero(m));
  {
    const VectorXd grad =
        detail::gradient_with_probe(g, f, VectorXd::Zero(m), target, config, config.seed);
    starts.push_back(config.epsilon * grad.array().sign().matrix());
  }
  for (int r = 0; r < config.restarts; ++r) {
    Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r + 1));
    VectorXd draw(m);
    for (Index i = 0; i < m; ++i) draw(i) = rng.uniform(-config.epsilon, config.epsilon);
    starts.push_back(std::move(draw));
  }

  const double step = config.effective_step();
  VectorXd best_delta = starts.front();
  double best_value = -1.0;
  std::vector<double> trace;

  for (std::size_t c = 0; c < starts.size(); ++c) {
    VectorXd delta = starts[c];
    double current = detail::attack_objective(g, f, delta, target);
    if (current > best_value) {
      best_value = current;
      best_delta = delta;
    }
    if (c == 0) trace.push_back(config.monotone_acceptance ? best_value : current);
    for (int t = 0; t < config.steps; ++t) {
      const VectorXd grad = detail::gradient_with_probe(
          g, f, delta, target, config, config.seed + 1000003ULL * static_cast<std::uint64_t>(t));
      VectorXd candidate =
          (delta + step * grad.array().sign().matrix())
              .cwiseMax(-config.epsilon)
              .cwiseMin(config.epsilon);
      const double value = detail::attack_objective(g, f, candidate, target);
      if (config.monotone_acceptance && value < current) {
        // keep the previous iterate; the trajectory has stalled
        if (c == 0) trace.push_back(current);
        break;
      }
      delta = std::move(candidate);
      current = value;
      if (current > best_value) {
        best_value = current;
        best_delta = delta;
      }
      if (c == 0) trace.push_back(config.monotone_acceptance ? best_value : current);
    }
  }

  result.delta = best_delta;
  detail::finalize(result, g, a, f, target, config);
  result.objective_trace = std::move(trace);
  return result;
}

}  // namespace invr
