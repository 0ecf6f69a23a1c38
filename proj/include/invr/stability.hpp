#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invr/attacks.hpp"
#include "invr/errors.hpp"
#include "invr/solvers.hpp"

namespace invr {

struct TolerancePolicy {
  double abs_tol = 1e-6;
  double rel_tol = 1e-8;

  double threshold(double lhs) const { return abs_tol + rel_tol * lhs; }
};

struct StabilityReport {
  double lhs = 0.0;        // 1/2 ||f1 - f2||^2
  double data_term = 0.0;  // 1/2 ||A u1 - A u2||^2
  double bregman = 0.0;    // <p1 - p2, u1 - u2>
  double slack = 0.0;      // lhs - data_term - bregman
  bool violated = false;
  double tolerance_used = 0.0;
  SolverId regularizer_id = SolverId::tikhonov;
  bool mixed_solvers = false;
  std::string pair_provenance;
};

/// Symmetric Bregman distance <p1 - p2, u1 - u2> from solver certificates.
/// For the Tikhonov regularizer R(u) = (alpha/2)||Du||^2 the closed form
/// alpha ||D(u1 - u2)||^2 is computed as a cross-check.
inline double bregman_distance(SolverId regularizer, double alpha, const LinearOperator& d,
                               const VectorXd& u1, const VectorXd& u2, const VectorXd& p1,
                               const VectorXd& p2) {
  if (u1.size() != u2.size() || p1.size() != u1.size() || p2.size() != u1.size())
    throw parameter_error("bregman_distance: dimension mismatch");
  const double value = (p1 - p2).dot(u1 - u2);
  if (regularizer == SolverId::tikhonov) {
    const double closed_form = alpha * (d.apply(u1) - d.apply(u2)).squaredNorm();
    const double scale = std::max({std::abs(value), std::abs(closed_form), 1e-300});
    if (std::abs(value - closed_form) > 1e-9 * scale)
      throw compute_error(
          "bregman_distance: certificate inner product disagrees with the Tikhonov "
          "closed form beyond 1e-9 relative (certificates are not exact gradients)");
  }
  return value;
}

/// Tikhonov gradient alpha D^T D u, the exact subgradient used when bound
/// quantities of one regularizer are evaluated on another solver's output.
inline VectorXd tikhonov_certificate(double alpha, const LinearOperator& d, const VectorXd& u) {
  return alpha * d.apply_adjoint(d.apply(u));
}

/// Regularizer whose bound quantities should be evaluated, when it differs
/// from the solver that produced the reconstructions (the cross-regularizer
/// experiment). Only the Tikhonov form can be recomputed from values alone.
struct BoundSpec {
  double alpha = 0.0;
  const LinearOperator* d = nullptr;
};

inline StabilityReport verify_stability_bound(const LinearOperator& a, const VectorXd& f1,
                                              const VectorXd& f2, const Reconstruction& r1,
                                              const Reconstruction& r2,
                                              const TolerancePolicy& policy = {},
                                              const std::optional<BoundSpec>& cross = {}) {
  if (f1.size() != a.rows() || f2.size() != a.rows())
    throw parameter_error("verify_stability_bound: measurement dimension mismatch");
  StabilityReport report;
  report.mixed_solvers = r1.solver_id != r2.solver_id;
  const VectorXd du = r1.values - r2.values;
  report.lhs = 0.5 * (f1 - f2).squaredNorm();
  report.data_term = 0.5 * (a.apply(r1.values) - a.apply(r2.values)).squaredNorm();
  if (cross) {
    if (!cross->d) throw parameter_error("verify_stability_bound: BoundSpec needs D");
    report.regularizer_id = SolverId::tikhonov;
    const VectorXd p1 = tikhonov_certificate(cross->alpha, *cross->d, r1.values);
    const VectorXd p2 = tikhonov_certificate(cross->alpha, *cross->d, r2.values);
    report.bregman = (p1 - p2).dot(du);
  } else {
    if (!r1.subgradient || !r2.subgradient)
      throw not_applicable_error(
          "verify_stability_bound: missing subgradient certificate (non-variational solver)");
    report.regularizer_id = r1.solver_id;
    report.bregman = (*r1.subgradient - *r2.subgradient).dot(du);
  }
  report.slack = report.lhs - report.data_term - report.bregman;
  report.tolerance_used = policy.threshold(report.lhs);
  report.violated = report.slack < -report.tolerance_used;
  return report;
}

/// One row of the quantitative comparison: every quantity is a squared l2
/// norm except the final Lipschitz ratio.
struct MetricsRow {
  std::string solver;
  double clean_error = 0.0;       // ||u_hat - u_gt||^2
  double adv_error = 0.0;         // ||u_adv - u_gt||^2
  double clean_consistency = 0.0; // ||A u_hat - f||^2
  double adv_consistency = 0.0;   // ||A u_adv - f_adv||^2
  double output_data_gap = 0.0;   // ||A u_hat - A u_adv||^2
  double smoothness_gap = 0.0;    // ||D u_hat - D u_adv||^2
  double output_gap = 0.0;        // ||u_hat - u_adv||^2
  double input_gap = 0.0;         // ||f - f_adv||^2
  double lipschitz_ratio = 0.0;   // output_gap / input_gap

  static const std::vector<std::string>& metric_labels() {
    static const std::vector<std::string> labels = {
        "clean_error",   "adv_error",      "clean_consistency", "adv_consistency",
        "output_data_gap", "smoothness_gap", "output_gap",        "input_gap",
        "lipschitz_ratio"};
    return labels;
  }

  std::vector<double> metrics() const {
    return {clean_error,     adv_error,  clean_consistency, adv_consistency, output_data_gap,
            smoothness_gap, output_gap, input_gap,         lipschitz_ratio};
  }
};

struct Instance {
  Signal signal;
  Measurement measurement;
};

struct MetricsTable {
  std::vector<MetricsRow> mean;
  std::vector<MetricsRow> median;
  // per_instance[s][i]: solver s on instance i
  std::vector<std::vector<MetricsRow>> per_instance;
};

namespace detail {

inline MetricsRow aggregate_rows(const std::vector<MetricsRow>& rows, bool use_median) {
  MetricsRow out;
  out.solver = rows.front().solver;
  const std::size_t k = MetricsRow::metric_labels().size();
  std::vector<double> agg(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& row : rows) col.push_back(row.metrics()[j]);
    if (use_median) {
      std::sort(col.begin(), col.end());
      const std::size_t n = col.size();
      agg[j] = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    } else {
      for (double v : col) agg[j] += v;
      agg[j] /= static_cast<double>(col.size());
    }
  }
  out.clean_error = agg[0];
  out.adv_error = agg[1];
  out.clean_consistency = agg[2];
  out.adv_consistency = agg[3];
  out.output_data_gap = agg[4];
  out.smoothness_gap = agg[5];
  out.output_gap = agg[6];
  out.input_gap = agg[7];
  out.lipschitz_ratio = agg[8];
  return out;
}

}  // namespace detail

inline MetricsRow evaluate_instance(const ReconOp& op, const LinearOperator& a,
                                    const LinearOperator& d, const Instance& instance,
                                    const AttackConfig& attack_config) {
  const VectorXd& f = instance.measurement.values;
  const VectorXd& u_gt = instance.signal.values;
  const Reconstruction clean = op.apply(f);
  AttackConfig cfg = attack_config;
  cfg.backend = compatible_backend(op, cfg.backend);
  const AttackResult attack = fgsm(op, a, f, u_gt, cfg);
  const VectorXd& u_adv = attack.reconstruction_adv.values;

  MetricsRow row;
  row.solver = op.name;
  row.clean_error = (clean.values - u_gt).squaredNorm();
  row.adv_error = (u_adv - u_gt).squaredNorm();
  row.clean_consistency = (a.apply(clean.values) - f).squaredNorm();
  row.adv_consistency = attack.measurement_consistency;
  row.output_data_gap = (a.apply(clean.values) - a.apply(u_adv)).squaredNorm();
  row.smoothness_gap = (d.apply(clean.values) - d.apply(u_adv)).squaredNorm();
  row.output_gap = (clean.values - u_adv).squaredNorm();
  row.input_gap = (f - attack.f_adv).squaredNorm();
  row.lipschitz_ratio = row.input_gap > 0.0 ? row.output_gap / row.input_gap : 0.0;
  return row;
}

/// Full metrics suite: every solver is attacked with its own method-specific
/// FGSM perturbation on every instance; mean and median are reported next to
/// the per-instance values.
inline MetricsTable metrics_table(const std::vector<Instance>& instances,
                                  const std::vector<ReconOp>& solvers, const LinearOperator& a,
                                  const LinearOperator& d, const AttackConfig& attack_config) {
  if (instances.empty()) throw parameter_error("metrics_table: no instances");
  MetricsTable table;
  for (const auto& op : solvers) {
    std::vector<MetricsRow> rows;
    rows.reserve(instances.size());
    for (const auto& instance : instances)
      rows.push_back(evaluate_instance(op, a, d, instance, attack_config));
    table.mean.push_back(detail::aggregate_rows(rows, false));
    table.median.push_back(detail::aggregate_rows(rows, true));
    table.per_instance.push_back(std::move(rows));
  }
  return table;
}

/// Max over trials of ||G(f + delta) - G(f)|| / ||delta||: a lower bound on
/// the local Lipschitz constant. `source(trial)` supplies the perturbations;
/// zero draws are skipped.
inline double lipschitz_ratio_scan(const std::function<VectorXd(const VectorXd&)>& g,
                                   const VectorXd& f,
                                   const std::function<VectorXd(int)>& source, int trials) {
  if (trials < 1) throw parameter_error("lipschitz_ratio_scan: trials must be >= 1");
  const VectorXd base = g(f);
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    const VectorXd delta = source(t);
    const double dnorm = delta.norm();
    if (dnorm == 0.0) continue;
    best = std::max(best, (g(f + delta) - base).norm() / dnorm);
  }
  return best;
}

}  // namespace invr
