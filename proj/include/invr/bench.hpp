#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "invr/attacks.hpp"
#include "invr/io.hpp"
#include "invr/signals.hpp"
#include "invr/solvers.hpp"
#include "invr/stability.hpp"

namespace invr {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kDatasetFormatVersion = 1;

using nlohmann::ordered_json;

struct BenchConfig {
  Index n = 1024;
  Index m = 512;
  double operator_mean = 0.0;
  double operator_variance = 0.05;
  double noise_std = 0.03;
  int train_count = 8192;
  int validation_count = 8;
  int test_count = 100;
  std::pair<int, int> jump_count_range{1, 10};
  std::pair<double, double> height_range{-1.0, 1.0};

  double tikhonov_alpha_small = 1e-7;
  double tikhonov_alpha_large = 1e2;
  std::vector<double> tv_alpha_grid;  // empty = 20 log-spaced points in [1e-4, 1e2]
  double learned_ridge = 1e-3;
  int pnp_iterations = 400;
  SolverParams solver_params;
  AttackConfig attack;

  struct Seeds {
    std::uint64_t operator_seed = 1;
    std::uint64_t signal_base = 1000;
    std::uint64_t noise_base = 2000;
    std::uint64_t attack = 3000;
    std::uint64_t gaussian_base = 4000;
  } seeds;

  std::vector<std::string> solvers = {"tikhonov-small", "tikhonov-large", "tv-admm",
                                      "learned-linear", "pnp-pgd"};
  std::string output_dir = "bench_out";
  std::vector<std::string> formats = {"csv", "json"};
  int workers = 0;  // 0 = hardware concurrency

  std::vector<double> alpha_grid() const {
    if (!tv_alpha_grid.empty()) return tv_alpha_grid;
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i)
      grid.push_back(std::pow(10.0, -4.0 + 6.0 * static_cast<double>(i) / 19.0));
    return grid;
  }

  void validate() const {
    if (n < 2 || m < 1) throw parameter_error("config: invalid dimensions");
    if (operator_variance <= 0.0) throw parameter_error("config: variance must be > 0");
    if (noise_std < 0.0) throw parameter_error("config: noise_std must be >= 0");
    if (test_count < 1) throw parameter_error("config: test_count must be >= 1");
    if (validation_count < 1) throw parameter_error("config: validation_count must be >= 1");
    if (train_count < 1) throw parameter_error("config: train_count must be >= 1");
    attack.validate();
    solver_params.validate();
    static const std::vector<std::string> known = {"tikhonov-small", "tikhonov-large", "tv-admm",
                                                   "learned-linear", "pnp-pgd", "spectral"};
    for (const auto& s : solvers)
      if (std::find(known.begin(), known.end(), s) == known.end())
        throw parameter_error("config: unknown solver '" + s + "'");
  }
};

inline ordered_json config_to_json(const BenchConfig& c) {
  ordered_json j;
  j["n"] = c.n;
  j["m"] = c.m;
  j["operator"] = {{"mean", c.operator_mean}, {"variance", c.operator_variance}};
  j["noise_std"] = c.noise_std;
  j["dataset"] = {{"train", c.train_count},
                  {"validation", c.validation_count},
                  {"test", c.test_count},
                  {"jump_count_range", {c.jump_count_range.first, c.jump_count_range.second}},
                  {"height_range", {c.height_range.first, c.height_range.second}}};
  j["solvers"] = c.solvers;
  j["tikhonov"] = {{"alpha_small", c.tikhonov_alpha_small}, {"alpha_large", c.tikhonov_alpha_large}};
  j["tv_alpha_grid"] = c.tv_alpha_grid;
  j["learned_ridge"] = c.learned_ridge;
  j["pnp_iterations"] = c.pnp_iterations;
  j["solver_params"] = {{"admm_penalty", c.solver_params.admm_penalty},
                        {"max_iterations", c.solver_params.max_iterations},
                        {"primal_tolerance", c.solver_params.primal_tolerance},
                        {"dual_tolerance", c.solver_params.dual_tolerance},
                        {"absolute_tolerance", c.solver_params.absolute_tolerance}};
  j["attack"] = {{"epsilon", c.attack.epsilon},
                 {"step_size", c.attack.step_size},
                 {"steps", c.attack.steps},
                 {"restarts", c.attack.restarts},
                 {"objective", objective_name(c.attack.objective)},
                 {"backend", backend_name(c.attack.backend)},
                 {"seed", c.attack.seed}};
  j["seeds"] = {{"operator", c.seeds.operator_seed},
                {"signal_base", c.seeds.signal_base},
                {"noise_base", c.seeds.noise_base},
                {"attack", c.seeds.attack},
                {"gaussian_base", c.seeds.gaussian_base}};
  j["output_dir"] = c.output_dir;
  j["formats"] = c.formats;
  j["workers"] = c.workers;
  return j;
}

inline BenchConfig config_from_json(const nlohmann::json& j) {
  BenchConfig c;
  if (j.contains("n")) c.n = j["n"];
  if (j.contains("m")) c.m = j["m"];
  if (j.contains("operator")) {
    c.operator_mean = j["operator"].value("mean", c.operator_mean);
    c.operator_variance = j["operator"].value("variance", c.operator_variance);
  }
  if (j.contains("noise_std")) c.noise_std = j["noise_std"];
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    c.train_count = d.value("train", c.train_count);
    c.validation_count = d.value("validation", c.validation_count);
    c.test_count = d.value("test", c.test_count);
    if (d.contains("jump_count_range"))
      c.jump_count_range = {d["jump_count_range"][0], d["jump_count_range"][1]};
    if (d.contains("height_range"))
      c.height_range = {d["height_range"][0], d["height_range"][1]};
  }
  if (j.contains("solvers")) c.solvers = j["solvers"].get<std::vector<std::string>>();
  if (j.contains("tikhonov")) {
    c.tikhonov_alpha_small = j["tikhonov"].value("alpha_small", c.tikhonov_alpha_small);
    c.tikhonov_alpha_large = j["tikhonov"].value("alpha_large", c.tikhonov_alpha_large);
  }
  if (j.contains("tv_alpha_grid")) c.tv_alpha_grid = j["tv_alpha_grid"].get<std::vector<double>>();
  if (j.contains("learned_ridge")) c.learned_ridge = j["learned_ridge"];
  if (j.contains("pnp_iterations")) c.pnp_iterations = j["pnp_iterations"];
  if (j.contains("solver_params")) {
    const auto& p = j["solver_params"];
    c.solver_params.admm_penalty = p.value("admm_penalty", c.solver_params.admm_penalty);
    c.solver_params.max_iterations = p.value("max_iterations", c.solver_params.max_iterations);
    c.solver_params.primal_tolerance = p.value("primal_tolerance", c.solver_params.primal_tolerance);
    c.solver_params.dual_tolerance = p.value("dual_tolerance", c.solver_params.dual_tolerance);
    c.solver_params.absolute_tolerance =
        p.value("absolute_tolerance", c.solver_params.absolute_tolerance);
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    c.attack.epsilon = a.value("epsilon", c.attack.epsilon);
    c.attack.step_size = a.value("step_size", c.attack.step_size);
    c.attack.steps = a.value("steps", c.attack.steps);
    c.attack.restarts = a.value("restarts", c.attack.restarts);
    if (a.contains("objective"))
      c.attack.objective = a["objective"] == "deviation-from-clean"
                               ? AttackObjective::deviation_from_clean
                               : AttackObjective::deviation_from_ground_truth;
    if (a.contains("backend")) {
      const std::string b = a["backend"];
      c.attack.backend = b == "finite-difference" ? GradientBackend::finite_difference
                         : b == "unrolled-adjoint" ? GradientBackend::unrolled_adjoint
                                                   : GradientBackend::closed_form;
    }
    c.attack.seed = a.value("seed", c.attack.seed);
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    c.seeds.operator_seed = s.value("operator", c.seeds.operator_seed);
    c.seeds.signal_base = s.value("signal_base", c.seeds.signal_base);
    c.seeds.noise_base = s.value("noise_base", c.seeds.noise_base);
    c.seeds.attack = s.value("attack", c.seeds.attack);
    c.seeds.gaussian_base = s.value("gaussian_base", c.seeds.gaussian_base);
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"];
  if (j.contains("formats")) c.formats = j["formats"].get<std::vector<std::string>>();
  if (j.contains("workers")) c.workers = j["workers"];
  return c;
}

/// Order-preserving parallel map over [0, count): results land at their own
/// index, workers share only immutable inputs.
inline void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (workers <= 0)
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::vector<Instance> make_instances(const BenchConfig& c, const LinearOperator& a,
                                            int count, std::uint64_t signal_base,
                                            std::uint64_t noise_base) {
  std::vector<Instance> instances(static_cast<std::size_t>(count));
  parallel_for(count, c.workers, [&](int i) {
    const auto idx = static_cast<std::uint64_t>(i);
    Signal sig = generate_signal(c.n, c.jump_count_range, c.height_range, signal_base + idx);
    Measurement meas = measure(a, sig, c.noise_std, noise_base + idx);
    instances[static_cast<std::size_t>(i)] = {std::move(sig), std::move(meas)};
  });
  return instances;
}

struct GridSearchResult {
  double chosen_alpha = 0.0;
  std::vector<std::pair<double, double>> scores;  // (alpha, mean squared error)
};

/// Arg-min of mean ||u_hat - u_gt||^2 over the grid; ties break toward the
/// larger alpha (more regularization, more robustness).
inline GridSearchResult grid_search_alpha(
    const std::function<Reconstruction(double alpha, const VectorXd& f)>& solve,
    const std::vector<double>& grid, const std::vector<Instance>& validation) {
  if (grid.empty() || validation.empty())
    throw parameter_error("grid_search_alpha: empty grid or validation set");
  GridSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  int failures = 0;
  std::string failure_log;
  for (double alpha : grid) {
    double total = 0.0;
    bool failed = false;
    for (const auto& instance : validation) {
      try {
        const Reconstruction rec = solve(alpha, instance.measurement.values);
        total += (rec.values - instance.signal.values).squaredNorm();
      } catch (const std::exception& e) {
        failed = true;
        ++failures;
        failure_log += "alpha=" + std::to_string(alpha) + ": " + e.what() + "; ";
        break;
      }
    }
    if (failed) continue;
    const double score = total / static_cast<double>(validation.size());
    result.scores.emplace_back(alpha, score);
    if (score < best || (score == best && alpha > result.chosen_alpha)) {
      best = score;
      result.chosen_alpha = alpha;
    }
  }
  if (result.scores.empty())
    throw compute_error("grid_search_alpha: every solve failed: " + failure_log);
  return result;
}

struct BoundScatter {
  std::string solver;
  std::string perturbation;  // "gaussian" or "adversarial"
  std::vector<StabilityReport> reports;

  int violations() const {
    int v = 0;
    for (const auto& r : reports) v += r.violated ? 1 : 0;
    return v;
  }
};

struct BenchResults {
  MetricsTable metrics;
  std::vector<std::string> solver_names;
  GridSearchResult tv_grid;
  double tv_alpha = 0.0;
  std::vector<BoundScatter> scatters;  // same-regularizer bound checks
  BoundScatter cross_regularizer;      // Tikhonov(large) bound on TV pairs
  ordered_json manifest;
};

namespace detail {

/// Gaussian perturbation rescaled to a target l2 norm, for like-for-like
/// comparison with an adversarial delta.
inline VectorXd gaussian_delta(Index m, double norm, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd delta(m);
  for (Index i = 0; i < m; ++i) delta(i) = rng.gaussian();
  const double dnorm = delta.norm();
  if (dnorm > 0.0 && norm > 0.0) delta *= norm / dnorm;
  return delta;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "solver";
  for (const auto& label : MetricsRow::metric_labels()) out << ',' << label;
  out << '\n';
  for (const auto& row : rows) {
    out << detail::csv_escape(row.solver);
    for (double v : row.metrics()) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

inline ordered_json metrics_json(const MetricsTable& table) {
  ordered_json j;
  auto row_json = [](const MetricsRow& row) {
    ordered_json r;
    r["solver"] = row.solver;
    const auto& labels = MetricsRow::metric_labels();
    const auto values = row.metrics();
    for (std::size_t i = 0; i < labels.size(); ++i) r[labels[i]] = values[i];
    return r;
  };
  j["mean"] = ordered_json::array();
  for (const auto& row : table.mean) j["mean"].push_back(row_json(row));
  j["median"] = ordered_json::array();
  for (const auto& row : table.median) j["median"].push_back(row_json(row));
  j["per_instance"] = ordered_json::array();
  for (const auto& solver_rows : table.per_instance) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : solver_rows) rows.push_back(row_json(row));
    j["per_instance"].push_back(rows);
  }
  return j;
}

/// Two whitespace-separated columns (lhs, data_term + bregman) per pair,
/// with gnuplot-style comment headers. The worst-case bound (1/2) m eps^2
/// is included in the header so either dashed-line convention can be drawn.
inline std::string scatter_data(const BoundScatter& scatter, Index m, double epsilon) {
  std::ostringstream out;
  out << "# solver: " << scatter.solver << "\n";
  out << "# perturbation: " << scatter.perturbation << "\n";
  out << "# worst_case_lhs: " << format_double(0.5 * static_cast<double>(m) * epsilon * epsilon)
      << "\n";
  out << "# columns: lhs data_term_plus_bregman\n";
  for (const auto& r : scatter.reports)
    out << format_double(r.lhs) << ' ' << format_double(r.data_term + r.bregman) << '\n';
  return out.str();
}

inline std::string summary_markdown(const BenchResults& results) {
  std::ostringstream out;
  out << "# Benchmark summary\n\n";
  out << "TV alpha (grid search): " << format_double(results.tv_alpha) << "\n\n";
  out << "## Metrics (mean over instances)\n\n";
  out << "| solver |";
  for (const auto& label : MetricsRow::metric_labels()) out << ' ' << label << " |";
  out << "\n|";
  for (std::size_t i = 0; i < MetricsRow::metric_labels().size() + 1; ++i) out << "---|";
  out << "\n";
  for (const auto& row : results.metrics.mean) {
    out << "| " << row.solver << " |";
    for (double v : row.metrics()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4g", v);
      out << ' ' << buf << " |";
    }
    out << "\n";
  }
  out << "\n## Stability bound\n\n";
  for (const auto& s : results.scatters)
    out << "- " << s.solver << " / " << s.perturbation << ": " << s.violations() << " violations / "
        << s.reports.size() << " pairs\n";
  out << "- cross-regularizer (" << results.cross_regularizer.solver << " on TV pairs): "
      << results.cross_regularizer.violations() << " violations / "
      << results.cross_regularizer.reports.size() << " pairs\n";
  return out.str();
}

inline void emit_report(const BenchResults& results, const BenchConfig& config,
                        const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const bool csv = std::find(config.formats.begin(), config.formats.end(), "csv") !=
                   config.formats.end();
  const bool json = std::find(config.formats.begin(), config.formats.end(), "json") !=
                    config.formats.end();
  if (csv) {
    write_text(out_dir / "metrics_mean.csv", metrics_csv(results.metrics.mean));
    write_text(out_dir / "metrics_median.csv", metrics_csv(results.metrics.median));
  }
  if (json) write_text(out_dir / "metrics.json", metrics_json(results.metrics).dump(2) + "\n");
  for (const auto& scatter : results.scatters) {
    std::string name = scatter.solver + "_" + scatter.perturbation;
    for (auto& ch : name)
      if (ch == '(' || ch == ')' || ch == '=' || ch == ' ' || ch == ',') ch = '-';
    write_text(out_dir / ("bound_" + name + ".dat"),
               scatter_data(scatter, config.m, config.attack.epsilon));
  }
  if (!results.cross_regularizer.reports.empty())
    write_text(out_dir / "bound_cross_regularizer.dat",
               scatter_data(results.cross_regularizer, config.m, config.attack.epsilon));
  write_text(out_dir / "summary.md", summary_markdown(results));
  write_text(out_dir / "manifest.json", results.manifest.dump(2) + "\n");
}

/// Full benchmark: dataset generation, TV grid search, clean + Gaussian +
/// adversarial evaluation of every configured solver, bound verification,
/// and report emission. Deterministic in the config's seed record.
inline BenchResults run_benchmark(const BenchConfig& config) {
  namespace chrono = std::chrono;
  config.validate();
  BenchResults results;
  ordered_json stage_times;
  auto timed = [&stage_times](const std::string& name, const std::function<void()>& stage) {
    const auto start = chrono::steady_clock::now();
    stage();
    stage_times[name] =
        chrono::duration<double>(chrono::steady_clock::now() - start).count();
  };

  const LinearOperator a = generate_operator(config.m, config.n, config.operator_mean,
                                             config.operator_variance, config.seeds.operator_seed);
  const LinearOperator d = finite_difference_matrix(config.n);

  std::vector<Instance> validation, test;
  std::vector<std::pair<Signal, Measurement>> train;
  timed("generate", [&] {
    validation = make_instances(config, a, config.validation_count, config.seeds.signal_base,
                                config.seeds.noise_base);
    test = make_instances(config, a, config.test_count,
                          config.seeds.signal_base + 100000, config.seeds.noise_base + 100000);
    const bool needs_train = std::find(config.solvers.begin(), config.solvers.end(),
                                       "learned-linear") != config.solvers.end();
    if (needs_train) {
      train.resize(static_cast<std::size_t>(config.train_count));
      parallel_for(config.train_count, config.workers, [&](int i) {
        const auto idx = static_cast<std::uint64_t>(i);
        Signal sig = generate_signal(config.n, config.jump_count_range, config.height_range,
                                     config.seeds.signal_base + 200000 + idx);
        Measurement meas = measure(a, sig, config.noise_std, config.seeds.noise_base + 200000 + idx);
        train[static_cast<std::size_t>(i)] = {std::move(sig), std::move(meas)};
      });
    }
  });

  const bool wants_tv = std::find(config.solvers.begin(), config.solvers.end(), "tv-admm") !=
                        config.solvers.end();
  const bool wants_pnp = std::find(config.solvers.begin(), config.solvers.end(), "pnp-pgd") !=
                         config.solvers.end();
  results.tv_alpha = 0.0;
  if (wants_tv || wants_pnp) {
    timed("grid_search", [&] {
      results.tv_grid = grid_search_alpha(
          [&](double alpha, const VectorXd& f) {
            return tv_admm(a, f, alpha, config.solver_params);
          },
          config.alpha_grid(), validation);
      results.tv_alpha = results.tv_grid.chosen_alpha;
    });
  }

  std::vector<ReconOp> ops;
  std::shared_ptr<TikhonovOperator> tik_small;
  timed("build_solvers", [&] {
    for (const auto& name : config.solvers) {
      if (name == "tikhonov-small") {
        ops.push_back(make_tikhonov_op(a, d, config.tikhonov_alpha_small));
      } else if (name == "tikhonov-large") {
        ops.push_back(make_tikhonov_op(a, d, config.tikhonov_alpha_large));
      } else if (name == "tv-admm") {
        SolverParams p = config.solver_params;
        p.alpha = results.tv_alpha;
        ops.push_back(make_tv_op(a, results.tv_alpha, p));
      } else if (name == "learned-linear") {
        ops.push_back(make_learned_linear_op(learned_linear_fit(train, config.learned_ridge)));
      } else if (name == "pnp-pgd") {
        const double sigma_max = a.svd().singular_values(0);
        const double tau = 1.9 / (sigma_max * sigma_max);
        if (!tik_small)
          tik_small = std::make_shared<TikhonovOperator>(a, d, config.tikhonov_alpha_small);
        auto init = std::make_shared<const MatrixXd>(tik_small->matrix());
        ops.push_back(
            make_pnp_tv_op(a, results.tv_alpha > 0.0 ? results.tv_alpha : 0.1, tau,
                           config.pnp_iterations, init));
      } else if (name == "spectral") {
        std::vector<std::pair<VectorXd, VectorXd>> pairs;
        for (const auto& inst : validation)
          pairs.emplace_back(inst.signal.values, inst.measurement.values);
        const SpectralFilter filter = fit_spectral_filter(pairs, a);
        ReconOp op;
        op.name = "spectral(fitted)";
        op.solver_id = SolverId::spectral;
        op.apply = [a, filter](const VectorXd& f) {
          Reconstruction rec;
          rec.solver_id = SolverId::spectral;
          rec.values = spectral_reconstruct(a, f, filter);
          return rec;
        };
        ops.push_back(std::move(op));
      }
    }
  });
  results.solver_names.clear();
  for (const auto& op : ops) results.solver_names.push_back(op.name);

  AttackConfig attack = config.attack;
  attack.seed = config.seeds.attack;

  timed("metrics", [&] { results.metrics = metrics_table(test, ops, a, d, attack); });

  timed("stability", [&] {
    // same-regularizer bound checks for the variational solvers
    std::vector<const ReconOp*> variational;
    for (const auto& op : ops)
      if (op.solver_id == SolverId::tikhonov || op.solver_id == SolverId::tv_admm)
        variational.push_back(&op);
    std::vector<Reconstruction> tv_clean, tv_adv;  // reused for the cross check
    std::vector<VectorXd> tv_f_adv;
    for (const ReconOp* op : variational) {
      BoundScatter adv_scatter{op->name, "adversarial", {}};
      BoundScatter gauss_scatter{op->name, "gaussian", {}};
      adv_scatter.reports.resize(test.size());
      gauss_scatter.reports.resize(test.size());
      std::vector<Reconstruction> clean_store(test.size()), adv_store(test.size());
      std::vector<VectorXd> f_adv_store(test.size());
      parallel_for(static_cast<int>(test.size()), config.workers, [&](int i) {
        const auto& inst = test[static_cast<std::size_t>(i)];
        const VectorXd& f1 = inst.measurement.values;
        const Reconstruction r1 = op->apply(f1);
        AttackConfig cfg = attack;
        cfg.backend = compatible_backend(*op, cfg.backend);
        const AttackResult atk = fgsm(*op, a, f1, inst.signal.values, cfg);
        const VectorXd delta_gauss = detail::gaussian_delta(
            config.m, atk.delta.norm(),
            config.seeds.gaussian_base + static_cast<std::uint64_t>(i));
        const VectorXd f2g = f1 + delta_gauss;
        const Reconstruction r2g = op->apply(f2g);
        const std::string tag = op->name + "#" + std::to_string(i);
        auto adv = verify_stability_bound(a, f1, atk.f_adv, r1, atk.reconstruction_adv);
        adv.pair_provenance = tag + "/adversarial";
        auto gauss = verify_stability_bound(a, f1, f2g, r1, r2g);
        gauss.pair_provenance = tag + "/gaussian";
        adv_scatter.reports[static_cast<std::size_t>(i)] = std::move(adv);
        gauss_scatter.reports[static_cast<std::size_t>(i)] = std::move(gauss);
        clean_store[static_cast<std::size_t>(i)] = r1;
        adv_store[static_cast<std::size_t>(i)] = atk.reconstruction_adv;
        f_adv_store[static_cast<std::size_t>(i)] = atk.f_adv;
      });
      if (op->solver_id == SolverId::tv_admm) {
        tv_clean = clean_store;
        tv_adv = adv_store;
        tv_f_adv = f_adv_store;
      }
      results.scatters.push_back(std::move(adv_scatter));
      results.scatters.push_back(std::move(gauss_scatter));
    }
    // Tikhonov(alpha_large) bound quantities evaluated on TV reconstructions
    if (!tv_clean.empty()) {
      results.cross_regularizer.solver =
          "tikhonov(alpha=" + detail::alpha_tag(config.tikhonov_alpha_large) + ")";
      results.cross_regularizer.perturbation = "adversarial";
      const BoundSpec spec{config.tikhonov_alpha_large, &d};
      for (std::size_t i = 0; i < tv_clean.size(); ++i) {
        const VectorXd& f1 = test[i].measurement.values;
        StabilityReport rep = verify_stability_bound(a, f1, tv_f_adv[i], tv_clean[i], tv_adv[i],
                                                     TolerancePolicy{}, spec);
        rep.pair_provenance = "tv-admm#" + std::to_string(i) + "/cross";
        results.cross_regularizer.reports.push_back(std::move(rep));
      }
    }
  });

  results.manifest["library_version"] = kLibraryVersion;
  results.manifest["format_version"] = kDatasetFormatVersion;
  results.manifest["config"] = config_to_json(config);
  results.manifest["tv_alpha"] = results.tv_alpha;
  results.manifest["stage_seconds"] = stage_times;
  results.manifest["complete"] = true;
  return results;
}

}  // namespace invr
