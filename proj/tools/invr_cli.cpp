// Command-line front end for the invr library: dataset generation, single
// reconstructions, adversarial attacks, stability-bound checks, grid search,
// and the full benchmark pipeline.
//
// Exit codes: 0 success, 1 invalid arguments or config, 2 numerical failure,
// 3 file I/O failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "invr/bench.hpp"

namespace fs = std::filesystem;
using namespace invr;

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parameter_error("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

MatrixXd load_matrix(const std::string& path) {
  return read_tensor(path);
}

VectorXd load_vector(const std::string& path) {
  const MatrixXd t = read_tensor(path);
  if (t.cols() != 1 && t.rows() != 1)
    throw parameter_error(path + ": expected a rank-1 tensor");
  return t.cols() == 1 ? VectorXd(t.col(0)) : VectorXd(t.row(0).transpose());
}

struct CommonOpts {
  std::string config_path;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string format = "csv";
};

void add_common(CLI::App* app, CommonOpts& opts) {
  app->add_option("--config", opts.config_path, "JSON config file");
  app->add_option("--out", opts.out, "output directory or file");
  app->add_option("--seed", opts.seed, "base seed override");
  app->add_option("--workers", opts.workers, "worker threads (0 = all cores)");
  app->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

BenchConfig resolve_config(const CommonOpts& opts) {
  BenchConfig config;
  if (!opts.config_path.empty()) config = config_from_json(load_json(opts.config_path));
  if (opts.seed) {
    config.seeds.operator_seed = *opts.seed;
    config.seeds.signal_base = *opts.seed + 1000;
    config.seeds.noise_base = *opts.seed + 2000;
    config.seeds.attack = *opts.seed + 3000;
    config.seeds.gaussian_base = *opts.seed + 4000;
  }
  if (opts.workers > 0) config.workers = opts.workers;
  if (!opts.out.empty() && opts.out != ".") config.output_dir = opts.out;
  config.formats = {opts.format};
  return config;
}

void add_solver_params(CLI::App* app, SolverParams& p) {
  app->add_option("--alpha", p.alpha, "regularization strength");
  app->add_option("--admm-penalty", p.admm_penalty, "initial ADMM penalty rho");
  app->add_option("--max-iterations", p.max_iterations, "iteration cap");
  app->add_option("--primal-tolerance", p.primal_tolerance, "relative primal tolerance");
  app->add_option("--dual-tolerance", p.dual_tolerance, "relative dual tolerance");
  app->add_option("--absolute-tolerance", p.absolute_tolerance, "absolute tolerance floor");
  app->add_option("--step-size", p.step_size, "proximal gradient step (0 = auto)");
  app->add_option("--pnp-iterations", p.pnp_iterations, "plug-and-play iteration count");
}

void add_attack_params(CLI::App* app, AttackConfig& c, std::string& method, std::string& backend,
                       std::string& objective) {
  app->add_option("--epsilon", c.epsilon, "l-inf perturbation budget");
  app->add_option("--step", c.step_size, "attack step size (0 = epsilon / 4)");
  app->add_option("--steps", c.steps, "attack iterations");
  app->add_option("--restarts", c.restarts, "random restarts");
  app->add_option("--attack-seed", c.seed, "attack RNG seed");
  app->add_option("--method", method, "attack method")->check(CLI::IsMember({"fgsm", "pgd"}));
  app->add_option("--backend", backend, "gradient backend")
      ->check(CLI::IsMember({"closed-form", "unrolled-adjoint", "finite-difference"}));
  app->add_option("--objective", objective, "attack target")
      ->check(CLI::IsMember({"ground-truth", "clean"}));
}

GradientBackend parse_backend(const std::string& s) {
  if (s == "closed-form") return GradientBackend::closed_form;
  if (s == "unrolled-adjoint") return GradientBackend::unrolled_adjoint;
  return GradientBackend::finite_difference;
}

ReconOp build_op(const std::string& solver, const LinearOperator& a, const LinearOperator& d,
                 const SolverParams& params) {
  if (solver == "tikhonov") return make_tikhonov_op(a, d, params.alpha);
  if (solver == "tv-admm") return make_tv_op(a, params.alpha, params);
  if (solver == "pnp-pgd") {
    const double sigma_max = a.svd().singular_values(0);
    const double tau = params.step_size > 0.0 ? params.step_size : 1.9 / (sigma_max * sigma_max);
    return make_pnp_tv_op(a, params.alpha, tau, params.pnp_iterations);
  }
  throw parameter_error("unknown solver '" + solver + "'");
}

int cmd_generate(const CommonOpts& common, int count) {
  BenchConfig config = resolve_config(common);
  config.validate();
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const LinearOperator a = generate_operator(config.m, config.n, config.operator_mean,
                                             config.operator_variance, config.seeds.operator_seed);
  write_tensor(dir / "operator.bin", a.entries());
  ordered_json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["rng"] = Rng::algorithm;
  manifest["config"] = config_to_json(config);
  manifest["instances"] = ordered_json::array();
  for (int i = 0; i < count; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const Signal sig = generate_signal(config.n, config.jump_count_range, config.height_range,
                                       config.seeds.signal_base + idx);
    const Measurement meas = measure(a, sig, config.noise_std, config.seeds.noise_base + idx);
    const std::string tag = std::to_string(i);
    write_tensor(dir / ("signal_" + tag + ".bin"), sig.values);
    write_tensor(dir / ("measurement_" + tag + ".bin"), meas.values);
    manifest["instances"].push_back({{"signal_seed", sig.seed},
                                     {"noise_seed", meas.provenance.noise_seed},
                                     {"jumps", sig.jumps.size()},
                                     {"total_variation", sig.total_variation()}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote operator + " << count << " instances to " << dir.string() << "\n";
  return 0;
}

int cmd_reconstruct(const CommonOpts& common, const std::string& solver,
                    const std::string& operator_path, const std::string& measurement_path,
                    const SolverParams& params) {
  const LinearOperator a(load_matrix(operator_path));
  const VectorXd f = load_vector(measurement_path);
  const LinearOperator d = finite_difference_matrix(a.cols());
  const ReconOp op = build_op(solver, a, d, params);
  const Reconstruction rec = op.apply(f);
  const fs::path out = common.out == "." ? fs::path("reconstruction.bin") : fs::path(common.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_tensor(out, rec.values);
  std::cout << "solver=" << op.name << " iterations=" << rec.diagnostics.iterations
            << " data_consistency=" << format_double((a.apply(rec.values) - f).squaredNorm())
            << " -> " << out.string() << "\n";
  return 0;
}

int cmd_attack(const CommonOpts& common, const std::string& solver,
               const std::string& operator_path, const std::string& measurement_path,
               const std::string& signal_path, const SolverParams& params, AttackConfig attack,
               const std::string& method, const std::string& backend,
               const std::string& objective) {
  const LinearOperator a(load_matrix(operator_path));
  const VectorXd f = load_vector(measurement_path);
  const LinearOperator d = finite_difference_matrix(a.cols());
  attack.backend = parse_backend(backend);
  attack.objective = objective == "clean" ? AttackObjective::deviation_from_clean
                                          : AttackObjective::deviation_from_ground_truth;
  std::optional<VectorXd> u_gt;
  if (!signal_path.empty()) u_gt = load_vector(signal_path);
  if (attack.objective == AttackObjective::deviation_from_ground_truth && !u_gt)
    throw parameter_error("attack: --signal is required for the ground-truth objective");
  const ReconOp op = build_op(solver, a, d, params);
  const AttackResult result =
      method == "pgd" ? pgd(op, a, f, u_gt, attack) : fgsm(op, a, f, u_gt, attack);
  const fs::path dir = common.out == "." ? fs::path("attack_out") : fs::path(common.out);
  fs::create_directories(dir);
  write_tensor(dir / "delta.bin", result.delta);
  write_tensor(dir / "measurement_adv.bin", result.f_adv);
  write_tensor(dir / "reconstruction_adv.bin", result.reconstruction_adv.values);
  ordered_json summary;
  summary["solver"] = op.name;
  summary["method"] = method;
  summary["backend"] = backend_name(result.backend_used);
  summary["objective_value"] = result.objective_value;
  summary["measurement_consistency"] = result.measurement_consistency;
  summary["delta_linf"] = result.delta.lpNorm<Eigen::Infinity>();
  summary["input_gap"] = (result.f_adv - f).squaredNorm();
  write_text(dir / "attack.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_verify_bound(const CommonOpts& common, const std::string& solver,
                     const std::string& operator_path, const std::string& f1_path,
                     const std::string& f2_path, const SolverParams& params,
                     double cross_alpha) {
  const LinearOperator a(load_matrix(operator_path));
  const VectorXd f1 = load_vector(f1_path);
  const VectorXd f2 = load_vector(f2_path);
  const LinearOperator d = finite_difference_matrix(a.cols());
  const ReconOp op = build_op(solver, a, d, params);
  const Reconstruction r1 = op.apply(f1);
  const Reconstruction r2 = op.apply(f2);
  std::optional<BoundSpec> cross;
  if (cross_alpha > 0.0) cross = BoundSpec{cross_alpha, &d};
  const StabilityReport report = verify_stability_bound(a, f1, f2, r1, r2, {}, cross);
  ordered_json j;
  j["solver"] = op.name;
  j["lhs"] = report.lhs;
  j["data_term"] = report.data_term;
  j["bregman"] = report.bregman;
  j["slack"] = report.slack;
  j["violated"] = report.violated;
  j["tolerance"] = report.tolerance_used;
  if (cross) j["cross_regularizer_alpha"] = cross_alpha;
  std::cout << j.dump(2) << "\n";
  if (common.out != ".") {
    fs::create_directories(fs::path(common.out));
    write_text(fs::path(common.out) / "bound.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_grid_search(const CommonOpts& common) {
  BenchConfig config = resolve_config(common);
  config.validate();
  const LinearOperator a = generate_operator(config.m, config.n, config.operator_mean,
                                             config.operator_variance, config.seeds.operator_seed);
  const auto validation = make_instances(config, a, config.validation_count,
                                         config.seeds.signal_base, config.seeds.noise_base);
  const GridSearchResult result = grid_search_alpha(
      [&](double alpha, const VectorXd& f) { return tv_admm(a, f, alpha, config.solver_params); },
      config.alpha_grid(), validation);
  ordered_json j;
  j["chosen_alpha"] = result.chosen_alpha;
  j["scores"] = ordered_json::array();
  for (const auto& [alpha, score] : result.scores)
    j["scores"].push_back({{"alpha", alpha}, {"mean_squared_error", score}});
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_run(const CommonOpts& common) {
  BenchConfig config = resolve_config(common);
  const BenchResults results = run_benchmark(config);
  emit_report(results, config, config.output_dir);
  std::cout << "benchmark complete: " << config.output_dir << "\n";
  std::cout << summary_markdown(results);
  return 0;
}

int cmd_report(const CommonOpts& common, const std::string& in_dir) {
  // Re-render the human-readable outputs from a previous run's metrics.json.
  const nlohmann::json j = load_json((fs::path(in_dir) / "metrics.json").string());
  auto rows_from = [](const nlohmann::json& arr) {
    std::vector<MetricsRow> rows;
    for (const auto& r : arr) {
      MetricsRow row;
      row.solver = r.at("solver");
      const auto& labels = MetricsRow::metric_labels();
      std::vector<double> vals;
      for (const auto& label : labels) vals.push_back(r.at(label));
      row.clean_error = vals[0];
      row.adv_error = vals[1];
      row.clean_consistency = vals[2];
      row.adv_consistency = vals[3];
      row.output_data_gap = vals[4];
      row.smoothness_gap = vals[5];
      row.output_gap = vals[6];
      row.input_gap = vals[7];
      row.lipschitz_ratio = vals[8];
      rows.push_back(std::move(row));
    }
    return rows;
  };
  const fs::path out = common.out == "." ? fs::path(in_dir) : fs::path(common.out);
  fs::create_directories(out);
  if (common.format == "csv") {
    write_text(out / "metrics_mean.csv", metrics_csv(rows_from(j.at("mean"))));
    write_text(out / "metrics_median.csv", metrics_csv(rows_from(j.at("median"))));
    std::cout << "wrote metrics_mean.csv and metrics_median.csv to " << out.string() << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1D compressed-sensing reconstruction benchmark"};
  app.require_subcommand(1);

  CommonOpts common;
  SolverParams params;
  AttackConfig attack;
  std::string solver = "tikhonov";
  std::string operator_path, measurement_path, signal_path, f2_path, in_dir = "bench_out";
  std::string method = "fgsm", backend = "closed-form", objective = "ground-truth";
  double cross_alpha = 0.0;
  int count = 4;

  auto* gen = app.add_subcommand("generate", "generate an operator and measurement instances");
  add_common(gen, common);
  gen->add_option("--count", count, "number of instances");

  auto* rec = app.add_subcommand("reconstruct", "solve one inverse problem");
  add_common(rec, common);
  rec->add_option("--solver", solver, "solver")
      ->check(CLI::IsMember({"tikhonov", "tv-admm", "pnp-pgd"}));
  rec->add_option("--operator", operator_path, "operator tensor")->required();
  rec->add_option("--measurement", measurement_path, "measurement tensor")->required();
  add_solver_params(rec, params);

  auto* atk = app.add_subcommand("attack", "adversarial perturbation of one measurement");
  add_common(atk, common);
  atk->add_option("--solver", solver, "solver")
      ->check(CLI::IsMember({"tikhonov", "tv-admm", "pnp-pgd"}));
  atk->add_option("--operator", operator_path, "operator tensor")->required();
  atk->add_option("--measurement", measurement_path, "measurement tensor")->required();
  atk->add_option("--signal", signal_path, "ground-truth signal tensor");
  add_solver_params(atk, params);
  add_attack_params(atk, attack, method, backend, objective);

  auto* bound = app.add_subcommand("verify-bound", "check the stability bound on a pair");
  add_common(bound, common);
  bound->add_option("--solver", solver, "solver")
      ->check(CLI::IsMember({"tikhonov", "tv-admm"}));
  bound->add_option("--operator", operator_path, "operator tensor")->required();
  bound->add_option("--measurement", measurement_path, "first measurement")->required();
  bound->add_option("--measurement2", f2_path, "second measurement")->required();
  bound->add_option("--cross-alpha", cross_alpha,
                    "evaluate the Tikhonov bound of this alpha instead of the solver's own");
  add_solver_params(bound, params);

  auto* grid = app.add_subcommand("grid-search", "pick the TV alpha on a validation set");
  add_common(grid, common);

  auto* run = app.add_subcommand("run", "full benchmark pipeline");
  add_common(run, common);

  auto* rep = app.add_subcommand("report", "re-render reports from a previous run");
  add_common(rep, common);
  rep->add_option("--in", in_dir, "directory containing metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(common, count);
    if (rec->parsed())
      return cmd_reconstruct(common, solver, operator_path, measurement_path, params);
    if (atk->parsed())
      return cmd_attack(common, solver, operator_path, measurement_path, signal_path, params,
                        attack, method, backend, objective);
    if (bound->parsed())
      return cmd_verify_bound(common, solver, operator_path, measurement_path, f2_path, params,
                              cross_alpha);
    if (grid->parsed()) return cmd_grid_search(common);
    if (run->parsed()) return cmd_run(common);
    if (rep->parsed()) return cmd_report(common, in_dir);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
