#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rootsgd/experiment.hpp"

namespace {

using rootsgd::ExperimentConfig;

void add_experiment_options(CLI::App& cmd, ExperimentConfig& cfg,
                            std::vector<std::string>& estimator_names,
                            std::vector<long>& checkpoints) {
  cmd.add_option("--model", cfg.model,
                 "Model: linear, logistic, or normal-mean")
      ->check(CLI::IsMember({"linear", "logistic", "normal-mean"}))
      ->capture_default_str();
  cmd.add_option("--dim", cfg.dim, "Parameter dimension")
      ->capture_default_str();
  cmd.add_option("--t", cfg.horizon, "Number of samples / updates")
      ->capture_default_str();
  cmd.add_option("--reps", cfg.replications, "Independent replications")
      ->capture_default_str();
  cmd.add_option("--seed", cfg.seed,
                 "Base seed; replication r uses seed + r")
      ->capture_default_str();
  cmd.add_option("--eta", cfg.eta,
                 "Fixed step size (default per model: linear 1e-3, "
                 "logistic 5e-3, normal-mean 5e-2)");
  cmd.add_option("--burn-in", cfg.burn_in, "Burn-in period")
      ->capture_default_str();
  cmd.add_option("--asgd-eta0", cfg.asgd_eta0, "ASGD base step size")
      ->capture_default_str();
  cmd.add_option("--asgd-alpha", cfg.asgd_alpha,
                 "ASGD step decay exponent, in (1/2, 1)")
      ->capture_default_str();
  cmd.add_option("--estimators", estimator_names,
                 "Comma list of root-plugin,root-rs,asgd-plugin,asgd-bm,"
                 "asgd-rs (default: all five for dim < 20)")
      ->delimiter(',');
  cmd.add_option("--checkpoints", checkpoints,
                 "Comma list of steps at which intervals are evaluated "
                 "(default: 10 log-spaced points)")
      ->delimiter(',');
  cmd.add_option("--delta", cfg.delta, "Lower spectral threshold")
      ->capture_default_str();
  cmd.add_option("--delta-prime", cfg.delta_prime, "Upper spectral threshold")
      ->capture_default_str();
  cmd.add_option("--bm-batch", cfg.bm_batch,
                 "Batch size for asgd-bm (default: floor(sqrt(t)))");
  cmd.add_option("--threads", cfg.threads,
                 "Worker threads (default: hardware concurrency)");
  cmd.set_config("--config", "", "Flat key = value config file");
}

void resolve_estimators(const std::vector<std::string>& names,
                        ExperimentConfig& cfg) {
  cfg.estimators.clear();
  for (const std::string& name : names) {
    const auto kind = rootsgd::estimator_from_string(name);
    if (!kind) {
      throw CLI::ValidationError(
          "--estimators", "unknown estimator '" + name +
                              "' (expected root-plugin, root-rs, asgd-plugin, "
                              "asgd-bm, or asgd-rs)");
    }
    cfg.estimators.push_back(*kind);
  }
}

int run_coverage(ExperimentConfig& cfg) {
  const rootsgd::ExperimentResult result = rootsgd::run_experiment(cfg);
  rootsgd::export_results(result, result.config.out_dir);
  if (result.aborted > 0) {
    std::cerr << "warning: " << result.aborted
              << " replication(s) aborted and were excluded\n";
    for (const std::string& msg : result.abort_messages) {
      std::cerr << "  " << msg << "\n";
    }
  }
  std::cout << "wrote results.csv, replications.csv, summary.json to "
            << result.config.out_dir << "\n";
  std::cout << "checkpoint  estimator     mean_coverage  mean_ci_length\n";
  for (const auto& s : result.stats) {
    std::printf("%10ld  %-12s  %13.4f  %14.6g\n", s.checkpoint,
                rootsgd::to_string(s.estimator).c_str(), s.mean_coverage,
                s.mean_ci_length);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Streaming parameter estimation with online covariance estimates and "
      "confidence intervals"};
  app.require_subcommand(1);

  ExperimentConfig coverage_cfg;
  std::vector<std::string> coverage_estimators;
  std::vector<long> coverage_checkpoints;
  CLI::App* coverage =
      app.add_subcommand("coverage",
                         "Replicated coverage study: runs the optimizers, "
                         "evaluates the selected interval estimators at each "
                         "checkpoint, writes CSV/JSON results");
  add_experiment_options(*coverage, coverage_cfg, coverage_estimators,
                         coverage_checkpoints);
  coverage->add_option("--out", coverage_cfg.out_dir, "Output directory")
      ->capture_default_str();

  ExperimentConfig density_cfg;
  std::vector<std::string> density_estimators;  // unused but shares parser
  std::vector<long> density_checkpoints;
  std::string density_out = "rs_density.csv";
  CLI::App* density = app.add_subcommand(
      "rs-density",
      "Export realized self-normalized pivots for density inspection");
  add_experiment_options(*density, density_cfg, density_estimators,
                         density_checkpoints);
  density->add_option("--out", density_out, "Output CSV path")
      ->capture_default_str();

  rootsgd::DatasetMeanOptions mean_opts;
  CLI::App* dataset = app.add_subcommand(
      "dataset-mean",
      "Per-coordinate mean and confidence interval for a CSV of vectors, "
      "resampled with replacement");
  dataset->add_option("--input", mean_opts.input_path, "Input vector CSV")
      ->required();
  dataset->add_option("--eta", mean_opts.eta, "Step size")
      ->capture_default_str();
  dataset->add_option("--burn-in", mean_opts.burn_in, "Burn-in period")
      ->capture_default_str();
  dataset->add_option("--t", mean_opts.horizon, "Number of resampled draws")
      ->capture_default_str();
  dataset->add_option("--seed", mean_opts.seed, "Resampling seed")
      ->capture_default_str();
  dataset->add_option("--out", mean_opts.output_path,
                      "Output CSV (coordinate,mean,lower,upper)");

  std::uint64_t check_seed = 7;
  CLI::App* check = app.add_subcommand(
      "convergence-check",
      "Run the closed-form optimizer identities and contraction bounds, "
      "print pass/fail");
  check->add_option("--seed", check_seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (coverage->parsed()) {
      resolve_estimators(coverage_estimators, coverage_cfg);
      coverage_cfg.checkpoints = coverage_checkpoints;
      return run_coverage(coverage_cfg);
    }
    if (density->parsed()) {
      resolve_estimators(density_estimators, density_cfg);
      density_cfg.checkpoints = density_checkpoints;
      rootsgd::export_rs_density(density_cfg, density_out);
      std::cout << "wrote " << density_out << "\n";
      return 0;
    }
    if (dataset->parsed()) {
      const rootsgd::DatasetMeanResult result =
          rootsgd::dataset_mean_mode(mean_opts);
      if (!mean_opts.output_path.empty()) {
        std::cout << "wrote " << mean_opts.output_path << "\n";
      }
      std::cout << "coordinate,mean,lower,upper\n";
      for (Eigen::Index j = 0; j < result.mean.size(); ++j) {
        std::cout << j << ',' << rootsgd::format_double(result.mean[j]) << ','
                  << rootsgd::format_double(result.ci.lower[j]) << ','
                  << rootsgd::format_double(result.ci.upper[j]) << "\n";
      }
      return 0;
    }
    if (check->parsed()) {
      const rootsgd::ConvergenceReport report =
          rootsgd::run_convergence_checks(check_seed);
      std::printf("[%s] sample-mean tracking identity (max error %.3g, "
                  "factor error %.3g)\n",
                  report.tracking_ok ? "PASS" : "FAIL",
                  report.tracking_max_err, report.factor_max_err);
      std::printf("[%s] stat-match contraction (worst ratio %.6f <= bound "
                  "%.6f)\n",
                  report.contraction_ok ? "PASS" : "FAIL",
                  report.contraction_max_ratio, report.contraction_bound);
      return report.ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
