#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rootsgd/inference.hpp"
#include "rootsgd/models.hpp"
#include "rootsgd/optimizers.hpp"
#include "rootsgd/plugin_cov.hpp"
#include "rootsgd/random_scaling.hpp"

namespace rootsgd {

enum class EstimatorKind { root_plugin, root_rs, asgd_plugin, asgd_bm, asgd_rs };

const std::vector<EstimatorKind>& all_estimators();
std::string to_string(EstimatorKind kind);
std::optional<EstimatorKind> estimator_from_string(const std::string& name);
bool is_root_estimator(EstimatorKind kind);

/// Everything a coverage study needs. Zeros/empties mean "fill in the
/// model-dependent default" (see apply_defaults).
struct ExperimentConfig {
  std::string model = "linear";  // linear | logistic | normal-mean
  int dim = 5;
  long horizon = 250000;
  int replications = 200;
  std::uint64_t seed = 1;
  double eta = 0.0;  // 0 -> per-model default (linear 1e-3, logistic 5e-3,
                     //      normal-mean 5e-2)
  long burn_in = 1000;
  double asgd_eta0 = 0.5;
  double asgd_alpha = 0.505;
  std::vector<EstimatorKind> estimators;  // empty -> default selection
  std::vector<long> checkpoints;          // empty -> log-spaced default
  double delta = 1e-6;
  double delta_prime = 1e6;
  long bm_batch = 0;  // 0 -> floor(sqrt(horizon))
  int threads = 0;    // 0 -> hardware concurrency
  std::string out_dir = ".";

  void apply_defaults();
  /// Throws std::invalid_argument with an actionable message on any bad
  /// range or incompatible selection.
  void validate() const;
};

double default_eta_for_model(const std::string& model);
std::vector<long> default_checkpoints(long burn_in, long horizon);
std::shared_ptr<LossModel> make_model(const ExperimentConfig& cfg);

struct EstimatorCheckpointStats {
  long checkpoint = 0;
  EstimatorKind estimator = EstimatorKind::root_rs;
  std::vector<double> coverage;   // per coordinate, mean over replications
  std::vector<double> ci_length;  // per coordinate, mean over replications
  double mean_coverage = 0.0;
  double mean_ci_length = 0.0;
  double wall_time_ms = 0.0;  // mean cumulative estimator time; only
                              // nondeterministic output of a run
};

struct ReplicationRecord {
  int replication = 0;
  std::string optimizer;  // "root" or "asgd"
  Vector theta_final;
  double error_norm = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<EstimatorCheckpointStats> stats;  // checkpoint-major, then
                                                // estimator in config order
  std::vector<ReplicationRecord> replications;
  int completed = 0;
  int aborted = 0;
  std::vector<std::string> abort_messages;
};

/// Runs `replications` independent replications (replication r seeds its
/// stream with seed + r), evaluating every selected estimator at every
/// checkpoint from its online accumulator state. Replications execute in
/// parallel with no shared mutable state; aggregation order is fixed by
/// the replication index, so results are bit-reproducible for a given
/// (config, seed) apart from the wall-time fields.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv (checkpoint,estimator,coordinate,coverage,ci_length,
/// wall_time_ms), replications.csv (replication,optimizer,coordinate,
/// theta,error_norm) and summary.json into `dir`. Apart from the
/// wall_time_ms column the files are byte-deterministic.
void export_results(const ExperimentResult& result, const std::string& dir);

/// Realized self-normalized pivots sqrt(t) * (theta_t - theta*)_j /
/// sqrt((V_t)_jj) for every replication and basis direction, replication-
/// major. Requires a model with a known true parameter.
std::vector<double> rs_density_pivots(const ExperimentConfig& cfg);

/// CSV export of the pivots: header plus one row per replication with one
/// pivot column per coordinate.
void export_rs_density(const ExperimentConfig& cfg, const std::string& path);

struct DatasetMeanOptions {
  std::string input_path;
  double eta = 0.05;
  long burn_in = 10000;
  long horizon = 100000;
  std::uint64_t seed = 1;
  std::string output_path;  // empty -> no file written
};

struct DatasetMeanResult {
  Vector mean;
  ConfidenceInterval ci;
  long rows = 0;
};

/// Mean estimation over a CSV of equal-length numeric vectors (one per
/// line): draws `horizon` rows with replacement, runs ROOT-SGD on the
/// quadratic mean loss, and builds per-coordinate intervals through the
/// deterministic-Hessian plug-in path.
DatasetMeanResult dataset_mean_mode(const DatasetMeanOptions& opts);

struct ConvergenceReport {
  // Quadratic mean loss: the iterate tracks the running sample mean with
  // per-step factor exactly (1 - eta).
  double tracking_max_err = 0.0;
  double factor_max_err = 0.0;
  bool tracking_ok = false;
  // Exponential-family stat matching contracts at least as fast as the
  // guaranteed rate for (mu, l, eta).
  double contraction_max_ratio = 0.0;
  double contraction_bound = 0.0;
  bool contraction_ok = false;

  bool ok() const { return tracking_ok && contraction_ok; }
};

ConvergenceReport run_convergence_checks(std::uint64_t seed);

/// Shortest decimal representation that round-trips; locale-independent.
std::string format_double(double v);

}  // namespace rootsgd
