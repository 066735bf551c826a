#include "rootsgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace rootsgd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point start) {
  return static_cast<double>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                            start)
          .count());
}

}  // namespace

const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> kinds = {
      EstimatorKind::root_plugin, EstimatorKind::root_rs,
      EstimatorKind::asgd_plugin, EstimatorKind::asgd_bm,
      EstimatorKind::asgd_rs};
  return kinds;
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::root_plugin:
      return "root-plugin";
    case EstimatorKind::root_rs:
      return "root-rs";
    case EstimatorKind::asgd_plugin:
      return "asgd-plugin";
    case EstimatorKind::asgd_bm:
      return "asgd-bm";
    case EstimatorKind::asgd_rs:
      return "asgd-rs";
  }
  return "unknown";
}

std::optional<EstimatorKind> estimator_from_string(const std::string& name) {
  for (EstimatorKind kind : all_estimators()) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  return std::nullopt;
}

bool is_root_estimator(EstimatorKind kind) {
  return kind == EstimatorKind::root_plugin || kind == EstimatorKind::root_rs;
}

double default_eta_for_model(const std::string& model) {
  if (model == "linear") {
    return 1e-3;
  }
  if (model == "logistic") {
    return 5e-3;
  }
  if (model == "normal-mean") {
    return 5e-2;
  }
  throw std::invalid_argument("unknown model '" + model +
                              "' (expected linear, logistic, or normal-mean)");
}

std::vector<long> default_checkpoints(long burn_in, long horizon) {
  const long lo = burn_in + 1000;
  if (lo >= horizon) {
    return {horizon};
  }
  std::vector<long> out;
  const double log_lo = std::log(static_cast<double>(lo));
  const double log_hi = std::log(static_cast<double>(horizon));
  for (int k = 0; k < 10; ++k) {
    const double f = static_cast<double>(k) / 9.0;
    long cp = std::llround(std::exp(log_lo + f * (log_hi - log_lo)));
    cp = std::clamp(cp, lo, horizon);
    if (out.empty() || cp > out.back()) {
      out.push_back(cp);
    }
  }
  return out;
}

std::shared_ptr<LossModel> make_model(const ExperimentConfig& cfg) {
  Vector star = equally_spaced_param(cfg.dim);
  if (cfg.model == "linear") {
    return std::make_shared<LinearRegressionModel>(std::move(star));
  }
  if (cfg.model == "logistic") {
    return std::make_shared<LogisticRegressionModel>(std::move(star));
  }
  if (cfg.model == "normal-mean") {
    return std::make_shared<NormalMeanModel>(std::move(star));
  }
  throw std::invalid_argument("unknown model '" + cfg.model +
                              "' (expected linear, logistic, or normal-mean)");
}

void ExperimentConfig::apply_defaults() {
  if (eta == 0.0) {
    eta = default_eta_for_model(model);
  }
  if (estimators.empty()) {
    if (dim < 20) {
      estimators = all_estimators();
    } else {
      // The p^2 x p^2 solve makes the plug-in paths unattractive here.
      estimators = {EstimatorKind::root_rs, EstimatorKind::asgd_bm,
                    EstimatorKind::asgd_rs};
    }
  }
  if (checkpoints.empty()) {
    checkpoints = default_checkpoints(burn_in, horizon);
  }
  if (bm_batch == 0) {
    bm_batch = std::max<long>(
        1, static_cast<long>(std::floor(std::sqrt(static_cast<double>(horizon)))));
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  default_eta_for_model(model);  // rejects unknown model names
  if (dim < 1) fail("dim must be >= 1");
  if (replications < 1) fail("reps must be >= 1");
  if (burn_in < 1) fail("burn-in must be >= 1");
  if (horizon < burn_in) {
    std::ostringstream msg;
    msg << "t must be >= burn-in (got t=" << horizon << ", burn-in=" << burn_in
        << ")";
    fail(msg.str());
  }
  if (!(eta > 0.0)) fail("eta must be positive");
  if (!(asgd_eta0 > 0.0)) fail("asgd-eta0 must be positive");
  if (!(asgd_alpha > 0.5 && asgd_alpha < 1.0)) {
    fail("asgd-alpha must lie in (1/2, 1)");
  }
  if (!(delta > 0.0) || !(delta_prime > 0.0)) {
    fail("thresholds delta and delta' must be positive");
  }
  if (bm_batch < 1) fail("bm-batch must be >= 1");
  if (threads < 0) fail("threads must be >= 0");
  if (estimators.empty()) fail("at least one estimator must be selected");
  for (size_t i = 0; i < estimators.size(); ++i) {
    for (size_t j = i + 1; j < estimators.size(); ++j) {
      if (estimators[i] == estimators[j]) {
        fail("estimator '" + to_string(estimators[i]) + "' selected twice");
      }
    }
  }
  if (checkpoints.empty()) fail("at least one checkpoint is required");
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 1 || checkpoints[i] > horizon) {
      std::ostringstream msg;
      msg << "checkpoint " << checkpoints[i] << " outside [1, t=" << horizon
          << "]";
      fail(msg.str());
    }
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
      fail("checkpoints must be strictly ascending");
    }
  }

  const bool want_root_plugin =
      std::count(estimators.begin(), estimators.end(),
                 EstimatorKind::root_plugin) > 0;
  const bool want_asgd_plugin =
      std::count(estimators.begin(), estimators.end(),
                 EstimatorKind::asgd_plugin) > 0;
  const bool want_asgd_bm = std::count(estimators.begin(), estimators.end(),
                                       EstimatorKind::asgd_bm) > 0;
  if (want_root_plugin || want_asgd_plugin) {
    ExperimentConfig probe = *this;
    const auto model_ptr = make_model(probe);
    if (model_ptr->hessian_kind() == HessianKind::unavailable) {
      fail("plug-in estimators need a model with a stochastic Hessian");
    }
    if (want_root_plugin &&
        model_ptr->hessian_kind() != HessianKind::deterministic && dim > 32) {
      fail("root-plugin is disabled for dim > 32 with a stochastic Hessian "
           "(the dim^2 x dim^2 solve is not reasonable); drop it from "
           "--estimators");
    }
  }
  if (want_root_plugin && checkpoints.front() <= burn_in) {
    std::ostringstream msg;
    msg << "root-plugin accumulates only after the burn-in; checkpoint "
        << checkpoints.front() << " must exceed burn-in " << burn_in;
    fail(msg.str());
  }
  if (want_asgd_bm && checkpoints.front() < 2 * bm_batch) {
    std::ostringstream msg;
    msg << "asgd-bm needs two completed batches; first checkpoint "
        << checkpoints.front() << " < 2 * batch size (" << 2 * bm_batch
        << "); lower --bm-batch or move the checkpoint";
    fail(msg.str());
  }
}

namespace {

struct RepCell {
  std::vector<std::uint8_t> covered;
  std::vector<double> length;
  double wall_ms = 0.0;
};

struct RepOutcome {
  std::vector<std::vector<RepCell>> cells;  // [checkpoint][estimator slot]
  std::vector<ReplicationRecord> records;
  std::string error;
};

RepCell judge_interval(const ConfidenceInterval& ci, const Vector& star,
                       double wall_ms) {
  RepCell cell;
  cell.covered.resize(star.size());
  cell.length.resize(star.size());
  for (Index j = 0; j < star.size(); ++j) {
    cell.covered[j] = ci.contains(j, star[j]) ? 1 : 0;
    cell.length[j] = ci.upper[j] - ci.lower[j];
  }
  cell.wall_ms = wall_ms;
  return cell;
}

int slot_of(const ExperimentConfig& cfg, EstimatorKind kind) {
  const auto it =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), kind);
  return it == cfg.estimators.end()
             ? -1
             : static_cast<int>(it - cfg.estimators.begin());
}

void run_root_pass(const ExperimentConfig& cfg,
                   const std::shared_ptr<const LossModel>& model, int rep,
                   RepOutcome& out) {
  const int plug_slot = slot_of(cfg, EstimatorKind::root_plugin);
  const int rs_slot = slot_of(cfg, EstimatorKind::root_rs);
  const Vector& star = model->true_param();

  std::optional<PluginAccumulator> plug;
  if (plug_slot >= 0) {
    plug.emplace(cfg.dim, cfg.burn_in, plugin_kron_enabled(*model));
  }
  std::optional<RandomScalingAccumulator> rs;
  if (rs_slot >= 0) {
    rs.emplace(cfg.dim);
  }
  PluginConfig plugin_cfg;
  plugin_cfg.delta = cfg.delta;
  plugin_cfg.delta_prime = cfg.delta_prime;
  plugin_cfg.eta = cfg.eta;
  plugin_cfg.hessian_deterministic =
      model->hessian_kind() == HessianKind::deterministic;

  double plug_ns = 0.0;
  double rs_ns = 0.0;
  size_t next_cp = 0;

  RootObserver observer = [&](long i, const Vector& theta,
                              const Vector& theta_pre, const Sample& x) {
    if (plug && i > cfg.burn_in) {
      const auto t0 = Clock::now();
      plug->observe(theta_pre, x, *model);
      plug_ns += elapsed_ns(t0);
    }
    if (rs) {
      const auto t0 = Clock::now();
      rs->observe(i, theta);
      rs_ns += elapsed_ns(t0);
    }
    if (next_cp < cfg.checkpoints.size() && i == cfg.checkpoints[next_cp]) {
      if (plug) {
        const auto t0 = Clock::now();
        const CovarianceEstimate est = plugin_finalize(*plug, plugin_cfg);
        const ConfidenceInterval ci = ci_normal(theta, est, i, 0.95);
        plug_ns += elapsed_ns(t0);
        out.cells[next_cp][plug_slot] = judge_interval(ci, star, plug_ns / 1e6);
      }
      if (rs) {
        const auto t0 = Clock::now();
        const Matrix v = rs->finalize(theta);
        const ConfidenceInterval ci = ci_random_scaling(theta, v, i, 0.95);
        rs_ns += elapsed_ns(t0);
        out.cells[next_cp][rs_slot] = judge_interval(ci, star, rs_ns / 1e6);
      }
      ++next_cp;
    }
  };

  SampleStream stream(model, cfg.seed + static_cast<std::uint64_t>(rep));
  const Vector theta_final = rootsgd_run(*model, stream, cfg.horizon, cfg.eta,
                                         cfg.burn_in, {observer});
  ReplicationRecord rec;
  rec.replication = rep;
  rec.optimizer = "root";
  rec.theta_final = theta_final;
  rec.error_norm = (theta_final - star).norm();
  out.records.push_back(std::move(rec));
}

void run_asgd_pass(const ExperimentConfig& cfg,
                   const std::shared_ptr<const LossModel>& model, int rep,
                   RepOutcome& out) {
  const int plug_slot = slot_of(cfg, EstimatorKind::asgd_plugin);
  const int bm_slot = slot_of(cfg, EstimatorKind::asgd_bm);
  const int rs_slot = slot_of(cfg, EstimatorKind::asgd_rs);
  const Vector& star = model->true_param();

  std::optional<PluginAccumulator> plug;
  if (plug_slot >= 0) {
    plug.emplace(cfg.dim, 0, false);
  }
  std::optional<BatchMeanAccumulator> bm;
  if (bm_slot >= 0) {
    bm.emplace(cfg.dim, cfg.bm_batch);
  }
  std::optional<RandomScalingAccumulator> rs;
  if (rs_slot >= 0) {
    rs.emplace(cfg.dim);
  }

  double plug_ns = 0.0;
  double bm_ns = 0.0;
  double rs_ns = 0.0;
  size_t next_cp = 0;

  AsgdObserver observer = [&](long i, const Vector& theta_sgd,
                              const Vector& theta_avg,
                              const Vector& theta_sgd_pre, const Sample& x) {
    if (plug) {
      const auto t0 = Clock::now();
      plug->observe(theta_sgd_pre, x, *model);
      plug_ns += elapsed_ns(t0);
    }
    if (bm) {
      const auto t0 = Clock::now();
      bm->observe(theta_sgd);
      bm_ns += elapsed_ns(t0);
    }
    if (rs) {
      const auto t0 = Clock::now();
      rs->observe(i, theta_avg);
      rs_ns += elapsed_ns(t0);
    }
    if (next_cp < cfg.checkpoints.size() && i == cfg.checkpoints[next_cp]) {
      if (plug) {
        const auto t0 = Clock::now();
        const CovarianceEstimate est = asgd_plugin_finalize(*plug, cfg.delta);
        const ConfidenceInterval ci = ci_normal(theta_avg, est, i, 0.95);
        plug_ns += elapsed_ns(t0);
        out.cells[next_cp][plug_slot] = judge_interval(ci, star, plug_ns / 1e6);
      }
      if (bm) {
        const auto t0 = Clock::now();
        const Matrix sigma = bm->finalize();
        const ConfidenceInterval ci = ci_normal(theta_avg, sigma, i, 0.95);
        bm_ns += elapsed_ns(t0);
        out.cells[next_cp][bm_slot] = judge_interval(ci, star, bm_ns / 1e6);
      }
      if (rs) {
        const auto t0 = Clock::now();
        const Matrix v = rs->finalize(theta_avg);
        const ConfidenceInterval ci = ci_random_scaling(theta_avg, v, i, 0.95);
        rs_ns += elapsed_ns(t0);
        out.cells[next_cp][rs_slot] = judge_interval(ci, star, rs_ns / 1e6);
      }
      ++next_cp;
    }
  };

  SampleStream stream(model, cfg.seed + static_cast<std::uint64_t>(rep));
  const Vector avg_final = asgd_run(*model, stream, cfg.horizon, cfg.asgd_eta0,
                                    cfg.asgd_alpha, {observer});
  ReplicationRecord rec;
  rec.replication = rep;
  rec.optimizer = "asgd";
  rec.theta_final = avg_final;
  rec.error_norm = (avg_final - star).norm();
  out.records.push_back(std::move(rec));
}

RepOutcome run_replication(const ExperimentConfig& cfg,
                           const std::shared_ptr<const LossModel>& model,
                           int rep) {
  RepOutcome out;
  out.cells.assign(cfg.checkpoints.size(),
                   std::vector<RepCell>(cfg.estimators.size()));
  const bool need_root =
      std::any_of(cfg.estimators.begin(), cfg.estimators.end(),
                  [](EstimatorKind k) { return is_root_estimator(k); });
  const bool need_asgd =
      std::any_of(cfg.estimators.begin(), cfg.estimators.end(),
                  [](EstimatorKind k) { return !is_root_estimator(k); });
  if (need_root) {
    run_root_pass(cfg, model, rep, out);
  }
  if (need_asgd) {
    run_asgd_pass(cfg, model, rep, out);
  }
  return out;
}

template <typename Work>
void parallel_replications(int replications, int threads, Work&& work) {
  int nthreads = threads > 0
                     ? threads
                     : static_cast<int>(
                           std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::min(nthreads, replications);
  std::atomic<int> next{0};
  auto runner = [&] {
    for (int r = next.fetch_add(1); r < replications;
         r = next.fetch_add(1)) {
      work(r);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads > 0 ? nthreads - 1 : 0);
  for (int i = 0; i + 1 < nthreads; ++i) {
    pool.emplace_back(runner);
  }
  runner();
  for (auto& th : pool) {
    th.join();
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& raw) {
  ExperimentConfig cfg = raw;
  cfg.apply_defaults();
  cfg.validate();
  const auto model = std::shared_ptr<const LossModel>(make_model(cfg));

  const int reps = cfg.replications;
  std::vector<RepOutcome> outcomes(reps);
  parallel_replications(reps, cfg.threads, [&](int r) {
    try {
      outcomes[r] = run_replication(cfg, model, r);
    } catch (const std::exception& e) {
      outcomes[r] = RepOutcome{};
      outcomes[r].error = e.what();
    }
  });

  ExperimentResult result;
  result.config = cfg;
  for (int r = 0; r < reps; ++r) {
    if (!outcomes[r].error.empty()) {
      ++result.aborted;
      if (result.abort_messages.size() < 8) {
        std::ostringstream msg;
        msg << "replication " << r << ": " << outcomes[r].error;
        result.abort_messages.push_back(msg.str());
      }
      continue;
    }
    ++result.completed;
    for (auto& rec : outcomes[r].records) {
      result.replications.push_back(rec);
    }
  }
  if (result.completed == 0) {
    std::string detail =
        result.abort_messages.empty() ? "" : " (" + result.abort_messages[0] + ")";
    throw std::runtime_error("run_experiment: every replication aborted" +
                             detail);
  }

  const int d = cfg.dim;
  for (size_t cp = 0; cp < cfg.checkpoints.size(); ++cp) {
    for (size_t e = 0; e < cfg.estimators.size(); ++e) {
      std::vector<long> counts(d, 0);
      std::vector<double> length_sum(d, 0.0);
      double wall_sum = 0.0;
      for (int r = 0; r < reps; ++r) {
        if (!outcomes[r].error.empty()) {
          continue;
        }
        const RepCell& cell = outcomes[r].cells[cp][e];
        for (int j = 0; j < d; ++j) {
          counts[j] += cell.covered[j];
          length_sum[j] += cell.length[j];
        }
        wall_sum += cell.wall_ms;
      }
      EstimatorCheckpointStats stats;
      stats.checkpoint = cfg.checkpoints[cp];
      stats.estimator = cfg.estimators[e];
      stats.coverage.resize(d);
      stats.ci_length.resize(d);
      long total_count = 0;
      double total_length = 0.0;
      const double denom = static_cast<double>(result.completed);
      for (int j = 0; j < d; ++j) {
        stats.coverage[j] = static_cast<double>(counts[j]) / denom;
        stats.ci_length[j] = length_sum[j] / denom;
        total_count += counts[j];
        total_length += length_sum[j];
      }
      stats.mean_coverage =
          static_cast<double>(total_count) / (denom * static_cast<double>(d));
      stats.mean_ci_length = total_length / (denom * static_cast<double>(d));
      stats.wall_time_ms = wall_sum / denom;
      result.stats.push_back(std::move(stats));
    }
  }
  return result;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void export_results(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "results.csv", std::ios::binary);
    if (!out) {
      throw std::runtime_error("export_results: cannot write to " + dir);
    }
    out << "checkpoint,estimator,coordinate,coverage,ci_length,wall_time_ms\n";
    for (const auto& s : result.stats) {
      for (size_t j = 0; j < s.coverage.size(); ++j) {
        out << s.checkpoint << ',' << to_string(s.estimator) << ',' << j << ','
            << format_double(s.coverage[j]) << ','
            << format_double(s.ci_length[j]) << ','
            << format_double(s.wall_time_ms) << '\n';
      }
    }
  }

  {
    std::ofstream out(fs::path(dir) / "replications.csv", std::ios::binary);
    if (!out) {
      throw std::runtime_error("export_results: cannot write to " + dir);
    }
    out << "replication,optimizer,coordinate,theta,error_norm\n";
    for (const auto& rec : result.replications) {
      for (Index j = 0; j < rec.theta_final.size(); ++j) {
        out << rec.replication << ',' << rec.optimizer << ',' << j << ','
            << format_double(rec.theta_final[j]) << ','
            << format_double(rec.error_norm) << '\n';
      }
    }
  }

  {
    nlohmann::ordered_json summary;
    const ExperimentConfig& cfg = result.config;
    nlohmann::ordered_json config;
    config["model"] = cfg.model;
    config["dim"] = cfg.dim;
    config["t"] = cfg.horizon;
    config["reps"] = cfg.replications;
    config["seed"] = cfg.seed;
    config["eta"] = cfg.eta;
    config["burn_in"] = cfg.burn_in;
    config["asgd_eta0"] = cfg.asgd_eta0;
    config["asgd_alpha"] = cfg.asgd_alpha;
    std::vector<std::string> estimator_names;
    for (EstimatorKind kind : cfg.estimators) {
      estimator_names.push_back(to_string(kind));
    }
    config["estimators"] = estimator_names;
    config["checkpoints"] = cfg.checkpoints;
    config["delta"] = cfg.delta;
    config["delta_prime"] = cfg.delta_prime;
    config["bm_batch"] = cfg.bm_batch;
    summary["config"] = config;
    summary["replications"] = {{"completed", result.completed},
                               {"aborted", result.aborted},
                               {"abort_messages", result.abort_messages}};
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& s : result.stats) {
      nlohmann::ordered_json row;
      row["checkpoint"] = s.checkpoint;
      row["estimator"] = to_string(s.estimator);
      row["mean_coverage"] = s.mean_coverage;
      row["mean_ci_length"] = s.mean_ci_length;
      row["coverage"] = s.coverage;
      row["ci_length"] = s.ci_length;
      rows.push_back(std::move(row));
    }
    summary["results"] = rows;

    std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
    if (!out) {
      throw std::runtime_error("export_results: cannot write to " + dir);
    }
    out << summary.dump(2) << '\n';
  }
}

std::vector<double> rs_density_pivots(const ExperimentConfig& raw) {
  ExperimentConfig cfg = raw;
  cfg.estimators = {EstimatorKind::root_rs};
  cfg.checkpoints = {cfg.horizon};
  cfg.apply_defaults();
  cfg.validate();
  const auto model = std::shared_ptr<const LossModel>(make_model(cfg));
  if (!model->has_true_param()) {
    throw std::invalid_argument(
        "rs_density_pivots: model must have a known true parameter");
  }
  const Vector star = model->true_param();
  const int d = cfg.dim;
  const int reps = cfg.replications;
  const double root_t = std::sqrt(static_cast<double>(cfg.horizon));

  std::vector<double> pivots(static_cast<size_t>(reps) * d, 0.0);
  std::vector<std::string> errors(reps);
  parallel_replications(reps, cfg.threads, [&](int r) {
    try {
      RandomScalingAccumulator rs(d);
      RootObserver observer = [&rs](long i, const Vector& theta, const Vector&,
                                    const Sample&) { rs.observe(i, theta); };
      SampleStream stream(model, cfg.seed + static_cast<std::uint64_t>(r));
      const Vector theta_final = rootsgd_run(
          *model, stream, cfg.horizon, cfg.eta, cfg.burn_in, {observer});
      const Matrix v = rs.finalize(theta_final);
      for (int j = 0; j < d; ++j) {
        pivots[static_cast<size_t>(r) * d + j] =
            root_t * (theta_final[j] - star[j]) / std::sqrt(v(j, j));
      }
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  for (int r = 0; r < reps; ++r) {
    if (!errors[r].empty()) {
      std::ostringstream msg;
      msg << "rs_density_pivots: replication " << r << " failed: "
          << errors[r];
      throw std::runtime_error(msg.str());
    }
  }
  return pivots;
}

void export_rs_density(const ExperimentConfig& cfg, const std::string& path) {
  const std::vector<double> pivots = rs_density_pivots(cfg);
  const int d = cfg.dim;
  const int reps = static_cast<int>(pivots.size()) / d;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("export_rs_density: cannot write " + path);
  }
  out << "replication";
  for (int j = 0; j < d; ++j) {
    out << ",pivot_" << j;
  }
  out << '\n';
  for (int r = 0; r < reps; ++r) {
    out << r;
    for (int j = 0; j < d; ++j) {
      out << ',' << format_double(pivots[static_cast<size_t>(r) * d + j]);
    }
    out << '\n';
  }
}

namespace {

/// Mean estimation over a fixed table of vectors, resampled uniformly
/// with replacement. No population parameter exists.
class EmpiricalMeanModel final : public LossModel {
 public:
  explicit EmpiricalMeanModel(std::vector<Vector> rows)
      : rows_(std::move(rows)), dim_(static_cast<int>(rows_.front().size())) {}

  int dim() const override { return dim_; }
  HessianKind hessian_kind() const override {
    return HessianKind::deterministic;
  }
  bool has_true_param() const override { return false; }
  const Vector& true_param() const override {
    throw std::logic_error("EmpiricalMeanModel: no known true parameter");
  }
  std::string name() const override { return "empirical-mean"; }

  double loss(const Vector& theta, const Sample& x) const override {
    check_dim(theta);
    return 0.5 * (theta - x.features).squaredNorm();
  }
  Vector grad(const Vector& theta, const Sample& x) const override {
    check_dim(theta);
    return theta - x.features;
  }
  Matrix hessian(const Vector& theta, const Sample&) const override {
    check_dim(theta);
    return Matrix::Identity(dim_, dim_);
  }
  Sample draw(std::mt19937_64& rng) const override {
    std::uniform_int_distribution<size_t> pick(0, rows_.size() - 1);
    Sample s;
    s.features = rows_[pick(rng)];
    return s;
  }

 private:
  std::vector<Vector> rows_;
  int dim_;
};

std::vector<Vector> read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("dataset-mean: cannot open " + path);
  }
  std::vector<Vector> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;  // blank line
    }
    std::vector<double> values;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        comma = line.size();
      }
      size_t begin = pos;
      size_t end = comma;
      while (begin < end && (line[begin] == ' ' || line[begin] == '\t')) {
        ++begin;
      }
      while (end > begin && (line[end - 1] == ' ' || line[end - 1] == '\t')) {
        --end;
      }
      double value = 0.0;
      const auto parsed =
          std::from_chars(line.data() + begin, line.data() + end, value);
      if (parsed.ec != std::errc() || parsed.ptr != line.data() + end ||
          begin == end) {
        std::ostringstream msg;
        msg << "dataset-mean: non-numeric field '"
            << line.substr(begin, end - begin) << "' at " << path << ":"
            << lineno;
        throw std::runtime_error(msg.str());
      }
      values.push_back(value);
      pos = comma + 1;
    }
    Vector row(static_cast<Index>(values.size()));
    for (size_t k = 0; k < values.size(); ++k) {
      row[static_cast<Index>(k)] = values[k];
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream msg;
      msg << "dataset-mean: ragged row at " << path << ":" << lineno
          << " (expected " << rows.front().size() << " fields, got "
          << row.size() << ")";
      throw std::runtime_error(msg.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error("dataset-mean: " + path +
                             " contains no data rows");
  }
  return rows;
}

}  // namespace

DatasetMeanResult dataset_mean_mode(const DatasetMeanOptions& opts) {
  if (!(opts.eta > 0.0)) {
    throw std::invalid_argument("dataset-mean: eta must be positive");
  }
  if (opts.burn_in < 1 || opts.horizon <= opts.burn_in) {
    throw std::invalid_argument(
        "dataset-mean: need t > burn-in >= 1 so the accumulator sees at "
        "least one sample");
  }
  const auto model = std::make_shared<const EmpiricalMeanModel>(
      read_vector_csv(opts.input_path));
  const int d = model->dim();

  PluginAccumulator acc(d, opts.burn_in, false);
  RootObserver observer = [&](long i, const Vector&, const Vector& theta_pre,
                              const Sample& x) {
    if (i > opts.burn_in) {
      acc.observe(theta_pre, x, *model);
    }
  };
  SampleStream stream(model, opts.seed);
  const Vector mean = rootsgd_run(*model, stream, opts.horizon, opts.eta,
                                  opts.burn_in, {observer});

  PluginConfig plugin_cfg;
  plugin_cfg.eta = opts.eta;
  plugin_cfg.hessian_deterministic = true;
  const CovarianceEstimate est = plugin_finalize(acc, plugin_cfg);

  DatasetMeanResult result;
  result.mean = mean;
  result.ci = ci_normal(mean, est, opts.horizon, 0.95);
  result.rows = acc.count();

  if (!opts.output_path.empty()) {
    std::ofstream out(opts.output_path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("dataset-mean: cannot write " +
                               opts.output_path);
    }
    out << "coordinate,mean,lower,upper\n";
    for (Index j = 0; j < mean.size(); ++j) {
      out << j << ',' << format_double(mean[j]) << ','
          << format_double(result.ci.lower[j]) << ','
          << format_double(result.ci.upper[j]) << '\n';
    }
  }
  return result;
}

ConvergenceReport run_convergence_checks(std::uint64_t seed) {
  ConvergenceReport report;
  {
    const double eta = 0.1;
    const auto model =
        std::make_shared<const NormalMeanModel>(equally_spaced_param(3));
    SampleStream stream(model, seed);
    RootSgd opt(*model, eta, 1);
    Vector sum = Vector::Zero(3);
    double max_err = 0.0;
    double max_factor_err = 0.0;
    for (long i = 1; i <= 1000; ++i) {
      const Sample x = stream.next();
      sum += x.features;
      const Vector before = opt.theta();
      opt.step(x);
      const Vector mean = sum / static_cast<double>(i);
      const Vector expected = mean + (1.0 - eta) * (before - mean);
      max_err = std::max(
          max_err, (opt.theta() - expected).lpNorm<Eigen::Infinity>());
      const double gap_before = (before - mean).norm();
      if (gap_before > 1e-9) {
        const double factor = (opt.theta() - mean).norm() / gap_before;
        max_factor_err = std::max(max_factor_err,
                                  std::abs(factor - (1.0 - eta)));
      }
    }
    report.tracking_max_err = max_err;
    report.factor_max_err = max_factor_err;
    report.tracking_ok = max_err <= 1e-12 && max_factor_err <= 1e-12;
  }
  {
    const double mu = 1.0;
    const double l = 2.0;
    const double eta = 2.0 * mu / (l * (mu + l));  // largest admissible
    report.contraction_bound = contraction_rate(mu, l, eta);
    Matrix curvature = Matrix::Zero(2, 2);
    curvature(0, 0) = mu;
    curvature(1, 1) = l;
    Vector star(2);
    star << 0.3, -0.2;
    auto model = std::make_shared<const ExponentialFamilyModel>(
        exponential_family_quadratic(curvature, star));
    SampleStream stream(model, seed + 1);
    RootSgd opt(*model, eta, 1);
    Vector stat_sum = Vector::Zero(2);
    double max_ratio = 0.0;
    for (long i = 1; i <= 500; ++i) {
      const Sample x = stream.next();
      stat_sum += model->sufficient_stat(x);
      opt.step(x);
      const Vector matched = model->solve_stat_match(
          Vector(stat_sum / static_cast<double>(i)));
      const double gap_before = (opt.theta_pre() - matched).norm();
      if (gap_before > 1e-9) {
        max_ratio =
            std::max(max_ratio, (opt.theta() - matched).norm() / gap_before);
      }
    }
    report.contraction_max_ratio = max_ratio;
    report.contraction_ok = max_ratio <= report.contraction_bound + 1e-9;
  }
  return report;
}

}  // namespace rootsgd
