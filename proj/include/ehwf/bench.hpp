#pragma once

// Random scenario generation, experiment presets and the experiment runner.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ehwf/baselines.hpp"
#include "ehwf/model.hpp"
#include "ehwf/rng.hpp"

namespace ehwf {

struct GenParams {
  std::size_t num_users = 1;
  std::size_t num_slots = 20;
  /// Mean and variance of the Gaussian that is truncated at zero.
  double harvest_mean = 5.0;
  double harvest_var = 1.0;
  double battery_max = 20.0;
  double power_max = 15.0;
  /// Gains are exponential with mean 1.
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument unless N, K >= 1, m >= 0, v > 0 and the
/// caps are positive and finite.
void validate(const GenParams& params);

/// Normal(m, v) conditioned on being >= 0, by rejection.
double truncated_gaussian(double mean, double var, Rng& rng);

/// Deterministic in params. User n draws harvests from stream
/// derive_seed(seed, {n, 0}) and gains from derive_seed(seed, {n, 1}).
Scenario gen_scenario(const GenParams& params);

struct SweepPoint {
  /// Used in scenario ids; no commas or slashes.
  std::string label;
  GenParams params;  // seed ignored, set per trial
};

struct ExperimentConfig {
  std::string name;
  std::vector<SweepPoint> points;
  std::vector<Policy> policies;
  std::size_t trials = 500;
  std::uint64_t seed = 1;
  double eps = 1e-5;
  std::size_t max_iter = 50;
  /// Record the per-sweep sum rate of the optimal policy.
  bool traces = false;
  /// Measure wall time per run; otherwise the column is 0 so output bytes
  /// depend on (config, seed) alone.
  bool timing = false;
};

inline constexpr std::size_t kDefaultTrials = 500;
inline constexpr std::size_t kFullTrials = 2000;

const std::vector<std::string>& preset_names();
/// fig5 .. fig10. Throws std::invalid_argument for an unknown name.
ExperimentConfig preset(std::string_view name,
                        std::size_t trials = kDefaultTrials);

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line(line), column(column) {}
  /// 1-based; 0 when the error is not tied to a position.
  std::size_t line;
  std::size_t column;
};

/// {"preset": "fig5", "trials": 100, "seed": 7}
/// or
/// {"name": "...", "params": {"num_users": 1, "num_slots": 20,
///   "harvest_mean": 5, "harvest_var": 1, "battery_max": 20,
///   "power_max": 15},
///  "sweep": {"parameter": "harvest_var", "values": [1, 2, 3]},
///  "policies": ["optimal", "greedy"], "trials": 100, "seed": 1,
///  "eps": 1e-5, "max_iter": 50, "traces": false}
/// Throws ConfigError.
ExperimentConfig parse_config(std::string_view text);

/// Seed of trial t; shared by every sweep point so that points are compared
/// on common random numbers.
std::uint64_t trial_seed(std::uint64_t base, std::size_t trial);

struct ResultRow {
  std::string scenario_id;  // "<label>/<trial>"
  std::uint64_t seed = 0;
  Policy policy = Policy::Optimal;
  double sum_rate_nats = 0.0;
  /// Sweeps for iterative policies, 0 otherwise.
  std::size_t iterations = 0;
  double wall_time_ms = 0.0;
};

struct TraceRow {
  std::string scenario_id;
  std::size_t iteration = 0;  // 1-based sweep index
  double sum_rate_nats = 0.0;
};

struct PointSummary {
  std::string label;
  Policy policy = Policy::Optimal;
  std::size_t trials = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double mean_iterations = 0.0;
};

struct ExperimentResult {
  std::string name;
  /// Ordered by point, then trial, then policy.
  std::vector<ResultRow> rows;
  std::vector<TraceRow> traces;
  std::vector<PointSummary> summary;
};

/// Outcome of one policy on one scenario.
struct PolicyRun {
  TransmissionSchedule p;
  WastageSchedule d;
  std::size_t iterations = 0;
  std::vector<double> trace;
};
PolicyRun run_policy(Policy policy, const Scenario& scenario, double eps,
                     std::size_t max_iter);

/// Worker count: EHWF_THREADS if set and positive, else the hardware count.
std::size_t worker_count();

/// Runs every (point, trial) on `threads` workers (0 = worker_count()).
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::size_t threads = 0);

void write_results_csv(std::ostream& out, const ExperimentResult& result);
void write_trace_csv(std::ostream& out, const ExperimentResult& result);
void write_summary(std::ostream& out, const ExperimentResult& result);

}  // namespace ehwf
