#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bdflow/config.hpp"
#include "bdflow/diagnostics.hpp"
#include "bdflow/ensemble.hpp"

namespace bdflow {

enum class RunStatus { Ok, NumericFailure, ConfigFailure };

struct RunResult {
  RunStatus status = RunStatus::Ok;
  std::string error;
  std::vector<TrajectoryRecord> records;
  std::optional<RateFit> fit;
  std::optional<Ensemble> final_ensemble;
  double wall_seconds = 0.0;
  nlohmann::json summary;
};

struct RunOptions {
  /// Write trajectory.csv, summary.json and snapshots under the output directory.
  bool write_files = true;
  /// Overrides config.output_dir when set.
  std::optional<std::filesystem::path> output_dir;
};

/// Builds the initial ensemble exactly as run_experiment does.
Ensemble initial_ensemble(const ExperimentConfig& config, const PotentialModel& model);

/// Runs config.steps steps, recording every record_every steps (and the first
/// and last). Numeric, extinction and step-size failures end the run with a
/// failed summary that keeps the records collected so far. Invalid
/// configurations throw ConfigError before anything runs.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepCell {
  nlohmann::json value;
  std::vector<double> final_energies;
  std::size_t failures = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct SweepReport {
  std::string axis;
  std::vector<SweepCell> cells;
  nlohmann::json to_json() const;
};

/// Runs every (value, seed) pair with seed = base.seed + s, each in
/// <output_dir>/cell_<i>/seed_<s>, then writes <output_dir>/sweep.json.
/// The axis must name an existing numeric or string field of the config.
SweepReport run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<nlohmann::json>& values,
                      std::size_t seeds, std::size_t jobs, const RunOptions& options = {});

}  // namespace bdflow
