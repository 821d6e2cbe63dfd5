#include "bdflow/experiment.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "bdflow/errors.hpp"
#include "bdflow/io.hpp"
#include "bdflow/parallel.hpp"

namespace bdflow {

using nlohmann::json;

namespace {

json fit_to_json(const FitRequest& req, const RateFit& fit) {
  return {{"form", to_string(req.form)},
          {"window", {req.t0, req.t1}},
          {"coefficient", fit.coefficient},
          {"exponent", fit.exponent},
          {"r2", fit.r2},
          {"points", fit.points}};
}

// JSON cannot carry nan/inf; they become null.
json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

Ensemble initial_ensemble(const ExperimentConfig& config, const PotentialModel& model) {
  const SamplerSpec zero = SamplerSpec::point_mass(0.0);
  const SamplerSpec* amp = nullptr;
  if (model.has_amplitude()) amp = config.amplitude_init ? &*config.amplitude_init : &zero;
  return Ensemble::from_sampler(config.init, config.n, model.dimension(), config.seed, amp);
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto model = make_model(config.model);
  const std::filesystem::path out_dir = options.output_dir.value_or(config.output_dir);
  if (options.write_files) std::filesystem::create_directories(out_dir);

  RunResult result;
  Ensemble ens = initial_ensemble(config, *model);
  StepStreams streams = StepStreams::from_seed(config.seed);
  std::optional<Batch> eval_batch;
  if (!model->is_exact()) {
    Rng eval_rng = Rng::stream(config.seed, 3);
    eval_batch = static_cast<const ReluStudentTeacher&>(*model).sample_batch(config.eval_batch_size, eval_rng);
  }
  const Batch* eb = eval_batch ? &*eval_batch : nullptr;
  const double step_time = step_duration(config.dynamics);

  std::vector<std::pair<std::size_t, double>> snapshots;
  for (double t : config.snapshot_times)
    snapshots.emplace_back(static_cast<std::size_t>(std::llround(t / step_time)), t);
  json snapshot_files = json::array();
  auto take_snapshots = [&](std::size_t step) {
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
      if (snapshots[k].first != step) continue;
      const std::string name = "snapshot_" + std::to_string(k) + ".csv";
      if (options.write_files) {
        std::ostringstream os;
        ens.write_csv(os);
        write_file_atomic(out_dir / name, os.str());
      }
      snapshot_files.push_back({{"time", snapshots[k].second}, {"step", step}, {"file", name}});
    }
  };

  std::size_t births = 0, deaths = 0;
  auto record = [&](std::size_t step) {
    TrajectoryRecord r = observe(*model, ens, eb);
    r.step = step;
    r.time = static_cast<double>(step) * step_time;
    r.births = births;
    r.deaths = deaths;
    births = deaths = 0;
    result.records.push_back(r);
  };

  std::size_t completed = 0;
  try {
    record(0);
    take_snapshots(0);
    for (std::size_t s = 1; s <= config.steps; ++s) {
      const StepReport rep = run_step(*model, ens, config.dynamics, streams);
      births += rep.births;
      deaths += rep.deaths;
      completed = s;
      if (s % config.record_every == 0 || s == config.steps) record(s);
      take_snapshots(s);
    }
  } catch (const NumericError& e) {
    result.status = RunStatus::NumericFailure;
    result.error = e.what();
  } catch (const ExtinctionError& e) {
    result.status = RunStatus::NumericFailure;
    result.error = e.what();
  } catch (const StepSizeError& e) {
    result.status = RunStatus::NumericFailure;
    result.error = e.what();
  }

  if (config.fit && result.status == RunStatus::Ok) {
    try {
      result.fit = rate_fit(result.records, config.fit->t0, config.fit->t1, config.fit->form);
    } catch (const FitError& e) {
      result.error = std::string("fit: ") + e.what();
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["status"] = result.status == RunStatus::Ok ? "ok" : "failed";
  summary["error"] = result.error.empty() ? json(nullptr) : json(result.error);
  summary["seed"] = config.seed;
  summary["steps_completed"] = completed;
  summary["final_energy"] = result.records.empty() ? json(nullptr) : real_or_null(result.records.back().energy);
  summary["final_time"] = result.records.empty() ? json(nullptr) : json(result.records.back().time);
  summary["wall_seconds"] = result.wall_seconds;
  summary["fit"] = result.fit ? fit_to_json(*config.fit, *result.fit) : json(nullptr);
  summary["snapshots"] = snapshot_files;
  summary["config"] = config_to_json(config);
  result.summary = summary;
  result.final_ensemble = std::move(ens);

  if (options.write_files) {
    write_file_atomic(out_dir / "trajectory.csv", trajectory_csv(result.records));
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
  }
  return result;
}

json SweepReport::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) {
    json energies = json::array();
    for (double e : c.final_energies) energies.push_back(real_or_null(e));
    cells_json.push_back({{"value", c.value},
                          {"final_energies", energies},
                          {"failures", c.failures},
                          {"failed", c.failures > 0},
                          {"mean_final_energy", real_or_null(c.mean)},
                          {"std_final_energy", real_or_null(c.stddev)}});
  }
  return {{"schema_version", kSchemaVersion}, {"axis", axis}, {"cells", cells_json}};
}

SweepReport run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<json>& values,
                      std::size_t seeds, std::size_t jobs, const RunOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds == 0) throw ConfigError("sweep needs at least one seed");
  const json base_json = config_to_json(base);
  const auto ptr = config_path(axis);
  if (!base_json.contains(ptr)) throw ConfigError("sweep axis '" + axis + "' does not name a config field");
  const json& current = base_json.at(ptr);
  if (!current.is_number() && !current.is_string())
    throw ConfigError("sweep axis '" + axis + "' must be a numeric or enum field");

  const std::filesystem::path root = options.output_dir.value_or(base.output_dir);
  std::vector<ExperimentConfig> configs;
  for (std::size_t v = 0; v < values.size(); ++v) {
    json j = base_json;
    j[ptr] = values[v];
    for (std::size_t s = 0; s < seeds; ++s) {
      j["seed"] = base.seed + s;
      j["output_dir"] = (root / ("cell_" + std::to_string(v)) / ("seed_" + std::to_string(s))).string();
      ExperimentConfig c = config_from_json(j);
      c.validate();
      configs.push_back(std::move(c));
    }
  }

  std::vector<double> finals(configs.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> failed(configs.size(), false);
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    RunOptions o = options;
    o.output_dir.reset();
    const RunResult r = run_experiment(configs[i], o);
    failed[i] = r.status != RunStatus::Ok;
    if (!r.records.empty()) finals[i] = r.records.back().energy;
  });

  SweepReport rep;
  rep.axis = axis;
  for (std::size_t v = 0; v < values.size(); ++v) {
    SweepCell cell;
    cell.value = values[v];
    double sum = 0.0, sq = 0.0;
    std::size_t ok = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t i = v * seeds + s;
      cell.final_energies.push_back(finals[i]);
      if (failed[i]) {
        ++cell.failures;
        continue;
      }
      sum += finals[i];
      sq += finals[i] * finals[i];
      ++ok;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    cell.mean = ok ? sum / static_cast<double>(ok) : nan;
    cell.stddev = ok > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / static_cast<double>(ok)) /
                                                      static_cast<double>(ok - 1)))
                         : (ok == 1 ? 0.0 : nan);
    rep.cells.push_back(std::move(cell));
  }
  if (options.write_files) {
    std::filesystem::create_directories(root);
    write_file_atomic(root / "sweep.json", rep.to_json().dump(2) + "\n");
  }
  return rep;
}

}  // namespace bdflow
