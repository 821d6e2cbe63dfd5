#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bdflow/diagnostics.hpp"
#include "bdflow/dynamics.hpp"
#include "bdflow/potentials.hpp"
#include "bdflow/sampler.hpp"

namespace bdflow {

inline constexpr int kSchemaVersion = 1;

struct FitRequest {
  FitForm form = FitForm::PowerLaw;
  double t0 = 0.0;
  double t1 = 1.0;
};

struct ExperimentConfig {
  ModelSpec model = QuadraticWellParams{};
  SamplerSpec init = SamplerSpec::gaussian(0.0, 1.0);
  /// Initial amplitudes for models with an amplitude channel (default: all 0).
  std::optional<SamplerSpec> amplitude_init;
  DynamicsConfig dynamics;
  std::size_t n = 100;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  std::vector<double> snapshot_times;
  std::string output_dir = "out";
  std::optional<FitRequest> fit;
  /// Batch models report the loss on a fixed batch of this size.
  std::size_t eval_batch_size = 1024;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError naming the path.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Normalized form with every field present; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json sampler_to_json(const SamplerSpec& s);
SamplerSpec sampler_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json model_to_json(const ModelSpec& m);
ModelSpec model_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json dynamics_to_json(const DynamicsConfig& d);
DynamicsConfig dynamics_from_json(const nlohmann::json& j, const std::string& where);

/// Dimension k of the model's position and whether it has an amplitude.
std::size_t model_dimension(const ModelSpec& m);

/// "dynamics.alpha" or "/dynamics/alpha" to a JSON pointer.
nlohmann::json::json_pointer config_path(const std::string& path);

}  // namespace bdflow
