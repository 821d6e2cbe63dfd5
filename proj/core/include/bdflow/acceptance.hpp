#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bdflow/config.hpp"

namespace bdflow {

enum class VerifyLevel { Fast, Full };

struct AcceptanceOptions {
  VerifyLevel level = VerifyLevel::Full;
  std::size_t jobs = 0;
  /// Criteria to run (1-based ids); empty runs all.
  std::vector<int> only;
  /// Mutation check: runs the mixture comparison with the sign of every
  /// birth-death rate flipped.
  bool invert_rate_sign = false;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  /// Reduced budget (fast level) rather than the full protocol.
  bool reduced = false;
  std::string detail;
  nlohmann::json measured;
  double seconds = 0.0;
};

struct AcceptanceReport {
  VerifyLevel level = VerifyLevel::Full;
  std::vector<CriterionResult> results;
  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Runs the selected criteria in order, printing one PASS/FAIL line per
/// criterion to `progress` when given.
AcceptanceReport run_acceptance(const AcceptanceOptions& options, std::ostream* progress = nullptr);

/// One criterion by id (1..12).
CriterionResult run_criterion(int id, const AcceptanceOptions& options);

inline constexpr int kCriterionCount = 12;
std::string criterion_name(int id);

/// Experiment configs used by the mixture and student-teacher comparisons,
/// keyed by file stem; the committed configs/ directory mirrors them.
std::vector<std::pair<std::string, ExperimentConfig>> reference_configs();

}  // namespace bdflow
