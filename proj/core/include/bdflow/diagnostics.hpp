#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bdflow/dynamics.hpp"
#include "bdflow/ensemble.hpp"
#include "bdflow/meanfield.hpp"
#include "bdflow/potentials.hpp"
#include "bdflow/sampler.hpp"

namespace bdflow {

struct TrajectoryRecord {
  std::uint64_t step = 0;
  double time = 0.0;
  /// Ensemble energy for exact models, batch loss for batch models.
  double energy = 0.0;
  double mean_V = 0.0;
  double var_V = 0.0;
  double grad_norm_sq = 0.0;
  std::size_t births = 0;
  std::size_t deaths = 0;
  std::size_t n = 0;
};

/// `step,time,energy,mean_V,var_V,grad_norm_sq,births,deaths,n`
void write_trajectory_header(std::ostream& out);
void write_trajectory_row(std::ostream& out, const TrajectoryRecord& r);
std::string trajectory_csv(std::span<const TrajectoryRecord> records);

/// n^-1 sum_i w_i F_i + (2 n^2)^-1 sum_ij w_i w_j K_ij. Batch models throw UnsupportedOperation.
double ensemble_energy(const PotentialModel& model, const Ensemble& ens);

struct DecayTerms {
  /// int |grad V|^2 dmu
  double grad_term = 0.0;
  /// int (V - Vbar)^2 dmu
  double var_term = 0.0;
};

DecayTerms energy_decay_terms(const PotentialModel& model, const Ensemble& ens, const Batch* batch = nullptr);

/// Fills energy, mean_V, var_V and grad_norm_sq for the current ensemble.
/// Batch models need `batch`, on which the loss is reported.
TrajectoryRecord observe(const PotentialModel& model, const Ensemble& ens, const Batch* batch = nullptr);

struct EulerLagrangeResidual {
  /// max_i |V(theta_i) - Vbar|
  double support_residual = 0.0;
  /// max(0, Vbar - min_p V(probe_p))
  double exterior_violation = 0.0;
};

/// Probe potentials use the empirical measure of `ens`. Throws ConfigError on
/// an empty probe set.
EulerLagrangeResidual euler_lagrange_residual(const PotentialModel& model, const Ensemble& ens,
                                              std::span<const ParticleState> probes);

struct TestFunction {
  std::string name;
  std::function<double(double)> fn;
};

/// theta, theta^2 and the indicator of theta > 0.
std::vector<TestFunction> default_test_functions();

/// Density of a one-dimensional sampler on the cells of a fresh grid. Point
/// masses occupy the cell containing them.
Grid1D initial_grid(const SamplerSpec& init, double lo, double hi, std::size_t cells);

struct FluctuationSetup {
  const PotentialModel* model = nullptr;
  DynamicsConfig dynamics;
  SamplerSpec init = SamplerSpec::gaussian(0.0, 1.0);
  std::vector<std::size_t> n_list{250, 1000, 4000};
  std::size_t seeds = 64;
  std::vector<TestFunction> test_fns = default_test_functions();
  /// Sorted checkpoint times; the slope is fitted at `slope_time`.
  std::vector<double> checkpoints{0.2, 1.0, 5.0};
  double slope_time = 1.0;
  /// Self-quenching ratio compares RMS at `late_time` to RMS at `early_time`.
  double early_time = 0.2;
  double late_time = 5.0;
  /// Reference grid; its initial density is built from `init`.
  double grid_lo = -8.0;
  double grid_hi = 8.0;
  std::size_t grid_cells = 2048;
  GridSolverConfig grid;
  std::uint64_t base_seed = 1;
  std::size_t jobs = 0;
};

struct FluctuationReport {
  std::vector<double> checkpoints;
  std::vector<std::size_t> n_list;
  std::vector<std::string> test_names;
  /// rms[checkpoint][n][test function]
  std::vector<std::vector<std::vector<double>>> rms;
  /// Least-squares slope of log RMS against log n at slope_time, per test function.
  std::vector<double> slope_per_fn;
  /// Mean of slope_per_fn; NaN when skipped.
  double slope = 0.0;
  /// Mean over n and test functions of RMS(late) / RMS(early).
  double quench_ratio = 0.0;
  /// Set when every seed produced the same discrepancy (deterministic
  /// dynamics): the scaling has nothing to measure and slope is NaN.
  bool skipped = false;
};

/// Runs `seeds` trajectories per population size and measures the RMS over
/// seeds of int phi d(mu^(n)_t - mu_t) against the grid reference.
/// Seeds run in parallel; seed s draws its run seed from Rng::stream(base_seed, s),
/// shared across population sizes.
FluctuationReport fluctuation_scaling(const FluctuationSetup& setup);

enum class FitForm { PowerLaw, Exponential };
std::string to_string(FitForm f);
/// Throws ConfigError on an unknown name.
FitForm fit_form_from_string(const std::string& name);

struct RateFit {
  double coefficient = 0.0;
  /// Power-law exponent or exponential rate.
  double exponent = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log E against log t (power law) or t (exponential)
/// over records with time in [t0, t1]. Throws FitError with fewer than 10
/// records in the window or a nonpositive energy there.
RateFit rate_fit(std::span<const TrajectoryRecord> records, double t0, double t1, FitForm form);
RateFit rate_fit(std::span<const double> times, std::span<const double> values, double t0, double t1, FitForm form);

/// Ordinary least-squares slope, intercept and r^2 of y on x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace bdflow
