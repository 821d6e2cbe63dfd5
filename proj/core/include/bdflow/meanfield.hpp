#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "bdflow/potentials.hpp"

namespace bdflow {

using ScalarFn = std::function<double(double)>;

/// Cell-averaged density on [lo, hi] split into `cells` equal cells.
struct Grid1D {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t cells = 0;
  std::vector<double> density;
  double time = 0.0;

  /// Zero density on `cells` cells. Throws ConfigError on an empty or inverted domain.
  static Grid1D make(double lo, double hi, std::size_t cells);

  double dx() const noexcept { return (hi - lo) / static_cast<double>(cells); }
  double center(std::size_t i) const noexcept { return lo + (static_cast<double>(i) + 0.5) * dx(); }
  /// sum density dx
  double mass() const;
  /// sum phi(center) density dx
  double integrate(const ScalarFn& phi) const;
  /// Samples `rho` at cell centers and normalizes to unit mass.
  void set_density(const ScalarFn& rho);
  /// Throws NumericError if mass is off by more than `tol` or a cell is negative.
  void validate(double tol = 1e-8) const;
  /// `theta,density` rows at cell centers.
  void write_csv(std::ostream& out) const;
};

/// Exact law without transport, rho_t ∝ exp(-alpha t F) rho0, normalized by
/// composite Simpson quadrature on [lo, hi]. F is shifted by its minimum over
/// the quadrature nodes so the normalizer cannot underflow.
class PureBirthDeath {
 public:
  PureBirthDeath(ScalarFn F, ScalarFn rho0, double alpha, double lo, double hi, std::size_t nodes = 20001);

  double density(double t, double theta) const;
  /// int F rho_t
  double mean_energy(double t) const;
  /// int exp(-alpha t (F - min F)) rho0
  double normalizer(double t) const;

 private:
  template <class Fn>
  double simpson(Fn&& g) const;

  ScalarFn F_;
  ScalarFn rho0_;
  double alpha_;
  double lo_, hi_;
  std::size_t nodes_;
  std::vector<double> x_, f_, r0_;
  double fmin_ = 0.0;
};

double pure_bd_density(const ScalarFn& F, const ScalarFn& rho0, double alpha, double t, double theta, double lo,
                       double hi, std::size_t nodes = 20001);
double pure_bd_mean_energy(const ScalarFn& F, const ScalarFn& rho0, double alpha, double t, double lo, double hi,
                           std::size_t nodes = 20001);

struct RateFormulas {
  /// Row-major k x k symmetric positive definite Hessian at the minimizer.
  std::vector<double> hessian{1.0};
  double alpha = 1.0;
  std::size_t dimension = 1;

  /// Throws ConfigError on a non-SPD Hessian or alpha <= 0.
  void validate() const;
};

/// alpha^-1 tr(H exp(-2 H t)) via the eigendecomposition of H.
double transport_bd_asymptote(const RateFormulas& formulas, double t);

/// Gaussian law of the transport + birth-death PDE for quadratic
/// F = 1/2 <theta - theta*, H (theta - theta*)> started from N(mean0, cov0).
struct GaussianLaw {
  std::vector<double> mean;
  /// Row-major covariance.
  std::vector<double> covariance;
  double density(std::span<const double> theta) const;
};

/// Precision P_t = alpha/2 (e^{2Ht} - I) + e^{Ht} cov0^-1 e^{Ht} and mean
/// theta* + P_t^-1 e^{Ht} cov0^-1 (mean0 - theta*). Covariance eigenvalues are
/// floored at 1e-300.
GaussianLaw characteristics_law_quadratic(const QuadraticWellParams& well, std::span<const double> mean0,
                                          std::span<const double> cov0, double alpha, double t);

double characteristics_density_quadratic(const QuadraticWellParams& well, std::span<const double> mean0,
                                         std::span<const double> cov0, double alpha, double t,
                                         std::span<const double> theta);

struct GridSolverConfig {
  double dt = 1e-3;
  double alpha = 1.0;
  bool transport = true;
  bool birth_death = true;
  double cfl_limit = 0.9;
  /// Clipped negative mass above this counts as a stability warning.
  double clip_tolerance = 1e-6;
  /// Warnings tolerated before the solver gives up.
  std::size_t max_warnings = 100;
};

/// Explicit finite-volume solver for the conserved birth-death PDE in 1D.
/// Potentials are evaluated at cell centers; face velocities are the centered
/// differences -(V_{i} - V_{i-1}) / dx, fluxes are upwinded and the domain
/// boundaries carry no flux. The reaction factor 1 - alpha dt (V - Vbar) uses
/// the post-transport potential. Interacting kernels are tabulated once
/// (cells^2 doubles).
class GridSolver1D {
 public:
  GridSolver1D(const PotentialModel& model, Grid1D grid, GridSolverConfig cfg);

  void step();
  /// Steps until time >= t - dt/2.
  void advance_to(double t);

  const Grid1D& grid() const noexcept { return grid_; }
  const GridSolverConfig& config() const noexcept { return cfg_; }
  /// Potential at the cell centers for the current density.
  std::vector<double> potentials() const;
  double energy() const;
  std::size_t warnings() const noexcept { return warnings_; }
  double last_clip_mass() const noexcept { return last_clip_; }
  double total_clip_mass() const noexcept { return total_clip_; }

 private:
  void potentials_into(std::span<double> V) const;
  double clip_and_normalize();

  Grid1D grid_;
  GridSolverConfig cfg_;
  std::vector<double> F_;
  std::vector<double> K_;
  std::vector<double> V_, flux_;
  std::size_t warnings_ = 0;
  double last_clip_ = 0.0;
  double total_clip_ = 0.0;
};

/// One solver step from `grid` (tabulates the kernel on every call; use
/// GridSolver1D for repeated stepping).
Grid1D grid_solver_1d(const PotentialModel& model, const Grid1D& grid, const GridSolverConfig& cfg);

/// sum F rho dx + 1/2 sum sum K rho rho dx^2 with potentials at cell centers.
double grid_energy(const PotentialModel& model, const Grid1D& grid);

/// L1 distance sum |a - b| dx between two densities on the same grid.
double l1_distance(const Grid1D& a, const Grid1D& b);

}  // namespace bdflow
