#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bdflow/ensemble.hpp"
#include "bdflow/potentials.hpp"
#include "bdflow/rng.hpp"
#include "bdflow/sampler.hpp"

namespace bdflow {

enum class Variant {
  GdOnly,           ///< forward-Euler transport only
  GdBd,             ///< transport then Bernoulli birth-death with population control
  GdBdReinjection,  ///< as GdBd, deficits refilled from the prior (c = 0, y ~ rho_bar)
  GdBdFVariant,     ///< as GdBd with rates f(V~) - mean f(V~)
  BdOnly,           ///< Bernoulli birth-death without transport
  KmcBd,            ///< exact-time birth-death without transport (non-interacting only)
  Proximal,         ///< m GD steps, proximal weight update, systematic resampling
};

std::string to_string(Variant v);
/// Throws ConfigError on an unknown name.
Variant variant_from_string(std::string_view name);
bool uses_transport(Variant v) noexcept;
bool uses_birth_death(Variant v) noexcept;

/// Odd nondecreasing transform f applied to centered rates. Built-ins are the
/// identity and the saturated tanh(beta z) / beta; `custom` is for programmatic use.
struct RateTransform {
  enum class Kind { Identity, Tanh, Custom };
  Kind kind = Kind::Identity;
  double beta = 1.0;
  std::function<double(double)> custom;

  static RateTransform identity() { return {}; }
  static RateTransform saturated(double beta) { return {Kind::Tanh, beta, {}}; }

  double operator()(double z) const;
  std::string name() const;
  /// Checks z f(z) >= 0 on 1000 points of [-50, 50] (and beta > 0 for tanh).
  void validate() const;
};

struct DynamicsConfig {
  Variant variant = Variant::GdBd;
  double dt = 0.01;
  double alpha = 1.0;
  /// Creation intensity from the prior where V < Vbar (reinjection variant only).
  double alpha_prime = 0.0;
  RateTransform f;
  /// Proximal step; defaults to alpha * proximal_gd_steps * dt.
  std::optional<double> tau;
  std::size_t proximal_gd_steps = 10;
  std::size_t proximal_inner_iters = 100;
  std::optional<SamplerSpec> reinjection_prior;
  double clone_jitter = 0.0;

  double effective_tau() const;
  /// Throws ConfigError if the configuration cannot drive `model`.
  void validate(const PotentialModel& model) const;
};

struct StepReport {
  std::size_t births = 0;
  std::size_t deaths = 0;
  /// max_i alpha |rate_i| dt over the step's birth-death pass.
  double max_rate = 0.0;
  /// Particles added or removed by the end-of-pass population control.
  std::size_t population_corrections = 0;
  /// Particles sampled from the reinjection prior.
  std::size_t reinjections = 0;
};

/// Random sources threaded through a run. `events` drives birth-death and
/// resampling decisions, `data` draws minibatches, so matched-seed comparisons
/// across variants see the same data.
struct StepStreams {
  Rng events;
  Rng data;

  static StepStreams from_seed(std::uint64_t seed) {
    return {Rng::stream(seed, 1), Rng::stream(seed, 2)};
  }
};

/// Synchronous forward-Euler transport theta_i -= dt grad V(theta_i); amplitudes
/// move with the rest of theta. Batch models need `batch`.
void gd_step(const PotentialModel& model, Ensemble& ens, double dt, const Batch* batch = nullptr);

/// V_i - n^-1 sum_j V_j (the sum is exactly zero up to rounding).
std::vector<double> centered(std::span<const double> V);

/// Centered rate V~_i from exact potentials, or c_i Vhat_P(y_i) for batch models.
std::vector<double> centered_rate(const PotentialModel& model, const Ensemble& ens,
                                  const Batch* batch = nullptr);

/// r_i = f(V~_i) - n^-1 sum_j f(V~_j). The identity returns V~ unchanged.
std::vector<double> fvariant_rate(std::span<const double> centered_rates, const RateTransform& f);
std::vector<double> fvariant_rate(const PotentialModel& model, const Ensemble& ens,
                                  const RateTransform& f, const Batch* batch = nullptr);

enum class BernoulliDecision : std::uint8_t { Keep, Kill, Duplicate };

/// One independent draw per particle with a non-zero rate: kill with
/// probability 1 - exp(-alpha r dt) when r > 0, duplicate with
/// 1 - exp(-alpha |r| dt) when r < 0.
std::vector<BernoulliDecision> bernoulli_phase(std::span<const double> rates, double alpha, double dt,
                                               Rng& rng);

/// Applies frozen `rates` to the ensemble: Bernoulli phase followed by strict
/// population control (uniform kills of the excess, or uniform duplications of
/// post-phase particles for a deficit). If the Bernoulli phase kills everyone,
/// the population is redrawn uniformly from the pre-phase particles.
StepReport birth_death_from_rates(Ensemble& ens, std::span<const double> rates, const DynamicsConfig& cfg,
                                  Rng& rng);

/// Birth-death pass with rates computed once on the current configuration.
StepReport birth_death_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, Rng& rng,
                            const Batch* batch = nullptr);

/// Birth-death pass where a deficit is filled with prior samples (c = 0,
/// y ~ reinjection_prior) instead of clones. With alpha_prime > 0 it also
/// proposes n prior samples, inserts each with probability
/// 1 - exp(-alpha' (Vbar - V)_+ dt) and removes as many particles drawn
/// uniformly from {V > Vbar}.
StepReport reinjection_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, Rng& rng,
                            const Batch* batch = nullptr);

struct KmcEvent {
  enum class Kind : std::uint8_t { Kill, Duplicate };
  double time = 0.0;
  Kind kind = Kind::Kill;
  /// Particle whose clock fired.
  std::size_t index = 0;
  /// Uniformly drawn partner that was duplicated (after a kill) or killed (after a duplication).
  std::size_t partner = 0;
};

struct KmcResult {
  std::vector<KmcEvent> events;
  double elapsed = 0.0;
};

/// Exact-in-time birth-death without transport for non-interacting exact
/// models (positions frozen between events). Total rate R = alpha sum |V~_i|,
/// waiting time ~ Exp(R), firing particle chosen with probability
/// |V~_i| / sum |V~_j|; each kill is paired with a uniform duplication and vice
/// versa. Rates are recomputed after every event; the run stops at `horizon`.
KmcResult kmc_run(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, double horizon,
                  Rng& rng);

struct ProximalReport {
  std::size_t iterations = 0;
  bool converged = false;
  double last_change = 0.0;
};

/// Solves w_i = C^-1 w_i^old exp(-tau V_i(w)), V_i(w) = F_i + n^-1 sum_j w_j K_ij,
/// by fixed-point iteration from w = w_old, for at most `inner_iters` sweeps or
/// until max |w change| < 1e-10. Throws StepSizeError when the change grows for
/// three consecutive sweeps.
ProximalReport proximal_weight_update(const PotentialModel& model, Ensemble& ens, double tau,
                                      std::size_t inner_iters);

/// Systematic resampling to n unit-weight particles; particle i appears
/// floor(w_i) or ceil(w_i) times with expectation w_i.
void resample_weights(Ensemble& ens, Rng& rng);

/// One step of `cfg.variant` (one full m-step cycle for the proximal variant).
/// Increments the ensemble step counter.
StepReport run_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, StepStreams& streams);

/// Time covered by one run_step call.
double step_duration(const DynamicsConfig& cfg);

}  // namespace bdflow
