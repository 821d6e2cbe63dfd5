#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "bdflow/errors.hpp"
#include "bdflow/rng.hpp"
#include "bdflow/sampler.hpp"

namespace bdflow {

/// One particle as a value: parameter position theta, the output amplitude c for
/// network-form potentials, and the proximal weight w.
struct ParticleState {
  std::vector<double> position;
  std::optional<double> amplitude;
  double weight = 1.0;
};

/// Read-only view of one particle's parameters as seen by a potential.
/// Models without an amplitude channel ignore `amplitude`.
struct ParamView {
  std::span<const double> position;
  double amplitude = 1.0;
};

/// The particle population realizing the weighted empirical measure
/// n^-1 sum_i w_i delta_{theta_i}.
///
/// Storage is structure-of-arrays: positions are one contiguous n*k buffer.
/// Particle identity is the index within a step; `birth_id` is a monotone
/// lineage counter assigned when a particle is created or cloned.
/// Single writer: no member may be called concurrently with a mutation.
class Ensemble {
 public:
  Ensemble(std::size_t dimension, bool has_amplitude, std::uint64_t rng_seed = 0);

  /// n i.i.d. draws from `position_sampler` (and `amplitude_sampler` when the
  /// ensemble carries amplitudes), all weights 1. Reproducible given `seed`.
  static Ensemble from_sampler(const SamplerSpec& position_sampler, std::size_t n, std::size_t k,
                               std::uint64_t seed,
                               const SamplerSpec* amplitude_sampler = nullptr);
  /// Same, drawing from an explicit stream instead of a fresh one.
  static Ensemble from_sampler(const SamplerSpec& position_sampler, std::size_t n, std::size_t k,
                               Rng& rng, std::uint64_t seed_tag,
                               const SamplerSpec* amplitude_sampler = nullptr);

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dimension() const noexcept { return k_; }
  bool has_amplitude() const noexcept { return has_amplitude_; }
  std::uint64_t rng_seed() const noexcept { return rng_seed_; }
  std::uint64_t step_count() const noexcept { return step_count_; }
  void advance_step() noexcept { ++step_count_; }

  std::span<const double> position(std::size_t i) const { return {positions_.data() + i * k_, k_}; }
  std::span<double> position(std::size_t i) { return {positions_.data() + i * k_, k_}; }
  /// Amplitude of particle i; 1 when the ensemble has no amplitude channel.
  double amplitude(std::size_t i) const { return has_amplitude_ ? amplitudes_[i] : 1.0; }
  void set_amplitude(std::size_t i, double c);
  double weight(std::size_t i) const { return weights_[i]; }
  void set_weight(std::size_t i, double w) { weights_[i] = w; }
  std::uint64_t birth_id(std::size_t i) const { return birth_ids_[i]; }

  std::span<const double> positions() const noexcept { return positions_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }

  ParamView view(std::size_t i) const { return {position(i), amplitude(i)}; }
  ParticleState particle(std::size_t i) const;

  /// Appends a new particle with a fresh birth id.
  void push_back(const ParticleState& p);

  /// Appends a copy of particle i. With jitter > 0 the copy's position (only)
  /// receives isotropic gaussian noise of that standard deviation from `rng`.
  void clone_particle(std::size_t i, double jitter = 0.0, Rng* rng = nullptr);

  /// Stable removal of particle i. Throws std::logic_error when it is the last one.
  void kill_particle(std::size_t i);

  /// Replaces the population by copies of `parents` (indices into the current
  /// population, in output order). The first copy of a parent keeps its birth
  /// id, further copies get fresh ids. Weights of the copies are `weight`.
  /// An empty `parents` leaves an empty population for the caller to refill.
  void rebuild_from(std::span<const std::size_t> parents, double weight = 1.0);

  /// Replaces particle `target` by a copy of particle `source` with a fresh
  /// birth id: a kill of `target` paired with a duplication of `source`.
  void overwrite_with_clone(std::size_t target, std::size_t source);

  double mean_weight() const;
  /// Rescales weights so that their mean is exactly 1 up to rounding.
  void normalize_weights();

  /// Throws NumericError on NaN/Inf or negative weights and ConfigError on an
  /// empty population or a mean weight off 1 by more than 1e-12 (relative).
  void validate() const;

  /// Snapshot as CSV: `id,birth_id,weight,amplitude,theta_0,...,theta_{k-1}`.
  /// The amplitude column is empty when the ensemble has none.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t k_;
  bool has_amplitude_;
  std::vector<double> positions_;
  std::vector<double> amplitudes_;
  std::vector<double> weights_;
  std::vector<std::uint64_t> birth_ids_;
  std::uint64_t next_birth_id_ = 0;
  std::uint64_t rng_seed_;
  std::uint64_t step_count_ = 0;
};

/// n^-1 sum_i w_i phi(theta_i). Throws NumericError naming the first particle
/// where phi is not finite.
template <class Fn>
double empirical_expectation(const Ensemble& ens, Fn&& phi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double v = phi(ens.view(i));
    if (!std::isfinite(v)) throw NumericError("test function is not finite", i);
    acc += ens.weight(i) * v;
  }
  return acc / static_cast<double>(ens.size());
}

}  // namespace bdflow
