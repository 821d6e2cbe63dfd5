#include "bdflow/ensemble.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "bdflow/io.hpp"

namespace bdflow {

Ensemble::Ensemble(std::size_t dimension, bool has_amplitude, std::uint64_t rng_seed)
    : k_(dimension), has_amplitude_(has_amplitude), rng_seed_(rng_seed) {
  if (k_ == 0) throw ConfigError("ensemble dimension must be >= 1");
}

Ensemble Ensemble::from_sampler(const SamplerSpec& position_sampler, std::size_t n, std::size_t k,
                                std::uint64_t seed, const SamplerSpec* amplitude_sampler) {
  Rng rng = Rng::stream(seed, 0);
  return from_sampler(position_sampler, n, k, rng, seed, amplitude_sampler);
}

Ensemble Ensemble::from_sampler(const SamplerSpec& position_sampler, std::size_t n, std::size_t k,
                                Rng& rng, std::uint64_t seed_tag,
                                const SamplerSpec* amplitude_sampler) {
  if (n == 0) throw ConfigError("population size must be >= 1");
  position_sampler.validate(k);
  if (amplitude_sampler) amplitude_sampler->validate(1);

  Ensemble ens(k, amplitude_sampler != nullptr, seed_tag);
  ens.positions_.resize(n * k);
  ens.weights_.assign(n, 1.0);
  ens.birth_ids_.resize(n);
  if (amplitude_sampler) ens.amplitudes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    position_sampler.sample(rng, ens.position(i));
    if (amplitude_sampler) amplitude_sampler->sample(rng, std::span<double>(&ens.amplitudes_[i], 1));
    ens.birth_ids_[i] = ens.next_birth_id_++;
  }
  return ens;
}

void Ensemble::set_amplitude(std::size_t i, double c) {
  if (!has_amplitude_) throw std::logic_error("ensemble has no amplitude channel");
  amplitudes_[i] = c;
}

ParticleState Ensemble::particle(std::size_t i) const {
  ParticleState p;
  const auto pos = position(i);
  p.position.assign(pos.begin(), pos.end());
  if (has_amplitude_) p.amplitude = amplitudes_[i];
  p.weight = weights_[i];
  return p;
}

void Ensemble::push_back(const ParticleState& p) {
  if (p.position.size() != k_) {
    throw ConfigError("particle dimension " + std::to_string(p.position.size()) +
                      " does not match ensemble dimension " + std::to_string(k_));
  }
  if (has_amplitude_ != p.amplitude.has_value()) {
    throw ConfigError("particle amplitude channel does not match the ensemble");
  }
  positions_.insert(positions_.end(), p.position.begin(), p.position.end());
  if (has_amplitude_) amplitudes_.push_back(*p.amplitude);
  weights_.push_back(p.weight);
  birth_ids_.push_back(next_birth_id_++);
}

void Ensemble::clone_particle(std::size_t i, double jitter, Rng* rng) {
  if (i >= size()) throw std::out_of_range("clone_particle: index " + std::to_string(i) + " out of range");
  if (jitter < 0.0) throw ConfigError("clone jitter must be >= 0");
  if (jitter > 0.0 && rng == nullptr) throw std::logic_error("clone with jitter needs a random source");
  const std::size_t base = positions_.size();
  positions_.resize(base + k_);
  std::copy_n(positions_.begin() + static_cast<std::ptrdiff_t>(i * k_), k_,
              positions_.begin() + static_cast<std::ptrdiff_t>(base));
  if (jitter > 0.0) {
    for (std::size_t d = 0; d < k_; ++d) positions_[base + d] += jitter * rng->normal();
  }
  if (has_amplitude_) amplitudes_.push_back(amplitudes_[i]);
  weights_.push_back(weights_[i]);
  birth_ids_.push_back(next_birth_id_++);
}

void Ensemble::kill_particle(std::size_t i) {
  if (i >= size()) throw std::out_of_range("kill_particle: index " + std::to_string(i) + " out of range");
  if (size() == 1) throw std::logic_error("kill_particle: cannot remove the last particle");
  const auto first = positions_.begin() + static_cast<std::ptrdiff_t>(i * k_);
  positions_.erase(first, first + static_cast<std::ptrdiff_t>(k_));
  if (has_amplitude_) amplitudes_.erase(amplitudes_.begin() + static_cast<std::ptrdiff_t>(i));
  weights_.erase(weights_.begin() + static_cast<std::ptrdiff_t>(i));
  birth_ids_.erase(birth_ids_.begin() + static_cast<std::ptrdiff_t>(i));
}

void Ensemble::rebuild_from(std::span<const std::size_t> parents, double weight) {
  std::vector<double> positions(parents.size() * k_);
  std::vector<double> amplitudes;
  if (has_amplitude_) amplitudes.resize(parents.size());
  std::vector<std::uint64_t> ids(parents.size());
  std::vector<char> used(size(), 0);
  for (std::size_t j = 0; j < parents.size(); ++j) {
    const std::size_t p = parents[j];
    if (p >= size()) throw std::out_of_range("rebuild_from: parent index out of range");
    std::copy_n(positions_.begin() + static_cast<std::ptrdiff_t>(p * k_), k_,
                positions.begin() + static_cast<std::ptrdiff_t>(j * k_));
    if (has_amplitude_) amplitudes[j] = amplitudes_[p];
    ids[j] = used[p] ? next_birth_id_++ : birth_ids_[p];
    used[p] = 1;
  }
  positions_ = std::move(positions);
  amplitudes_ = std::move(amplitudes);
  birth_ids_ = std::move(ids);
  weights_.assign(parents.size(), weight);
}

void Ensemble::overwrite_with_clone(std::size_t target, std::size_t source) {
  if (target >= size() || source >= size()) throw std::out_of_range("overwrite_with_clone: index out of range");
  std::copy_n(positions_.begin() + static_cast<std::ptrdiff_t>(source * k_), k_,
              positions_.begin() + static_cast<std::ptrdiff_t>(target * k_));
  if (has_amplitude_) amplitudes_[target] = amplitudes_[source];
  weights_[target] = weights_[source];
  birth_ids_[target] = next_birth_id_++;
}

double Ensemble::mean_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s / static_cast<double>(size());
}

void Ensemble::normalize_weights() {
  const double m = mean_weight();
  if (!(m > 0.0)) throw ExtinctionError("all weights are zero");
  for (double& w : weights_) w /= m;
}

void Ensemble::validate() const {
  if (size() == 0) throw ConfigError("ensemble is empty");
  for (std::size_t i = 0; i < size(); ++i) {
    for (double x : position(i)) {
      if (!std::isfinite(x)) throw NumericError("non-finite position", i);
    }
    if (has_amplitude_ && !std::isfinite(amplitudes_[i])) throw NumericError("non-finite amplitude", i);
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) throw NumericError("invalid weight", i);
  }
  if (std::abs(mean_weight() - 1.0) > 1e-12) {
    throw ConfigError("mean weight " + format_real(mean_weight()) + " differs from 1");
  }
}

void Ensemble::write_csv(std::ostream& out) const {
  out << "id,birth_id,weight,amplitude";
  for (std::size_t d = 0; d < k_; ++d) out << ",theta_" << d;
  out << '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out << i << ',' << birth_ids_[i] << ',' << format_real(weights_[i]) << ',';
    if (has_amplitude_) out << format_real(amplitudes_[i]);
    for (double x : position(i)) out << ',' << format_real(x);
    out << '\n';
  }
}

}  // namespace bdflow
