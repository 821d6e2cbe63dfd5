#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bdflow/rng.hpp"

namespace bdflow {

/// Isotropic or diagonal gaussian. A single mean/std entry is broadcast to all coordinates.
struct GaussianSampler {
  std::vector<double> mean{0.0};
  std::vector<double> std{1.0};
};

/// Uniform on the box [lo, hi). Single entries broadcast.
struct UniformBoxSampler {
  std::vector<double> lo{0.0};
  std::vector<double> hi{1.0};
};

/// Every draw is `at`. Single entry broadcasts.
struct PointMassSampler {
  std::vector<double> at{0.0};
};

struct SamplerSpec;

/// Independent one-dimensional samplers, one per coordinate.
struct ProductSampler {
  std::vector<SamplerSpec> coordinates;
};

struct SamplerSpec {
  std::variant<GaussianSampler, UniformBoxSampler, PointMassSampler, ProductSampler> kind;

  static SamplerSpec gaussian(std::vector<double> mean, std::vector<double> std);
  static SamplerSpec gaussian(double mean, double std) {
    return gaussian(std::vector<double>{mean}, std::vector<double>{std});
  }
  static SamplerSpec uniform(std::vector<double> lo, std::vector<double> hi);
  static SamplerSpec uniform(double lo, double hi) {
    return uniform(std::vector<double>{lo}, std::vector<double>{hi});
  }
  static SamplerSpec point_mass(std::vector<double> at);
  static SamplerSpec point_mass(double at) { return point_mass(std::vector<double>{at}); }
  static SamplerSpec product(std::vector<SamplerSpec> coordinates);

  /// Throws ConfigError if parameters are invalid for dimension k
  /// (std <= 0, lo >= hi, length mismatch, non-finite entries).
  void validate(std::size_t k) const;

  /// Draws one point into `out` (length k). Assumes validate(out.size()) passed.
  void sample(Rng& rng, std::span<double> out) const;

  /// Short name used in configs: gaussian, uniform, point-mass, product.
  std::string name() const;
};

bool operator==(const GaussianSampler&, const GaussianSampler&);
bool operator==(const UniformBoxSampler&, const UniformBoxSampler&);
bool operator==(const PointMassSampler&, const PointMassSampler&);
bool operator==(const ProductSampler&, const ProductSampler&);
bool operator==(const SamplerSpec&, const SamplerSpec&);

}  // namespace bdflow
