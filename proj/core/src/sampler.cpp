#include "bdflow/sampler.hpp"

#include <cmath>

#include "bdflow/errors.hpp"

namespace bdflow {

namespace {

double broadcast(const std::vector<double>& v, std::size_t i) {
  return v.size() == 1 ? v[0] : v[i];
}

void check_length(const std::vector<double>& v, std::size_t k, const char* what) {
  if (v.empty() || (v.size() != 1 && v.size() != k)) {
    throw ConfigError(std::string("sampler field '") + what + "' must have 1 or " +
                      std::to_string(k) + " entries, got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError(std::string("sampler field '") + what + "' is not finite");
  }
}

}  // namespace

SamplerSpec SamplerSpec::gaussian(std::vector<double> mean, std::vector<double> std) {
  return SamplerSpec{GaussianSampler{std::move(mean), std::move(std)}};
}

SamplerSpec SamplerSpec::uniform(std::vector<double> lo, std::vector<double> hi) {
  return SamplerSpec{UniformBoxSampler{std::move(lo), std::move(hi)}};
}

SamplerSpec SamplerSpec::point_mass(std::vector<double> at) {
  return SamplerSpec{PointMassSampler{std::move(at)}};
}

SamplerSpec SamplerSpec::product(std::vector<SamplerSpec> coordinates) {
  return SamplerSpec{ProductSampler{std::move(coordinates)}};
}

std::string SamplerSpec::name() const {
  switch (kind.index()) {
    case 0: return "gaussian";
    case 1: return "uniform";
    case 2: return "point-mass";
    default: return "product";
  }
}

void SamplerSpec::validate(std::size_t k) const {
  if (k == 0) throw ConfigError("sampler dimension must be >= 1");
  if (const auto* g = std::get_if<GaussianSampler>(&kind)) {
    check_length(g->mean, k, "mean");
    check_length(g->std, k, "std");
    for (double s : g->std) {
      if (s <= 0.0) throw ConfigError("gaussian sampler requires std > 0");
    }
  } else if (const auto* u = std::get_if<UniformBoxSampler>(&kind)) {
    check_length(u->lo, k, "lo");
    check_length(u->hi, k, "hi");
    for (std::size_t i = 0; i < k; ++i) {
      if (!(broadcast(u->lo, i) < broadcast(u->hi, i))) {
        throw ConfigError("uniform sampler requires lo < hi in every coordinate");
      }
    }
  } else if (const auto* p = std::get_if<PointMassSampler>(&kind)) {
    check_length(p->at, k, "at");
  } else {
    const auto& prod = std::get<ProductSampler>(kind);
    if (prod.coordinates.size() != k) {
      throw ConfigError("product sampler needs one coordinate sampler per dimension (" +
                        std::to_string(k) + "), got " + std::to_string(prod.coordinates.size()));
    }
    for (const auto& c : prod.coordinates) c.validate(1);
  }
}

void SamplerSpec::sample(Rng& rng, std::span<double> out) const {
  const std::size_t k = out.size();
  if (const auto* g = std::get_if<GaussianSampler>(&kind)) {
    for (std::size_t i = 0; i < k; ++i) out[i] = rng.normal(broadcast(g->mean, i), broadcast(g->std, i));
  } else if (const auto* u = std::get_if<UniformBoxSampler>(&kind)) {
    for (std::size_t i = 0; i < k; ++i) {
      const double lo = broadcast(u->lo, i);
      out[i] = lo + (broadcast(u->hi, i) - lo) * rng.uniform();
    }
  } else if (const auto* p = std::get_if<PointMassSampler>(&kind)) {
    for (std::size_t i = 0; i < k; ++i) out[i] = broadcast(p->at, i);
  } else {
    const auto& prod = std::get<ProductSampler>(kind);
    for (std::size_t i = 0; i < k; ++i) prod.coordinates[i].sample(rng, out.subspan(i, 1));
  }
}

bool operator==(const GaussianSampler& a, const GaussianSampler& b) {
  return a.mean == b.mean && a.std == b.std;
}
bool operator==(const UniformBoxSampler& a, const UniformBoxSampler& b) {
  return a.lo == b.lo && a.hi == b.hi;
}
bool operator==(const PointMassSampler& a, const PointMassSampler& b) { return a.at == b.at; }
bool operator==(const ProductSampler& a, const ProductSampler& b) {
  return a.coordinates == b.coordinates;
}
bool operator==(const SamplerSpec& a, const SamplerSpec& b) { return a.kind == b.kind; }

}  // namespace bdflow
