#include "bdflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <numeric>

#include "bdflow/errors.hpp"

namespace bdflow {

namespace {

struct VariantName {
  Variant v;
  const char* name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::GdOnly, "gd-only"},        {Variant::GdBd, "gd-bd"},
    {Variant::GdBdReinjection, "gd-bd-reinjection"}, {Variant::GdBdFVariant, "gd-bd-fvariant"},
    {Variant::BdOnly, "bd-only"},        {Variant::KmcBd, "kmc-bd"},
    {Variant::Proximal, "proximal"},
};

void require_finite_rate(double r, std::size_t i) {
  if (!std::isfinite(r)) throw NumericError("birth-death rate is not finite", i);
}

// Uniformly chosen victims removed from `list`, keeping the order of the rest.
void remove_uniform(std::vector<std::size_t>& list, std::size_t count, Rng& rng) {
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t at = rng.index(list.size());
    list.erase(list.begin() + static_cast<std::ptrdiff_t>(at));
  }
}

double candidate_potential(const PotentialModel& model, const Ensemble& ens, ParamView cand) {
  if (!model.is_exact()) {
    // Batch models have V = c Vhat; prior samples carry c = 0.
    return 0.0;
  }
  double v = model.F(cand);
  if (model.is_interacting()) {
    double acc = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) acc += ens.weight(j) * model.K(cand, ens.view(j));
    v += acc / static_cast<double>(ens.size());
  }
  return v;
}

std::vector<double> bd_rates(const PotentialModel& model, const Ensemble& ens, const DynamicsConfig& cfg,
                             const Batch* batch) {
  auto r = centered_rate(model, ens, batch);
  if (cfg.f.kind == RateTransform::Kind::Identity) return r;
  return fvariant_rate(r, cfg.f);
}

Batch maybe_batch(const PotentialModel& model, Rng& data) {
  if (model.is_exact()) return {};
  return static_cast<const ReluStudentTeacher&>(model).sample_batch(data);
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& e : kVariantNames)
    if (e.v == v) return e.name;
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  for (const auto& e : kVariantNames)
    if (name == e.name) return e.v;
  throw ConfigError("unknown dynamics variant '" + std::string(name) + "'");
}

bool uses_transport(Variant v) noexcept {
  return v == Variant::GdOnly || v == Variant::GdBd || v == Variant::GdBdReinjection ||
         v == Variant::GdBdFVariant || v == Variant::Proximal;
}

bool uses_birth_death(Variant v) noexcept { return v != Variant::GdOnly; }

double RateTransform::operator()(double z) const {
  switch (kind) {
    case Kind::Identity: return z;
    case Kind::Tanh: return std::tanh(beta * z) / beta;
    case Kind::Custom: return custom(z);
  }
  return z;
}

std::string RateTransform::name() const {
  switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::Tanh: return "tanh";
    case Kind::Custom: return "custom";
  }
  return "unknown";
}

void RateTransform::validate() const {
  if (kind == Kind::Tanh && !(beta > 0.0 && std::isfinite(beta)))
    throw ConfigError("tanh rate transform needs beta > 0");
  if (kind == Kind::Custom && !custom) throw ConfigError("custom rate transform has no function");
  for (int i = 0; i <= 1000; ++i) {
    const double z = -50.0 + 0.1 * i;
    const double fz = (*this)(z);
    if (!std::isfinite(fz) || z * fz < 0.0)
      throw ConfigError("rate transform must satisfy z f(z) >= 0 (fails at z = " + std::to_string(z) + ")");
  }
}

double DynamicsConfig::effective_tau() const {
  return tau.value_or(alpha * static_cast<double>(proximal_gd_steps) * dt);
}

void DynamicsConfig::validate(const PotentialModel& model) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be nonnegative");
  if (!(alpha_prime >= 0.0) || !std::isfinite(alpha_prime)) throw ConfigError("alpha_prime must be nonnegative");
  if (clone_jitter < 0.0) throw ConfigError("clone_jitter must be nonnegative");
  f.validate();
  if (variant == Variant::GdBdFVariant && f.kind == RateTransform::Kind::Identity)
    throw ConfigError("gd-bd-fvariant needs a non-identity rate transform");
  if (variant == Variant::GdBdReinjection) {
    if (!reinjection_prior) throw ConfigError("gd-bd-reinjection needs a reinjection_prior");
    if (!model.has_amplitude())
      throw ConfigError("reinjection creates zero-amplitude units; the model has no amplitude");
    reinjection_prior->validate(model.dimension());
  }
  if (variant == Variant::KmcBd && (model.is_interacting() || !model.is_exact()))
    throw ConfigError("kmc-bd supports non-interacting exact models only");
  if (variant == Variant::Proximal) {
    if (!model.is_exact()) throw ConfigError("proximal variant needs an exact model");
    if (proximal_gd_steps == 0) throw ConfigError("proximal_gd_steps must be positive");
    if (proximal_inner_iters == 0) throw ConfigError("proximal_inner_iters must be positive");
    if (!(effective_tau() > 0.0)) throw ConfigError("tau must be positive");
  }
}

double step_duration(const DynamicsConfig& cfg) {
  return cfg.variant == Variant::Proximal ? cfg.dt * static_cast<double>(cfg.proximal_gd_steps) : cfg.dt;
}

void gd_step(const PotentialModel& model, Ensemble& ens, double dt, const Batch* batch) {
  const std::size_t n = ens.size();
  const std::size_t ps = model.parameter_size();
  const std::size_t off = model.has_amplitude() ? 1 : 0;
  std::vector<double> G(n * ps);
  model.evaluate(ens, batch, {}, G);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = G.data() + i * ps;
    if (off) ens.set_amplitude(i, ens.amplitude(i) - dt * g[0]);
    auto x = ens.position(i);
    for (std::size_t d = 0; d < x.size(); ++d) x[d] -= dt * g[off + d];
  }
}

std::vector<double> centered(std::span<const double> V) {
  std::vector<double> out(V.begin(), V.end());
  if (out.empty()) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  for (double& v : out) v -= mean;
  return out;
}

std::vector<double> centered_rate(const PotentialModel& model, const Ensemble& ens, const Batch* batch) {
  std::vector<double> V(ens.size());
  model.evaluate(ens, batch, V, {});
  return centered(V);
}

std::vector<double> fvariant_rate(std::span<const double> centered_rates, const RateTransform& f) {
  if (f.kind == RateTransform::Kind::Identity) return {centered_rates.begin(), centered_rates.end()};
  std::vector<double> r(centered_rates.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = f(centered_rates[i]);
    require_finite_rate(r[i], i);
  }
  return centered(r);
}

std::vector<double> fvariant_rate(const PotentialModel& model, const Ensemble& ens, const RateTransform& f,
                                  const Batch* batch) {
  return fvariant_rate(centered_rate(model, ens, batch), f);
}

std::vector<BernoulliDecision> bernoulli_phase(std::span<const double> rates, double alpha, double dt,
                                               Rng& rng) {
  std::vector<BernoulliDecision> out(rates.size(), BernoulliDecision::Keep);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double r = rates[i];
    require_finite_rate(r, i);
    if (r == 0.0) continue;
    const double p = -std::expm1(-alpha * std::abs(r) * dt);
    if (rng.uniform() < p) out[i] = r > 0.0 ? BernoulliDecision::Kill : BernoulliDecision::Duplicate;
  }
  return out;
}

namespace {

struct PassOutcome {
  std::vector<std::size_t> parents;
  StepReport report;
};

PassOutcome bernoulli_pass(std::span<const double> rates, const DynamicsConfig& cfg, Rng& rng) {
  PassOutcome out;
  const auto decisions = bernoulli_phase(rates, cfg.alpha, cfg.dt, rng);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    out.report.max_rate = std::max(out.report.max_rate, cfg.alpha * std::abs(rates[i]) * cfg.dt);
    switch (decisions[i]) {
      case BernoulliDecision::Kill: ++out.report.deaths; break;
      case BernoulliDecision::Duplicate:
        ++out.report.births;
        out.parents.push_back(i);
        out.parents.push_back(i);
        break;
      case BernoulliDecision::Keep: out.parents.push_back(i); break;
    }
  }
  return out;
}

}  // namespace

StepReport birth_death_from_rates(Ensemble& ens, std::span<const double> rates, const DynamicsConfig& cfg,
                                  Rng& rng) {
  const std::size_t n = ens.size();
  if (rates.size() != n) throw std::invalid_argument("birth_death_from_rates: rate count mismatch");
  if (n == 0) throw ExtinctionError("birth-death on an empty population");
  auto [parents, report] = bernoulli_pass(rates, cfg, rng);

  if (parents.empty()) {
    for (std::size_t k = 0; k < n; ++k) parents.push_back(rng.index(n));
    report.population_corrections = n;
  } else if (parents.size() > n) {
    report.population_corrections = parents.size() - n;
    remove_uniform(parents, parents.size() - n, rng);
  } else if (parents.size() < n) {
    const std::size_t have = parents.size();
    report.population_corrections = n - have;
    for (std::size_t k = have; k < n; ++k) parents.push_back(parents[rng.index(have)]);
  }
  std::sort(parents.begin(), parents.end());

  if (cfg.clone_jitter > 0.0) {
    // Later copies of a parent get jittered positions.
    ens.rebuild_from(parents);
    for (std::size_t i = 1; i < parents.size(); ++i) {
      if (parents[i] == parents[i - 1]) {
        for (double& x : ens.position(i)) x += cfg.clone_jitter * rng.normal();
      }
    }
  } else {
    ens.rebuild_from(parents);
  }
  return report;
}

StepReport birth_death_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, Rng& rng,
                            const Batch* batch) {
  const auto rates = bd_rates(model, ens, cfg, batch);
  return birth_death_from_rates(ens, rates, cfg, rng);
}

StepReport reinjection_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, Rng& rng,
                            const Batch* batch) {
  if (!cfg.reinjection_prior) throw ConfigError("reinjection needs a prior");
  if (!ens.has_amplitude()) throw ConfigError("reinjection needs an amplitude channel");
  const std::size_t n = ens.size();
  if (n == 0) throw ExtinctionError("birth-death on an empty population");
  const std::size_t k = ens.dimension();

  std::vector<double> V(n);
  model.evaluate(ens, batch, V, {});
  auto rates = centered(V);
  if (cfg.f.kind != RateTransform::Kind::Identity) rates = fvariant_rate(rates, cfg.f);
  const double vbar = std::accumulate(V.begin(), V.end(), 0.0) / static_cast<double>(n);

  // Prior creation where V < Vbar, compensated by kills where V > Vbar.
  std::vector<double> created;
  if (cfg.alpha_prime > 0.0) {
    std::vector<double> cand(k);
    for (std::size_t b = 0; b < n; ++b) {
      cfg.reinjection_prior->sample(rng, cand);
      const double vb = candidate_potential(model, ens, ParamView{cand, 0.0});
      const double gap = vbar - vb;
      if (gap > 0.0 && rng.uniform() < -std::expm1(-cfg.alpha_prime * gap * cfg.dt))
        created.insert(created.end(), cand.begin(), cand.end());
    }
  }

  auto [parents, report] = bernoulli_pass(rates, cfg, rng);

  std::size_t n_created = created.size() / k;
  if (n_created > 0) {
    std::vector<std::size_t> above;
    for (std::size_t i : parents)
      if (V[i] > vbar) above.push_back(i);
    std::vector<std::size_t> victims;
    while (victims.size() < n_created && !above.empty()) {
      const std::size_t at = rng.index(above.size());
      victims.push_back(above[at]);
      above.erase(above.begin() + static_cast<std::ptrdiff_t>(at));
    }
    n_created = victims.size();
    created.resize(n_created * k);
    for (std::size_t v : victims) {
      const auto it = std::find(parents.begin(), parents.end(), v);
      parents.erase(it);
    }
    report.deaths += n_created;
  }

  std::size_t fresh = n_created;
  const std::size_t total = parents.size() + n_created;
  if (total > n) {
    report.population_corrections = total - n;
    remove_uniform(parents, std::min(total - n, parents.size()), rng);
  } else if (total < n) {
    report.population_corrections = n - total;
  }

  ens.rebuild_from(parents);
  ParticleState p;
  p.position.resize(k);
  p.amplitude = 0.0;
  p.weight = 1.0;
  for (std::size_t b = 0; b < n_created; ++b) {
    std::copy_n(created.begin() + static_cast<std::ptrdiff_t>(b * k), k, p.position.begin());
    ens.push_back(p);
  }
  while (ens.size() < n) {
    cfg.reinjection_prior->sample(rng, p.position);
    ens.push_back(p);
    ++fresh;
  }
  report.reinjections = fresh;
  return report;
}

KmcResult kmc_run(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, double horizon,
                  Rng& rng) {
  if (model.is_interacting() || !model.is_exact())
    throw UnsupportedOperation("kmc_run needs a non-interacting exact model");
  const std::size_t n = ens.size();
  KmcResult out;
  if (n < 2 || !(horizon > 0.0)) return out;

  std::vector<double> F(n);
  for (std::size_t i = 0; i < n; ++i) {
    F[i] = model.F(ens.view(i));
    require_finite_rate(F[i], i);
  }
  double t = 0.0;
  std::size_t since_resum = 0;
  double fsum = std::accumulate(F.begin(), F.end(), 0.0);
  for (;;) {
    if (++since_resum == 1024) {
      fsum = std::accumulate(F.begin(), F.end(), 0.0);
      since_resum = 0;
    }
    const double fbar = fsum / static_cast<double>(n);
    double S = 0.0;
    for (double f : F) S += std::abs(f - fbar);
    const double R = cfg.alpha * S;
    if (!(R > 0.0)) break;
    const double wait = rng.exponential(R);
    if (t + wait > horizon) break;
    t += wait;

    double u = rng.uniform() * S;
    std::size_t i = 0;
    for (; i + 1 < n; ++i) {
      u -= std::abs(F[i] - fbar);
      if (u < 0.0) break;
    }
    // Skip zero-rate particles the scan may land on through rounding.
    while (std::abs(F[i] - fbar) == 0.0 && i > 0) --i;

    KmcEvent ev;
    ev.time = t;
    ev.index = i;
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    ev.partner = j;
    if (F[i] - fbar > 0.0) {
      ev.kind = KmcEvent::Kind::Kill;
      ens.overwrite_with_clone(i, j);
      fsum += F[j] - F[i];
      F[i] = F[j];
    } else {
      ev.kind = KmcEvent::Kind::Duplicate;
      ens.overwrite_with_clone(j, i);
      fsum += F[i] - F[j];
      F[j] = F[i];
    }
    out.events.push_back(ev);
  }
  out.elapsed = t;
  return out;
}

ProximalReport proximal_weight_update(const PotentialModel& model, Ensemble& ens, double tau,
                                      std::size_t inner_iters) {
  if (!model.is_exact()) throw UnsupportedOperation("proximal update needs an exact model");
  const std::size_t n = ens.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> F(n);
  for (std::size_t i = 0; i < n; ++i) F[i] = model.F(ens.view(i));
  std::vector<double> K;
  if (model.is_interacting()) {
    K.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = model.K(ens.view(i), ens.view(j));
  }

  std::vector<double> logw0(n);
  const auto w_old = ens.weights();
  for (std::size_t i = 0; i < n; ++i)
    logw0[i] = w_old[i] > 0.0 ? std::log(w_old[i]) : -std::numeric_limits<double>::infinity();

  std::vector<double> w(w_old.begin(), w_old.end());
  std::vector<double> next(n), logw(n);
  ProximalReport rep;
  double prev_change = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (std::size_t it = 1; it <= inner_iters; ++it) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double v = F[i];
      if (!K.empty()) {
        double acc = 0.0;
        const double* row = K.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += w[j] * row[j];
        v += inv_n * acc;
      }
      if (!std::isfinite(v)) throw NumericError("potential is not finite in proximal update", i);
      logw[i] = logw0[i] - tau * v;
      top = std::max(top, logw[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = std::exp(logw[i] - top);
      sum += next[i];
    }
    const double scale = static_cast<double>(n) / sum;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] *= scale;
      change = std::max(change, std::abs(next[i] - w[i]));
    }
    w.swap(next);
    rep.iterations = it;
    rep.last_change = change;
    if (change < 1e-10) {
      rep.converged = true;
      break;
    }
    growth = change > prev_change ? growth + 1 : 0;
    if (growth >= 3) throw StepSizeError("proximal fixed-point iteration diverges; reduce tau");
    prev_change = change;
  }
  std::copy(w.begin(), w.end(), ens.weights().begin());
  return rep;
}

void resample_weights(Ensemble& ens, Rng& rng) {
  const std::size_t n = ens.size();
  if (n == 0) throw ExtinctionError("resampling an empty population");
  const auto w = ens.weights();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!std::isfinite(total)) throw NumericError("weights do not have a finite sum");
  if (!(total > 0.0)) throw ExtinctionError("every weight is zero; nothing to resample");
  const double scale = static_cast<double>(n) / total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (w[i] > 0.0) last_positive = i;

  std::vector<std::size_t> parents;
  parents.reserve(n);
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double point = u + static_cast<double>(j);
    while (i < n && cum + w[i] * scale <= point) {
      cum += w[i] * scale;
      ++i;
    }
    parents.push_back(std::min(i, last_positive));
  }
  ens.rebuild_from(parents);
}

StepReport run_step(const PotentialModel& model, Ensemble& ens, const DynamicsConfig& cfg, StepStreams& streams) {
  StepReport report;
  switch (cfg.variant) {
    case Variant::GdOnly: {
      const Batch b = maybe_batch(model, streams.data);
      gd_step(model, ens, cfg.dt, model.is_exact() ? nullptr : &b);
      break;
    }
    case Variant::GdBd:
    case Variant::GdBdFVariant:
    case Variant::GdBdReinjection: {
      const Batch b = maybe_batch(model, streams.data);
      const Batch* bp = model.is_exact() ? nullptr : &b;
      gd_step(model, ens, cfg.dt, bp);
      report = cfg.variant == Variant::GdBdReinjection ? reinjection_step(model, ens, cfg, streams.events, bp)
                                                       : birth_death_step(model, ens, cfg, streams.events, bp);
      break;
    }
    case Variant::BdOnly: {
      const Batch b = maybe_batch(model, streams.data);
      report = birth_death_step(model, ens, cfg, streams.events, model.is_exact() ? nullptr : &b);
      break;
    }
    case Variant::KmcBd: {
      const auto res = kmc_run(model, ens, cfg, cfg.dt, streams.events);
      report.births = res.events.size();
      report.deaths = res.events.size();
      break;
    }
    case Variant::Proximal: {
      for (std::size_t s = 0; s < cfg.proximal_gd_steps; ++s) gd_step(model, ens, cfg.dt);
      proximal_weight_update(model, ens, cfg.effective_tau(), cfg.proximal_inner_iters);
      resample_weights(ens, streams.events);
      break;
    }
  }
  ens.advance_step();
  return report;
}

}  // namespace bdflow
