#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdflow/dynamics.hpp"
#include "bdflow/potentials.hpp"

using namespace bdflow;

namespace {

GaussianMixtureParams three_bump() {
  GaussianMixtureParams p;
  p.components = {{1.0, {-2.0}, 0.4}, {-1.0, {0.0}, 0.4}, {1.0, {2.0}, 0.4}};
  p.bandwidth = 0.2;
  return p;
}

Ensemble mixture_ensemble(std::size_t n, std::uint64_t seed) {
  const auto amp = SamplerSpec::gaussian(0.0, 1.0);
  return Ensemble::from_sampler(SamplerSpec::uniform(-3.0, 3.0), n, 1, seed, &amp);
}

Ensemble line(std::initializer_list<double> xs) {
  Ensemble e(1, false);
  for (double x : xs) e.push_back({{x}, std::nullopt, 1.0});
  return e;
}

double binomial_sigma(double p, double trials) { return std::sqrt(p * (1.0 - p) / trials); }

}  // namespace

// ---------------------------------------------------------------------------
// Transport

TEST(GdStep, LinearMapOnUnitWell) {
  QuadraticWell w({{0.0}, {1.0}});
  auto e = line({1.0});
  gd_step(w, e, 0.1);
  EXPECT_DOUBLE_EQ(e.position(0)[0], 0.9);
}

TEST(GdStep, FlatPotentialLeavesEnsemble) {
  QuadraticWell w({{0.5}, {1.0}});
  auto e = line({0.5, 0.5});
  gd_step(w, e, 0.3);
  EXPECT_EQ(e.position(0)[0], 0.5);
  EXPECT_EQ(e.position(1)[0], 0.5);
}

TEST(GdStep, MixtureMatchesExplicitUpdate) {
  GaussianMixture m(three_bump());
  auto e = mixture_ensemble(3, 4);
  const Ensemble before = e;
  gd_step(m, e, 0.05);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> g(2), gk(2);
    m.grad_F(before.view(i), g);
    for (std::size_t j = 0; j < 3; ++j) {
      m.grad_K(before.view(i), before.view(j), gk);
      g[0] += gk[0] / 3.0;
      g[1] += gk[1] / 3.0;
    }
    EXPECT_NEAR(e.amplitude(i), before.amplitude(i) - 0.05 * g[0], 1e-14);
    EXPECT_NEAR(e.position(i)[0], before.position(i)[0] - 0.05 * g[1], 1e-14);
  }
}

TEST(GdStep, GdOnlyRunIsGeometric) {
  QuadraticWell w({{0.0}, {1.0}});
  auto e = line({1.0});
  DynamicsConfig cfg;
  cfg.variant = Variant::GdOnly;
  cfg.dt = 0.1;
  auto streams = StepStreams::from_seed(1);
  for (int s = 0; s < 10; ++s) run_step(w, e, cfg, streams);
  EXPECT_NEAR(e.position(0)[0], std::pow(0.9, 10), 1e-12);
  EXPECT_EQ(e.step_count(), 10u);
}

// ---------------------------------------------------------------------------
// Rates

TEST(Rates, CenteringExamples) {
  const std::vector<double> one{3.7};
  EXPECT_EQ(centered(one)[0], 0.0);
  const std::vector<double> two{2.0, 0.0};
  const auto r = centered(two);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], -1.0);
}

TEST(Rates, CenteredRatesSumToZero) {
  GaussianMixture m(three_bump());
  const auto e = mixture_ensemble(40, 8);
  const auto r = centered_rate(m, e);
  const auto V = particle_potentials(m, e);
  double scale = 1.0;
  for (double v : V) scale = std::max(scale, std::abs(v));
  EXPECT_LE(std::abs(std::accumulate(r.begin(), r.end(), 0.0)), 1e-10 * scale);
}

TEST(Rates, TransformExamples) {
  const std::vector<double> v{0.4, -0.4};
  EXPECT_EQ(fvariant_rate(v, RateTransform::identity()), v);
  const auto r = fvariant_rate(v, RateTransform::saturated(1.0));
  EXPECT_NEAR(r[0], std::tanh(0.4), 1e-15);
  EXPECT_NEAR(r[1], -std::tanh(0.4), 1e-15);

  Rng rng(3);
  std::vector<double> z(5);
  for (auto& x : z) x = rng.normal(0.0, 2.0);
  const auto c = fvariant_rate(centered(z), RateTransform::saturated(1.0));
  EXPECT_LE(std::abs(std::accumulate(c.begin(), c.end(), 0.0)), 1e-12);
}

TEST(Rates, TransformValidation) {
  EXPECT_NO_THROW(RateTransform::saturated(2.0).validate());
  EXPECT_THROW(RateTransform::saturated(0.0).validate(), ConfigError);
  RateTransform wrong{RateTransform::Kind::Custom, 1.0, [](double z) { return -z; }};
  EXPECT_THROW(wrong.validate(), ConfigError);
  RateTransform empty{RateTransform::Kind::Custom, 1.0, {}};
  EXPECT_THROW(empty.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Bernoulli phase and population control

TEST(Bernoulli, ZeroRatesNeverFire) {
  Rng rng(1);
  const std::vector<double> zero(10, 0.0);
  for (auto d : bernoulli_phase(zero, 5.0, 1.0, rng)) EXPECT_EQ(d, BernoulliDecision::Keep);
  auto e = line({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  DynamicsConfig cfg;
  const auto rep = birth_death_from_rates(e, zero, cfg, rng);
  EXPECT_EQ(rep.births + rep.deaths + rep.population_corrections, 0u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(e.position(i)[0], static_cast<double>(i + 1));
}

TEST(Bernoulli, FrequenciesFollowExponentialLaw) {
  Rng rng(2);
  const int trials = 100000;
  for (double a : {0.01, std::log(2.0), 2.0}) {
    const std::vector<double> rates{a, -a};
    int kills = 0, dups = 0;
    for (int t = 0; t < trials; ++t) {
      const auto d = bernoulli_phase(rates, 1.0, 1.0, rng);
      kills += d[0] == BernoulliDecision::Kill;
      dups += d[1] == BernoulliDecision::Duplicate;
      ASSERT_NE(d[0], BernoulliDecision::Duplicate);
      ASSERT_NE(d[1], BernoulliDecision::Kill);
    }
    const double p = 1.0 - std::exp(-a);
    const double sig = binomial_sigma(p, trials);
    EXPECT_NEAR(kills / static_cast<double>(trials), p, 3.0 * sig) << a;
    EXPECT_NEAR(dups / static_cast<double>(trials), p, 3.0 * sig) << a;
  }
}

TEST(Bernoulli, NonFiniteRateNamesParticle) {
  Rng rng(3);
  const std::vector<double> r{0.1, std::nan("")};
  try {
    bernoulli_phase(r, 1.0, 1.0, rng);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(PopulationControl, DeficitFilledFromSurvivors) {
  Rng rng(4);
  auto e = line({0.0, 1.0, 2.0, 3.0});
  DynamicsConfig cfg;
  cfg.alpha = 1.0;
  cfg.dt = 1.0;
  const std::vector<double> rates{1e3, 1e3, 1e3, -1e3};
  const auto rep = birth_death_from_rates(e, rates, cfg, rng);
  EXPECT_EQ(rep.deaths, 3u);
  EXPECT_EQ(rep.births, 1u);
  EXPECT_EQ(rep.population_corrections, 2u);
  ASSERT_EQ(e.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(e.position(i)[0], 3.0);
}

TEST(PopulationControl, ExcessRemovedUniformly) {
  Rng rng(5);
  DynamicsConfig cfg;
  cfg.dt = 1.0;
  const std::vector<double> rates{-1e3, -1e3, 1e3, 0.0};
  for (int t = 0; t < 50; ++t) {
    auto e = line({0.0, 1.0, 2.0, 3.0});
    const auto rep = birth_death_from_rates(e, rates, cfg, rng);
    EXPECT_EQ(rep.population_corrections, 1u);
    ASSERT_EQ(e.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NE(e.position(i)[0], 2.0);
  }
}

TEST(PopulationControl, TotalKillRedrawsFromPrePhase) {
  Rng rng(6);
  auto e = line({0.0, 1.0, 2.0});
  DynamicsConfig cfg;
  cfg.dt = 1.0;
  const std::vector<double> rates{1e3, 1e3, 1e3};
  const auto rep = birth_death_from_rates(e, rates, cfg, rng);
  EXPECT_EQ(rep.deaths, 3u);
  EXPECT_EQ(rep.population_corrections, 3u);
  ASSERT_EQ(e.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const double x = e.position(i)[0];
    EXPECT_TRUE(x == 0.0 || x == 1.0 || x == 2.0);
  }
}

TEST(Reinjection, DeficitFilledWithZeroAmplitudePriorSamples) {
  GaussianMixture m(three_bump());
  // One unit sits on the positive bump at y = 2 (V < 0); the others have c = 0,
  // so V = 0 there and they are all above the mean.
  Ensemble e(1, true);
  e.push_back({{2.0}, 0.5, 1.0});
  for (double y : {-1.0, -0.5, 0.5, 1.0}) e.push_back({{y}, 0.0, 1.0});
  DynamicsConfig cfg;
  cfg.variant = Variant::GdBdReinjection;
  cfg.alpha = 1e6;
  cfg.dt = 1.0;
  cfg.reinjection_prior = SamplerSpec::gaussian(0.0, 2.0);
  Rng rng(7);
  const auto rep = reinjection_step(m, e, cfg, rng);
  EXPECT_EQ(rep.deaths, 4u);
  EXPECT_EQ(rep.births, 1u);
  EXPECT_EQ(rep.reinjections, 3u);
  ASSERT_EQ(e.size(), 5u);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e.amplitude(i) == 0.0) {
      ++zeros;
      EXPECT_EQ(m.F(e.view(i)), 0.0);
      EXPECT_EQ(particle_potential(m, e, i), 0.0);
    }
  }
  EXPECT_EQ(zeros, 3u);
}

TEST(Reinjection, CreationFromPriorKeepsPopulation) {
  GaussianMixture m(three_bump());
  DynamicsConfig cfg;
  cfg.variant = Variant::GdBdReinjection;
  cfg.alpha = 1.0;
  cfg.alpha_prime = 5.0;
  cfg.dt = 0.1;
  cfg.reinjection_prior = SamplerSpec::uniform(-3.0, 3.0);
  auto e = mixture_ensemble(30, 9);
  auto streams = StepStreams::from_seed(9);
  std::size_t created = 0;
  for (int s = 0; s < 20; ++s) {
    created += run_step(m, e, cfg, streams).reinjections;
    ASSERT_EQ(e.size(), 30u);
  }
  EXPECT_GT(created, 0u);
}

// ---------------------------------------------------------------------------
// Exact-time birth-death

TEST(Kmc, ConstantEnergyHasNoEvents) {
  QuadraticWell w({{0.0}, {1.0}});
  auto e = line({0.5, -0.5, 0.5});
  DynamicsConfig cfg;
  Rng rng(1);
  const auto res = kmc_run(w, e, cfg, 10.0, rng);
  EXPECT_TRUE(res.events.empty());
}

TEST(Kmc, PopulationConstantAndEventsPaired) {
  QuadraticWell w({{0.0}, {1.0}});
  auto e = Ensemble::from_sampler(SamplerSpec::gaussian(1.0, 1.0), 200, 1, 3);
  DynamicsConfig cfg;
  Rng rng(3);
  const auto res = kmc_run(w, e, cfg, 0.5, rng);
  EXPECT_EQ(e.size(), 200u);
  EXPECT_FALSE(res.events.empty());
  double t = 0.0;
  for (const auto& ev : res.events) {
    EXPECT_GE(ev.time, t);
    EXPECT_NE(ev.index, ev.partner);
    t = ev.time;
  }
  EXPECT_LE(res.elapsed, 0.5);
}

TEST(Kmc, FirstEventTimeIsExponential) {
  // F = (1/2, 0): centered rates (1/4, -1/4), total rate alpha * 1/2.
  QuadraticWell w({{0.0}, {1.0}});
  DynamicsConfig cfg;
  cfg.alpha = 2.0;
  const double R = 1.0;
  Rng rng(11);
  const int samples = 10000;
  std::vector<double> times;
  for (int s = 0; s < samples; ++s) {
    auto e = line({1.0, 0.0});
    const auto res = kmc_run(w, e, cfg, 1e9, rng);
    ASSERT_EQ(res.events.size(), 1u);
    times.push_back(res.events[0].time);
  }
  std::sort(times.begin(), times.end());
  double D = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double cdf = 1.0 - std::exp(-R * times[k]);
    D = std::max({D, std::abs(cdf - k / static_cast<double>(samples)),
                  std::abs(cdf - (k + 1) / static_cast<double>(samples))});
  }
  // Kolmogorov-Smirnov 1% critical value.
  EXPECT_LT(D, 1.628 / std::sqrt(static_cast<double>(samples)));
}

TEST(Kmc, RejectsInteractingModels) {
  GaussianMixture m(three_bump());
  auto e = mixture_ensemble(4, 1);
  DynamicsConfig cfg;
  Rng rng(1);
  EXPECT_THROW(kmc_run(m, e, cfg, 1.0, rng), UnsupportedOperation);
  cfg.variant = Variant::KmcBd;
  EXPECT_THROW(cfg.validate(m), ConfigError);
}

// ---------------------------------------------------------------------------
// Proximal weights and resampling

TEST(Proximal, ConstantPotentialKeepsWeights) {
  QuadraticWell w({{0.0}, {1.0}});
  auto e = line({1.0, -1.0, 1.0});
  e.set_weight(0, 0.5);
  e.set_weight(1, 1.5);
  proximal_weight_update(w, e, 0.7, 100);
  EXPECT_NEAR(e.weight(0), 0.5, 1e-14);
  EXPECT_NEAR(e.weight(1), 1.5, 1e-14);
  EXPECT_NEAR(e.weight(2), 1.0, 1e-14);
}

TEST(Proximal, NonInteractingClosedForm) {
  // F = (1, 0) on the unit well: positions sqrt(2) and 0.
  QuadraticWell w({{0.0}, {1.0}});
  auto e = line({std::sqrt(2.0), 0.0});
  const auto rep = proximal_weight_update(w, e, 1.0, 100);
  EXPECT_TRUE(rep.converged);
  const double em1 = std::exp(-1.0);
  EXPECT_NEAR(e.weight(0), 2.0 * em1 / (1.0 + em1), 1e-12);
  EXPECT_NEAR(e.weight(1), 2.0 / (1.0 + em1), 1e-12);
}

TEST(Proximal, NeverIncreasesMixtureLoss) {
  Rng rng(12);
  for (int cfgi = 0; cfgi < 20; ++cfgi) {
    GaussianMixtureParams p;
    const std::size_t m = 1 + rng.index(3);
    p.components.clear();
    for (std::size_t j = 0; j < m; ++j)
      p.components.push_back({rng.normal(), {rng.normal(0.0, 2.0)}, 0.4 + 0.4 * rng.uniform()});
    p.bandwidth = 0.3;
    GaussianMixture model(p);
    auto e = mixture_ensemble(10 + rng.index(20), 100 + cfgi);
    double before = exact_mixture_loss(model, e);
    for (int s = 0; s < 10; ++s) {
      proximal_weight_update(model, e, 0.5, 200);
      const double after = exact_mixture_loss(model, e);
      EXPECT_LE(after, before + 1e-12 * std::max(1.0, before));
      before = after;
    }
  }
}

TEST(Proximal, OversizedStepIsReported) {
  GaussianMixture m(three_bump());
  auto e = mixture_ensemble(25, 5);
  EXPECT_THROW(
      {
        for (int s = 0; s < 15; ++s) proximal_weight_update(m, e, 25.0, 100);
      },
      StepSizeError);
}

TEST(Resample, UnitWeightsAreIdentity) {
  auto e = line({1.0, 2.0, 3.0});
  Rng rng(1);
  resample_weights(e, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(e.position(i)[0], static_cast<double>(i + 1));
}

TEST(Resample, IntegerWeightsAreExact) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    auto e = line({0.0, 1.0, 2.0, 3.0});
    const double w[] = {2.0, 0.0, 1.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) e.set_weight(i, w[i]);
    resample_weights(e, rng);
    std::vector<int> count(4, 0);
    for (std::size_t i = 0; i < 4; ++i) ++count[static_cast<std::size_t>(e.position(i)[0])];
    EXPECT_EQ(count, (std::vector<int>{2, 0, 1, 1}));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(e.weight(i), 1.0);
  }
}

TEST(Resample, FractionalWeightsAreUnbiased) {
  Rng rng(3);
  const int trials = 10000;
  int total = 0;
  for (int t = 0; t < trials; ++t) {
    auto e = line({0.0, 1.0});
    e.set_weight(0, 1.5);
    e.set_weight(1, 0.5);
    resample_weights(e, rng);
    const int c = (e.position(0)[0] == 0.0) + (e.position(1)[0] == 0.0);
    ASSERT_TRUE(c == 1 || c == 2);
    total += c;
  }
  // count of particle 0 is 1 + Bernoulli(1/2)
  EXPECT_NEAR(total / static_cast<double>(trials), 1.5, 3.0 * 0.5 / std::sqrt(trials));
}

TEST(Resample, ZeroWeightsAreExtinction) {
  auto e = line({0.0, 1.0});
  e.set_weight(0, 0.0);
  e.set_weight(1, 0.0);
  Rng rng(4);
  EXPECT_THROW(resample_weights(e, rng), ExtinctionError);
}

// ---------------------------------------------------------------------------
// Whole steps

TEST(RunStep, PopulationInvariantForEveryVariant) {
  GaussianMixture mix(three_bump());
  QuadraticWell well({{0.0}, {1.0}});
  for (Variant v : {Variant::GdOnly, Variant::GdBd, Variant::GdBdReinjection, Variant::GdBdFVariant,
                    Variant::BdOnly, Variant::KmcBd, Variant::Proximal}) {
    DynamicsConfig cfg;
    cfg.variant = v;
    cfg.dt = 0.05;
    cfg.alpha = v == Variant::Proximal ? 1.0 : 5.0;
    cfg.alpha_prime = 1.0;
    cfg.reinjection_prior = SamplerSpec::gaussian(0.0, 2.0);
    if (v == Variant::GdBdFVariant) cfg.f = RateTransform::saturated(2.0);
    const PotentialModel& m = v == Variant::KmcBd ? static_cast<const PotentialModel&>(well) : mix;
    ASSERT_NO_THROW(cfg.validate(m)) << to_string(v);
    auto e = v == Variant::KmcBd ? Ensemble::from_sampler(SamplerSpec::gaussian(0.0, 1.0), 25, 1, 5)
                                 : mixture_ensemble(25, 5);
    auto streams = StepStreams::from_seed(5);
    for (int s = 0; s < 15; ++s) {
      run_step(m, e, cfg, streams);
      ASSERT_EQ(e.size(), 25u) << to_string(v);
      ASSERT_NO_THROW(e.validate()) << to_string(v);
    }
    EXPECT_EQ(e.step_count(), 15u);
  }
}

TEST(RunStep, IdentityTransformReproducesBaseSchemeBitwise) {
  GaussianMixture m(three_bump());
  DynamicsConfig base;
  base.variant = Variant::GdBd;
  base.dt = 0.05;
  base.alpha = 5.0;
  DynamicsConfig fv = base;
  fv.variant = Variant::GdBdFVariant;
  auto a = mixture_ensemble(30, 6), b = mixture_ensemble(30, 6);
  auto sa = StepStreams::from_seed(6), sb = StepStreams::from_seed(6);
  for (int s = 0; s < 20; ++s) {
    run_step(m, a, base, sa);
    run_step(m, b, fv, sb);
  }
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(a.position(i)[0], b.position(i)[0]);
    EXPECT_EQ(a.amplitude(i), b.amplitude(i));
    EXPECT_EQ(a.birth_id(i), b.birth_id(i));
  }
}

TEST(RunStep, BdOnlyEventFrequenciesMatchRates) {
  // Two fixed sites on the unit well: F = 1/2 and 0, centered rates +-1/4.
  QuadraticWell w({{0.0}, {1.0}});
  DynamicsConfig cfg;
  cfg.variant = Variant::BdOnly;
  cfg.alpha = 2.0;
  cfg.dt = 0.5;
  const double p = 1.0 - std::exp(-2.0 * 0.25 * 0.5);
  auto streams = StepStreams::from_seed(8);
  const int trials = 20000;
  int deaths = 0, births = 0;
  for (int t = 0; t < trials; ++t) {
    auto e = line({1.0, 0.0});
    const auto rep = run_step(w, e, cfg, streams);
    deaths += static_cast<int>(rep.deaths);
    births += static_cast<int>(rep.births);
  }
  EXPECT_NEAR(deaths / static_cast<double>(trials), p, 3.0 * binomial_sigma(p, trials));
  EXPECT_NEAR(births / static_cast<double>(trials), p, 3.0 * binomial_sigma(p, trials));
}

TEST(RunStep, ProximalCycleAgreesWithBernoulliScheme) {
  // One gradient step plus one proximal step against one step of transport plus
  // Bernoulli birth-death: the seed-averaged energies agree within 3 sigma.
  GaussianMixture m(three_bump());
  DynamicsConfig bd;
  bd.variant = Variant::GdBd;
  bd.dt = 0.05;
  bd.alpha = 2.0;
  DynamicsConfig prox = bd;
  prox.variant = Variant::Proximal;
  prox.proximal_gd_steps = 1;
  const int seeds = 100;
  std::vector<double> eb, ep;
  for (int s = 0; s < seeds; ++s) {
    auto a = mixture_ensemble(40, 1000 + s), b = a;
    auto sa = StepStreams::from_seed(1000 + s), sb = StepStreams::from_seed(2000 + s);
    for (int k = 0; k < 5; ++k) {
      run_step(m, a, bd, sa);
      run_step(m, b, prox, sb);
    }
    eb.push_back(exact_mixture_loss(m, a));
    ep.push_back(exact_mixture_loss(m, b));
  }
  auto stats = [](const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double v = 0.0;
    for (double y : x) v += (y - mean) * (y - mean);
    return std::pair{mean, v / (x.size() - 1)};
  };
  const auto [mb, vb] = stats(eb);
  const auto [mp, vp] = stats(ep);
  EXPECT_LE(std::abs(mb - mp), 3.0 * std::sqrt(vb / seeds + vp / seeds)) << mb << " vs " << mp;
}

TEST(RunStep, SeedAveragedEnergyDecreases) {
  GaussianMixture m(three_bump());
  for (Variant v : {Variant::GdBd, Variant::GdBdFVariant, Variant::GdBdReinjection}) {
    DynamicsConfig cfg;
    cfg.variant = v;
    cfg.dt = 0.01;
    cfg.alpha = 1.0;
    cfg.reinjection_prior = SamplerSpec::gaussian(0.0, 2.0);
    if (v == Variant::GdBdFVariant) cfg.f = RateTransform::saturated(1.0);
    const int seeds = 200, steps = 10;
    std::vector<double> mean(steps + 1, 0.0);
    for (int s = 0; s < seeds; ++s) {
      auto e = mixture_ensemble(30, 500 + s);
      auto st = StepStreams::from_seed(500 + s);
      mean[0] += exact_mixture_loss(m, e) / seeds;
      for (int k = 1; k <= steps; ++k) {
        run_step(m, e, cfg, st);
        mean[k] += exact_mixture_loss(m, e) / seeds;
      }
    }
    for (int k = 1; k <= steps; ++k) EXPECT_LT(mean[k], mean[k - 1]) << to_string(v) << " step " << k;
  }
}

TEST(Config, ValidationErrors) {
  GaussianMixture m(three_bump());
  QuadraticWell w({{0.0}, {1.0}});
  DynamicsConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(m), ConfigError);
  cfg.dt = 0.01;
  cfg.alpha = -1.0;
  EXPECT_THROW(cfg.validate(m), ConfigError);
  cfg.alpha = 1.0;
  cfg.variant = Variant::GdBdFVariant;
  EXPECT_THROW(cfg.validate(m), ConfigError);
  cfg.f = RateTransform::saturated(1.0);
  EXPECT_NO_THROW(cfg.validate(m));
  cfg.variant = Variant::GdBdReinjection;
  EXPECT_THROW(cfg.validate(m), ConfigError);
  cfg.reinjection_prior = SamplerSpec::gaussian(0.0, 1.0);
  EXPECT_NO_THROW(cfg.validate(m));
  EXPECT_THROW(cfg.validate(w), ConfigError);
  EXPECT_EQ(variant_from_string("kmc-bd"), Variant::KmcBd);
  EXPECT_THROW(variant_from_string("gd-bd-extra"), ConfigError);
  for (Variant v : {Variant::GdOnly, Variant::GdBd, Variant::GdBdReinjection, Variant::GdBdFVariant,
                    Variant::BdOnly, Variant::KmcBd, Variant::Proximal})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
}
