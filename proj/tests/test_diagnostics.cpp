#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "bdflow/diagnostics.hpp"

using namespace bdflow;

namespace {

GaussianMixtureParams two_bump(bool free_amplitude) {
  GaussianMixtureParams p;
  p.components = {{1.0, {-1.0}, 0.5}, {0.7, {1.5}, 0.6}};
  p.bandwidth = 0.3;
  if (!free_amplitude) p.fixed_amplitude = 1.0;
  return p;
}

Ensemble random_mixture_ensemble(std::size_t n, std::uint64_t seed) {
  const auto amp = SamplerSpec::gaussian(0.5, 0.5);
  return Ensemble::from_sampler(SamplerSpec::uniform(-3.0, 3.0), n, 1, seed, &amp);
}

Ensemble line(std::initializer_list<double> xs) {
  Ensemble e(1, false);
  for (double x : xs) e.push_back({{x}, std::nullopt, 1.0});
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Energies

TEST(EnsembleEnergy, ParticlesAtMinimum) {
  QuadraticWell w({{0.3}, {2.0}});
  EXPECT_DOUBLE_EQ(ensemble_energy(w, line({0.3, 0.3, 0.3})), 0.0);
}

TEST(EnsembleEnergy, SingleParticleIsFPlusHalfSelfInteraction) {
  GaussianMixture m(two_bump(true));
  Ensemble e(1, true);
  e.push_back({{0.4}, 1.3, 1.0});
  const double oracle = m.F(e.view(0)) + 0.5 * m.K(e.view(0), e.view(0));
  EXPECT_NEAR(ensemble_energy(m, e), oracle, 1e-14);
}

TEST(EnsembleEnergy, DirectDoubleSumWithWeights) {
  GaussianMixture m(two_bump(true));
  Ensemble e = random_mixture_ensemble(17, 4);
  for (std::size_t i = 0; i < e.size(); ++i) e.set_weight(i, 0.5 + 0.1 * static_cast<double>(i % 5));
  const double n = static_cast<double>(e.size());
  double oracle = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    oracle += e.weight(i) * m.F(e.view(i)) / n;
    for (std::size_t j = 0; j < e.size(); ++j) oracle += e.weight(i) * e.weight(j) * m.K(e.view(i), e.view(j)) / (2 * n * n);
  }
  EXPECT_NEAR(ensemble_energy(m, e), oracle, 1e-13);
}

TEST(EnsembleEnergy, LossIdentityOnRandomConfigurations) {
  GaussianMixture m(two_bump(true));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Ensemble e = random_mixture_ensemble(5 + seed, seed);
    const double lhs = ensemble_energy(m, e) + m.target_half_norm();
    const double rhs = exact_mixture_loss(m, e);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(EnsembleEnergy, BatchModelsAreRejected) {
  ReluStudentTeacher relu({});
  Ensemble e(relu.dimension(), true);
  e.push_back({std::vector<double>(relu.dimension(), 0.1), 1.0, 1.0});
  EXPECT_THROW(ensemble_energy(relu, e), UnsupportedOperation);
}

// ---------------------------------------------------------------------------
// Decay terms

TEST(DecayTerms, CommonCriticalPointIsZero) {
  QuadraticWell w({{0.0, 1.0}, {1.0, 0.0, 0.0, 2.0}});
  Ensemble e(2, false);
  for (int i = 0; i < 4; ++i) e.push_back({{0.0, 1.0}, std::nullopt, 1.0});
  const auto d = energy_decay_terms(w, e);
  EXPECT_EQ(d.grad_term, 0.0);
  EXPECT_EQ(d.var_term, 0.0);
}

TEST(DecayTerms, SymmetricPair) {
  QuadraticWell w({{0.0}, {1.0}});
  const auto d = energy_decay_terms(w, line({1.0, -1.0}));
  EXPECT_DOUBLE_EQ(d.grad_term, 1.0);
  EXPECT_DOUBLE_EQ(d.var_term, 0.0);
}

TEST(DecayTerms, NonNegativeOnRandomConfigurations) {
  GaussianMixture m(two_bump(true));
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto d = energy_decay_terms(m, random_mixture_ensemble(10, seed));
    EXPECT_GE(d.grad_term, 0.0);
    EXPECT_GE(d.var_term, 0.0);
  }
}

// One transport step plus the small-step limit of the weight update
// w <- w (1 - alpha dt (V - Vbar)) must change the energy by
// -(grad_term + alpha var_term) dt up to O(dt^2).
TEST(DecayTerms, MatchFiniteDifferenceInTime) {
  GaussianMixture m(two_bump(true));
  const Ensemble e0 = random_mixture_ensemble(12, 8);
  const double alpha = 0.7;
  const auto d = energy_decay_terms(m, e0);
  const double rate = -(d.grad_term + alpha * d.var_term);
  const double E0 = ensemble_energy(m, e0);
  auto defect = [&](double dt) {
    Ensemble e = e0;
    const auto V = particle_potentials(m, e);
    const double vbar = std::accumulate(V.begin(), V.end(), 0.0) / static_cast<double>(V.size());
    gd_step(m, e, dt);
    for (std::size_t i = 0; i < e.size(); ++i) e.set_weight(i, 1.0 - alpha * dt * (V[i] - vbar));
    return std::abs((ensemble_energy(m, e) - E0) / dt - rate);
  };
  const double a = defect(1e-3), b = defect(5e-4);
  EXPECT_LT(a, 1e-2 * std::abs(rate));
  EXPECT_NEAR(a / b, 2.0, 0.2);
}

TEST(Observe, RecordFieldsAgree) {
  GaussianMixture m(two_bump(true));
  const Ensemble e = random_mixture_ensemble(9, 2);
  const auto r = observe(m, e);
  const auto V = particle_potentials(m, e);
  EXPECT_NEAR(r.mean_V, std::accumulate(V.begin(), V.end(), 0.0) / 9.0, 1e-14);
  EXPECT_NEAR(r.energy, ensemble_energy(m, e), 1e-14);
  EXPECT_EQ(r.n, 9u);
}

TEST(Trajectory, CsvLayout) {
  std::vector<TrajectoryRecord> recs(2);
  recs[1].step = 3;
  recs[1].time = 0.5;
  recs[1].births = 2;
  recs[1].n = 10;
  std::istringstream in(trajectory_csv(recs));
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "step,time,energy,mean_V,var_V,grad_norm_sq,births,deaths,n");
  EXPECT_EQ(std::count(row1.begin(), row1.end(), ','), 8);
  EXPECT_EQ(row1.substr(0, 2), "3,");
  EXPECT_EQ(row1.substr(row1.size() - 7), ",2,0,10");
}

// ---------------------------------------------------------------------------
// Euler-Lagrange residual

TEST(EulerLagrange, SingleParticleProbedAtItself) {
  GaussianMixture m(two_bump(false));
  const Ensemble e = line({0.25});
  const std::vector<ParticleState> probes{{{0.25}, std::nullopt, 1.0}};
  const auto r = euler_lagrange_residual(m, e, probes);
  EXPECT_NEAR(r.support_residual, 0.0, 1e-15);
  EXPECT_NEAR(r.exterior_violation, 0.0, 1e-15);
}

TEST(EulerLagrange, DisplacedParticleRaisesResidual) {
  GaussianMixture m(two_bump(false));
  Ensemble e = line({-1.1, -1.0, -0.9, 1.4, 1.5, 1.6});
  std::vector<ParticleState> probes;
  for (int k = 0; k <= 40; ++k) probes.push_back({{-4.0 + 0.2 * k}, std::nullopt, 1.0});
  const auto base = euler_lagrange_residual(m, e, probes);
  e.position(0)[0] = 3.5;
  const auto moved = euler_lagrange_residual(m, e, probes);
  EXPECT_GT(moved.support_residual, base.support_residual);
  EXPECT_GE(moved.exterior_violation, 0.0);
}

TEST(EulerLagrange, Errors) {
  GaussianMixture m(two_bump(false));
  const Ensemble e = line({0.0});
  EXPECT_THROW(euler_lagrange_residual(m, e, {}), ConfigError);
  const std::vector<ParticleState> bad{{{0.0, 1.0}, std::nullopt, 1.0}};
  EXPECT_THROW(euler_lagrange_residual(m, e, bad), ConfigError);
}

// ---------------------------------------------------------------------------
// Fluctuation scaling

namespace {

FluctuationSetup small_setup(const PotentialModel& model) {
  FluctuationSetup s;
  s.model = &model;
  s.n_list = {20, 80, 320};
  s.seeds = 4;
  s.grid_cells = 512;
  s.dynamics.dt = 0.02;
  return s;
}

}  // namespace

TEST(FluctuationScaling, DeterministicDynamicsAreSkipped) {
  QuadraticWell w({{0.0}, {1.0}});
  auto s = small_setup(w);
  s.dynamics.variant = Variant::GdOnly;
  s.grid.birth_death = false;
  s.init = SamplerSpec::point_mass(1.0);
  const auto rep = fluctuation_scaling(s);
  EXPECT_TRUE(rep.skipped);
  EXPECT_TRUE(std::isnan(rep.slope));
  ASSERT_EQ(rep.rms.size(), 3u);
  ASSERT_EQ(rep.rms[0].size(), 3u);
  ASSERT_EQ(rep.rms[0][0].size(), 3u);
}

TEST(FluctuationScaling, StochasticRunReportsSlope) {
  QuadraticWell w({{0.0}, {1.0}});
  auto s = small_setup(w);
  s.seeds = 16;
  const auto rep = fluctuation_scaling(s);
  EXPECT_FALSE(rep.skipped);
  EXPECT_TRUE(std::isfinite(rep.slope));
  EXPECT_LT(rep.slope, 0.0);
  EXPECT_EQ(rep.slope_per_fn.size(), 3u);
  for (const auto& per_n : rep.rms)
    for (const auto& per_fn : per_n)
      for (double v : per_fn) EXPECT_GE(v, 0.0);
}

TEST(FluctuationScaling, ConfigMismatchIsRejected) {
  QuadraticWell w({{0.0}, {1.0}});
  auto s = small_setup(w);
  s.grid.alpha = 2.0;
  EXPECT_THROW(fluctuation_scaling(s), ConfigError);
  s = small_setup(w);
  s.dynamics.variant = Variant::GdOnly;
  EXPECT_THROW(fluctuation_scaling(s), ConfigError);
  s = small_setup(w);
  s.n_list = {20, 40, 80};
  EXPECT_THROW(fluctuation_scaling(s), ConfigError);
  s = small_setup(w);
  s.n_list = {20, 200};
  EXPECT_THROW(fluctuation_scaling(s), ConfigError);
  QuadraticWell w2({{0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}});
  s = small_setup(w2);
  EXPECT_THROW(fluctuation_scaling(s), ConfigError);
}

// ---------------------------------------------------------------------------
// Fits

TEST(RateFit, PowerLawSynthetic) {
  std::vector<double> t, e;
  for (int k = 1; k <= 50; ++k) {
    t.push_back(0.5 * k);
    e.push_back(3.0 / t.back());
  }
  const auto f = rate_fit(t, e, 1.0, 25.0, FitForm::PowerLaw);
  EXPECT_NEAR(f.exponent, -1.0, 1e-6);
  EXPECT_NEAR(f.coefficient, 3.0, 1e-6);
  EXPECT_GT(f.r2, 0.999999);
  EXPECT_EQ(f.points, 49u);
}

TEST(RateFit, ExponentialSynthetic) {
  std::vector<TrajectoryRecord> recs;
  for (int k = 0; k < 40; ++k) {
    TrajectoryRecord r;
    r.time = 0.05 * k;
    r.energy = 2.0 * std::exp(-4.0 * r.time);
    recs.push_back(r);
  }
  const auto f = rate_fit(recs, 0.0, 2.0, FitForm::Exponential);
  EXPECT_NEAR(f.exponent, -4.0, 1e-6);
  EXPECT_NEAR(f.coefficient, 2.0, 1e-6);
  EXPECT_GT(f.r2, 0.999999);
}

TEST(RateFit, PureBirthDeathGridIsInverseTime) {
  QuadraticWell w({{0.0}, {1.0}});
  GridSolverConfig cfg;
  cfg.dt = 0.01;
  cfg.transport = false;
  GridSolver1D solver(w, initial_grid(SamplerSpec::gaussian(0.0, 1.0), -8.0, 8.0, 2048), cfg);
  std::vector<double> t, e;
  for (int k = 1; k <= 40; ++k) {
    solver.advance_to(2.5 * k);
    t.push_back(solver.grid().time);
    e.push_back(solver.energy());
  }
  const auto f = rate_fit(t, e, 40.0, 100.0, FitForm::PowerLaw);
  EXPECT_NEAR(f.exponent, -1.0, 0.1);
}

TEST(RateFit, Errors) {
  std::vector<double> t(20), e(20, 1.0);
  std::iota(t.begin(), t.end(), 1.0);
  EXPECT_THROW(rate_fit(t, e, 1.0, 5.0, FitForm::PowerLaw), FitError);
  e[3] = 0.0;
  EXPECT_THROW(rate_fit(t, e, 1.0, 20.0, FitForm::Exponential), FitError);
  e[3] = 1.0;
  t[0] = 0.0;
  EXPECT_THROW(rate_fit(t, e, 0.0, 20.0, FitForm::PowerLaw), FitError);
  EXPECT_THROW(rate_fit(t, e, 5.0, 5.0, FitForm::PowerLaw), FitError);
  EXPECT_THROW(fit_form_from_string("linear"), ConfigError);
  EXPECT_EQ(fit_form_from_string(to_string(FitForm::Exponential)), FitForm::Exponential);
}

TEST(LeastSquares, ExactLineAndDegenerateInput) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-15);
  EXPECT_NEAR(f.intercept, 1.0, 1e-15);
  EXPECT_NEAR(f.r2, 1.0, 1e-15);
  const std::vector<double> same{1, 1, 1};
  EXPECT_THROW(least_squares(same, same), FitError);
  EXPECT_THROW(least_squares(std::vector<double>{1.0}, std::vector<double>{1.0}), FitError);
}

// ---------------------------------------------------------------------------
// Initial grids

TEST(InitialGrid, SamplersAndTruncation) {
  const auto g = initial_grid(SamplerSpec::gaussian(0.0, 1.0), -8.0, 8.0, 400);
  EXPECT_NEAR(g.mass(), 1.0, 1e-14);
  EXPECT_NEAR(g.integrate([](double x) { return x * x; }), 1.0, 1e-3);
  const auto u = initial_grid(SamplerSpec::uniform(-1.0, 1.0), -2.0, 2.0, 40);
  EXPECT_NEAR(u.density[20], 0.5, 1e-14);
  EXPECT_EQ(u.density[0], 0.0);
  const auto p = initial_grid(SamplerSpec::point_mass(0.3), -1.0, 1.0, 10);
  EXPECT_NEAR(p.density[6] * p.dx(), 1.0, 1e-14);
  EXPECT_THROW(initial_grid(SamplerSpec::gaussian(0.0, 1.0), -3.0, 3.0, 100), ConfigError);
  EXPECT_THROW(initial_grid(SamplerSpec::point_mass(2.0), -1.0, 1.0, 10), ConfigError);
}
