#include "bdflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "bdflow/errors.hpp"
#include "bdflow/io.hpp"
#include "bdflow/parallel.hpp"

namespace bdflow {

void write_trajectory_header(std::ostream& out) {
  out << "step,time,energy,mean_V,var_V,grad_norm_sq,births,deaths,n\n";
}

void write_trajectory_row(std::ostream& out, const TrajectoryRecord& r) {
  out << r.step << ',' << format_real(r.time) << ',' << format_real(r.energy) << ',' << format_real(r.mean_V) << ','
      << format_real(r.var_V) << ',' << format_real(r.grad_norm_sq) << ',' << r.births << ',' << r.deaths << ','
      << r.n << '\n';
}

std::string trajectory_csv(std::span<const TrajectoryRecord> records) {
  std::ostringstream out;
  write_trajectory_header(out);
  for (const auto& r : records) write_trajectory_row(out, r);
  return out.str();
}

namespace {

std::vector<double> own_potentials(const PotentialModel& model, const Ensemble& ens) {
  std::vector<double> F(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) F[i] = model.F(ens.view(i));
  return F;
}

double energy_from(const Ensemble& ens, std::span<const double> F, std::span<const double> V) {
  // V_i = F_i + n^-1 sum_j w_j K_ij, so the energy is n^-1 sum_i w_i (F_i + V_i) / 2.
  double e = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) e += ens.weight(i) * 0.5 * (F[i] + V[i]);
  return e / static_cast<double>(ens.size());
}

}  // namespace

double ensemble_energy(const PotentialModel& model, const Ensemble& ens) {
  if (!model.is_exact()) throw UnsupportedOperation("ensemble energy needs an exact model; use the batch loss");
  if (ens.size() == 0) throw ExtinctionError("energy of an empty population");
  const auto F = own_potentials(model, ens);
  if (!model.is_interacting()) return energy_from(ens, F, F);
  std::vector<double> V(ens.size());
  model.evaluate(ens, nullptr, V, {});
  return energy_from(ens, F, V);
}

DecayTerms energy_decay_terms(const PotentialModel& model, const Ensemble& ens, const Batch* batch) {
  const auto r = observe(model, ens, batch);
  return {r.grad_norm_sq, r.var_V};
}

TrajectoryRecord observe(const PotentialModel& model, const Ensemble& ens, const Batch* batch) {
  const std::size_t n = ens.size();
  if (n == 0) throw ExtinctionError("observing an empty population");
  const std::size_t ps = model.parameter_size();
  std::vector<double> V(n), G(n * ps);
  model.evaluate(ens, batch, V, G);
  const double inv_n = 1.0 / static_cast<double>(n);

  TrajectoryRecord r;
  r.step = ens.step_count();
  r.n = n;
  double vbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) vbar += ens.weight(i) * V[i];
  vbar *= inv_n;
  double var = 0.0, g2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = V[i] - vbar;
    var += ens.weight(i) * d * d;
    double gi = 0.0;
    for (std::size_t k = 0; k < ps; ++k) gi += G[i * ps + k] * G[i * ps + k];
    g2 += ens.weight(i) * gi;
  }
  r.mean_V = vbar;
  r.var_V = var * inv_n;
  r.grad_norm_sq = g2 * inv_n;
  if (model.is_exact()) {
    r.energy = energy_from(ens, own_potentials(model, ens), V);
  } else {
    if (batch == nullptr) throw ConfigError("batch models need a batch to observe");
    r.energy = static_cast<const ReluStudentTeacher&>(model).batch_loss(ens, *batch);
  }
  return r;
}

EulerLagrangeResidual euler_lagrange_residual(const PotentialModel& model, const Ensemble& ens,
                                              std::span<const ParticleState> probes) {
  if (probes.empty()) throw ConfigError("euler_lagrange_residual needs at least one probe");
  if (!model.is_exact()) throw UnsupportedOperation("euler_lagrange_residual needs an exact model");
  const std::size_t n = ens.size();
  std::vector<double> V(n);
  model.evaluate(ens, nullptr, V, {});
  double vbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) vbar += ens.weight(i) * V[i];
  vbar /= static_cast<double>(n);

  EulerLagrangeResidual out;
  for (double v : V) out.support_residual = std::max(out.support_residual, std::abs(v - vbar));
  double vmin = std::numeric_limits<double>::infinity();
  for (const auto& p : probes) {
    if (p.position.size() != model.dimension()) throw ConfigError("probe has the wrong dimension");
    const ParamView pv{p.position, p.amplitude.value_or(1.0)};
    double v = model.F(pv);
    if (model.is_interacting()) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ens.weight(j) * model.K(pv, ens.view(j));
      v += acc / static_cast<double>(n);
    }
    vmin = std::min(vmin, v);
  }
  out.exterior_violation = std::max(0.0, vbar - vmin);
  return out;
}

std::vector<TestFunction> default_test_functions() {
  return {{"theta", [](double x) { return x; }},
          {"theta_sq", [](double x) { return x * x; }},
          {"positive", [](double x) { return x > 0.0 ? 1.0 : 0.0; }}};
}

Grid1D initial_grid(const SamplerSpec& init, double lo, double hi, std::size_t cells) {
  init.validate(1);
  Grid1D g = Grid1D::make(lo, hi, cells);
  const double dx = g.dx();
  const SamplerSpec* spec = &init;
  if (const auto* p = std::get_if<ProductSampler>(&spec->kind)) spec = &p->coordinates.at(0);

  if (const auto* s = std::get_if<GaussianSampler>(&spec->kind)) {
    // Exact cell averages from the normal CDF.
    const double m = s->mean.at(0), sd = s->std.at(0);
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - m) / (sd * std::numbers::sqrt2)); };
    for (std::size_t i = 0; i < cells; ++i) {
      const double a = lo + dx * static_cast<double>(i);
      g.density[i] = (cdf(a + dx) - cdf(a)) / dx;
    }
  } else if (const auto* s = std::get_if<UniformBoxSampler>(&spec->kind)) {
    const double a = s->lo.at(0), b = s->hi.at(0);
    for (std::size_t i = 0; i < cells; ++i) {
      const double c0 = lo + dx * static_cast<double>(i);
      const double overlap = std::max(0.0, std::min(b, c0 + dx) - std::max(a, c0));
      g.density[i] = overlap / (dx * (b - a));
    }
  } else if (const auto* s = std::get_if<PointMassSampler>(&spec->kind)) {
    const double x = s->at.at(0);
    if (x < lo || x >= hi) throw ConfigError("point mass lies outside the grid");
    g.density[static_cast<std::size_t>((x - lo) / dx)] = 1.0 / dx;
  } else {
    throw ConfigError("unsupported initial sampler for a grid");
  }
  const double mass = g.mass();
  if (!(mass > 0.0)) throw ConfigError("initial law has no mass on the grid");
  if (std::abs(mass - 1.0) > 1e-8) throw ConfigError("grid domain truncates more than 1e-8 of the initial mass");
  for (double& r : g.density) r /= mass;
  return g;
}

FluctuationReport fluctuation_scaling(const FluctuationSetup& setup) {
  if (setup.model == nullptr) throw ConfigError("fluctuation_scaling needs a model");
  const PotentialModel& model = *setup.model;
  if (model.dimension() != 1 || model.has_amplitude() || !model.is_exact())
    throw ConfigError("fluctuation_scaling needs a one-dimensional exact model");
  setup.dynamics.validate(model);
  if (setup.n_list.size() < 3) throw ConfigError("fluctuation_scaling needs at least three population sizes");
  const auto [nmin, nmax] = std::minmax_element(setup.n_list.begin(), setup.n_list.end());
  if (static_cast<double>(*nmax) < 10.0 * static_cast<double>(*nmin))
    throw ConfigError("population sizes must span at least one decade");
  if (setup.seeds < 2) throw ConfigError("fluctuation_scaling needs at least two seeds");
  if (setup.test_fns.empty()) throw ConfigError("fluctuation_scaling needs test functions");
  if (!std::is_sorted(setup.checkpoints.begin(), setup.checkpoints.end()) || setup.checkpoints.empty())
    throw ConfigError("checkpoints must be sorted and non-empty");
  auto index_of = [&](double t) {
    for (std::size_t c = 0; c < setup.checkpoints.size(); ++c)
      if (std::abs(setup.checkpoints[c] - t) < 1e-12) return c;
    throw ConfigError("slope, early and late times must be checkpoints");
  };
  const std::size_t c_slope = index_of(setup.slope_time);
  const std::size_t c_early = index_of(setup.early_time);
  const std::size_t c_late = index_of(setup.late_time);
  if (std::abs(setup.grid.alpha - setup.dynamics.alpha) > 0.0)
    throw ConfigError("grid and particle alpha differ");
  if (setup.grid.transport != uses_transport(setup.dynamics.variant))
    throw ConfigError("grid transport flag does not match the particle variant");
  if (setup.grid.birth_death != uses_birth_death(setup.dynamics.variant))
    throw ConfigError("grid birth-death flag does not match the particle variant");

  const std::size_t C = setup.checkpoints.size();
  const std::size_t N = setup.n_list.size();
  const std::size_t P = setup.test_fns.size();
  const std::size_t S = setup.seeds;

  // Mean-field reference at every checkpoint.
  std::vector<std::vector<double>> ref(C, std::vector<double>(P));
  {
    GridSolver1D solver(model, initial_grid(setup.init, setup.grid_lo, setup.grid_hi, setup.grid_cells),
                        setup.grid);
    for (std::size_t c = 0; c < C; ++c) {
      solver.advance_to(setup.checkpoints[c]);
      for (std::size_t p = 0; p < P; ++p) ref[c][p] = solver.grid().integrate(setup.test_fns[p].fn);
    }
  }

  const double dt = step_duration(setup.dynamics);
  std::vector<std::size_t> steps_at(C);
  for (std::size_t c = 0; c < C; ++c)
    steps_at[c] = static_cast<std::size_t>(std::llround(setup.checkpoints[c] / dt));

  // disc[((n * S + s) * C + c) * P + p]
  std::vector<double> disc(N * S * C * P);
  parallel_for(N * S, setup.jobs, [&](std::size_t task) {
    const std::size_t ni = task / S;
    const std::size_t s = task % S;
    const std::uint64_t seed = Rng::stream(setup.base_seed, s).next_u64();
    Ensemble ens = Ensemble::from_sampler(setup.init, setup.n_list[ni], 1, seed);
    StepStreams streams = StepStreams::from_seed(seed);
    std::size_t done = 0;
    for (std::size_t c = 0; c < C; ++c) {
      for (; done < steps_at[c]; ++done) run_step(model, ens, setup.dynamics, streams);
      for (std::size_t p = 0; p < P; ++p) {
        const auto& phi = setup.test_fns[p].fn;
        const double emp = empirical_expectation(ens, [&](ParamView v) { return phi(v.position[0]); });
        disc[((ni * S + s) * C + c) * P + p] = emp - ref[c][p];
      }
    }
  });

  FluctuationReport rep;
  rep.checkpoints = setup.checkpoints;
  rep.n_list = setup.n_list;
  for (const auto& t : setup.test_fns) rep.test_names.push_back(t.name);
  rep.rms.assign(C, std::vector<std::vector<double>>(N, std::vector<double>(P)));
  bool deterministic = true;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ni = 0; ni < N; ++ni)
      for (std::size_t p = 0; p < P; ++p) {
        double ss = 0.0;
        const double first = disc[((ni * S) * C + c) * P + p];
        for (std::size_t s = 0; s < S; ++s) {
          const double d = disc[((ni * S + s) * C + c) * P + p];
          ss += d * d;
          if (d != first) deterministic = false;
        }
        rep.rms[c][ni][p] = std::sqrt(ss / static_cast<double>(S));
      }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.skipped = deterministic;
  rep.slope_per_fn.assign(P, nan);
  rep.slope = nan;
  if (!deterministic) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t p = 0; p < P; ++p) {
      std::vector<double> lx, ly;
      for (std::size_t ni = 0; ni < N; ++ni) {
        if (rep.rms[c_slope][ni][p] <= 0.0) continue;
        lx.push_back(std::log(static_cast<double>(setup.n_list[ni])));
        ly.push_back(std::log(rep.rms[c_slope][ni][p]));
      }
      if (lx.size() < 2) continue;
      rep.slope_per_fn[p] = least_squares(lx, ly).slope;
      sum += rep.slope_per_fn[p];
      ++used;
    }
    if (used > 0) rep.slope = sum / static_cast<double>(used);
  }
  double ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  for (std::size_t ni = 0; ni < N; ++ni)
    for (std::size_t p = 0; p < P; ++p) {
      const double early = rep.rms[c_early][ni][p];
      if (early <= 0.0) continue;
      ratio_sum += rep.rms[c_late][ni][p] / early;
      ++ratio_count;
    }
  rep.quench_ratio = ratio_count ? ratio_sum / static_cast<double>(ratio_count) : nan;
  return rep;
}

std::string to_string(FitForm f) { return f == FitForm::PowerLaw ? "power-law" : "exponential"; }

FitForm fit_form_from_string(const std::string& name) {
  if (name == "power-law") return FitForm::PowerLaw;
  if (name == "exponential") return FitForm::Exponential;
  throw ConfigError("unknown fit form '" + name + "'");
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  if (m != y.size() || m < 2) throw FitError("least squares needs at least two paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("least squares needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RateFit rate_fit(std::span<const double> times, std::span<const double> values, double t0, double t1,
                 FitForm form) {
  if (times.size() != values.size()) throw FitError("rate_fit: length mismatch");
  if (!(t1 > t0)) throw FitError("rate_fit: empty window");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t0 || times[i] > t1) continue;
    if (!(values[i] > 0.0)) throw FitError("rate_fit: nonpositive energy in the fit window");
    if (form == FitForm::PowerLaw && !(times[i] > 0.0)) throw FitError("rate_fit: power law needs t > 0");
    x.push_back(form == FitForm::PowerLaw ? std::log(times[i]) : times[i]);
    y.push_back(std::log(values[i]));
  }
  if (x.size() < 10) throw FitError("rate_fit: fewer than 10 records in the fit window");
  const auto lf = least_squares(x, y);
  return {std::exp(lf.intercept), lf.slope, lf.r2, x.size()};
}

RateFit rate_fit(std::span<const TrajectoryRecord> records, double t0, double t1, FitForm form) {
  std::vector<double> t, e;
  t.reserve(records.size());
  e.reserve(records.size());
  for (const auto& r : records) {
    t.push_back(r.time);
    e.push_back(r.energy);
  }
  return rate_fit(t, e, t0, t1, form);
}

}  // namespace bdflow
