#include "bdflow/meanfield.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "bdflow/errors.hpp"
#include "bdflow/io.hpp"

namespace bdflow {

namespace {

ParamView view1(const double& x) { return ParamView{std::span<const double>(&x, 1), 1.0}; }

void require_grid_model(const PotentialModel& model) {
  if (model.dimension() != 1 || model.has_amplitude() || !model.is_exact())
    throw ConfigError("grid solver needs a one-dimensional exact model without an amplitude channel");
}

Eigen::MatrixXd as_matrix(std::span<const double> a, std::size_t k) {
  Eigen::MatrixXd m(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) m(i, j) = a[i * k + j];
  return m;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spd_eigen(std::span<const double> h, std::size_t k,
                                                         const char* what) {
  if (h.size() != k * k) throw ConfigError(std::string(what) + " has the wrong size");
  const Eigen::MatrixXd m = as_matrix(h, k);
  if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError(std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError(std::string(what) + " is not positive definite");
  return es;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid1D

Grid1D Grid1D::make(double lo, double hi, std::size_t cells) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("grid needs lo < hi");
  if (cells < 2) throw ConfigError("grid needs at least two cells");
  Grid1D g;
  g.lo = lo;
  g.hi = hi;
  g.cells = cells;
  g.density.assign(cells, 0.0);
  return g;
}

double Grid1D::mass() const {
  double s = 0.0;
  for (double r : density) s += r;
  return s * dx();
}

double Grid1D::integrate(const ScalarFn& phi) const {
  double s = 0.0;
  for (std::size_t i = 0; i < cells; ++i) s += phi(center(i)) * density[i];
  return s * dx();
}

void Grid1D::set_density(const ScalarFn& rho) {
  density.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double r = rho(center(i));
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("initial density must be finite and nonnegative");
    density[i] = r;
  }
  const double m = mass();
  if (!(m > 0.0)) throw ConfigError("initial density has no mass on the grid");
  for (double& r : density) r /= m;
}

void Grid1D::validate(double tol) const {
  for (std::size_t i = 0; i < cells; ++i)
    if (!(density[i] >= 0.0)) throw NumericError("grid density is negative or not finite", i);
  if (std::abs(mass() - 1.0) > tol) throw NumericError("grid mass is not 1");
}

void Grid1D::write_csv(std::ostream& out) const {
  out << "theta,density\n";
  for (std::size_t i = 0; i < cells; ++i) out << format_real(center(i)) << ',' << format_real(density[i]) << '\n';
}

double l1_distance(const Grid1D& a, const Grid1D& b) {
  if (a.cells != b.cells || a.lo != b.lo || a.hi != b.hi) throw ConfigError("l1_distance: grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.cells; ++i) s += std::abs(a.density[i] - b.density[i]);
  return s * a.dx();
}

// ---------------------------------------------------------------------------
// Pure birth-death

PureBirthDeath::PureBirthDeath(ScalarFn F, ScalarFn rho0, double alpha, double lo, double hi, std::size_t nodes)
    : F_(std::move(F)), rho0_(std::move(rho0)), alpha_(alpha), lo_(lo), hi_(hi), nodes_(nodes | 1U) {
  if (!(hi > lo)) throw ConfigError("quadrature domain needs lo < hi");
  if (nodes_ < 3) nodes_ = 3;
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  x_.resize(nodes_);
  f_.resize(nodes_);
  r0_.resize(nodes_);
  fmin_ = std::numeric_limits<double>::infinity();
  const double h = (hi_ - lo_) / static_cast<double>(nodes_ - 1);
  for (std::size_t i = 0; i < nodes_; ++i) {
    x_[i] = lo_ + h * static_cast<double>(i);
    f_[i] = F_(x_[i]);
    r0_[i] = rho0_(x_[i]);
    if (!std::isfinite(f_[i])) throw NumericError("F is not finite on the quadrature grid", i);
    if (r0_[i] > 0.0) fmin_ = std::min(fmin_, f_[i]);
  }
  if (!std::isfinite(fmin_)) throw ConfigError("initial density vanishes on the quadrature grid");
}

template <class Fn>
double PureBirthDeath::simpson(Fn&& g) const {
  const double h = (hi_ - lo_) / static_cast<double>(nodes_ - 1);
  double s = g(0) + g(nodes_ - 1);
  for (std::size_t i = 1; i + 1 < nodes_; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i);
  return s * h / 3.0;
}

double PureBirthDeath::normalizer(double t) const {
  if (t < 0.0) throw ConfigError("time must be nonnegative");
  const double at = alpha_ * t;
  return simpson([&](std::size_t i) { return std::exp(-at * (f_[i] - fmin_)) * r0_[i]; });
}

double PureBirthDeath::density(double t, double theta) const {
  if (t == 0.0) return rho0_(theta);
  return std::exp(-alpha_ * t * (F_(theta) - fmin_)) * rho0_(theta) / normalizer(t);
}

double PureBirthDeath::mean_energy(double t) const {
  const double at = alpha_ * t;
  const double z = normalizer(t);
  // Integrate (F - min F) and add the shift back to limit cancellation.
  const double num = simpson([&](std::size_t i) { return (f_[i] - fmin_) * std::exp(-at * (f_[i] - fmin_)) * r0_[i]; });
  return num / z + fmin_;
}

double pure_bd_density(const ScalarFn& F, const ScalarFn& rho0, double alpha, double t, double theta, double lo,
                       double hi, std::size_t nodes) {
  return PureBirthDeath(F, rho0, alpha, lo, hi, nodes).density(t, theta);
}

double pure_bd_mean_energy(const ScalarFn& F, const ScalarFn& rho0, double alpha, double t, double lo, double hi,
                           std::size_t nodes) {
  return PureBirthDeath(F, rho0, alpha, lo, hi, nodes).mean_energy(t);
}

// ---------------------------------------------------------------------------
// Closed forms with transport

void RateFormulas::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  (void)spd_eigen(hessian, dimension, "hessian");
}

double transport_bd_asymptote(const RateFormulas& f, double t) {
  f.validate();
  if (t < 0.0) throw ConfigError("time must be nonnegative");
  const auto es = spd_eigen(f.hessian, f.dimension, "hessian");
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    s += lam * std::exp(-2.0 * lam * t);
  }
  return s / f.alpha;
}

double GaussianLaw::density(std::span<const double> theta) const {
  const std::size_t k = mean.size();
  if (theta.size() != k) throw ConfigError("density: dimension mismatch");
  const Eigen::MatrixXd cov = as_matrix(covariance, k);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  Eigen::VectorXd d(k);
  for (std::size_t i = 0; i < k; ++i) d(static_cast<Eigen::Index>(i)) = theta[i] - mean[i];
  const double q = d.dot(ldlt.solve(d));
  const double logdet = ldlt.vectorD().array().max(1e-300).log().sum();
  return std::exp(-0.5 * q - 0.5 * logdet - 0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi));
}

GaussianLaw characteristics_law_quadratic(const QuadraticWellParams& well, std::span<const double> mean0,
                                          std::span<const double> cov0, double alpha, double t) {
  const std::size_t k = well.minimizer.size();
  if (mean0.size() != k || cov0.size() != k * k) throw ConfigError("initial gaussian has the wrong dimension");
  if (t < 0.0) throw ConfigError("time must be nonnegative");
  const auto hes = spd_eigen(well.hessian, k, "hessian");
  const auto ces = spd_eigen(cov0, k, "initial covariance");
  const Eigen::MatrixXd Q = hes.eigenvectors();
  const Eigen::VectorXd lam = hes.eigenvalues();

  // Work in the Hessian eigenbasis where e^{Ht} is diagonal.
  const Eigen::MatrixXd cov0_inv = ces.eigenvectors() * ces.eigenvalues().cwiseInverse().asDiagonal() *
                                   ces.eigenvectors().transpose();
  const Eigen::MatrixXd S = Q.transpose() * cov0_inv * Q;
  const Eigen::VectorXd e = (lam * t).array().exp();
  Eigen::MatrixXd P = e.asDiagonal() * S * e.asDiagonal();
  for (Eigen::Index i = 0; i < P.rows(); ++i) P(i, i) += 0.5 * alpha * std::expm1(2.0 * lam(i) * t);

  Eigen::VectorXd m0(k);
  for (std::size_t i = 0; i < k; ++i) m0(static_cast<Eigen::Index>(i)) = mean0[i] - well.minimizer[i];
  const Eigen::VectorXd eta = e.asDiagonal() * (S * (Q.transpose() * m0));

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(P);
  const Eigen::VectorXd pinv = pes.eigenvalues().cwiseMax(1e-300).cwiseInverse().cwiseMax(1e-300);
  const Eigen::MatrixXd cov_eig = pes.eigenvectors() * pinv.asDiagonal() * pes.eigenvectors().transpose();
  const Eigen::MatrixXd cov = Q * cov_eig * Q.transpose();
  const Eigen::VectorXd mean = Q * (cov_eig * eta);

  GaussianLaw law;
  law.mean.resize(k);
  law.covariance.resize(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    law.mean[i] = well.minimizer[i] + mean(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < k; ++j)
      law.covariance[i * k + j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return law;
}

double characteristics_density_quadratic(const QuadraticWellParams& well, std::span<const double> mean0,
                                         std::span<const double> cov0, double alpha, double t,
                                         std::span<const double> theta) {
  return characteristics_law_quadratic(well, mean0, cov0, alpha, t).density(theta);
}

// ---------------------------------------------------------------------------
// Grid solver

GridSolver1D::GridSolver1D(const PotentialModel& model, Grid1D grid, GridSolverConfig cfg)
    : grid_(std::move(grid)), cfg_(cfg) {
  require_grid_model(model);
  if (!(cfg_.dt > 0.0)) throw ConfigError("grid dt must be positive");
  if (!(cfg_.alpha >= 0.0)) throw ConfigError("grid alpha must be nonnegative");
  if (grid_.density.size() != grid_.cells) throw ConfigError("grid density has the wrong length");
  const std::size_t M = grid_.cells;
  F_.resize(M);
  std::vector<double> x(M);
  for (std::size_t i = 0; i < M; ++i) {
    x[i] = grid_.center(i);
    F_[i] = model.F(view1(x[i]));
  }
  if (model.is_interacting()) {
    K_.resize(M * M);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = i; j < M; ++j) K_[i * M + j] = K_[j * M + i] = model.K(view1(x[i]), view1(x[j]));
  }
  V_.resize(M);
  flux_.resize(M + 1, 0.0);
}

void GridSolver1D::potentials_into(std::span<double> V) const {
  const std::size_t M = grid_.cells;
  const double dx = grid_.dx();
  for (std::size_t i = 0; i < M; ++i) {
    double v = F_[i];
    if (!K_.empty()) {
      const double* row = K_.data() + i * M;
      double acc = 0.0;
      for (std::size_t j = 0; j < M; ++j) acc += row[j] * grid_.density[j];
      v += acc * dx;
    }
    V[i] = v;
  }
}

std::vector<double> GridSolver1D::potentials() const {
  std::vector<double> V(grid_.cells);
  potentials_into(V);
  return V;
}

double GridSolver1D::energy() const {
  const double dx = grid_.dx();
  double e = 0.0;
  if (K_.empty()) {
    for (std::size_t i = 0; i < grid_.cells; ++i) e += F_[i] * grid_.density[i];
    return e * dx;
  }
  // 1/2 (F + V) integrates F once and K with the 1/2.
  std::vector<double> V(grid_.cells);
  potentials_into(V);
  for (std::size_t i = 0; i < grid_.cells; ++i) e += 0.5 * (F_[i] + V[i]) * grid_.density[i];
  return e * dx;
}

namespace {
constexpr double kUnderflowFloor = 1e-250;
}

double GridSolver1D::clip_and_normalize() {
  double clipped = 0.0;
  for (double& r : grid_.density) {
    if (r < 0.0) {
      clipped -= r;
      r = 0.0;
    } else if (r < kUnderflowFloor) {
      // tails decay into subnormals, which are slow and carry no mass
      r = 0.0;
    }
  }
  const double dx = grid_.dx();
  const double m = grid_.mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw NumericError("grid density lost all mass");
  for (double& r : grid_.density) r /= m;
  clipped *= dx;
  last_clip_ = clipped;
  total_clip_ += clipped;
  if (clipped > cfg_.clip_tolerance && ++warnings_ > cfg_.max_warnings)
    throw NumericError("grid solver keeps clipping negative density; reduce dt");
  return clipped;
}

void GridSolver1D::step() {
  const std::size_t M = grid_.cells;
  const double dx = grid_.dx();
  const double dt = cfg_.dt;
  auto& rho = grid_.density;

  if (cfg_.transport) {
    potentials_into(V_);
    double umax = 0.0;
    flux_[0] = flux_[M] = 0.0;
    for (std::size_t f = 1; f < M; ++f) {
      const double u = -(V_[f] - V_[f - 1]) / dx;
      umax = std::max(umax, std::abs(u));
      flux_[f] = u * (u > 0.0 ? rho[f - 1] : rho[f]);
    }
    if (dt * umax / dx > cfg_.cfl_limit)
      throw StepSizeError("grid CFL number " + std::to_string(dt * umax / dx) + " exceeds the limit");
    for (std::size_t i = 0; i < M; ++i) rho[i] -= dt / dx * (flux_[i + 1] - flux_[i]);
  }

  if (cfg_.birth_death && cfg_.alpha > 0.0) {
    potentials_into(V_);
    double vbar = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      vbar += V_[i] * rho[i];
      mass += rho[i];
    }
    vbar /= mass;
    for (std::size_t i = 0; i < M; ++i) rho[i] *= 1.0 - cfg_.alpha * dt * (V_[i] - vbar);
  }

  clip_and_normalize();
  grid_.time += dt;
}

void GridSolver1D::advance_to(double t) {
  while (grid_.time < t - 0.5 * cfg_.dt) step();
}

Grid1D grid_solver_1d(const PotentialModel& model, const Grid1D& grid, const GridSolverConfig& cfg) {
  GridSolver1D solver(model, grid, cfg);
  solver.step();
  return solver.grid();
}

double grid_energy(const PotentialModel& model, const Grid1D& grid) {
  require_grid_model(model);
  const std::size_t M = grid.cells;
  const double dx = grid.dx();
  std::vector<double> x(M);
  for (std::size_t i = 0; i < M; ++i) x[i] = grid.center(i);
  double e = 0.0;
  for (std::size_t i = 0; i < M; ++i) e += model.F(view1(x[i])) * grid.density[i];
  e *= dx;
  if (model.is_interacting()) {
    double pair = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      if (grid.density[i] == 0.0) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < M; ++j) row += model.K(view1(x[i]), view1(x[j])) * grid.density[j];
      pair += row * grid.density[i];
    }
    e += 0.5 * pair * dx * dx;
  }
  return e;
}

}  // namespace bdflow
