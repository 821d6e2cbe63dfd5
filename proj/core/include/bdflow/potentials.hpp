#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bdflow/ensemble.hpp"
#include "bdflow/rng.hpp"

namespace bdflow {

enum class ModelKind { QuadraticWell, DoubleWell, GaussianMixture, ReluStudentTeacher };

std::string to_string(ModelKind kind);

/// Minibatch of inputs x_p (row-major P x d) with teacher targets f(x_p).
struct Batch {
  std::size_t size = 0;
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::span<const double> input(std::size_t p) const { return {inputs.data() + p * dim, dim}; }
};

/// Objective of the form
///   sum_i F(theta_i) + 1/(2n) sum_ij K(theta_i, theta_j),
/// studied through the mean-field potential
///   V(theta) = F(theta) + n^-1 sum_j w_j K(theta, theta_j).
///
/// Gradients use the full parameter layout: for models with an amplitude
/// channel, entry 0 is d/dc and entries 1..k are d/dposition; otherwise entries
/// 0..k-1 are d/dposition. K must be symmetric. All member functions are pure
/// and safe to call concurrently.
class PotentialModel {
 public:
  virtual ~PotentialModel() = default;

  virtual ModelKind kind() const noexcept = 0;
  /// Length k of a particle position.
  virtual std::size_t dimension() const noexcept = 0;
  virtual bool has_amplitude() const noexcept { return false; }
  /// False iff K is identically zero.
  virtual bool is_interacting() const noexcept = 0;
  /// False for models that only provide minibatch estimates.
  virtual bool is_exact() const noexcept { return true; }
  std::size_t parameter_size() const noexcept { return dimension() + (has_amplitude() ? 1 : 0); }

  virtual double F(ParamView p) const = 0;
  virtual void grad_F(ParamView p, std::span<double> out) const = 0;
  /// Zero for non-interacting models.
  virtual double K(ParamView a, ParamView b) const;
  /// Gradient of K in its first argument; zero for non-interacting models.
  virtual void grad_K(ParamView a, ParamView b, std::span<double> out) const;

  /// V_i (into `V`, length n) and grad V_i (into `G`, n x parameter_size) for
  /// the whole ensemble; either span may be empty to skip it. Exact models
  /// ignore `batch`; batch models require it. The default is the direct double
  /// sum over F and K.
  virtual void evaluate(const Ensemble& ens, const Batch* batch, std::span<double> V,
                        std::span<double> G) const;
};

/// Convex quadratic well: F = 1/2 <theta - theta*, H (theta - theta*)>.
struct QuadraticWellParams {
  std::vector<double> minimizer{0.0};
  /// Row-major k x k symmetric positive definite matrix.
  std::vector<double> hessian{1.0};
};

/// Tilted double well along coordinate 0 plus a unit quadratic in the others:
///   F = h (x0^2 - 1)^2 + b x0 + 1/2 sum_{i>0} x_i^2 - F_min,
/// shifted so the global minimum value is 0.
struct DoubleWellParams {
  std::size_t dimension = 1;
  double height = 1.0;
  double tilt = 0.25;
};

struct MixtureComponent {
  double amplitude = 1.0;
  std::vector<double> center{0.0};
  double std = 1.0;
};

/// Target f(x) = m^-1 sum_j cbar_j N(x; ybar_j, s_j^2 I) approximated by the
/// network f_n(x) = n^-1 sum_i w_i c_i N(x; y_i, sigma^2 I) with sigma < min_j s_j.
/// With `fixed_amplitude` set, every unit uses that amplitude and the particle
/// parameter is y alone.
struct GaussianMixtureParams {
  std::vector<MixtureComponent> components{MixtureComponent{}};
  double bandwidth = 0.5;
  std::optional<double> fixed_amplitude;
};

/// Student-teacher single-hidden-layer ReLU networks without biases.
/// Teacher amplitudes are +-1 and teacher inner weights are gaussian directions
/// normalized to unit length, drawn from `teacher_seed`. Inputs are standard
/// gaussian in R^d, drawn fresh per batch.
struct ReluTeacherParams {
  std::size_t input_dim = 50;
  std::size_t teacher_units = 10;
  std::size_t batch_size = 64;
  std::uint64_t teacher_seed = 2019;
};

using ModelSpec =
    std::variant<QuadraticWellParams, DoubleWellParams, GaussianMixtureParams, ReluTeacherParams>;

class QuadraticWell final : public PotentialModel {
 public:
  explicit QuadraticWell(QuadraticWellParams params);

  ModelKind kind() const noexcept override { return ModelKind::QuadraticWell; }
  std::size_t dimension() const noexcept override { return minimizer_.size(); }
  bool is_interacting() const noexcept override { return false; }
  double F(ParamView p) const override;
  void grad_F(ParamView p, std::span<double> out) const override;

  const std::vector<double>& minimizer() const noexcept { return minimizer_; }
  const std::vector<double>& hessian() const noexcept { return hessian_; }

 private:
  std::vector<double> minimizer_;
  std::vector<double> hessian_;
};

class DoubleWell final : public PotentialModel {
 public:
  explicit DoubleWell(DoubleWellParams params);

  ModelKind kind() const noexcept override { return ModelKind::DoubleWell; }
  std::size_t dimension() const noexcept override { return params_.dimension; }
  bool is_interacting() const noexcept override { return false; }
  double F(ParamView p) const override;
  void grad_F(ParamView p, std::span<double> out) const override;

  /// Location of the global minimum along coordinate 0.
  double global_minimizer() const noexcept { return x_star_; }

 private:
  DoubleWellParams params_;
  double x_star_ = 0.0;
  double offset_ = 0.0;
};

class GaussianMixture final : public PotentialModel {
 public:
  explicit GaussianMixture(GaussianMixtureParams params);

  ModelKind kind() const noexcept override { return ModelKind::GaussianMixture; }
  std::size_t dimension() const noexcept override { return dim_; }
  bool has_amplitude() const noexcept override { return !params_.fixed_amplitude.has_value(); }
  bool is_interacting() const noexcept override { return true; }
  double F(ParamView p) const override;
  void grad_F(ParamView p, std::span<double> out) const override;
  double K(ParamView a, ParamView b) const override;
  void grad_K(ParamView a, ParamView b, std::span<double> out) const override;
  void evaluate(const Ensemble& ens, const Batch* batch, std::span<double> V,
                std::span<double> G) const override;

  const GaussianMixtureParams& params() const noexcept { return params_; }
  /// Target function f(x).
  double target(std::span<const double> x) const;
  /// Unit output phi(x, theta) = c N(x; y, sigma^2 I).
  double unit(std::span<const double> x, ParamView p) const;
  /// C_f = 1/2 int f^2 in closed form.
  double target_half_norm() const noexcept { return half_norm_; }

 private:
  double amplitude_of(ParamView p) const noexcept {
    return params_.fixed_amplitude ? *params_.fixed_amplitude : p.amplitude;
  }

  GaussianMixtureParams params_;
  std::size_t dim_;
  double half_norm_ = 0.0;
};

class ReluStudentTeacher final : public PotentialModel {
 public:
  explicit ReluStudentTeacher(ReluTeacherParams params);

  ModelKind kind() const noexcept override { return ModelKind::ReluStudentTeacher; }
  std::size_t dimension() const noexcept override { return params_.input_dim; }
  bool has_amplitude() const noexcept override { return true; }
  bool is_interacting() const noexcept override { return true; }
  bool is_exact() const noexcept override { return false; }
  /// Unsupported: the expectation over the data has no closed form here.
  double F(ParamView p) const override;
  void grad_F(ParamView p, std::span<double> out) const override;
  double K(ParamView a, ParamView b) const override;
  void grad_K(ParamView a, ParamView b, std::span<double> out) const override;
  /// Batch estimates: V_i = c_i Vhat_P(y_i); G_i = n * d(batch loss)/d theta_i.
  void evaluate(const Ensemble& ens, const Batch* batch, std::span<double> V,
                std::span<double> G) const override;

  const ReluTeacherParams& params() const noexcept { return params_; }
  const std::vector<double>& teacher_amplitudes() const noexcept { return teacher_c_; }
  /// Row-major m x d teacher inner weights.
  const std::vector<double>& teacher_weights() const noexcept { return teacher_y_; }

  double teacher(std::span<const double> x) const;
  double student(const Ensemble& ens, std::span<const double> x) const;
  /// P inputs x_p ~ N(0, I_d) with teacher targets.
  Batch sample_batch(std::size_t size, Rng& rng) const;
  Batch sample_batch(Rng& rng) const { return sample_batch(params_.batch_size, rng); }
  /// Vhat_P(y_i) = P^-1 sum_p phi(x_p, y_i) (f_n(x_p) - f(x_p)), one entry per particle.
  std::vector<double> batch_potential_hat(const Ensemble& ens, const Batch& batch) const;
  /// (2P)^-1 sum_p |f_n(x_p) - f(x_p)|^2.
  double batch_loss(const Ensemble& ens, const Batch& batch) const;
  /// CSV `unit,amplitude,w_0,...,w_{d-1}` of the teacher network.
  void write_teacher_csv(std::ostream& out) const;

 private:
  std::vector<double> residuals(const Ensemble& ens, const Batch& batch,
                                std::vector<double>* activations) const;

  ReluTeacherParams params_;
  std::vector<double> teacher_c_;
  std::vector<double> teacher_y_;
};

std::unique_ptr<PotentialModel> make_model(const ModelSpec& spec);

/// V(theta_i) = F(theta_i) + n^-1 sum_j w_j K(theta_i, theta_j) for one particle.
double particle_potential(const PotentialModel& model, const Ensemble& ens, std::size_t i);

/// V for every particle; `batch` is required for batch models.
std::vector<double> particle_potentials(const PotentialModel& model, const Ensemble& ens,
                                        const Batch* batch = nullptr);

/// 1/2 int |f - f_n|^2 dx in closed form:
///   C_f + n^-1 sum_i w_i F_i + (2n^2)^-1 sum_ij w_i w_j K_ij.
double exact_mixture_loss(const GaussianMixture& model, const Ensemble& ens);

/// Isotropic normal density N(r; 0, var I) in `dim` dimensions from r^2.
double normal_density(double r2, double var, std::size_t dim) noexcept;

}  // namespace bdflow
