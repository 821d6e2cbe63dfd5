#include "bdflow/potentials.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bdflow/errors.hpp"
#include "bdflow/io.hpp"

namespace bdflow {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::QuadraticWell: return "quadratic-well";
    case ModelKind::DoubleWell: return "double-well";
    case ModelKind::GaussianMixture: return "gaussian-mixture-rbf";
    case ModelKind::ReluStudentTeacher: return "relu-student-teacher";
  }
  return "unknown";
}

double normal_density(double r2, double var, std::size_t dim) noexcept {
  return std::exp(-0.5 * r2 / var) *
         std::pow(2.0 * std::numbers::pi * var, -0.5 * static_cast<double>(dim));
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_finite(double v, const char* what, std::size_t i) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what, i);
}

}  // namespace

// ---------------------------------------------------------------------------
// PotentialModel defaults

double PotentialModel::K(ParamView, ParamView) const { return 0.0; }

void PotentialModel::grad_K(ParamView, ParamView, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

void PotentialModel::evaluate(const Ensemble& ens, const Batch*, std::span<double> V,
                              std::span<double> G) const {
  const std::size_t n = ens.size();
  const std::size_t ps = parameter_size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> tmp(ps);
  for (std::size_t i = 0; i < n; ++i) {
    const ParamView pi = ens.view(i);
    if (!V.empty()) {
      double v = F(pi);
      if (is_interacting()) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += ens.weight(j) * K(pi, ens.view(j));
        v += inv_n * acc;
      }
      require_finite(v, "potential", i);
      V[i] = v;
    }
    if (!G.empty()) {
      auto gi = G.subspan(i * ps, ps);
      grad_F(pi, gi);
      if (is_interacting()) {
        for (std::size_t j = 0; j < n; ++j) {
          grad_K(pi, ens.view(j), tmp);
          const double s = inv_n * ens.weight(j);
          for (std::size_t d = 0; d < ps; ++d) gi[d] += s * tmp[d];
        }
      }
      for (double g : gi) require_finite(g, "gradient", i);
    }
  }
}

// ---------------------------------------------------------------------------
// QuadraticWell

QuadraticWell::QuadraticWell(QuadraticWellParams params)
    : minimizer_(std::move(params.minimizer)), hessian_(std::move(params.hessian)) {
  const std::size_t k = minimizer_.size();
  if (k == 0) throw ConfigError("quadratic well needs a non-empty minimizer");
  if (hessian_.size() != k * k) {
    throw ConfigError("quadratic well hessian must be k x k with k = " + std::to_string(k));
  }
  Eigen::Map<const Eigen::MatrixXd> H(hessian_.data(), static_cast<Eigen::Index>(k),
                                      static_cast<Eigen::Index>(k));
  if (!H.allFinite() || !H.isApprox(H.transpose(), 1e-12)) {
    throw ConfigError("quadratic well hessian must be finite and symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw ConfigError("quadratic well hessian is not positive definite");
}

double QuadraticWell::F(ParamView p) const {
  const std::size_t k = minimizer_.size();
  double acc = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    const double da = p.position[a] - minimizer_[a];
    for (std::size_t b = 0; b < k; ++b) acc += da * hessian_[a * k + b] * (p.position[b] - minimizer_[b]);
  }
  return 0.5 * acc;
}

void QuadraticWell::grad_F(ParamView p, std::span<double> out) const {
  const std::size_t k = minimizer_.size();
  for (std::size_t a = 0; a < k; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < k; ++b) acc += hessian_[a * k + b] * (p.position[b] - minimizer_[b]);
    out[a] = acc;
  }
}

// ---------------------------------------------------------------------------
// DoubleWell

DoubleWell::DoubleWell(DoubleWellParams params) : params_(params) {
  if (params_.dimension == 0) throw ConfigError("double well dimension must be >= 1");
  if (!(params_.height > 0.0) || !std::isfinite(params_.height) || !std::isfinite(params_.tilt)) {
    throw ConfigError("double well requires finite height > 0 and finite tilt");
  }
  const double h = params_.height;
  const double b = params_.tilt;
  auto g = [&](double x) { return h * (x * x - 1.0) * (x * x - 1.0) + b * x; };
  // Coarse scan then Newton polish on g'(x) = 4hx(x^2-1) + b.
  double best = -4.0;
  for (int s = 0; s <= 8000; ++s) {
    const double x = -4.0 + 1e-3 * s;
    if (g(x) < g(best)) best = x;
  }
  for (int it = 0; it < 50; ++it) {
    const double d1 = 4.0 * h * best * (best * best - 1.0) + b;
    const double d2 = 4.0 * h * (3.0 * best * best - 1.0);
    if (d2 <= 0.0) break;
    best -= d1 / d2;
  }
  x_star_ = best;
  offset_ = g(best);
}

double DoubleWell::F(ParamView p) const {
  const double x = p.position[0];
  double v = params_.height * (x * x - 1.0) * (x * x - 1.0) + params_.tilt * x - offset_;
  for (std::size_t i = 1; i < params_.dimension; ++i) v += 0.5 * p.position[i] * p.position[i];
  return v;
}

void DoubleWell::grad_F(ParamView p, std::span<double> out) const {
  const double x = p.position[0];
  out[0] = 4.0 * params_.height * x * (x * x - 1.0) + params_.tilt;
  for (std::size_t i = 1; i < params_.dimension; ++i) out[i] = p.position[i];
}

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(GaussianMixtureParams params) : params_(std::move(params)) {
  if (params_.components.empty()) throw ConfigError("gaussian mixture needs at least one component");
  dim_ = params_.components.front().center.size();
  if (dim_ == 0) throw ConfigError("gaussian mixture component centers must be non-empty");
  if (!(params_.bandwidth > 0.0)) throw ConfigError("gaussian mixture bandwidth must be > 0");
  double min_std = params_.components.front().std;
  for (const auto& c : params_.components) {
    if (c.center.size() != dim_) throw ConfigError("gaussian mixture centers must share one dimension");
    if (!(c.std > 0.0)) throw ConfigError("gaussian mixture component std must be > 0");
    if (!std::isfinite(c.amplitude)) throw ConfigError("gaussian mixture amplitude must be finite");
    min_std = std::min(min_std, c.std);
  }
  if (!(params_.bandwidth < min_std)) {
    throw ConfigError("gaussian mixture bandwidth " + format_real(params_.bandwidth) +
                      " must be smaller than every component std (min " + format_real(min_std) + ")");
  }
  if (params_.fixed_amplitude && !std::isfinite(*params_.fixed_amplitude)) {
    throw ConfigError("gaussian mixture fixed amplitude must be finite");
  }
  const double m = static_cast<double>(params_.components.size());
  double acc = 0.0;
  for (const auto& a : params_.components) {
    for (const auto& b : params_.components) {
      acc += a.amplitude * b.amplitude *
             normal_density(squared_distance(a.center, b.center), a.std * a.std + b.std * b.std, dim_);
    }
  }
  half_norm_ = 0.5 * acc / (m * m);
}

double GaussianMixture::target(std::span<const double> x) const {
  double acc = 0.0;
  for (const auto& c : params_.components) {
    acc += c.amplitude * normal_density(squared_distance(x, c.center), c.std * c.std, dim_);
  }
  return acc / static_cast<double>(params_.components.size());
}

double GaussianMixture::unit(std::span<const double> x, ParamView p) const {
  const double s2 = params_.bandwidth * params_.bandwidth;
  return amplitude_of(p) * normal_density(squared_distance(x, p.position), s2, dim_);
}

double GaussianMixture::F(ParamView p) const {
  const double s2 = params_.bandwidth * params_.bandwidth;
  double acc = 0.0;
  for (const auto& c : params_.components) {
    acc += c.amplitude * normal_density(squared_distance(p.position, c.center), s2 + c.std * c.std, dim_);
  }
  return -amplitude_of(p) * acc / static_cast<double>(params_.components.size());
}

void GaussianMixture::grad_F(ParamView p, std::span<double> out) const {
  const double s2 = params_.bandwidth * params_.bandwidth;
  const double inv_m = 1.0 / static_cast<double>(params_.components.size());
  const double c = amplitude_of(p);
  const std::size_t off = has_amplitude() ? 1 : 0;
  double dc = 0.0;
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& comp : params_.components) {
    const double var = s2 + comp.std * comp.std;
    const double g = comp.amplitude * normal_density(squared_distance(p.position, comp.center), var, dim_);
    dc -= g;
    for (std::size_t d = 0; d < dim_; ++d) out[off + d] += c * g * (p.position[d] - comp.center[d]) / var;
  }
  for (std::size_t d = 0; d < dim_; ++d) out[off + d] *= inv_m;
  if (off) out[0] = dc * inv_m;
}

double GaussianMixture::K(ParamView a, ParamView b) const {
  const double var = 2.0 * params_.bandwidth * params_.bandwidth;
  return amplitude_of(a) * amplitude_of(b) * normal_density(squared_distance(a.position, b.position), var, dim_);
}

void GaussianMixture::grad_K(ParamView a, ParamView b, std::span<double> out) const {
  const double var = 2.0 * params_.bandwidth * params_.bandwidth;
  const double g = normal_density(squared_distance(a.position, b.position), var, dim_);
  const double ca = amplitude_of(a);
  const double cb = amplitude_of(b);
  const std::size_t off = has_amplitude() ? 1 : 0;
  if (off) out[0] = cb * g;
  for (std::size_t d = 0; d < dim_; ++d) out[off + d] = -ca * cb * g * (a.position[d] - b.position[d]) / var;
}

void GaussianMixture::evaluate(const Ensemble& ens, const Batch*, std::span<double> V,
                               std::span<double> G) const {
  // Fused symmetric pair sweep: each kernel value is computed once.
  const std::size_t n = ens.size();
  const std::size_t ps = parameter_size();
  const std::size_t off = has_amplitude() ? 1 : 0;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double var = 2.0 * params_.bandwidth * params_.bandwidth;
  const double g0 = normal_density(0.0, var, dim_);
  const double neg_half_inv_var = -0.5 / var;
  // beyond this distance exp underflows to zero
  const double r2_cut = 1500.0 * var;
  const bool want_v = !V.empty();
  const bool want_g = !G.empty();

  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = amplitude_of(ens.view(i));
  std::vector<double> vk(want_v ? n : 0, 0.0);
  std::vector<double> gk(want_g ? n * ps : 0, 0.0);
  const auto w = ens.weights();

  if (dim_ == 1) {
    // Row-wise array form so the exponentials vectorize.
    using Arr = Eigen::ArrayXd;
    using CMap = Eigen::Map<const Arr>;
    const double* y = ens.positions().data();
    Arr amp_acc = Arr::Zero(n), pos_acc = Arr::Zero(n);
    Arr dy, g, kij, t;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w[i], ci = c[i];
      if (want_v) vk[i] += wi * ci * ci * g0;
      if (want_g && off) amp_acc[i] += wi * ci * g0;
      const auto L = static_cast<Eigen::Index>(n - i - 1);
      if (L == 0) continue;
      const CMap yt(y + i + 1, L), wt(w.data() + i + 1, L), ct(c.data() + i + 1, L);
      dy = y[i] - yt;
      g = g0 * (neg_half_inv_var * dy.square()).exp();
      kij = ci * ct * g;
      if (want_v) {
        vk[i] += (wt * kij).sum();
        Eigen::Map<Arr>(vk.data() + i + 1, L) += wi * kij;
      }
      if (want_g) {
        if (off) {
          amp_acc[i] += (wt * ct * g).sum();
          amp_acc.segment(i + 1, L) += wi * ci * g;
        }
        t = kij * dy / var;
        pos_acc[i] -= (wt * t).sum();
        pos_acc.segment(i + 1, L) += wi * t;
      }
    }
    if (want_g) {
      for (std::size_t i = 0; i < n; ++i) {
        if (off) gk[i * ps] = amp_acc[static_cast<Eigen::Index>(i)];
        gk[i * ps + off] = pos_acc[static_cast<Eigen::Index>(i)];
      }
    }
  }
  for (std::size_t i = 0; i < n && dim_ != 1; ++i) {
    const auto yi = ens.position(i);
    // diagonal term: K(theta_i, theta_i) and grad_1 K(theta_i, theta_i)
    if (want_v) vk[i] += w[i] * c[i] * c[i] * g0;
    if (want_g && off) gk[i * ps] += w[i] * c[i] * g0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto yj = ens.position(j);
      const double r2 = squared_distance(yi, yj);
      if (r2 > r2_cut) continue;
      const double g = g0 * std::exp(neg_half_inv_var * r2);
      const double kij = c[i] * c[j] * g;
      if (want_v) {
        vk[i] += w[j] * kij;
        vk[j] += w[i] * kij;
      }
      if (want_g) {
        if (off) {
          gk[i * ps] += w[j] * c[j] * g;
          gk[j * ps] += w[i] * c[i] * g;
        }
        for (std::size_t d = 0; d < dim_; ++d) {
          const double t = kij * (yi[d] - yj[d]) / var;
          gk[i * ps + off + d] -= w[j] * t;
          gk[j * ps + off + d] += w[i] * t;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const ParamView pi = ens.view(i);
    if (want_v) {
      V[i] = F(pi) + inv_n * vk[i];
      require_finite(V[i], "potential", i);
    }
    if (want_g) {
      auto gi = G.subspan(i * ps, ps);
      grad_F(pi, gi);
      for (std::size_t d = 0; d < ps; ++d) {
        gi[d] += inv_n * gk[i * ps + d];
        require_finite(gi[d], "gradient", i);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ReluStudentTeacher

ReluStudentTeacher::ReluStudentTeacher(ReluTeacherParams params) : params_(params) {
  if (params_.input_dim == 0) throw ConfigError("relu input dimension must be >= 1");
  if (params_.teacher_units == 0) throw ConfigError("relu teacher needs at least one unit");
  if (params_.batch_size == 0) throw ConfigError("relu batch size must be >= 1");
  const std::size_t d = params_.input_dim;
  Rng rng = Rng::stream(params_.teacher_seed, 0x7eac4e5ull);
  teacher_c_.resize(params_.teacher_units);
  teacher_y_.resize(params_.teacher_units * d);
  for (std::size_t j = 0; j < params_.teacher_units; ++j) {
    teacher_c_[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    double norm2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double z = rng.normal();
      teacher_y_[j * d + a] = z;
      norm2 += z * z;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t a = 0; a < d; ++a) teacher_y_[j * d + a] *= inv;
  }
}

double ReluStudentTeacher::F(ParamView) const {
  throw UnsupportedOperation("exact F is unavailable for relu-student-teacher; use batch estimates");
}
void ReluStudentTeacher::grad_F(ParamView, std::span<double>) const {
  throw UnsupportedOperation("exact grad F is unavailable for relu-student-teacher; use batch estimates");
}
double ReluStudentTeacher::K(ParamView, ParamView) const {
  throw UnsupportedOperation("exact K is unavailable for relu-student-teacher; use batch estimates");
}
void ReluStudentTeacher::grad_K(ParamView, ParamView, std::span<double>) const {
  throw UnsupportedOperation("exact grad K is unavailable for relu-student-teacher; use batch estimates");
}

namespace {
double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

double ReluStudentTeacher::teacher(std::span<const double> x) const {
  const std::size_t d = params_.input_dim;
  double acc = 0.0;
  for (std::size_t j = 0; j < params_.teacher_units; ++j) {
    acc += teacher_c_[j] * std::max(0.0, dot({teacher_y_.data() + j * d, d}, x));
  }
  return acc / static_cast<double>(params_.teacher_units);
}

double ReluStudentTeacher::student(const Ensemble& ens, std::span<const double> x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    acc += ens.weight(i) * ens.amplitude(i) * std::max(0.0, dot(ens.position(i), x));
  }
  return acc / static_cast<double>(ens.size());
}

Batch ReluStudentTeacher::sample_batch(std::size_t size, Rng& rng) const {
  if (size == 0) throw ConfigError("batch must contain at least one input");
  Batch b;
  b.size = size;
  b.dim = params_.input_dim;
  b.inputs.resize(size * b.dim);
  b.targets.resize(size);
  for (double& x : b.inputs) x = rng.normal();
  for (std::size_t p = 0; p < size; ++p) b.targets[p] = teacher(b.input(p));
  return b;
}

std::vector<double> ReluStudentTeacher::residuals(const Ensemble& ens, const Batch& batch,
                                                  std::vector<double>* activations) const {
  if (batch.size == 0) throw ConfigError("batch must contain at least one input");
  if (batch.dim != params_.input_dim || ens.dimension() != params_.input_dim || !ens.has_amplitude()) {
    throw ConfigError("relu model, ensemble, and batch dimensions disagree");
  }
  const std::size_t n = ens.size();
  const std::size_t P = batch.size;
  std::vector<double> act(n * P);
  std::vector<double> r(P, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = ens.position(i);
    const double wc = ens.weight(i) * ens.amplitude(i);
    for (std::size_t p = 0; p < P; ++p) {
      const double a = dot(yi, batch.input(p));
      act[i * P + p] = a;
      r[p] += wc * std::max(0.0, a);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < P; ++p) r[p] = r[p] * inv_n - batch.targets[p];
  if (activations) *activations = std::move(act);
  return r;
}

std::vector<double> ReluStudentTeacher::batch_potential_hat(const Ensemble& ens, const Batch& batch) const {
  std::vector<double> act;
  const auto r = residuals(ens, batch, &act);
  const std::size_t n = ens.size();
  const std::size_t P = batch.size;
  std::vector<double> vhat(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < P; ++p) acc += std::max(0.0, act[i * P + p]) * r[p];
    vhat[i] = acc / static_cast<double>(P);
  }
  return vhat;
}

double ReluStudentTeacher::batch_loss(const Ensemble& ens, const Batch& batch) const {
  const auto r = residuals(ens, batch, nullptr);
  double acc = 0.0;
  for (double x : r) acc += x * x;
  return 0.5 * acc / static_cast<double>(batch.size);
}

void ReluStudentTeacher::evaluate(const Ensemble& ens, const Batch* batch, std::span<double> V,
                                  std::span<double> G) const {
  if (batch == nullptr) throw UnsupportedOperation("relu-student-teacher needs a minibatch");
  std::vector<double> act;
  const auto r = residuals(ens, *batch, &act);
  const std::size_t n = ens.size();
  const std::size_t P = batch->size;
  const std::size_t d = params_.input_dim;
  const std::size_t ps = d + 1;
  const double inv_p = 1.0 / static_cast<double>(P);
  for (std::size_t i = 0; i < n; ++i) {
    double vhat = 0.0;
    for (std::size_t p = 0; p < P; ++p) vhat += std::max(0.0, act[i * P + p]) * r[p];
    vhat *= inv_p;
    const double c = ens.amplitude(i);
    if (!V.empty()) {
      V[i] = c * vhat;
      require_finite(V[i], "batch potential", i);
    }
    if (!G.empty()) {
      auto gi = G.subspan(i * ps, ps);
      gi[0] = vhat;
      std::fill(gi.begin() + 1, gi.end(), 0.0);
      for (std::size_t p = 0; p < P; ++p) {
        if (act[i * P + p] <= 0.0) continue;
        const double s = c * r[p] * inv_p;
        const auto x = batch->input(p);
        for (std::size_t a = 0; a < d; ++a) gi[1 + a] += s * x[a];
      }
      for (double g : gi) require_finite(g, "batch gradient", i);
    }
  }
}

void ReluStudentTeacher::write_teacher_csv(std::ostream& out) const {
  const std::size_t d = params_.input_dim;
  out << "unit,amplitude";
  for (std::size_t a = 0; a < d; ++a) out << ",w_" << a;
  out << '\n';
  for (std::size_t j = 0; j < params_.teacher_units; ++j) {
    out << j << ',' << format_real(teacher_c_[j]);
    for (std::size_t a = 0; a < d; ++a) out << ',' << format_real(teacher_y_[j * d + a]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<PotentialModel> make_model(const ModelSpec& spec) {
  return std::visit(
      [](const auto& p) -> std::unique_ptr<PotentialModel> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, QuadraticWellParams>) return std::make_unique<QuadraticWell>(p);
        else if constexpr (std::is_same_v<P, DoubleWellParams>) return std::make_unique<DoubleWell>(p);
        else if constexpr (std::is_same_v<P, GaussianMixtureParams>) return std::make_unique<GaussianMixture>(p);
        else return std::make_unique<ReluStudentTeacher>(p);
      },
      spec);
}

double particle_potential(const PotentialModel& model, const Ensemble& ens, std::size_t i) {
  if (i >= ens.size()) throw std::out_of_range("particle_potential: index out of range");
  const ParamView pi = ens.view(i);
  double v = model.F(pi);
  if (model.is_interacting()) {
    double acc = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) acc += ens.weight(j) * model.K(pi, ens.view(j));
    v += acc / static_cast<double>(ens.size());
  }
  return v;
}

std::vector<double> particle_potentials(const PotentialModel& model, const Ensemble& ens,
                                        const Batch* batch) {
  std::vector<double> V(ens.size());
  model.evaluate(ens, batch, V, {});
  return V;
}

double exact_mixture_loss(const GaussianMixture& model, const Ensemble& ens) {
  const std::size_t n = ens.size();
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ParamView pi = ens.view(i);
    lin += ens.weight(i) * model.F(pi);
    quad += ens.weight(i) * ens.weight(i) * model.K(pi, pi);
    for (std::size_t j = i + 1; j < n; ++j) quad += 2.0 * ens.weight(i) * ens.weight(j) * model.K(pi, ens.view(j));
  }
  const double nn = static_cast<double>(n);
  return model.target_half_norm() + lin / nn + 0.5 * quad / (nn * nn);
}

}  // namespace bdflow
