#include "bdflow/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "bdflow/errors.hpp"

namespace bdflow {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

std::string join(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

double get_real(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(where, key) + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(join(where, key) + ": must be finite");
  return x;
}

std::optional<double> get_optional_real(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_real(j, key, 0.0, where);
}

std::uint64_t get_count(const json& j, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(join(where, key) + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(join(where, key) + ": expected a string");
  return j.at(key).get<std::string>();
}

std::vector<double> get_reals(const json& j, const char* key, std::vector<double> fallback,
                              const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(join(where, key) + ": expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(join(where, key) + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string require_kind(const json& j, const std::string& where) {
  require_object(j, where);
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(where + ": missing string 'kind'");
  return j.at("kind").get<std::string>();
}

}  // namespace

json sampler_to_json(const SamplerSpec& s) {
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianSampler>) {
          return {{"kind", "gaussian"}, {"mean", k.mean}, {"std", k.std}};
        } else if constexpr (std::is_same_v<T, UniformBoxSampler>) {
          return {{"kind", "uniform"}, {"lo", k.lo}, {"hi", k.hi}};
        } else if constexpr (std::is_same_v<T, PointMassSampler>) {
          return {{"kind", "point-mass"}, {"at", k.at}};
        } else {
          json coords = json::array();
          for (const auto& c : k.coordinates) coords.push_back(sampler_to_json(c));
          return {{"kind", "product"}, {"coordinates", coords}};
        }
      },
      s.kind);
}

SamplerSpec sampler_from_json(const json& j, const std::string& where) {
  const std::string kind = require_kind(j, where);
  if (kind == "gaussian") {
    check_keys(j, {"kind", "mean", "std"}, where);
    return SamplerSpec::gaussian(get_reals(j, "mean", {0.0}, where), get_reals(j, "std", {1.0}, where));
  }
  if (kind == "uniform") {
    check_keys(j, {"kind", "lo", "hi"}, where);
    return SamplerSpec::uniform(get_reals(j, "lo", {0.0}, where), get_reals(j, "hi", {1.0}, where));
  }
  if (kind == "point-mass") {
    check_keys(j, {"kind", "at"}, where);
    return SamplerSpec::point_mass(get_reals(j, "at", {0.0}, where));
  }
  if (kind == "product") {
    check_keys(j, {"kind", "coordinates"}, where);
    if (!j.contains("coordinates") || !j.at("coordinates").is_array())
      throw ConfigError(where + ".coordinates: expected an array");
    std::vector<SamplerSpec> coords;
    std::size_t i = 0;
    for (const auto& c : j.at("coordinates"))
      coords.push_back(sampler_from_json(c, where + ".coordinates[" + std::to_string(i++) + "]"));
    return SamplerSpec::product(std::move(coords));
  }
  throw ConfigError(where + ": unknown sampler kind '" + kind + "'");
}

json model_to_json(const ModelSpec& m) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, QuadraticWellParams>) {
          return {{"kind", "quadratic-well"}, {"minimizer", p.minimizer}, {"hessian", p.hessian}};
        } else if constexpr (std::is_same_v<T, DoubleWellParams>) {
          return {{"kind", "double-well"}, {"dimension", p.dimension}, {"height", p.height}, {"tilt", p.tilt}};
        } else if constexpr (std::is_same_v<T, GaussianMixtureParams>) {
          json comps = json::array();
          for (const auto& c : p.components)
            comps.push_back({{"amplitude", c.amplitude}, {"center", c.center}, {"std", c.std}});
          json out = {{"kind", "gaussian-mixture-rbf"}, {"components", comps}, {"bandwidth", p.bandwidth}};
          out["fixed_amplitude"] = p.fixed_amplitude ? json(*p.fixed_amplitude) : json(nullptr);
          return out;
        } else {
          return {{"kind", "relu-student-teacher"},
                  {"input_dim", p.input_dim},
                  {"teacher_units", p.teacher_units},
                  {"batch_size", p.batch_size},
                  {"teacher_seed", p.teacher_seed}};
        }
      },
      m);
}

ModelSpec model_from_json(const json& j, const std::string& where) {
  const std::string kind = require_kind(j, where);
  if (kind == "quadratic-well") {
    check_keys(j, {"kind", "minimizer", "hessian"}, where);
    QuadraticWellParams p;
    p.minimizer = get_reals(j, "minimizer", p.minimizer, where);
    p.hessian = get_reals(j, "hessian", p.hessian, where);
    return p;
  }
  if (kind == "double-well") {
    check_keys(j, {"kind", "dimension", "height", "tilt"}, where);
    DoubleWellParams p;
    p.dimension = get_count(j, "dimension", p.dimension, where);
    p.height = get_real(j, "height", p.height, where);
    p.tilt = get_real(j, "tilt", p.tilt, where);
    return p;
  }
  if (kind == "gaussian-mixture-rbf") {
    check_keys(j, {"kind", "components", "bandwidth", "fixed_amplitude"}, where);
    GaussianMixtureParams p;
    if (j.contains("components")) {
      if (!j.at("components").is_array()) throw ConfigError(where + ".components: expected an array");
      p.components.clear();
      std::size_t i = 0;
      for (const auto& c : j.at("components")) {
        const std::string cw = where + ".components[" + std::to_string(i++) + "]";
        check_keys(c, {"amplitude", "center", "std"}, cw);
        MixtureComponent mc;
        mc.amplitude = get_real(c, "amplitude", mc.amplitude, cw);
        mc.center = get_reals(c, "center", mc.center, cw);
        mc.std = get_real(c, "std", mc.std, cw);
        p.components.push_back(std::move(mc));
      }
    }
    p.bandwidth = get_real(j, "bandwidth", p.bandwidth, where);
    p.fixed_amplitude = get_optional_real(j, "fixed_amplitude", where);
    return p;
  }
  if (kind == "relu-student-teacher") {
    check_keys(j, {"kind", "input_dim", "teacher_units", "batch_size", "teacher_seed"}, where);
    ReluTeacherParams p;
    p.input_dim = get_count(j, "input_dim", p.input_dim, where);
    p.teacher_units = get_count(j, "teacher_units", p.teacher_units, where);
    p.batch_size = get_count(j, "batch_size", p.batch_size, where);
    p.teacher_seed = get_count(j, "teacher_seed", p.teacher_seed, where);
    return p;
  }
  throw ConfigError(where + ": unknown model kind '" + kind + "'");
}

std::size_t model_dimension(const ModelSpec& m) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, QuadraticWellParams>) return p.minimizer.size();
        else if constexpr (std::is_same_v<T, DoubleWellParams>) return p.dimension;
        else if constexpr (std::is_same_v<T, GaussianMixtureParams>)
          return p.components.empty() ? 0 : p.components.front().center.size();
        else return p.input_dim;
      },
      m);
}

json dynamics_to_json(const DynamicsConfig& d) {
  if (d.f.kind == RateTransform::Kind::Custom) throw ConfigError("custom rate transforms cannot be serialized");
  json f = {{"kind", d.f.name()}};
  if (d.f.kind == RateTransform::Kind::Tanh) f["beta"] = d.f.beta;
  return {{"variant", to_string(d.variant)},
          {"dt", d.dt},
          {"alpha", d.alpha},
          {"alpha_prime", d.alpha_prime},
          {"f", f},
          {"tau", d.tau ? json(*d.tau) : json(nullptr)},
          {"proximal_gd_steps", d.proximal_gd_steps},
          {"proximal_inner_iters", d.proximal_inner_iters},
          {"reinjection_prior", d.reinjection_prior ? sampler_to_json(*d.reinjection_prior) : json(nullptr)},
          {"clone_jitter", d.clone_jitter}};
}

DynamicsConfig dynamics_from_json(const json& j, const std::string& where) {
  check_keys(j,
             {"variant", "dt", "alpha", "alpha_prime", "f", "tau", "proximal_gd_steps", "proximal_inner_iters",
              "reinjection_prior", "clone_jitter"},
             where);
  DynamicsConfig d;
  d.variant = variant_from_string(get_string(j, "variant", to_string(d.variant), where));
  d.dt = get_real(j, "dt", d.dt, where);
  d.alpha = get_real(j, "alpha", d.alpha, where);
  d.alpha_prime = get_real(j, "alpha_prime", d.alpha_prime, where);
  if (j.contains("f")) {
    const std::string fw = where + ".f";
    const std::string kind = require_kind(j.at("f"), fw);
    if (kind == "identity") {
      check_keys(j.at("f"), {"kind"}, fw);
      d.f = RateTransform::identity();
    } else if (kind == "tanh") {
      check_keys(j.at("f"), {"kind", "beta"}, fw);
      d.f = RateTransform::saturated(get_real(j.at("f"), "beta", 1.0, fw));
    } else {
      throw ConfigError(fw + ": unknown rate transform '" + kind + "'");
    }
  }
  d.tau = get_optional_real(j, "tau", where);
  d.proximal_gd_steps = get_count(j, "proximal_gd_steps", d.proximal_gd_steps, where);
  d.proximal_inner_iters = get_count(j, "proximal_inner_iters", d.proximal_inner_iters, where);
  if (j.contains("reinjection_prior") && !j.at("reinjection_prior").is_null())
    d.reinjection_prior = sampler_from_json(j.at("reinjection_prior"), where + ".reinjection_prior");
  d.clone_jitter = get_real(j, "clone_jitter", d.clone_jitter, where);
  return d;
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"schema_version", "model", "init", "amplitude_init", "dynamics", "n", "steps", "seed", "record_every",
              "snapshot_times", "output_dir", "fit", "eval_batch_size"},
             "config");
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw ConfigError("config.schema_version: unsupported version " + j.at("schema_version").dump());
  ExperimentConfig c;
  if (j.contains("model")) c.model = model_from_json(j.at("model"), "model");
  if (j.contains("init")) c.init = sampler_from_json(j.at("init"), "init");
  if (j.contains("amplitude_init") && !j.at("amplitude_init").is_null())
    c.amplitude_init = sampler_from_json(j.at("amplitude_init"), "amplitude_init");
  if (j.contains("dynamics")) c.dynamics = dynamics_from_json(j.at("dynamics"), "dynamics");
  c.n = get_count(j, "n", c.n, "");
  c.steps = get_count(j, "steps", c.steps, "");
  c.seed = get_count(j, "seed", c.seed, "");
  c.record_every = get_count(j, "record_every", c.record_every, "");
  c.snapshot_times = get_reals(j, "snapshot_times", {}, "");
  c.output_dir = get_string(j, "output_dir", c.output_dir, "");
  c.eval_batch_size = get_count(j, "eval_batch_size", c.eval_batch_size, "");
  if (j.contains("fit") && !j.at("fit").is_null()) {
    const auto& f = j.at("fit");
    check_keys(f, {"form", "window"}, "fit");
    FitRequest r;
    r.form = fit_form_from_string(get_string(f, "form", "power-law", "fit"));
    const auto w = get_reals(f, "window", {}, "fit");
    if (w.size() != 2) throw ConfigError("fit.window: expected [t0, t1]");
    r.t0 = w[0];
    r.t1 = w[1];
    c.fit = r;
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = model_to_json(c.model);
  j["init"] = sampler_to_json(c.init);
  j["amplitude_init"] = c.amplitude_init ? sampler_to_json(*c.amplitude_init) : json(nullptr);
  j["dynamics"] = dynamics_to_json(c.dynamics);
  j["n"] = c.n;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["record_every"] = c.record_every;
  j["snapshot_times"] = c.snapshot_times;
  j["output_dir"] = c.output_dir;
  j["fit"] = c.fit ? json{{"form", to_string(c.fit->form)}, {"window", {c.fit->t0, c.fit->t1}}} : json(nullptr);
  j["eval_batch_size"] = c.eval_batch_size;
  return j;
}

void ExperimentConfig::validate() const {
  if (n == 0) throw ConfigError("n must be at least 1");
  if (steps == 0) throw ConfigError("steps must be at least 1");
  if (record_every == 0) throw ConfigError("record_every must be at least 1");
  for (double t : snapshot_times)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("snapshot_times must be finite and nonnegative");
  const auto model_ptr = make_model(model);
  init.validate(model_ptr->dimension());
  if (amplitude_init) {
    if (!model_ptr->has_amplitude()) throw ConfigError("amplitude_init given for a model without amplitudes");
    amplitude_init->validate(1);
  }
  dynamics.validate(*model_ptr);
  if (!model_ptr->is_exact() && eval_batch_size == 0) throw ConfigError("eval_batch_size must be positive");
  if (fit && !(fit->t1 > fit->t0)) throw ConfigError("fit.window must satisfy t0 < t1");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

json::json_pointer config_path(const std::string& path) {
  if (path.empty()) throw ConfigError("empty sweep axis");
  if (path.front() == '/') return json::json_pointer(path);
  std::string ptr;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) ptr += "/" + part;
  return json::json_pointer(ptr);
}

}  // namespace bdflow
