// bdflow command-line front end: run, sweep, verify, teacher-dump.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bdflow/acceptance.hpp"
#include "bdflow/config.hpp"
#include "bdflow/errors.hpp"
#include "bdflow/experiment.hpp"
#include "bdflow/io.hpp"
#include "bdflow/potentials.hpp"

namespace {

enum Exit { kOk = 0, kAcceptanceFailure = 1, kConfigError = 2, kNumericError = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  std::size_t jobs = 0;
};

bdflow::ExperimentConfig load(const Common& c) {
  auto cfg = bdflow::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  const auto r = bdflow::run_experiment(cfg);
  if (!c.quiet) {
    std::cout << "status " << (r.status == bdflow::RunStatus::Ok ? "ok" : "failed") << ", "
              << r.records.size() << " records, final energy "
              << (r.records.empty() ? std::string("n/a") : bdflow::format_real(r.records.back().energy)) << ", "
              << r.wall_seconds << " s -> " << cfg.output_dir << "\n";
    if (!r.error.empty()) std::cerr << "error: " << r.error << "\n";
  }
  return r.status == bdflow::RunStatus::Ok ? kOk : kNumericError;
}

std::vector<nlohmann::json> parse_values(const std::string& text) {
  // A JSON array, or a comma-separated list of numbers/names.
  try {
    auto j = nlohmann::json::parse(text);
    if (j.is_array()) return {j.begin(), j.end()};
    return {j};
  } catch (const nlohmann::json::parse_error&) {
  }
  std::vector<nlohmann::json> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(nlohmann::json::parse(item));
    } catch (const nlohmann::json::parse_error&) {
      out.emplace_back(item);
    }
  }
  return out;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::string& values, std::size_t seeds) {
  const auto cfg = load(c);
  const auto rep = bdflow::run_sweep(cfg, axis, parse_values(values), seeds, c.jobs);
  std::size_t failed = 0;
  for (const auto& cell : rep.cells) {
    if (!c.quiet)
      std::cout << axis << " = " << cell.value.dump() << ": mean final energy "
                << bdflow::format_real(cell.mean) << " (std " << bdflow::format_real(cell.stddev) << ", "
                << cell.failures << " failed)\n";
    failed += cell.failures;
  }
  if (!c.quiet) std::cout << "report: " << (std::filesystem::path(cfg.output_dir) / "sweep.json").string() << "\n";
  return failed ? kNumericError : kOk;
}

int cmd_verify(const Common& c, const std::string& level, const std::vector<int>& only, const std::string& report,
               bool invert_sign, const std::string& export_dir) {
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
    for (const auto& [name, cfg] : bdflow::reference_configs())
      bdflow::write_file_atomic(std::filesystem::path(export_dir) / (name + ".json"),
                                bdflow::config_to_json(cfg).dump(2) + "\n");
    return kOk;
  }
  bdflow::AcceptanceOptions opt;
  opt.level = level == "fast" ? bdflow::VerifyLevel::Fast : bdflow::VerifyLevel::Full;
  opt.jobs = c.jobs;
  opt.only = only;
  opt.invert_rate_sign = invert_sign;
  const auto rep = bdflow::run_acceptance(opt, c.quiet ? nullptr : &std::cout);
  const std::string json = rep.to_json().dump(2) + "\n";
  if (!report.empty()) bdflow::write_file_atomic(report, json);
  if (!c.quiet) {
    std::size_t passed = 0;
    for (const auto& r : rep.results) passed += r.passed;
    std::cout << passed << "/" << rep.results.size() << " criteria passed\n";
  }
  return rep.all_passed() ? kOk : kAcceptanceFailure;
}

int cmd_teacher_dump(const Common& c) {
  bdflow::ReluTeacherParams params;
  if (!c.config.empty()) {
    const auto cfg = bdflow::load_config(c.config);
    const auto* p = std::get_if<bdflow::ReluTeacherParams>(&cfg.model);
    if (!p) throw bdflow::ConfigError("teacher-dump needs a relu-student-teacher model");
    params = *p;
  }
  const bdflow::ReluStudentTeacher model(params);
  std::ostringstream os;
  model.write_teacher_csv(os);
  if (c.out.empty()) {
    std::cout << os.str();
  } else {
    bdflow::write_file_atomic(c.out, os.str());
    if (!c.quiet) std::cout << "teacher written to " << c.out << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle optimization with gradient transport and birth-death dynamics"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", common.config, "experiment config (JSON)");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--out", common.out, "output directory (file for teacher-dump)");
    sub->add_flag("--quiet", common.quiet, "suppress progress output");
    sub->add_option("--jobs", common.jobs, "worker threads (0 = all cores)");
  };

  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep over values and seeds");
  add_common(sweep, true);
  std::string axis, values;
  std::size_t seeds = 1;
  sweep->add_option("--axis", axis, "config field, e.g. dynamics.variant or n")->required();
  sweep->add_option("--values", values, "JSON array or comma-separated list")->required();
  sweep->add_option("--seeds", seeds, "seeds per value")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  add_common(verify, false);
  std::string level = "full", report, export_dir;
  std::vector<int> only;
  bool invert_sign = false;
  verify->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--only", only, "criterion ids to run")->delimiter(',');
  verify->add_option("--report", report, "write the JSON verdict here");
  verify->add_flag("--invert-rate-sign", invert_sign, "mutation check: flip every birth-death rate");
  verify->add_option("--export-configs", export_dir, "write the reference experiment configs and exit");

  auto* teacher = app.add_subcommand("teacher-dump", "write the teacher network as CSV");
  add_common(teacher, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, axis, values, seeds);
    if (*verify) return cmd_verify(common, level, only, report, invert_sign, export_dir);
    if (*teacher) return cmd_teacher_dump(common);
  } catch (const bdflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericError;
  }
  return kOk;
}
