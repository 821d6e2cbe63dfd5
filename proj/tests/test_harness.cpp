#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdflow/acceptance.hpp"
#include "bdflow/config.hpp"
#include "bdflow/experiment.hpp"
#include "bdflow/io.hpp"

using namespace bdflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("bdflow_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig geometric_config() {
  ExperimentConfig c;
  c.model = QuadraticWellParams{{0.0}, {1.0}};
  c.init = SamplerSpec::point_mass(1.0);
  c.dynamics.variant = Variant::GdOnly;
  c.dynamics.dt = 0.1;
  c.n = 1;
  c.steps = 10;
  return c;
}

ExperimentConfig small_bd_config() {
  ExperimentConfig c;
  GaussianMixtureParams p;
  p.components = {{1.0, {-1.0}, 0.5}, {1.0, {1.0}, 0.5}};
  p.bandwidth = 0.3;
  c.model = p;
  c.init = SamplerSpec::uniform(-2.0, 2.0);
  c.amplitude_init = SamplerSpec::gaussian(0.5, 0.2);
  c.dynamics.variant = Variant::GdBd;
  c.dynamics.dt = 0.05;
  c.dynamics.alpha = 2.0;
  c.n = 40;
  c.steps = 30;
  c.seed = 11;
  c.record_every = 5;
  c.snapshot_times = {0.0, 0.5};
  return c;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(BDFLOW_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, RoundTripThroughNormalizedJson) {
  for (const auto& c : {geometric_config(), small_bd_config()}) {
    const json j = config_to_json(c);
    EXPECT_EQ(j.at("schema_version"), kSchemaVersion);
    EXPECT_EQ(config_to_json(config_from_json(j)), j);
  }
  for (const auto& [name, c] : reference_configs()) {
    const json j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(json::parse(j.dump()))), j) << name;
  }
}

TEST(Config, StrictParsing) {
  json j = config_to_json(geometric_config());
  j["stpes"] = 3;
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = config_to_json(geometric_config());
  j["dynamics"]["alpah"] = 1.0;
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = config_to_json(geometric_config());
  j["n"] = "many";
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = config_to_json(geometric_config());
  j["schema_version"] = kSchemaVersion + 1;
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = config_to_json(geometric_config());
  j["dynamics"]["variant"] = "gd-sometimes";
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  auto c = geometric_config();
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = geometric_config();
  c.record_every = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = geometric_config();
  c.n = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = geometric_config();
  c.init = SamplerSpec::point_mass(std::vector<double>{1.0, 2.0});
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(run_experiment([] {
                 auto b = geometric_config();
                 b.steps = 0;
                 return b;
               }(),
                              {.write_files = false}),
               ConfigError);
}

TEST(Config, PathsResolveToPointers) {
  EXPECT_EQ(config_path("dynamics.alpha").to_string(), "/dynamics/alpha");
  EXPECT_EQ(config_path("/n").to_string(), "/n");
}

TEST(Config, CommittedFilesMatchReferenceConfigs) {
  const fs::path dir = BDFLOW_CONFIG_DIR;
  const auto refs = reference_configs();
  ASSERT_FALSE(refs.empty());
  for (const auto& [name, c] : refs) {
    const fs::path file = dir / (name + ".json");
    ASSERT_TRUE(fs::exists(file)) << file;
    EXPECT_EQ(config_to_json(load_config(file)), config_to_json(c)) << name;
  }
}

// ---------------------------------------------------------------------------
// Runs

TEST(Run, GeometricDecayOfSingleParticle) {
  const auto r = run_experiment(geometric_config(), {.write_files = false});
  ASSERT_EQ(r.status, RunStatus::Ok);
  ASSERT_TRUE(r.final_ensemble.has_value());
  EXPECT_NEAR(r.final_ensemble->position(0)[0], std::pow(0.9, 10), 1e-15);
  ASSERT_EQ(r.records.size(), 11u);
  EXPECT_NEAR(r.records.back().time, 1.0, 1e-15);
  EXPECT_NEAR(r.records.back().energy, 0.5 * std::pow(0.9, 20), 1e-15);
}

TEST(Run, WritesTrajectorySummaryAndSnapshots) {
  TempDir tmp;
  auto c = small_bd_config();
  c.output_dir = tmp.path().string();
  const auto r = run_experiment(c);
  ASSERT_EQ(r.status, RunStatus::Ok);

  std::istringstream csv(slurp(tmp.path() / "trajectory.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "step,time,energy,mean_V,var_V,grad_norm_sq,births,deaths,n");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 7u);  // steps 0, 5, ..., 30

  const json s = json::parse(slurp(tmp.path() / "summary.json"));
  EXPECT_EQ(s.at("status"), "ok");
  EXPECT_EQ(s.at("seed"), 11);
  EXPECT_EQ(s.at("steps_completed"), 30);
  EXPECT_EQ(s.at("schema_version"), kSchemaVersion);
  EXPECT_EQ(s.at("snapshots").size(), 2u);
  for (const auto& snap : s.at("snapshots")) EXPECT_TRUE(fs::exists(tmp.path() / snap.at("file").get<std::string>()));

  // The echoed config reruns the experiment exactly.
  auto again = config_from_json(s.at("config"));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Run, IdenticalSeedsGiveIdenticalBytes) {
  TempDir a, b;
  auto c = small_bd_config();
  c.output_dir = a.path().string();
  run_experiment(c);
  c.output_dir = b.path().string();
  run_experiment(c);
  EXPECT_EQ(slurp(a.path() / "trajectory.csv"), slurp(b.path() / "trajectory.csv"));
  EXPECT_EQ(slurp(a.path() / "snapshot_1.csv"), slurp(b.path() / "snapshot_1.csv"));
  c.seed = 12;
  const auto other = run_experiment(c, {.write_files = false});
  const auto first = run_experiment(small_bd_config(), {.write_files = false});
  EXPECT_NE(other.records.back().energy, first.records.back().energy);
}

TEST(Run, NumericFailureKeepsRecords) {
  auto c = geometric_config();
  c.dynamics.dt = 3.0;  // |1 - dt| > 1: the iterate doubles every step
  c.steps = 3000;
  c.record_every = 100;
  const auto r = run_experiment(c, {.write_files = false});
  EXPECT_EQ(r.status, RunStatus::NumericFailure);
  EXPECT_FALSE(r.error.empty());
  EXPECT_FALSE(r.records.empty());
  EXPECT_EQ(r.summary.at("status"), "failed");
  for (const auto& rec : r.records) EXPECT_TRUE(std::isfinite(rec.energy));
}

TEST(Run, RateFitIsReported) {
  auto c = geometric_config();
  c.steps = 50;
  c.fit = FitRequest{FitForm::Exponential, 1.0, 5.0};
  const auto r = run_experiment(c, {.write_files = false});
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_NEAR(r.fit->exponent, 20.0 * std::log(0.9), 1e-9);  // energy shrinks by 0.81 per 0.1
  EXPECT_EQ(r.summary.at("fit").at("form"), "exponential");
}

// ---------------------------------------------------------------------------
// Sweeps

TEST(Sweep, SingleCellMatchesRun) {
  TempDir tmp;
  auto c = small_bd_config();
  c.output_dir = tmp.path().string();
  const auto rep = run_sweep(c, "dynamics.alpha", {json(2.0)}, 1, 1);
  ASSERT_EQ(rep.cells.size(), 1u);
  const auto direct = run_experiment(c, {.write_files = false});
  EXPECT_EQ(rep.cells[0].final_energies.at(0), direct.records.back().energy);
  EXPECT_TRUE(fs::exists(tmp.path() / "sweep.json"));
  EXPECT_TRUE(fs::exists(tmp.path() / "cell_0" / "seed_0" / "trajectory.csv"));
}

TEST(Sweep, SeedsAndCellsLayout) {
  TempDir tmp;
  auto c = small_bd_config();
  c.output_dir = tmp.path().string();
  c.snapshot_times.clear();
  c.dynamics.reinjection_prior = SamplerSpec::gaussian(0.0, 2.0);
  c.dynamics.alpha_prime = 1.0;
  const std::vector<json> variants{"gd-only", "gd-bd", "gd-bd-reinjection"};
  const auto rep = run_sweep(c, "dynamics.variant", variants, 2, 0);
  ASSERT_EQ(rep.cells.size(), 3u);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(rep.cells[v].value, variants[v]);
    EXPECT_EQ(rep.cells[v].failures, 0u);
    ASSERT_EQ(rep.cells[v].final_energies.size(), 2u);
    for (std::size_t s = 0; s < 2; ++s) {
      const json sum = json::parse(slurp(tmp.path() / ("cell_" + std::to_string(v)) /
                                         ("seed_" + std::to_string(s)) / "summary.json"));
      EXPECT_EQ(sum.at("seed"), c.seed + s);
      EXPECT_EQ(sum.at("config").at("dynamics").at("variant"), variants[v]);
    }
  }
  const json sweep = json::parse(slurp(tmp.path() / "sweep.json"));
  EXPECT_EQ(sweep.at("axis"), "dynamics.variant");
  EXPECT_EQ(sweep.at("cells").size(), 3u);
  const auto& e = rep.cells[1].final_energies;
  EXPECT_NEAR(rep.cells[1].mean, 0.5 * (e[0] + e[1]), 1e-15);
}

TEST(Sweep, FailingCellDoesNotStopTheSweep) {
  auto c = geometric_config();
  c.steps = 3000;
  const auto rep = run_sweep(c, "dynamics.dt", {json(0.1), json(3.0)}, 2, 1, {.write_files = false});
  EXPECT_EQ(rep.cells[0].failures, 0u);
  EXPECT_EQ(rep.cells[1].failures, 2u);
  EXPECT_TRUE(rep.to_json().at("cells").at(1).at("failed").get<bool>());
}

TEST(Sweep, PopulationAxis) {
  auto c = small_bd_config();
  c.snapshot_times.clear();
  c.steps = 2;
  const auto rep = run_sweep(c, "n", {json(25), json(50), json(100)}, 1, 1, {.write_files = false});
  ASSERT_EQ(rep.cells.size(), 3u);
  EXPECT_EQ(rep.to_json().at("cells").size(), 3u);
}

TEST(Sweep, Errors) {
  auto c = small_bd_config();
  EXPECT_THROW(run_sweep(c, "dynamics.nope", {json(1)}, 1, 1, {.write_files = false}), ConfigError);
  EXPECT_THROW(run_sweep(c, "init", {json(1)}, 1, 1, {.write_files = false}), ConfigError);
  EXPECT_THROW(run_sweep(c, "n", {}, 1, 1, {.write_files = false}), ConfigError);
  EXPECT_THROW(run_sweep(c, "n", {json(10)}, 0, 1, {.write_files = false}), ConfigError);
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, ExitCodes) {
  TempDir tmp;
  auto c = geometric_config();
  c.output_dir = (tmp.path() / "out").string();
  const fs::path good = tmp.path() / "good.json";
  write_file_atomic(good, config_to_json(c).dump(2));
  EXPECT_EQ(run_cli("run --quiet --config " + good.string()), 0);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "summary.json"));

  json bad = config_to_json(c);
  bad["unknown"] = 1;
  const fs::path badf = tmp.path() / "bad.json";
  write_file_atomic(badf, bad.dump());
  EXPECT_EQ(run_cli("run --quiet --config " + badf.string()), 2);

  auto div = c;
  div.dynamics.dt = 3.0;
  div.steps = 3000;
  const fs::path divf = tmp.path() / "div.json";
  write_file_atomic(divf, config_to_json(div).dump());
  EXPECT_EQ(run_cli("run --quiet --config " + divf.string()), 3);

  EXPECT_EQ(run_cli("verify --quiet --level fast --only 7,11"), 0);
}

TEST(Cli, SeedOverrideAndTeacherDump) {
  TempDir tmp;
  auto c = small_bd_config();
  c.output_dir = (tmp.path() / "out").string();
  const fs::path cfg = tmp.path() / "c.json";
  write_file_atomic(cfg, config_to_json(c).dump());
  ASSERT_EQ(run_cli("run --quiet --seed 77 --config " + cfg.string()), 0);
  EXPECT_EQ(json::parse(slurp(tmp.path() / "out" / "summary.json")).at("seed"), 77);

  const fs::path teacher = tmp.path() / "teacher.csv";
  ASSERT_EQ(run_cli("teacher-dump --quiet --out " + teacher.string()), 0);
  std::istringstream in(slurp(teacher));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.substr(0, 20), "unit,amplitude,w_0,w");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, ReluTeacherParams{}.teacher_units);
}
