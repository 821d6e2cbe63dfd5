// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: acceptance_suite [--level fast|full] [--jobs N] [--report PATH] [ids...]

#include <cstdlib>
#include <iostream>
#include <string>

#include "bdflow/acceptance.hpp"
#include "bdflow/io.hpp"

int main(int argc, char** argv) {
  bdflow::AcceptanceOptions opt;
  std::string report;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--level" && i + 1 < argc) {
      opt.level = std::string(argv[++i]) == "fast" ? bdflow::VerifyLevel::Fast : bdflow::VerifyLevel::Full;
    } else if (a == "--jobs" && i + 1 < argc) {
      opt.jobs = std::stoul(argv[++i]);
    } else if (a == "--report" && i + 1 < argc) {
      report = argv[++i];
    } else {
      opt.only.push_back(std::stoi(a));
    }
  }
  const auto rep = bdflow::run_acceptance(opt, &std::cout);
  std::size_t passed = 0;
  for (const auto& r : rep.results) passed += r.passed;
  std::cout << passed << "/" << rep.results.size() << " criteria passed\n";
  if (!report.empty()) bdflow::write_file_atomic(report, rep.to_json().dump(2) + "\n");
  return rep.all_passed() ? EXIT_SUCCESS : EXIT_FAILURE;
}
