#include <cstdlib>
#include <cstring>
#include <iostream>

#include "localsgd/acceptance.hpp"

// Usage: acceptance [quick|full] [output_dir]
int main(int argc, char** argv) {
  localsgd::AcceptanceOptions opts;
  if (argc > 1) opts.profile = localsgd::parse_profile(argv[1]);
  const char* dir = argc > 2 ? argv[2] : "acceptance_out";
  if (const char* s = std::getenv("LOCALSGD_LAB_SEED")) opts.master_seed = std::strtoull(s, nullptr, 10);

  std::cout << "acceptance profile=" << localsgd::to_string(opts.profile) << " seed=" << opts.master_seed << "\n";
  const auto report = localsgd::acceptance_suite(opts, &std::cout);
  report.write(dir);

  int failed = 0;
  for (const auto& c : report.criteria) failed += !c.pass;
  std::cout << "\n" << report.verdict_text();
  std::cout << (report.criteria.size() - failed) << "/" << report.criteria.size() << " criteria pass; outputs in "
            << dir << "\n";
  return failed == 0 ? 0 : 1;
}
