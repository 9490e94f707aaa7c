#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace localsgd {

enum class Profile { quick, full };
std::string_view to_string(Profile p);
Profile parse_profile(std::string_view name);

struct AcceptanceOptions {
  Profile profile = Profile::full;
  std::uint64_t master_seed = 1;
  unsigned workers = 0;
  /// Criterion 12 reruns everything at a second worker count.
  bool check_determinism = true;
};

struct NamedCsv {
  std::string file;
  std::string content;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  ///< 0 when the criterion has no runtime limit
  std::vector<NamedCsv> csvs;

  /// `PASS [3] exponent_fits: detail`, no timing.
  std::string verdict_line() const;
};

struct AcceptanceReport {
  Profile profile = Profile::full;
  std::vector<CriterionResult> criteria;

  bool all_pass() const;
  /// One verdict line per criterion; independent of timing and worker count.
  std::string verdict_text() const;
  /// Writes every CSV plus verdicts.txt into dir and returns the file names.
  std::vector<std::string> write(const std::filesystem::path& dir) const;
};

/// Runs criteria 1-12. The quick profile divides sample sizes by 10 and
/// widens statistical tolerances by 1.5. Progress lines go to `progress`
/// when given.
AcceptanceReport acceptance_suite(const AcceptanceOptions& opts, std::ostream* progress = nullptr);

}  // namespace localsgd
