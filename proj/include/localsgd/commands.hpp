#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "localsgd/config.hpp"

namespace localsgd {

enum class ParamType { boolean, integer, real, text, int_list, real_list };
std::string_view to_string(ParamType t);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::real;
  ConfigValue default_value;
  std::string doc;
};

struct CommandInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> anchors;  ///< result labels the command exercises, e.g. "Fig. 1"
  std::vector<ParamSpec> params;

  const ParamSpec* param(std::string_view name) const;
  /// Usage text: summary, anchors, one line per parameter with its default.
  std::string help() const;
};

const std::vector<CommandInfo>& command_registry();
/// Throws InvalidParameter naming the known commands.
const CommandInfo& find_command(std::string_view name);

/// `command,anchors,summary`
std::string list_commands_text();

using ParamMap = std::map<std::string, ConfigValue>;

/// Checks names and types against the schema and fills defaults. Integers
/// are accepted for reals; lists are comma-separated strings. Throws
/// InvalidParameter on unknown keys or mismatched types.
ParamMap resolve_params(const CommandInfo& info, const ParamMap& given);

std::vector<std::int64_t> parse_int_list(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);

/// Parses a `key=value` override; the value is typed by the schema.
std::pair<std::string, ConfigValue> parse_override(const CommandInfo& info, std::string_view text);

struct RunContext {
  unsigned workers = 0;
  bool paper_literal = false;
  std::ostream* out = nullptr;  ///< verdicts and summaries
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdictFailed = 2;

struct RunOutcome {
  int exit_code = kExitOk;
  std::vector<std::string> files;  ///< written into spec.output_dir, manifest last
};

/// Validates, runs, and writes CSVs, spec.toml and manifest.txt into
/// spec.output_dir. Verdict failures give kExitVerdictFailed; errors throw.
RunOutcome run_experiment(const ExperimentSpec& spec, const RunContext& ctx);

/// Re-runs the spec.toml stored in `dir` into `into` and compares every
/// checksum against dir/manifest.txt. Returns the mismatched files.
std::vector<std::string> replay_manifest(const std::filesystem::path& dir, const std::filesystem::path& into,
                                         const RunContext& ctx);

}  // namespace localsgd
