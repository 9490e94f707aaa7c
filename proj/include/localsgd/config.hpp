#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>

namespace localsgd {

/// Scalar value of the key-value config format.
using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;

std::string_view type_name(const ConfigValue& v);

/// Parsed config text: top-level keys plus one level of [tables].
struct ConfigDocument {
  std::map<std::string, ConfigValue> root;
  std::map<std::string, std::map<std::string, ConfigValue>> tables;
};

/// TOML subset: comments, bare keys, basic strings with \" \\ \n \t \r
/// escapes, integers, floats (including inf and nan), booleans, and
/// [table] headers one level deep. Throws InvalidParameter with the line
/// number on anything else.
ConfigDocument parse_config(std::string_view text);

/// Value text in the same subset. Floats always carry a '.' or exponent so
/// they parse back as floats, with 17 significant digits.
std::string format_config_value(const ConfigValue& v);
std::string serialize_config(const ConfigDocument& doc);

struct ExperimentSpec {
  std::string command;
  std::map<std::string, ConfigValue> params;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";

  bool operator==(const ExperimentSpec&) const = default;
};

/// Layout:
///   command = "..."
///   master_seed = N
///   output_dir = "..."
///   [params]
///   key = value
std::string serialize_spec(const ExperimentSpec& spec);
ExperimentSpec parse_spec(std::string_view text);

}  // namespace localsgd
