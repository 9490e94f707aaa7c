#include "localsgd/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "localsgd/csv.hpp"
#include "localsgd/errors.hpp"

namespace localsgd {

std::string_view type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "bool";
    case 1: return "integer";
    case 2: return "float";
    default: return "string";
  }
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw InvalidParameter("config line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

// Parses a basic string starting at s[0] == '"'; returns the value and sets
// `rest` to the text after the closing quote.
std::string parse_string(std::string_view s, std::size_t line, std::string_view& rest) {
  std::string out;
  std::size_t i = 1;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"') {
      rest = s.substr(i + 1);
      return out;
    }
    if (c == '\\') {
      if (++i >= s.size()) break;
      switch (s[i]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(line, std::string("unsupported escape \\") + s[i]);
      }
    } else {
      out += c;
    }
  }
  fail(line, "unterminated string");
}

ConfigValue parse_scalar(std::string_view s, std::size_t line) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan" || s == "+nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  std::string t;
  for (char c : s)
    if (c != '_') t += c;
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  const bool floaty = t.find_first_of(".eE") != std::string::npos;
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (!floaty) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec == std::errc() && p == e) return v;
    fail(line, "bad value '" + std::string(s) + "'");
  }
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec == std::errc() && p == e) return v;
  fail(line, "bad value '" + std::string(s) + "'");
}

std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_str && s[i] == '\\') {
      ++i;
    } else if (s[i] == '"') {
      in_str = !in_str;
    } else if (!in_str && s[i] == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

std::string escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

}  // namespace

ConfigDocument parse_config(std::string_view text) {
  ConfigDocument doc;
  std::map<std::string, ConfigValue>* target = &doc.root;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed table header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!bare_key(name)) fail(line_no, "table names must be bare keys");
      if (doc.tables.count(std::string(name))) fail(line_no, "duplicate table [" + std::string(name) + "]");
      target = &doc.tables[std::string(name)];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (!bare_key(key)) fail(line_no, "bad key '" + std::string(key) + "'");
    if (target->count(std::string(key))) fail(line_no, "duplicate key '" + std::string(key) + "'");
    if (val.empty()) fail(line_no, "missing value");
    ConfigValue v;
    if (val.front() == '"') {
      std::string_view rest;
      v = parse_string(val, line_no, rest);
      if (!trim(rest).empty()) fail(line_no, "trailing text after string");
    } else {
      v = parse_scalar(val, line_no);
    }
    target->emplace(std::string(key), std::move(v));
  }
  return doc;
}

std::string format_config_value(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return std::get<bool>(v) ? "true" : "false";
    case 1: return std::to_string(std::get<std::int64_t>(v));
    case 2: {
      const double d = std::get<double>(v);
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      std::string s = format_double(d);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    default: return escape(std::get<std::string>(v));
  }
}

std::string serialize_config(const ConfigDocument& doc) {
  std::ostringstream os;
  for (const auto& [k, v] : doc.root) os << k << " = " << format_config_value(v) << "\n";
  for (const auto& [name, table] : doc.tables) {
    os << "\n[" << name << "]\n";
    for (const auto& [k, v] : table) os << k << " = " << format_config_value(v) << "\n";
  }
  return os.str();
}

std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "command = " << format_config_value(spec.command) << "\n";
  if (spec.master_seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    os << "master_seed = \"" << spec.master_seed << "\"\n";
  else
    os << "master_seed = " << spec.master_seed << "\n";
  os << "output_dir = " << format_config_value(spec.output_dir) << "\n";
  os << "\n[params]\n";
  for (const auto& [k, v] : spec.params) os << k << " = " << format_config_value(v) << "\n";
  return os.str();
}

ExperimentSpec parse_spec(std::string_view text) {
  const ConfigDocument doc = parse_config(text);
  ExperimentSpec spec;
  for (const auto& [k, v] : doc.root) {
    if (k == "command") {
      if (v.index() != 3) throw InvalidParameter("config: command must be a string");
      spec.command = std::get<std::string>(v);
    } else if (k == "master_seed") {
      // Seeds above 2^63 are written as strings.
      if (v.index() == 1 && std::get<std::int64_t>(v) >= 0) {
        spec.master_seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v));
      } else if (v.index() == 3) {
        const auto& s = std::get<std::string>(v);
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), spec.master_seed);
        if (ec != std::errc() || p != s.data() + s.size()) throw InvalidParameter("config: bad master_seed");
      } else {
        throw InvalidParameter("config: master_seed must be a non-negative integer");
      }
    } else if (k == "output_dir") {
      if (v.index() != 3) throw InvalidParameter("config: output_dir must be a string");
      spec.output_dir = std::get<std::string>(v);
    } else {
      throw InvalidParameter("config: unknown top-level key '" + k + "' (parameters go under [params])");
    }
  }
  for (const auto& [name, table] : doc.tables) {
    if (name != "params") throw InvalidParameter("config: unknown table [" + name + "]");
    spec.params = table;
  }
  return spec;
}

}  // namespace localsgd
