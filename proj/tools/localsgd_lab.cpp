#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "localsgd/acceptance.hpp"
#include "localsgd/commands.hpp"
#include "localsgd/config.hpp"
#include "localsgd/errors.hpp"
#include "localsgd/parallel.hpp"

namespace {

constexpr const char* kSeedEnv = "LOCALSGD_LAB_SEED";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw localsgd::InvalidParameter("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t parse_seed(std::string_view s, const char* where) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size())
    throw localsgd::InvalidParameter(std::string("bad seed in ") + where + ": '" + std::string(s) + "'");
  return v;
}

void print_list() {
  for (const auto& c : localsgd::command_registry()) {
    std::cout << "  " << c.name;
    for (std::size_t i = c.name.size(); i < 18; ++i) std::cout << ' ';
    std::cout << c.summary << " [";
    for (std::size_t i = 0; i < c.anchors.size(); ++i) std::cout << (i ? ", " : "") << c.anchors[i];
    std::cout << "]\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local SGD / FedAvg experiment runner"};
  app.footer(
      "usage: localsgd-lab <command> [key=value ...] [flags]\n"
      "       localsgd-lab list | help <command> | replay <dir>\n"
      "exit status: 0 success, 1 error, 2 a verdict failed");

  std::vector<std::string> args;
  std::string config_path, out_dir, profile, seed_text;
  unsigned workers = 0;
  bool paper_literal = false;
  app.add_option("args", args, "command followed by key=value overrides");
  app.add_option("--config", config_path, "experiment file (command, master_seed, output_dir, [params])");
  app.add_option("--seed", seed_text, std::string("master seed; falls back to the config, then $") + kSeedEnv);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads (default: available parallelism)");
  app.add_option("--profile", profile, "acceptance profile: quick | full");
  app.add_flag("--paper-literal", paper_literal, "add the as-printed oracle variants next to the corrected ones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? localsgd::kExitOk : localsgd::kExitError;
  }

  try {
    localsgd::set_default_workers(workers);

    if (!args.empty() && args[0] == "list") {
      print_list();
      return localsgd::kExitOk;
    }
    if (!args.empty() && args[0] == "help") {
      if (args.size() < 2) {
        std::cout << app.help() << "\ncommands:\n";
        print_list();
      } else {
        std::cout << localsgd::find_command(args[1]).help();
      }
      return localsgd::kExitOk;
    }
    if (!args.empty() && args[0] == "replay") {
      if (args.size() != 2) throw localsgd::InvalidParameter("replay takes one directory");
      const std::string into = out_dir.empty() ? args[1] + "/replay" : out_dir;
      const auto bad = localsgd::replay_manifest(args[1], into, {workers, paper_literal, &std::cout});
      if (bad.empty()) {
        std::cout << "PASS replay: every checksum in " << args[1] << "/manifest.txt reproduced\n";
        return localsgd::kExitOk;
      }
      std::cout << "FAIL replay: checksums differ for";
      for (const auto& f : bad) std::cout << " " << f;
      std::cout << "\n";
      return localsgd::kExitVerdictFailed;
    }

    localsgd::ExperimentSpec spec;
    std::optional<std::uint64_t> seed;
    std::size_t first_override = 0;
    if (!config_path.empty()) {
      const auto text = read_file(config_path);
      spec = localsgd::parse_spec(text);
      if (localsgd::parse_config(text).root.count("master_seed")) seed = spec.master_seed;
    }
    if (!args.empty() && args[0].find('=') == std::string::npos) {
      if (!spec.command.empty() && spec.command != args[0])
        throw localsgd::InvalidParameter("command '" + args[0] + "' conflicts with '" + spec.command +
                                         "' from the config");
      spec.command = args[0];
      first_override = 1;
    }
    if (spec.command.empty()) {
      std::cerr << "no command given\n\n" << app.help() << "\ncommands:\n";
      print_list();
      return localsgd::kExitError;
    }
    const auto& info = localsgd::find_command(spec.command);
    for (std::size_t i = first_override; i < args.size(); ++i) {
      auto [k, v] = localsgd::parse_override(info, args[i]);
      spec.params[k] = v;
    }
    if (!profile.empty()) {
      if (!info.param("profile")) throw localsgd::InvalidParameter("--profile applies to the acceptance command only");
      localsgd::parse_profile(profile);
      spec.params["profile"] = profile;
    }

    if (!seed_text.empty()) {
      seed = parse_seed(seed_text, "--seed");
    } else if (!seed) {
      if (const char* env = std::getenv(kSeedEnv)) seed = parse_seed(env, kSeedEnv);
    }
    spec.master_seed = seed.value_or(0);
    if (!out_dir.empty()) spec.output_dir = out_dir;

    const auto outcome = localsgd::run_experiment(spec, {workers, paper_literal, &std::cout});
    std::cout << "wrote " << outcome.files.size() << " files to " << spec.output_dir << "\n";
    return outcome.exit_code;
  } catch (const localsgd::OutOfRegime& e) {
    std::cerr << "error: violated hypothesis: " << e.hypothesis() << "\n";
    return localsgd::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return localsgd::kExitError;
  }
}
