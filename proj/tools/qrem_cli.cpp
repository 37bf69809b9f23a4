// qrem: run QREM experiments described by JSON configuration files.
//
// Exit status: 0 when every computation converged, 1 when some did not,
// 2 for an invalid configuration or command line, 3 for a computation error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qrem/experiment.hpp"

namespace {

struct CommandFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int execute(const std::string& command, const CommandFlags& flags) {
  qrem::ConfigOverrides overrides;
  overrides.command = command;
  if (!flags.out.empty()) overrides.out = flags.out;
  overrides.seed = flags.seed;
  overrides.threads = flags.threads;

  qrem::ExperimentConfig cfg;
  try {
    cfg = flags.config.empty() ? qrem::parse_config("", "<defaults>", overrides)
                               : qrem::load_config(flags.config, overrides);
  } catch (const qrem::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  }

  try {
    const qrem::RunReport report = qrem::run(cfg);
    for (const auto& path : report.files) std::cout << "wrote " << path.string() << "\n";
    for (const std::string& p : report.problems) std::cerr << "warning: " << p << "\n";
    return report.ok ? 0 : 1;
  } catch (const qrem::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum random energy model experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qrem::kToolVersion));

  const std::vector<std::pair<std::string, std::string>> commands{
      {"spectrum", "lowest levels on a transverse-field grid"},
      {"gap", "minimal gap of individual instances"},
      {"scaling", "minimal-gap ensemble over system sizes with a log-linear fit"},
      {"anneal", "annealing fidelity against total time"},
      {"phase-diagram", "glass/paramagnet boundary Gamma_c(T)"},
      {"instanton", "instanton action and interface cost tables"},
  };

  CommandFlags flags;
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return execute(chosen, flags);
}
