// bflux: run, validate or calibrate an experiment described by an INI file.

#include <bflux/harness.hpp>

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 1;

void print_checks(const bflux::RunManifest& m) {
  for (const auto& c : m.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << c.value
              << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
}

int run(const std::string& path, const std::vector<std::string>& sets, bool calibrate) {
  bflux::pt::ptree tree;
  std::vector<std::string> all = sets;
  if (calibrate) all.push_back("experiment.preset=calibrate");
  const bflux::ExperimentConfig cfg = bflux::load_config(path, all, &tree);
  const auto violations = bflux::validate(cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "invalid config: " << v << '\n';
    return kExitConfig;
  }
  const bflux::RunManifest m = bflux::run_preset(cfg, tree);
  print_checks(m);
  std::cout << "manifest: " << (bflux::output_root(cfg) / "manifest.json").string() << '\n';
  return m.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bflux: reaction-diffusion experiments with nonlinear boundary flux"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "run the configured preset");
  run_cmd->add_option("config", config, "INI configuration file")->required();
  run_cmd->add_option("--set", sets, "override a key: section.key=value")->allow_extra_args(false);

  auto* validate_cmd = app.add_subcommand("validate", "check a configuration without running it");
  validate_cmd->add_option("config", config, "INI configuration file")->required();
  validate_cmd->add_option("--set", sets, "override a key: section.key=value")->allow_extra_args(false);

  auto* calibrate_cmd = app.add_subcommand("calibrate", "calibrate constants on the calibration suite");
  calibrate_cmd->add_option("config", config, "INI configuration file")->required();
  calibrate_cmd->add_option("--set", sets, "override a key: section.key=value")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*validate_cmd) {
      const auto violations = bflux::validate(bflux::load_config(config, sets));
      for (const auto& v : violations) std::cout << v << '\n';
      if (violations.empty()) std::cout << "ok\n";
      return violations.empty() ? 0 : kExitConfig;
    }
    return run(config, sets, static_cast<bool>(*calibrate_cmd));
  } catch (const bflux::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
