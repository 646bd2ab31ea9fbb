// Command-line front end: run, certify, compare.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vslctl/vslctl.hpp"

namespace {

struct Source {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  bool strict = false;
  bool override_mode = false;
};

vslctl::RunConfig load(const Source& s) {
  vslctl::RunConfig c;
  if (!s.config_path.empty() && !s.preset.empty())
    throw vslctl::ConfigError("--config and --preset are mutually exclusive");
  if (!s.config_path.empty()) {
    std::ifstream in(s.config_path);
    if (!in) throw vslctl::ConfigError(fmt::format("cannot open {}", s.config_path));
    c = vslctl::parse_config(in);
  } else if (!s.preset.empty()) {
    c = vslctl::preset(s.preset);
  } else {
    throw vslctl::ConfigError("one of --config or --preset is required");
  }
  if (!s.out_dir.empty()) c.out_dir = s.out_dir;
  if (s.strict) c.mode = vslctl::CalibrationMode::strict;
  if (s.override_mode) c.mode = vslctl::CalibrationMode::override;
  return c;
}

void add_source(CLI::App* cmd, Source& s) {
  cmd->add_option("--config", s.config_path, "INI configuration file");
  cmd->add_option("--preset", s.preset, "built-in scenario")
      ->check(CLI::IsMember(vslctl::preset_names()));
  cmd->add_option("--out", s.out_dir, "output directory (overrides the config)");
  auto* strict = cmd->add_flag("--strict", s.strict, "reject gains failing any sufficient condition");
  auto* ovr = cmd->add_flag("--override", s.override_mode, "simulate uncertified gains anyway");
  strict->excludes(ovr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-speed-limit feedback for the LWR model"};
  app.require_subcommand(1);

  Source run_src, cert_src;
  auto* run_cmd = app.add_subcommand("run", "simulate the configured controllers and write traces");
  add_source(run_cmd, run_src);
  auto* cert_cmd = app.add_subcommand("certify", "evaluate the gain conditions without simulating");
  add_source(cert_cmd, cert_src);

  std::string dir_a, dir_b;
  auto* cmp_cmd = app.add_subcommand("compare", "difference between two trace directories");
  cmp_cmd->add_option("a", dir_a)->required()->check(CLI::ExistingDirectory);
  cmp_cmd->add_option("b", dir_b)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto outcome = vslctl::run(load(run_src));
      std::cout << outcome.report;
      return outcome.exit_code;
    }
    if (*cert_cmd) {
      std::cout << vslctl::certify(load(cert_src));
      return vslctl::kOk;
    }
    std::cout << vslctl::compare_dirs(dir_a, dir_b);
    return vslctl::kOk;
  } catch (const vslctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return vslctl::kConfigError;
  } catch (const vslctl::CertificationError& e) {
    std::cerr << "certification error: " << e.what() << '\n';
    return vslctl::kCertificationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vslctl::kInvariantViolation;
  }
}
