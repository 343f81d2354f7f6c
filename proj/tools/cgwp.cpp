#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cgwp/errors.hpp"
#include "cgwp/scenario.hpp"

namespace {

int report(const cgwp::RunStatus& status) {
  if (status.ok()) return 0;
  std::cerr << status.line() << std::endl;
  return status.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained coupled Gaussian wave packet propagation"};
  app.require_subcommand(1);

  std::string config, out = "out", input, window = "hann";
  std::uint64_t seed = 0;
  bool seed_given = false, serial = false;
  std::size_t padding = 8;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "scenario INI file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; }, "seed for randomized initial states");
    sub->add_flag("--serial", serial, "run sub-propagations one after another");
  };
  auto* prop = app.add_subcommand("propagate", "GWP propagation");
  add_common(prop);
  auto* ref = app.add_subcommand("reference", "split-operator grid propagation");
  add_common(ref);
  auto* cmp = app.add_subcommand("compare", "constrained and frozen GWP runs against the grid reference");
  add_common(cmp);
  auto* spec = app.add_subcommand("spectrum", "windowed DFT of a timeseries.csv");
  spec->add_option("--input", input, "timeseries.csv")->required()->check(CLI::ExistingFile);
  spec->add_option("--out", out, "output directory");
  spec->add_option("--window", window, "none or hann")->check(CLI::IsMember({"none", "hann"}));
  spec->add_option("--padding", padding, "zero-padding factor")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=UsageError exit=2 message=\"" << e.what() << "\"" << std::endl;
    return 2;
  }

  try {
    const cgwp::RunOptions opts{out, serial};
    if (spec->parsed()) {
      cgwp::SpectrumOptions so;
      so.window = window == "none" ? cgwp::Window::None : cgwp::Window::Hann;
      so.padding = padding;
      return report(cgwp::run_spectrum(input, so, out));
    }
    cgwp::ScenarioConfig cfg = cgwp::load_scenario(config);
    if (seed_given) cfg.seed = seed;
    if (prop->parsed()) return report(cgwp::run_propagate(cfg, opts));
    if (ref->parsed()) return report(cgwp::run_reference(cfg, opts));
    return report(cgwp::run_compare(cfg, opts));
  } catch (const cgwp::Error& e) {
    return report({e.kind() == std::string("ConfigError") ? 2 : 3, e.kind(), e.what()});
  } catch (const std::exception& e) {
    return report({4, "InternalError", e.what()});
  }
}
