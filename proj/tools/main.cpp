#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nscl/app.hpp"
#include "nscl/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Null-space projected Adam for continual learning"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Train over a task stream and write CSV artifacts");
  run->add_option("--config", config, "key=value config file")->required();
  run->add_option("--set", overrides, "Override one config key (key=value), repeatable");

  std::string suite;
  std::uint64_t seed = 1;
  auto* verify = app.add_subcommand("verify", "Run a property suite and report residuals");
  verify->add_option("suite", suite, "projector, covariance, lemma1, plasticity or sweep")
      ->required();
  verify->add_option("--seed", seed, "Seed for the suite's random inputs");

  std::string checkpoint;
  double a = 10.0;
  std::string out_dir;
  auto* spectra = app.add_subcommand("spectra", "Recompute bases from a covariance checkpoint");
  spectra->add_option("--checkpoint", checkpoint, "covariance.bin written by run")->required();
  spectra->add_option("--a", a, "Threshold multiplier (>= 1)");
  spectra->add_option("--out", out_dir, "Directory for spectra CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "error: kind=config message=" << e.what() << '\n';
    return 1;
  }

  if (*run) return nscl::run_command(config, overrides, std::cout, std::cerr);
  if (*verify) return nscl::verify_command(suite, seed, std::cout, std::cerr);
  std::optional<std::filesystem::path> out;
  if (!out_dir.empty()) out = out_dir;
  return nscl::spectra_command(checkpoint, a, out, std::cout, std::cerr);
}
