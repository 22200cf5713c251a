// Command-line front end; links only the C API.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "epwa.h"

namespace {

int report(epwa_status status) {
  if (status != EPWA_OK) std::fprintf(stderr, "error: %s\n", epwa_last_error());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPWA modeling and downscaling pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = 0;
  app.add_option("--config", config_path, "Run configuration file (JSON)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--seed", seed, "Seed (overrides config)");
  app.add_option("--threads", threads, "Worker thread cap (overrides config)");

  auto* features = app.add_subcommand("features", "Build unit features from rasters");
  auto* fit = app.add_subcommand("fit", "Fit the model and write the artifact");
  auto* validate = app.add_subcommand("validate", "Run the validation strategies");
  auto* deploy = app.add_subcommand("deploy", "Predict grids and bias-correct");
  auto* config = app.add_subcommand("config", "Configuration helpers");
  bool print_defaults = false;
  config->add_flag("--print-defaults", print_defaults, "Print the full default config");

  CLI11_PARSE(app, argc, argv);

  const char* out = out_dir.empty() ? nullptr : out_dir.c_str();

  if (config->parsed()) {
    if (!print_defaults) {
      std::fprintf(stderr, "error: nothing to do (try --print-defaults)\n");
      return 2;
    }
    char* text = nullptr;
    const epwa_status s = epwa_config_defaults(&text);
    if (s != EPWA_OK) return report(s);
    std::printf("%s\n", text);
    epwa_string_free(text);
    return 0;
  }

  if (config_path.empty()) {
    std::fprintf(stderr, "error: --config is required\n");
    return 2;
  }
  if (features->parsed())
    return report(epwa_run_features(config_path.c_str(), out, seed, threads));
  if (fit->parsed()) return report(epwa_run_fit(config_path.c_str(), out, seed, threads));
  if (validate->parsed())
    return report(epwa_run_validate(config_path.c_str(), out, seed, threads));
  if (deploy->parsed())
    return report(epwa_run_deploy(config_path.c_str(), out, seed, threads));
  return 2;
}
