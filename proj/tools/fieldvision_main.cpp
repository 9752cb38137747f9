#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fieldvision/harness.hpp"

namespace {

fv::RunConfig load_or_default(const std::string& config_path, bool has_seed, uint64_t seed) {
  fv::RunConfig cfg =
      config_path.empty() ? fv::default_config() : fv::load_config(config_path);
  if (has_seed) cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldvision: synthetic soccer-field perception pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", dataset, classifier, scenario;
  uint64_t seed = 0;
  bool has_seed = false;
  int count = -1;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    has_seed = true;
  });
  app.add_option("--out", out_dir, "output directory");

  auto* render = app.add_subcommand("render", "render a scenario to a dataset directory");
  render->add_option("--scenario", scenario, "scenario name (default: first in config)");
  render->add_option("--count", count, "override the scenario frame count");

  auto* train = app.add_subcommand("train-ball", "train the ball classifier from a dataset");
  train->add_option("--dataset", dataset, "rendered dataset directory")->required();

  auto* detect = app.add_subcommand("detect", "run the detector over a dataset");
  detect->add_option("--dataset", dataset, "rendered dataset directory")->required();
  detect->add_option("--classifier", classifier, "ball classifier file (omit: no ball stage)");

  auto* localize = app.add_subcommand("localize", "run detector + localizer over a dataset");
  localize->add_option("--dataset", dataset, "rendered dataset directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "estimate the extrinsic correction");
  calibrate->add_option("--dataset", dataset, "calibration dataset directory")->required();

  app.add_subcommand("evaluate", "render and score every scenario in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    const fv::RunConfig cfg = load_or_default(config_path, has_seed, seed);
    if (render->parsed()) {
      fv::cmd_render(cfg, scenario, count, out_dir);
    } else if (train->parsed()) {
      fv::cmd_train_ball(cfg, dataset, out_dir);
    } else if (detect->parsed()) {
      fv::cmd_detect(cfg, dataset, classifier, out_dir);
    } else if (localize->parsed()) {
      fv::cmd_localize(cfg, dataset, out_dir);
    } else if (calibrate->parsed()) {
      fv::cmd_calibrate(cfg, dataset, out_dir);
    } else {
      fv::cmd_evaluate(cfg, out_dir);
    }
  } catch (const fv::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const fv::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
