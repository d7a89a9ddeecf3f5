#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "beatsync/experiments.hpp"

namespace {

const std::vector<std::string> kExperiments = {
    "spectrum-legacy", "spectrum-fast",  "low-snr",          "track",
    "snr-sweep-counts", "snr-sweep-K",   "psd-variance",     "resolution-sweep",
    "bench"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beatsync: gated-mode clock-beat simulation and frequency recovery"};
  app.require_subcommand(1);

  beatsync::ExperimentSpec spec;
  std::string config_path;

  for (const auto& name : kExperiments) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "config file (key = value sections)");
    sub->add_option("--seed", spec.seed, "base RNG seed")->capture_default_str();
    sub->add_option("--out", spec.out_dir, "output directory")->required();
    sub->add_option("--set", spec.overrides, "override, e.g. detector.dark_prob=1e-5");
    sub->callback([&spec, name] { spec.name = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    spec.config = config_path.empty() ? beatsync::default_config()
                                      : beatsync::load_config_file(config_path);
    for (const auto& o : spec.overrides) beatsync::apply_override(spec.config, o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }

  try {
    return static_cast<int>(beatsync::run_experiment(spec));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
