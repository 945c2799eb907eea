// `lab` — experiment driver for the drift-field laboratory.
//
// Subcommands map onto the experiment kinds; every flag overrides one key of
// the materialized config, so a run is fully described by the config file it
// leaves behind.  Exit codes: 0 ok, 2 config error, 3 criterion failure.

#include <CLI11.hpp>

#include <iostream>

#include "driftlab/errors.hpp"
#include "driftlab/harness.hpp"

using driftlab::ExperimentConfig;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;  // key=value overrides
  std::string out;
};

void add_common(CLI::App* app, CommonArgs& args) {
  app->add_option("--config", args.config_path, "config file (key = value)");
  app->add_option("--set", args.sets, "extra overrides key=value")
      ->type_size(1)
      ->allow_extra_args(false);
  app->add_option("--out", args.out, "output directory");
}

ExperimentConfig build_config(const std::string& kind, const CommonArgs& args,
                              const std::vector<std::pair<std::string, std::string>>& flags) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? ExperimentConfig::make(kind)
                             : ExperimentConfig::from_file(args.config_path);
  if (cfg.kind() != kind)
    throw driftlab::ConfigInvalid("config kind '" + cfg.kind() +
                                  "' does not match subcommand '" + kind + "'");
  for (const auto& [k, v] : flags) cfg.set(k, v);
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw driftlab::ConfigInvalid("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!args.out.empty()) cfg.set("out", args.out);
  return cfg;
}

int finish(const driftlab::RunManifest& man) {
  for (const auto& [name, path] : man.outputs)
    std::cout << name << ": " << path << "\n";
  for (const auto& c : man.criteria)
    if (!c.pass) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drift-field laboratory"};
  app.require_subcommand(1);

  CommonArgs fb_args, mo_args, so_args, si_args, ve_args;

  auto* fb = app.add_subcommand("formbound", "Rayleigh form-bound estimate");
  std::string fb_field = "hardy";
  double fb_delta = 0.04;
  int fb_budget = 32;
  fb->add_option("--field", fb_field, "catalog field id");
  fb->add_option("--delta", fb_delta, "certificate delta parameter");
  fb->add_option("--budget", fb_budget, "test-function budget");
  add_common(fb, fb_args);

  auto* mo = app.add_subcommand("mollify", "build one approximation level");
  std::string mo_field = "hardy";
  int mo_m = 16;
  mo->add_option("--field", mo_field, "catalog field id");
  mo->add_option("--m", mo_m, "cutoff level m");
  add_common(mo, mo_args);

  auto* so = app.add_subcommand("solve", "forward Cauchy solve");
  add_common(so, so_args);

  auto* si = app.add_subcommand("simulate", "Euler-Maruyama ensemble");
  add_common(si, si_args);

  auto* ve = app.add_subcommand("verify", "acceptance criteria");
  std::string ve_level = "quick";
  ve->add_option("--level", ve_level, "quick|full");
  add_common(ve, ve_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fb->parsed()) {
      auto cfg = build_config("formbound", fb_args,
                              {{"field", fb_field},
                               {"delta", std::to_string(fb_delta)},
                               {"budget", std::to_string(fb_budget)}});
      return finish(driftlab::run_experiment(cfg));
    }
    if (mo->parsed()) {
      auto cfg = build_config(
          "mollify", mo_args,
          {{"field", mo_field}, {"m", std::to_string(mo_m)}});
      return finish(driftlab::run_experiment(cfg));
    }
    if (so->parsed()) {
      auto cfg = build_config("solve", so_args, {});
      return finish(driftlab::run_experiment(cfg));
    }
    if (si->parsed()) {
      auto cfg = build_config("simulate", si_args, {});
      return finish(driftlab::run_experiment(cfg));
    }
    if (ve->parsed()) {
      auto cfg = build_config("verify", ve_args, {{"level", ve_level}});
      return finish(driftlab::run_experiment(cfg));
    }
  } catch (const driftlab::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const driftlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
