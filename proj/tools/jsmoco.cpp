#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jsmoco/commands.hpp"
#include "jsmoco/version.hpp"

int main(int argc, char **argv) {
  CLI::App app{"joint image, motion and coil-sensitivity estimation from "
               "undersampled multi-coil k-space"};
  app.set_version_flag("--version", std::string(jsmoco::kVersion));
  app.require_subcommand(1);

  std::string sim_config;
  std::string sim_out;
  bool sim_force = false;
  auto *sim = app.add_subcommand("simulate", "generate a synthetic acquisition run");
  sim->add_option("--config", sim_config, "simulation config JSON")->required();
  sim->add_option("--out", sim_out, "run directory to create")->required();
  sim->add_flag("--force", sim_force, "overwrite an existing run");

  std::string rec_run;
  std::string rec_config;
  std::string rec_mode = "joint";
  bool rec_force = false;
  bool rec_deterministic = false;
  std::uint64_t rec_seed = 0;
  int rec_trace_every = 0;
  auto *rec = app.add_subcommand("recon", "reconstruct a simulated run");
  rec->add_option("--run", rec_run, "run directory from simulate")->required();
  rec->add_option("--config", rec_config, "sampler config JSON (defaults when omitted)");
  rec->add_option("--mode", rec_mode,
                  "joint | fixed-csm | fixed-motion | zero-fill (default joint)");
  rec->add_flag("--force", rec_force, "overwrite existing outputs for this mode");
  rec->add_flag("--deterministic", rec_deterministic,
                "single-threaded bit-reproducible execution");
  auto *seed_opt = rec->add_option("--seed", rec_seed, "override the sampler seed");
  auto *trace_opt =
      rec->add_option("--trace-every", rec_trace_every, "sweep stride for trace rows");

  std::string eval_run;
  auto *eval = app.add_subcommand("eval", "score reconstructions against the ground truth");
  eval->add_option("--run", eval_run, "run directory with recon outputs")->required();

  bool perturb = false;
  auto *self = app.add_subcommand("selftest", "run built-in consistency checks");
  self->add_flag("--perturb-adjoint", perturb,
                 "inject a deliberate adjoint fault (checks must then fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? jsmoco::kExitOk : jsmoco::kExitConfig;
  }

  try {
    if (sim->parsed()) return jsmoco::cmd_simulate(sim_config, sim_out, sim_force);
    if (rec->parsed()) {
      jsmoco::CliOverrides overrides;
      if (seed_opt->count() > 0) overrides.seed = rec_seed;
      if (trace_opt->count() > 0) overrides.trace_every = rec_trace_every;
      overrides.deterministic = rec_deterministic;
      return jsmoco::cmd_recon(rec_run, rec_config, rec_mode, rec_force, overrides);
    }
    if (eval->parsed()) return jsmoco::cmd_eval(eval_run);
    if (self->parsed()) return jsmoco::cmd_selftest(perturb);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return jsmoco::kExitError;
  }
  return jsmoco::kExitConfig;
}
