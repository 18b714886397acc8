#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "jsmoco/sampler.hpp"
#include "jsmoco/sim.hpp"

namespace jsmoco {

// process exit codes shared by the CLI and the command functions
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitCheckFailed = 4;

/// Raised on schema violations; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  int height = 64;
  int width = 64;
  int num_coils = 4;
  int num_shots = 4;
  double accel = 2.0;
  int acs_lines = 8;
  std::string scheme = "equispaced";     // or "random-lines"
  std::string ordering = "sequential";   // or "interleaved"
  int csm_order = 3;
  double k_theta_deg = 2.0;
  double k_t_px = 2.0;
  double noise_sigma = 0.0;
  double phase_strength = 0.5;
  bool direct_dft = false;
  std::uint64_t seed = 0;
};

SimConfig parse_sim_config(const nlohmann::json &j);
nlohmann::json sim_config_json(const SimConfig &c);

struct ReconConfig {
  SamplerConfig sampler;
  std::string prior = "smoothness"; // smoothness | denoiser | external
  double prior_alpha = 0.05;
  double prior_rho = 0.1;
  std::string prior_command;        // external prior executable
};

ReconConfig parse_recon_config(const nlohmann::json &j);
nlohmann::json recon_config_json(const ReconConfig &c);

/// Reconstruction modes: joint samples all three blocks, fixed-csm freezes
/// the coefficients at the simulated truth, fixed-motion freezes the motion
/// at the simulated truth, zero-fill runs the non-iterative baseline.
enum class ReconMode { joint, fixed_csm, fixed_motion, zero_fill };
std::optional<ReconMode> parse_recon_mode(const std::string &name);
std::string recon_mode_name(ReconMode mode);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> trace_every;
  bool deterministic = false; // force single-threaded execution
};

/// Simulates a dataset into run_dir: x_true, csm_true, phi_true, m_true.csv,
/// plan, y and manifest.json. Refuses to overwrite an existing manifest
/// unless force is set.
int cmd_simulate(const std::filesystem::path &config_path,
                 const std::filesystem::path &run_dir, bool force);

/// Reconstructs a simulated run. Writes x_est_<mode> (all modes) and, for the
/// sampling modes, m_est_<mode>.csv, phi_est_<mode>, trace_<mode>.csv,
/// recon_manifest_<mode>.json and timing_<mode>.json.
int cmd_recon(const std::filesystem::path &run_dir,
              const std::filesystem::path &config_path, // empty = defaults
              const std::string &mode, bool force, const CliOverrides &overrides);

/// Scores every reconstructed mode in the run against the simulated truth:
/// metrics.csv plus centre-row/centre-column magnitude profiles.
int cmd_eval(const std::filesystem::path &run_dir);

/// Fast numerical health checks (transform round-trips, adjoint identities,
/// gradient probes) printing one line per check. perturb_adjoint injects a
/// deliberate adjoint scaling fault that the checks must catch.
int cmd_selftest(bool perturb_adjoint);

} // namespace jsmoco
