#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsmoco/csm.hpp"
#include "jsmoco/forward_model.hpp"
#include "jsmoco/geometry.hpp"
#include "jsmoco/priors.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco {

struct SamplerConfig {
  // reverse-diffusion schedule
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  int num_steps = 200;  // T
  int inner_loops = 3;  // N block sweeps per timestep; total updates T*N per block

  // step-size policies: lambda_x = eps_x*range^2*(sigma_t/sigma_min)^2,
  // lambda_m = eps_m*sigma_t/sigma_max, lambda_phi = eps_phi*sigma_t/sigma_max
  double eps_x = 2e-5;
  double dynamic_range = 1.0;
  double eps_m = 1e-4;
  double eps_phi = 1e-5;

  // likelihood weighting 1/(gamma_t^2 + sigma_noise^2) with gamma_t = sigma_t
  double sigma_noise = 0.0;

  // initialization scales for the motion and coefficient chains
  double sigma_m_init = 0.1;
  double sigma_phi_init = 0.01;

  int csm_order = 15;
  double phi_prior_std = 0.0; // >0 adds a Gaussian shrinkage score on phi

  RngSeed seed;
  bool gauge_fix = true;  // freeze shot 0, renormalize the CSM gauge each sweep
  int trace_every = 1;    // log every k-th inner update (first and last always kept)

  bool freeze_motion = false; // keep motion at its initial value (fixed-motion mode)
  bool freeze_csm = false;    // keep coefficients at their initial value (fixed-csm mode)
  std::optional<MotionParams> init_motion;
  std::optional<PolyCoeffs> init_csm;

  ForwardModelOptions model;
};

struct TraceRow {
  int step = 0;     // global update index
  int t = 0;        // timestep, counting down from num_steps-1
  int inner = 0;    // inner sweep index, 1-based
  double sigma = 0.0;
  double residual = 0.0; // ||y - A(x)||^2 before the sweep's x update
  std::vector<double> theta;
  std::vector<std::array<double, 2>> translation;
  double phi_norm = 0.0;
};

struct SamplerTrace {
  std::vector<TraceRow> rows;
  void to_csv(const std::filesystem::path &path) const;
};

struct SampleResult {
  ComplexGrid x;
  MotionParams motion;
  PolyCoeffs coeffs;
  SamplerTrace trace;
};

/// Raised when the data residual exceeds 1e6 times its initial value or goes
/// non-finite; carries the trace accumulated so far.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string &what, SamplerTrace trace_so_far)
      : std::runtime_error(what), trace(std::move(trace_so_far)) {}
  SamplerTrace trace;
};

/// One annealed Langevin update value + lambda*score + sqrt(2*lambda)*z with
/// z standard normal per real component (complex components get independent
/// re/im draws). lambda = 0 with inject_noise = false is the identity.
void langevin_step(std::span<double> value, std::span<const double> score,
                   double lambda, std::mt19937_64 &rng, bool inject_noise = true);
ComplexGrid langevin_step(const ComplexGrid &value, const ComplexGrid &score,
                          double lambda, std::mt19937_64 &rng, bool inject_noise = true);

/// Joint posterior sampling of (x, motion, coeffs) by Gibbs-interleaved
/// annealed Langevin updates inside a reverse variance-exploding diffusion:
/// for each timestep t from high to low noise, `inner_loops` sweeps update x
/// with prior + likelihood scores, then motion, then coefficients with
/// likelihood scores; the last inner iterate seeds the next timestep. Shot 0
/// stays at identity and the CSM scale/phase gauge is renormalized (with the
/// image counter-scaled) after every coefficient update.
SampleResult sample_joint(const Measurements &y, const AcquisitionPlan &plan,
                          const ScorePrior &prior, const SamplerConfig &config);

} // namespace jsmoco
