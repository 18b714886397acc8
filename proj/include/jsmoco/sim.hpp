#pragma once

#include <utility>
#include <vector>

#include "jsmoco/csm.hpp"
#include "jsmoco/forward_model.hpp"
#include "jsmoco/geometry.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco {

/// Shepp-Logan head phantom (modified low-contrast intensities, magnitude in
/// [0, 1]) with a smooth synthetic phase map whose peak magnitude equals
/// phase_strength radians. phase_strength = 0 gives an exactly real image.
ComplexGrid shepp_logan(int height, int width, double phase_strength);

struct SynthCsm {
  std::vector<ComplexGrid> maps;
  PolyCoeffs coeffs;
};

/// Smooth synthetic coil sensitivities expressed exactly in the polynomial
/// basis: one squared-linear lobe per coil steered around the field of view
/// plus a small random higher-order perturbation, gauge-normalized (unit mean
/// sum-of-squares, canonical phase). Redraws until each coil's magnitude
/// peaks at a distinct pixel. Requires 2 <= order <= 6.
SynthCsm synth_csm(int num_coils, int height, int width, int order, RngSeed seed);

/// Per-shot rigid motion with theta ~ U(-k_theta, k_theta) degrees (stored in
/// radians) and each translation component ~ U(-k_t, k_t) pixels; shot 0 is
/// forced to identity.
MotionParams draw_motion(int num_shots, double k_theta_deg, double k_t_px, RngSeed seed);

struct MotionPreset {
  double k_theta_deg;
  double k_t_px;
};

/// The severity grid used by the evaluation harness: translations of 3 and 4
/// pixels crossed with rotations of 2 and 3 degrees.
std::vector<MotionPreset> motion_presets();

struct SimulateOptions {
  double noise_sigma = 0.0;       // complex Gaussian, per real component
  bool direct_dft = false;        // brute-force DFT instead of the gridded path
  ForwardModelOptions model;
};

/// Motion-corrupted multi-coil measurements of (x, coeffs, motion) under the
/// acquisition plan. The direct_dft option simulates through dft_direct so
/// reconstruction and simulation need not share the gridded transform.
Measurements simulate_acquisition(const ComplexGrid &x, const PolyCoeffs &coeffs,
                                  const MotionParams &motion, const AcquisitionPlan &plan,
                                  RngSeed seed, const SimulateOptions &options = {});

/// Root-sum-of-squares zero-filled reconstruction ignoring motion: samples
/// are placed at their nominal Cartesian positions, each coil is inverse
/// transformed, and coil images are combined as sqrt(sum_i |img_i|^2).
ComplexGrid zero_fill_recon(const Measurements &y, const AcquisitionPlan &plan);

} // namespace jsmoco
