#pragma once

#include <array>
#include <span>
#include <utility>

#include "jsmoco/geometry.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco {

/// Peak signal-to-noise ratio in dB between magnitude images, peak taken from
/// the reference magnitude. Identical inputs are capped at 200 dB.
double psnr(const ComplexGrid &reference, const ComplexGrid &test);

struct SsimOptions {
  int window = 11;
  double window_std = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// 0 derives the dynamic range from the reference peak; a positive value
  /// fixes it externally, which makes ssim symmetric in its arguments.
  double dynamic_range = 0.0;
};

/// Mean structural similarity between magnitude images: Gaussian-weighted
/// local statistics, valid-region convolution (no padding), dynamic range
/// L = max reference magnitude unless fixed in the options.
double ssim(const ComplexGrid &reference, const ComplexGrid &test,
            const SsimOptions &options = {});

/// ||test - reference||_2 / ||reference||_2 over complex values.
double nrmse(const ComplexGrid &reference, const ComplexGrid &test);
double nrmse(std::span<const cplx> reference, std::span<const cplx> test);

/// Right-composes every shot with the inverse of shot 0, removing the global
/// rigid gauge.
MotionParams align_motion_gauge(const MotionParams &motion);

struct MotionError {
  double rmse_theta_deg = 0.0;
  double rmse_translation_px = 0.0;
};

/// RMSE over shots between gauge-aligned motion sets: wrapped angle
/// difference in degrees, Euclidean translation difference in pixels.
/// Invariant to composing either input with a single global rigid transform.
MotionError motion_error(const MotionParams &estimate, const MotionParams &truth);

} // namespace jsmoco
