#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "jsmoco/types.hpp"

namespace jsmoco {

/// One non-Cartesian k-space location in radians per pixel, |k| <= pi on the
/// nominal grid (rotations may push samples slightly outside).
struct KPoint {
  double kx = 0.0;
  double ky = 0.0;
};

using KCoords = std::vector<KPoint>;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

/// Per-shot rigid motion: in-plane rotation (radians) and translation
/// (pixels). Shot 0 is the gauge reference and is held at identity by the
/// sampler.
struct MotionParams {
  std::vector<double> rotations;
  std::vector<std::array<double, 2>> translations;

  int num_shots() const { return static_cast<int>(rotations.size()); }
  static MotionParams identity(int num_shots);
};

/// Cartesian phase-encode sampling pattern plus the shot partition of the
/// acquired lines. Lines are full rows of the k-space grid; `acquired_lines`
/// stores them in acquisition order and `shot_of_line` assigns each of them
/// to a shot. Sample ordering everywhere in the library is line-major in
/// acquisition order, columns left to right.
struct AcquisitionPlan {
  int height = 0;
  int width = 0;
  int num_shots = 0;
  std::vector<std::uint8_t> mask; // height*width, 0/1, row-major
  std::vector<int> acquired_lines;
  std::vector<int> shot_of_line;

  std::size_t num_samples() const { return acquired_lines.size() * static_cast<std::size_t>(width); }
  int num_lines() const { return static_cast<int>(acquired_lines.size()); }

  /// Nominal (motion-free) coordinates of every acquired sample, line-major.
  KCoords sample_coords() const;

  /// Contiguous (start, length) sample ranges belonging to each shot.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> shot_slices() const;

  void validate() const; // throws std::invalid_argument on broken invariants
};

enum class SampleScheme { equispaced, random_lines };
enum class ShotOrdering { sequential, interleaved };

/// Builds an undersampled Cartesian line plan: ceil(height/accel) lines, a
/// centred block of `acs_lines` fully kept, the rest spread deterministically
/// (equispaced) or drawn without replacement (random_lines), then split into
/// `num_shots` contiguous blocks (sequential) or round-robin (interleaved).
AcquisitionPlan make_plan(int height, int width, double accel, int acs_lines,
                          int num_shots, SampleScheme scheme, ShotOrdering ordering,
                          RngSeed seed);

/// Full k-space coordinates of an h-by-w grid, row-major:
/// kx = 2*pi*(col - w/2)/w, ky = 2*pi*(row - h/2)/h (integer centre indices).
KCoords cartesian_coords(int height, int width);

/// Rotates every coordinate by theta about the k-space origin.
KCoords rotate_coords(std::span<const KPoint> coords, double theta);

/// Linear phase factors exp(-j*(tx*kx + ty*ky)) implementing a translation by
/// (tx, ty) pixels.
std::vector<cplx> translation_phase(std::span<const KPoint> coords, double tx, double ty);

/// Flat row-major grid indices when every coordinate lies on the Cartesian
/// lattice of an h-by-w grid (within 1e-9 grid units); nullopt otherwise.
std::optional<std::vector<int>> cartesian_indices(std::span<const KPoint> coords,
                                                  int height, int width);

} // namespace jsmoco
