#include "jsmoco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace jsmoco {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace

double wrap_angle(double radians) {
  double r = std::fmod(radians, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r -= kTwoPi;
  return r;
}

MotionParams MotionParams::identity(int num_shots) {
  MotionParams m;
  m.rotations.assign(num_shots, 0.0);
  m.translations.assign(num_shots, {0.0, 0.0});
  return m;
}

KCoords AcquisitionPlan::sample_coords() const {
  KCoords coords;
  coords.reserve(num_samples());
  const int cx = width / 2;
  const int cy = height / 2;
  for (int line : acquired_lines) {
    const double ky = kTwoPi * (line - cy) / height;
    for (int col = 0; col < width; ++col)
      coords.push_back({kTwoPi * (col - cx) / width, ky});
  }
  return coords;
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> AcquisitionPlan::shot_slices() const {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> slices(num_shots);
  for (std::size_t a = 0; a < acquired_lines.size(); ++a) {
    auto &ranges = slices[shot_of_line[a]];
    const std::size_t start = a * static_cast<std::size_t>(width);
    if (!ranges.empty() && ranges.back().first + ranges.back().second == start)
      ranges.back().second += width; // merge adjacent lines of the same shot
    else
      ranges.emplace_back(start, width);
  }
  return slices;
}

void AcquisitionPlan::validate() const {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("plan: dimensions must be positive");
  if (num_shots <= 0) throw std::invalid_argument("plan: need at least one shot");
  if (acquired_lines.empty()) throw std::invalid_argument("plan: no acquired lines");
  if (shot_of_line.size() != acquired_lines.size())
    throw std::invalid_argument("plan: shot assignment length mismatch");
  if (mask.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("plan: mask size mismatch");

  std::vector<std::uint8_t> seen(height, 0);
  std::vector<std::uint8_t> shot_used(num_shots, 0);
  for (std::size_t a = 0; a < acquired_lines.size(); ++a) {
    const int line = acquired_lines[a];
    if (line < 0 || line >= height) throw std::invalid_argument("plan: line out of range");
    if (seen[line]) throw std::invalid_argument("plan: duplicate acquired line");
    seen[line] = 1;
    const int shot = shot_of_line[a];
    if (shot < 0 || shot >= num_shots)
      throw std::invalid_argument("plan: shot index out of range");
    shot_used[shot] = 1;
  }
  for (int j = 0; j < num_shots; ++j)
    if (!shot_used[j]) throw std::invalid_argument("plan: empty shot " + std::to_string(j));

  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if ((mask[static_cast<std::size_t>(r) * width + c] != 0) != (seen[r] != 0))
        throw std::invalid_argument("plan: mask inconsistent with acquired lines");
}

AcquisitionPlan make_plan(int height, int width, double accel, int acs_lines,
                          int num_shots, SampleScheme scheme, ShotOrdering ordering,
                          RngSeed seed) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("make_plan: dimensions must be positive");
  if (accel < 1.0) throw std::invalid_argument("make_plan: acceleration must be >= 1");
  if (acs_lines < 0 || acs_lines > height)
    throw std::invalid_argument("make_plan: acs_lines out of range");

  const int target = static_cast<int>(std::ceil(height / accel - 1e-9));
  if (target < acs_lines)
    throw std::invalid_argument("make_plan: acceleration leaves fewer lines than the ACS block");
  if (num_shots <= 0 || num_shots > target)
    throw std::invalid_argument("make_plan: shot count exceeds acquired lines");

  const int acs_start = height / 2 - acs_lines / 2;
  std::vector<std::uint8_t> keep(height, 0);
  for (int l = acs_start; l < acs_start + acs_lines; ++l) keep[l] = 1;

  std::vector<int> candidates;
  for (int l = 0; l < height; ++l)
    if (!keep[l]) candidates.push_back(l);

  const int extra = target - acs_lines;
  if (scheme == SampleScheme::equispaced) {
    const std::size_t m = candidates.size();
    for (int k = 0; k < extra; ++k) {
      // evenly spaced positions within the non-ACS candidates, midpoint offset
      const std::size_t idx = (2 * static_cast<std::size_t>(k) * m + m) / (2 * static_cast<std::size_t>(extra));
      keep[candidates[std::min(idx, m - 1)]] = 1;
    }
  } else {
    std::mt19937_64 rng = make_rng(seed, 11);
    std::vector<int> pool = candidates;
    for (int k = 0; k < extra; ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::size_t idx = pick(rng);
      keep[pool[idx]] = 1;
      pool.erase(pool.begin() + idx);
    }
  }

  AcquisitionPlan plan;
  plan.height = height;
  plan.width = width;
  plan.num_shots = num_shots;
  for (int l = 0; l < height; ++l)
    if (keep[l]) plan.acquired_lines.push_back(l);

  const int L = static_cast<int>(plan.acquired_lines.size());
  const double actual = static_cast<double>(height) / L;
  if (std::abs(actual - accel) > 0.1 + 1e-12)
    throw std::invalid_argument("make_plan: achieved acceleration deviates from request");

  plan.shot_of_line.resize(L);
  for (int a = 0; a < L; ++a) {
    plan.shot_of_line[a] = (ordering == ShotOrdering::sequential)
                               ? static_cast<int>((static_cast<long long>(a) * num_shots) / L)
                               : a % num_shots;
  }

  plan.mask.assign(static_cast<std::size_t>(height) * width, 0);
  for (int line : plan.acquired_lines)
    std::fill_n(plan.mask.begin() + static_cast<std::size_t>(line) * width, width, 1);

  plan.validate();
  return plan;
}

KCoords cartesian_coords(int height, int width) {
  KCoords coords;
  coords.reserve(static_cast<std::size_t>(height) * width);
  const int cx = width / 2;
  const int cy = height / 2;
  for (int r = 0; r < height; ++r) {
    const double ky = kTwoPi * (r - cy) / height;
    for (int c = 0; c < width; ++c)
      coords.push_back({kTwoPi * (c - cx) / width, ky});
  }
  return coords;
}

KCoords rotate_coords(std::span<const KPoint> coords, double theta) {
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  KCoords out;
  out.reserve(coords.size());
  for (const KPoint &p : coords)
    out.push_back({ct * p.kx - st * p.ky, st * p.kx + ct * p.ky});
  return out;
}

std::vector<cplx> translation_phase(std::span<const KPoint> coords, double tx, double ty) {
  std::vector<cplx> phase;
  phase.reserve(coords.size());
  for (const KPoint &p : coords) {
    const double arg = -(tx * p.kx + ty * p.ky);
    phase.emplace_back(std::cos(arg), std::sin(arg));
  }
  return phase;
}

std::optional<std::vector<int>> cartesian_indices(std::span<const KPoint> coords,
                                                  int height, int width) {
  const int cx = width / 2;
  const int cy = height / 2;
  std::vector<int> idx;
  idx.reserve(coords.size());
  for (const KPoint &p : coords) {
    const double fx = p.kx * width / kTwoPi + cx;
    const double fy = p.ky * height / kTwoPi + cy;
    const double rx = std::round(fx);
    const double ry = std::round(fy);
    if (std::abs(fx - rx) > 1e-9 || std::abs(fy - ry) > 1e-9) return std::nullopt;
    // the spectrum of an integer-pixel image is periodic, so out-of-range
    // lattice hits (e.g. +pi after a quarter turn) wrap exactly
    const int col = ((static_cast<int>(rx) % width) + width) % width;
    const int row = ((static_cast<int>(ry) % height) + height) % height;
    idx.push_back(row * width + col);
  }
  return idx;
}

} // namespace jsmoco
