#include "jsmoco/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "jsmoco/nufft.hpp"

namespace jsmoco {

namespace {

struct Ellipse {
  double intensity, a, b, x0, y0, phi_deg;
};

// modified (low-contrast) head phantom; magnitudes stay within [0, 1]
constexpr Ellipse kPhantom[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

} // namespace

ComplexGrid shepp_logan(int height, int width, double phase_strength) {
  if (height < 2 || width < 2)
    throw std::invalid_argument("shepp_logan: grid must be at least 2x2");

  ComplexGrid image(height, width);
  std::vector<double> magnitude(image.size(), 0.0);
  std::vector<double> phase(image.size(), 0.0);
  double max_phase = 0.0;
  for (int r = 0; r < height; ++r) {
    const double yn = 2.0 * r / (height - 1) - 1.0;
    for (int c = 0; c < width; ++c) {
      const double xn = 2.0 * c / (width - 1) - 1.0;
      double v = 0.0;
      for (const Ellipse &e : kPhantom) {
        const double ang = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = xn - e.x0;
        const double dy = yn - e.y0;
        const double xr = dx * std::cos(ang) + dy * std::sin(ang);
        const double yr = -dx * std::sin(ang) + dy * std::cos(ang);
        if ((xr / e.a) * (xr / e.a) + (yr / e.b) * (yr / e.b) <= 1.0) v += e.intensity;
      }
      const std::size_t k = static_cast<std::size_t>(r) * width + c;
      magnitude[k] = v;
      // smooth low-order phase surface, normalized to peak 1 below
      phase[k] = 0.35 * xn + 0.45 * yn + 0.3 * xn * yn + 0.25 * (xn * xn - yn * yn);
      max_phase = std::max(max_phase, std::abs(phase[k]));
    }
  }

  for (std::size_t k = 0; k < image.size(); ++k) {
    if (phase_strength == 0.0 || max_phase == 0.0) {
      image.data()[k] = cplx(magnitude[k], 0.0);
    } else {
      const double p = phase_strength * phase[k] / max_phase;
      image.data()[k] = magnitude[k] * cplx(std::cos(p), std::sin(p));
    }
  }
  return image;
}

SynthCsm synth_csm(int num_coils, int height, int width, int order, RngSeed seed) {
  if (num_coils < 1) throw std::invalid_argument("synth_csm: need at least one coil");
  if (order < 2 || order > 6)
    throw std::invalid_argument("synth_csm: order must lie in [2, 6]");
  if (height < 2 || width < 2)
    throw std::invalid_argument("synth_csm: grid must be at least 2x2");

  std::mt19937_64 rng = make_rng(seed, 101);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int np1 = order + 1;

  for (int attempt = 0; attempt < 20; ++attempt) {
    PolyCoeffs coeffs = PolyCoeffs::zeros(num_coils, order);
    for (int i = 0; i < num_coils; ++i) {
      // squared-linear lobe steered towards coil i's angular position
      const double alpha = 2.0 * std::numbers::pi * (i + 0.35 * uniform(rng)) / num_coils;
      const double ux = 0.85 * std::cos(alpha);
      const double uy = 0.85 * std::sin(alpha);
      const double gamma = 0.9 * uniform(rng); // bounded per-coil phase offset
      const cplx z(std::cos(gamma), std::sin(gamma));

      auto add = [&](int p, int q, double lobe) {
        coeffs.at(i, 0, p, q) += (z * lobe).real();
        coeffs.at(i, 1, p, q) += (z * lobe).imag();
      };
      add(0, 0, 1.0);
      add(1, 0, 0.9 * ux);
      add(0, 1, 0.9 * uy);
      add(2, 0, 0.2025 * ux * ux);
      add(1, 1, 0.405 * ux * uy);
      add(0, 2, 0.2025 * uy * uy);

      for (int p = 0; p < np1; ++p)
        for (int q = 0; q < np1; ++q) {
          coeffs.at(i, 0, p, q) += 0.02 * normal(rng);
          coeffs.at(i, 1, p, q) += 0.02 * normal(rng);
        }
    }

    coeffs = normalize_csm_gauge(coeffs, height, width).first;
    coeffs = canonical_csm_phase(coeffs, height, width).first;
    auto maps = eval_csm(coeffs, height, width);

    std::vector<std::size_t> peaks(num_coils);
    for (int i = 0; i < num_coils; ++i) {
      std::size_t best = 0;
      double best_mag = -1.0;
      for (std::size_t k = 0; k < maps[i].size(); ++k) {
        const double m = std::abs(maps[i].data()[k]);
        if (m > best_mag) {
          best_mag = m;
          best = k;
        }
      }
      peaks[i] = best;
    }
    std::sort(peaks.begin(), peaks.end());
    if (std::adjacent_find(peaks.begin(), peaks.end()) == peaks.end())
      return {std::move(maps), std::move(coeffs)};
  }
  throw std::runtime_error("synth_csm: could not draw coils with distinct peak locations");
}

MotionParams draw_motion(int num_shots, double k_theta_deg, double k_t_px, RngSeed seed) {
  if (num_shots < 1) throw std::invalid_argument("draw_motion: need at least one shot");
  if (k_theta_deg < 0.0 || k_t_px < 0.0)
    throw std::invalid_argument("draw_motion: severity bounds must be >= 0");
  std::mt19937_64 rng = make_rng(seed, 102);
  std::uniform_real_distribution<double> dtheta(-k_theta_deg, k_theta_deg);
  std::uniform_real_distribution<double> dt(-k_t_px, k_t_px);
  MotionParams motion = MotionParams::identity(num_shots);
  for (int j = 0; j < num_shots; ++j) {
    motion.rotations[j] = dtheta(rng) * std::numbers::pi / 180.0;
    motion.translations[j][0] = dt(rng);
    motion.translations[j][1] = dt(rng);
  }
  motion.rotations[0] = 0.0;
  motion.translations[0] = {0.0, 0.0};
  return motion;
}

std::vector<MotionPreset> motion_presets() {
  return {{2.0, 3.0}, {2.0, 4.0}, {3.0, 3.0}, {3.0, 4.0}};
}

Measurements simulate_acquisition(const ComplexGrid &x, const PolyCoeffs &coeffs,
                                  const MotionParams &motion, const AcquisitionPlan &plan,
                                  RngSeed seed, const SimulateOptions &options) {
  plan.validate();
  Measurements y(coeffs.num_coils, plan.num_samples());
  if (options.direct_dft) {
    const auto maps = eval_csm(coeffs, plan.height, plan.width);
    const KCoords nominal = plan.sample_coords();
    const auto slices = plan.shot_slices();
    for (int j = 0; j < plan.num_shots; ++j) {
      KCoords shot_nominal;
      for (const auto &[start, len] : slices[j])
        shot_nominal.insert(shot_nominal.end(), nominal.begin() + start,
                            nominal.begin() + start + len);
      const KCoords rotated = rotate_coords(shot_nominal, motion.rotations[j]);
      const KCoords &phase_coords =
          (options.model.translation_phase == TranslationPhase::nominal) ? shot_nominal
                                                                         : rotated;
      const auto phase = translation_phase(phase_coords, motion.translations[j][0],
                                           motion.translations[j][1]);
      for (int i = 0; i < coeffs.num_coils; ++i) {
        ComplexGrid weighted(plan.height, plan.width);
        for (std::size_t k = 0; k < weighted.size(); ++k)
          weighted.data()[k] = maps[i].data()[k] * x.data()[k];
        const auto values = dft_direct(weighted, rotated);
        auto dst = y.coil(i);
        std::size_t local = 0;
        for (const auto &[start, len] : slices[j])
          for (std::size_t k = 0; k < len; ++k, ++local)
            dst[start + k] = values[local] * phase[local];
      }
    }
  } else {
    ForwardModel model(plan, coeffs.num_coils, coeffs.order, options.model);
    y = model.forward(x, motion, coeffs).predicted;
  }

  if (options.noise_sigma > 0.0) {
    std::mt19937_64 rng = make_rng(seed, 103);
    std::normal_distribution<double> normal(0.0, options.noise_sigma);
    for (cplx &v : y.flat()) v += cplx(normal(rng), normal(rng));
  }
  return y;
}

ComplexGrid zero_fill_recon(const Measurements &y, const AcquisitionPlan &plan) {
  plan.validate();
  if (y.samples_per_coil() != plan.num_samples())
    throw std::invalid_argument("zero_fill_recon: measurement size does not match the plan");
  std::vector<double> sos(static_cast<std::size_t>(plan.height) * plan.width, 0.0);
  for (int i = 0; i < y.num_coils(); ++i) {
    ComplexGrid kspace(plan.height, plan.width);
    auto src = y.coil(i);
    std::size_t s = 0;
    for (int line : plan.acquired_lines)
      for (int c = 0; c < plan.width; ++c, ++s) kspace(line, c) = src[s];
    const ComplexGrid img = ifft2_centered(kspace);
    for (std::size_t k = 0; k < sos.size(); ++k) sos[k] += std::norm(img.data()[k]);
  }
  ComplexGrid out(plan.height, plan.width);
  for (std::size_t k = 0; k < sos.size(); ++k) out.data()[k] = cplx(std::sqrt(sos[k]), 0.0);
  return out;
}

} // namespace jsmoco
