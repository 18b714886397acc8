#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "jsmoco/types.hpp"

namespace jsmoco {

/// Geometric noise schedule of a variance-exploding diffusion,
/// sigma_t = sigma_max * (sigma_min/sigma_max)^((T-1-t)/(T-1)) listed from
/// sigma_max down to sigma_min.
struct NoiseSchedule {
  std::vector<double> sigmas;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  int steps() const { return static_cast<int>(sigmas.size()); }
};

NoiseSchedule ve_schedule(double sigma_min, double sigma_max, int steps);

/// Score function of an image prior at noise level sigma, i.e. an estimate of
/// grad_x log p_sigma(x). Implementations must be pure in x and sigma.
class ScorePrior {
public:
  virtual ~ScorePrior() = default;
  virtual ComplexGrid score(const ComplexGrid &x, double sigma) const = 0;
  virtual std::string describe() const = 0;
};

/// Smoothness score -alpha * (L x) with L the 5-point Laplacian, a stand-in
/// for a learned model that favours spatially coherent images.
std::unique_ptr<ScorePrior> make_smoothness_prior(double alpha);

/// Tikhonov-style denoiser surrogate -(x - blur(x)) / (sigma^2 + rho) with a
/// separable 3x3 binomial blur.
std::unique_ptr<ScorePrior> make_denoiser_surrogate_prior(double rho);

/// Gaussian oracle centred on a reference image: -(x - x_star)/(tau^2 +
/// sigma^2). Used by the linear-Gaussian sampler checks.
std::unique_ptr<ScorePrior> make_oracle_gaussian_prior(ComplexGrid x_star, double tau);

/// Out-of-process score model. For each call the image is written to
/// <workdir>/score_in_<n>, the command is invoked as
///   <command> <input-base> <output-base> <sigma>
/// and the score is read back from <output-base> (same grid format and
/// shape). Non-zero exit status or a shape mismatch raises; temp files are
/// removed afterwards.
std::unique_ptr<ScorePrior> make_external_process_prior(std::string command,
                                                        std::filesystem::path workdir);

} // namespace jsmoco
