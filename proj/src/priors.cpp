#include "jsmoco/priors.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "jsmoco/io.hpp"

namespace jsmoco {

NoiseSchedule ve_schedule(double sigma_min, double sigma_max, int steps) {
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
    throw std::invalid_argument("ve_schedule: need 0 < sigma_min <= sigma_max");
  if (steps < 1) throw std::invalid_argument("ve_schedule: need at least one step");
  NoiseSchedule sched;
  sched.sigma_min = sigma_min;
  sched.sigma_max = sigma_max;
  sched.sigmas.resize(steps);
  if (steps == 1) {
    sched.sigmas[0] = sigma_max;
    return sched;
  }
  const double ratio = sigma_min / sigma_max;
  for (int k = 0; k < steps; ++k)
    sched.sigmas[k] = sigma_max * std::pow(ratio, static_cast<double>(k) / (steps - 1));
  return sched;
}

namespace {

class SmoothnessPrior final : public ScorePrior {
public:
  explicit SmoothnessPrior(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("smoothness prior: alpha must be >= 0");
  }

  ComplexGrid score(const ComplexGrid &x, double) const override {
    const int h = x.height();
    const int w = x.width();
    ComplexGrid out(h, w);
    // 5-point Laplacian with zero-flux boundaries (edge neighbours clamp)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const cplx v = x(r, c);
        cplx lap = -4.0 * v;
        lap += x(r > 0 ? r - 1 : r, c);
        lap += x(r < h - 1 ? r + 1 : r, c);
        lap += x(r, c > 0 ? c - 1 : c);
        lap += x(r, c < w - 1 ? c + 1 : c);
        out(r, c) = alpha_ * lap;
      }
    return out;
  }

  std::string describe() const override {
    return "smoothness(alpha=" + std::to_string(alpha_) + ")";
  }

private:
  double alpha_;
};

class DenoiserSurrogatePrior final : public ScorePrior {
public:
  explicit DenoiserSurrogatePrior(double rho) : rho_(rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("denoiser prior: rho must be > 0");
  }

  ComplexGrid score(const ComplexGrid &x, double sigma) const override {
    const int h = x.height();
    const int w = x.width();
    // separable [1 2 1]/4 binomial blur with clamped edges
    ComplexGrid tmp(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        tmp(r, c) = 0.25 * (x(r, c > 0 ? c - 1 : c) + 2.0 * x(r, c) +
                            x(r, c < w - 1 ? c + 1 : c));
    ComplexGrid out(h, w);
    const double denom = sigma * sigma + rho_;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const cplx blurred = 0.25 * (tmp(r > 0 ? r - 1 : r, c) + 2.0 * tmp(r, c) +
                                     tmp(r < h - 1 ? r + 1 : r, c));
        out(r, c) = -(x(r, c) - blurred) / denom;
      }
    return out;
  }

  std::string describe() const override {
    return "denoiser(rho=" + std::to_string(rho_) + ")";
  }

private:
  double rho_;
};

class OracleGaussianPrior final : public ScorePrior {
public:
  OracleGaussianPrior(ComplexGrid x_star, double tau) : x_star_(std::move(x_star)), tau_(tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("oracle prior: tau must be > 0");
  }

  ComplexGrid score(const ComplexGrid &x, double sigma) const override {
    if (!x.same_shape(x_star_))
      throw std::invalid_argument("oracle prior: image shape does not match the reference");
    ComplexGrid out(x.height(), x.width());
    const double denom = tau_ * tau_ + sigma * sigma;
    for (std::size_t k = 0; k < out.size(); ++k)
      out.data()[k] = -(x.data()[k] - x_star_.data()[k]) / denom;
    return out;
  }

  std::string describe() const override {
    return "oracle-gaussian(tau=" + std::to_string(tau_) + ")";
  }

private:
  ComplexGrid x_star_;
  double tau_;
};

class ExternalProcessPrior final : public ScorePrior {
public:
  ExternalProcessPrior(std::string command, std::filesystem::path workdir)
      : command_(std::move(command)), workdir_(std::move(workdir)) {
    if (command_.empty())
      throw std::invalid_argument("external prior: command must not be empty");
    std::filesystem::create_directories(workdir_);
  }

  ComplexGrid score(const ComplexGrid &x, double sigma) const override {
    const unsigned long n = counter_.fetch_add(1);
    const auto in_base = workdir_ / ("score_in_" + std::to_string(n));
    const auto out_base = workdir_ / ("score_out_" + std::to_string(n));
    io::save_grid(x, in_base, "image");

    const std::string cmd =
        command_ + " " + in_base.string() + " " + out_base.string() + " " + std::to_string(sigma);
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      cleanup(in_base, out_base);
      throw std::runtime_error("external prior: '" + command_ + "' exited with status " +
                               std::to_string(status));
    }
    ComplexGrid result;
    try {
      result = io::load_grid(out_base);
    } catch (...) {
      cleanup(in_base, out_base);
      throw;
    }
    cleanup(in_base, out_base);
    if (!result.same_shape(x))
      throw std::runtime_error("external prior: score shape does not match the input image");
    return result;
  }

  std::string describe() const override { return "external(" + command_ + ")"; }

private:
  static void cleanup(const std::filesystem::path &in_base,
                      const std::filesystem::path &out_base) {
    std::error_code ec;
    std::filesystem::remove(io::header_path(in_base), ec);
    std::filesystem::remove(io::payload_path(in_base), ec);
    std::filesystem::remove(io::header_path(out_base), ec);
    std::filesystem::remove(io::payload_path(out_base), ec);
  }

  std::string command_;
  std::filesystem::path workdir_;
  mutable std::atomic<unsigned long> counter_{0};
};

} // namespace

std::unique_ptr<ScorePrior> make_smoothness_prior(double alpha) {
  return std::make_unique<SmoothnessPrior>(alpha);
}

std::unique_ptr<ScorePrior> make_denoiser_surrogate_prior(double rho) {
  return std::make_unique<DenoiserSurrogatePrior>(rho);
}

std::unique_ptr<ScorePrior> make_oracle_gaussian_prior(ComplexGrid x_star, double tau) {
  return std::make_unique<OracleGaussianPrior>(std::move(x_star), tau);
}

std::unique_ptr<ScorePrior> make_external_process_prior(std::string command,
                                                        std::filesystem::path workdir) {
  return std::make_unique<ExternalProcessPrior>(std::move(command), std::move(workdir));
}

} // namespace jsmoco
