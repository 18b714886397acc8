#include "jsmoco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace jsmoco {

namespace {

std::vector<double> magnitudes(const ComplexGrid &g) {
  std::vector<double> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = std::abs(g.data()[k]);
  return out;
}

// separable valid-region convolution with a 1D window along both axes
std::vector<double> filter_valid(const std::vector<double> &img, int h, int w,
                                 const std::vector<double> &win) {
  const int k = static_cast<int>(win.size());
  const int hw = h;
  const int ww = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(hw) * ww, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ww; ++c) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += win[t] * img[static_cast<std::size_t>(r) * w + c + t];
      rows[static_cast<std::size_t>(r) * ww + c] = acc;
    }
  const int hv = h - k + 1;
  std::vector<double> out(static_cast<std::size_t>(hv) * ww, 0.0);
  for (int r = 0; r < hv; ++r)
    for (int c = 0; c < ww; ++c) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += win[t] * rows[static_cast<std::size_t>(r + t) * ww + c];
      out[static_cast<std::size_t>(r) * ww + c] = acc;
    }
  return out;
}

} // namespace

double psnr(const ComplexGrid &reference, const ComplexGrid &test) {
  if (!reference.same_shape(test)) throw std::invalid_argument("psnr: shape mismatch");
  const auto ref = magnitudes(reference);
  const auto tst = magnitudes(test);
  double peak = 0.0;
  double mse = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    peak = std::max(peak, ref[k]);
    const double d = ref[k] - tst[k];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  if (mse == 0.0) return 200.0;
  if (peak == 0.0) return -200.0;
  return std::min(200.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const ComplexGrid &reference, const ComplexGrid &test,
            const SsimOptions &options) {
  if (!reference.same_shape(test)) throw std::invalid_argument("ssim: shape mismatch");
  const int h = reference.height();
  const int w = reference.width();
  if (h < options.window || w < options.window)
    throw std::invalid_argument("ssim: image smaller than the window");
  if (options.window < 1 || options.window_std <= 0.0)
    throw std::invalid_argument("ssim: invalid window");

  std::vector<double> win(options.window);
  const double centre = (options.window - 1) / 2.0;
  double sum = 0.0;
  for (int t = 0; t < options.window; ++t) {
    const double d = (t - centre) / options.window_std;
    win[t] = std::exp(-0.5 * d * d);
    sum += win[t];
  }
  for (double &v : win) v /= sum;

  const auto ref = magnitudes(reference);
  const auto tst = magnitudes(test);
  const double L = options.dynamic_range > 0.0
                       ? options.dynamic_range
                       : *std::max_element(ref.begin(), ref.end());
  const double c1 = (options.k1 * L) * (options.k1 * L);
  const double c2 = (options.k2 * L) * (options.k2 * L);

  std::vector<double> rr(ref.size()), tt(ref.size()), rt(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    rr[k] = ref[k] * ref[k];
    tt[k] = tst[k] * tst[k];
    rt[k] = ref[k] * tst[k];
  }
  const auto mu_r = filter_valid(ref, h, w, win);
  const auto mu_t = filter_valid(tst, h, w, win);
  const auto m_rr = filter_valid(rr, h, w, win);
  const auto m_tt = filter_valid(tt, h, w, win);
  const auto m_rt = filter_valid(rt, h, w, win);

  double acc = 0.0;
  for (std::size_t k = 0; k < mu_r.size(); ++k) {
    const double var_r = m_rr[k] - mu_r[k] * mu_r[k];
    const double var_t = m_tt[k] - mu_t[k] * mu_t[k];
    const double cov = m_rt[k] - mu_r[k] * mu_t[k];
    const double num = (2.0 * mu_r[k] * mu_t[k] + c1) * (2.0 * cov + c2);
    const double den = (mu_r[k] * mu_r[k] + mu_t[k] * mu_t[k] + c1) * (var_r + var_t + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_r.size());
}

double nrmse(std::span<const cplx> reference, std::span<const cplx> test) {
  if (reference.size() != test.size()) throw std::invalid_argument("nrmse: size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    num += std::norm(test[k] - reference[k]);
    den += std::norm(reference[k]);
  }
  if (den == 0.0) throw std::invalid_argument("nrmse: reference is identically zero");
  return std::sqrt(num / den);
}

double nrmse(const ComplexGrid &reference, const ComplexGrid &test) {
  if (!reference.same_shape(test)) throw std::invalid_argument("nrmse: shape mismatch");
  return nrmse(reference.data(), test.data());
}

MotionParams align_motion_gauge(const MotionParams &motion) {
  const int J = motion.num_shots();
  if (J < 1) throw std::invalid_argument("align_motion_gauge: empty motion");
  const double theta0 = motion.rotations[0];
  const double tx0 = motion.translations[0][0];
  const double ty0 = motion.translations[0][1];
  MotionParams aligned = MotionParams::identity(J);
  for (int j = 0; j < J; ++j) {
    const double rel = wrap_angle(motion.rotations[j] - theta0);
    aligned.rotations[j] = rel;
    // T_j o T_0^{-1}: translation t_j - R(theta_j - theta_0) t_0
    const double ct = std::cos(rel);
    const double st = std::sin(rel);
    aligned.translations[j][0] = motion.translations[j][0] - (ct * tx0 - st * ty0);
    aligned.translations[j][1] = motion.translations[j][1] - (st * tx0 + ct * ty0);
  }
  return aligned;
}

MotionError motion_error(const MotionParams &estimate, const MotionParams &truth) {
  if (estimate.num_shots() != truth.num_shots())
    throw std::invalid_argument("motion_error: shot count mismatch");
  const MotionParams a = align_motion_gauge(estimate);
  const MotionParams b = align_motion_gauge(truth);
  const int J = a.num_shots();
  double acc_theta = 0.0;
  double acc_t = 0.0;
  for (int j = 0; j < J; ++j) {
    const double dtheta = wrap_angle(a.rotations[j] - b.rotations[j]);
    acc_theta += dtheta * dtheta;
    const double dx = a.translations[j][0] - b.translations[j][0];
    const double dy = a.translations[j][1] - b.translations[j][1];
    acc_t += dx * dx + dy * dy;
  }
  MotionError err;
  err.rmse_theta_deg = std::sqrt(acc_theta / J) * 180.0 / std::numbers::pi;
  err.rmse_translation_px = std::sqrt(acc_t / J);
  return err;
}

} // namespace jsmoco
