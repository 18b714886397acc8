#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "jsmoco/geometry.hpp"
#include "jsmoco/metrics.hpp"
#include "jsmoco/sim.hpp"
#include "jsmoco/types.hpp"

using namespace jsmoco;

namespace {

constexpr double kPi = 3.14159265358979323846;

ComplexGrid random_grid(int h, int w, std::uint64_t stream) {
  auto rng = make_rng(RngSeed{31}, stream);
  std::normal_distribution<double> dist(0.0, 1.0);
  ComplexGrid g(h, w);
  for (cplx& v : g.data()) v = cplx(dist(rng), dist(rng));
  return g;
}

/// Plain nested-loop SSIM over magnitudes: 2D Gaussian weights as an outer
/// product, one window per valid position, textbook formula. Written
/// independently of the library's separable-filter implementation.
double ssim_reference(const ComplexGrid& ref_g, const ComplexGrid& tst_g,
                      const SsimOptions& o) {
  const int h = ref_g.height(), w = ref_g.width(), k = o.window;
  std::vector<double> ref(h * w), tst(h * w);
  for (int i = 0; i < h * w; ++i) {
    ref[i] = std::abs(ref_g.data()[i]);
    tst[i] = std::abs(tst_g.data()[i]);
  }
  std::vector<double> win1(k);
  double s = 0.0;
  for (int t = 0; t < k; ++t) {
    const double d = (t - (k - 1) / 2.0) / o.window_std;
    win1[t] = std::exp(-0.5 * d * d);
    s += win1[t];
  }
  for (double& v : win1) v /= s;

  double L = o.dynamic_range;
  if (L <= 0.0) {
    L = 0.0;
    for (const double v : ref) L = std::max(L, v);
  }
  const double c1 = (o.k1 * L) * (o.k1 * L);
  const double c2 = (o.k2 * L) * (o.k2 * L);

  double acc = 0.0;
  int count = 0;
  for (int r0 = 0; r0 + k <= h; ++r0) {
    for (int c0 = 0; c0 + k <= w; ++c0) {
      double mr = 0.0, mt = 0.0, mrr = 0.0, mtt = 0.0, mrt = 0.0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double wgt = win1[i] * win1[j];
          const double a = ref[(r0 + i) * w + c0 + j];
          const double b = tst[(r0 + i) * w + c0 + j];
          mr += wgt * a;
          mt += wgt * b;
          mrr += wgt * a * a;
          mtt += wgt * b * b;
          mrt += wgt * a * b;
        }
      }
      const double var_r = mrr - mr * mr;
      const double var_t = mtt - mt * mt;
      const double cov = mrt - mr * mt;
      acc += ((2.0 * mr * mt + c1) * (2.0 * cov + c2)) /
             ((mr * mr + mt * mt + c1) * (var_r + var_t + c2));
      ++count;
    }
  }
  return acc / count;
}

} // namespace

TEST_CASE("psnr worked examples, cap and scale invariance") {
  // Peak 1 with a uniform magnitude error of 0.1 gives exactly 20 dB.
  const int n = 8;
  ComplexGrid ref(n, n), tst(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double v = (r * n + c) / static_cast<double>(n * n - 1); // peak exactly 1
      ref(r, c) = v;
      tst(r, c) = v + 0.1;
    }
  }
  CHECK(psnr(ref, tst) == doctest::Approx(20.0).epsilon(1e-12));

  // Identical inputs hit the 200 dB cap.
  CHECK(psnr(ref, ref) == 200.0);

  // Scaling both images together changes nothing.
  const ComplexGrid ref2 = ref * cplx(3.7, 0.0);
  const ComplexGrid tst2 = tst * cplx(3.7, 0.0);
  CHECK(psnr(ref2, tst2) == doctest::Approx(psnr(ref, tst)).epsilon(1e-12));

  // A global phase leaves magnitudes, hence psnr, untouched.
  const ComplexGrid spun = tst * std::polar(1.0, 1.1);
  CHECK(psnr(ref, spun) == doctest::Approx(psnr(ref, tst)).epsilon(1e-12));
}

TEST_CASE("ssim equals the direct-formula reference") {
  const ComplexGrid ref = shepp_logan(24, 24, 0.3);
  ComplexGrid noisy = ref;
  auto rng = make_rng(RngSeed{31}, 9);
  std::normal_distribution<double> dist(0.0, 0.05);
  for (cplx& v : noisy.data()) v += cplx(dist(rng), dist(rng));

  for (const int window : {5, 11}) {
    SsimOptions o;
    o.window = window;
    o.window_std = window == 5 ? 1.0 : 1.5;
    CHECK(ssim(ref, noisy, o) ==
          doctest::Approx(ssim_reference(ref, noisy, o)).epsilon(1e-12));
  }
}

TEST_CASE("ssim identity, contrast inversion and symmetry") {
  const ComplexGrid x = shepp_logan(64, 64, 0.0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  // Negating the contrast about the peak destroys structural agreement.
  double peak = 0.0;
  for (const cplx v : x.data()) peak = std::max(peak, std::abs(v));
  ComplexGrid flipped(64, 64);
  for (std::size_t k = 0; k < x.size(); ++k) flipped.data()[k] = peak - std::abs(x.data()[k]);
  CHECK(ssim(x, flipped) < 0.5);

  // With the dynamic range fixed externally the measure is symmetric.
  const ComplexGrid a = shepp_logan(32, 32, 0.2);
  ComplexGrid b = a;
  auto rng = make_rng(RngSeed{31}, 10);
  std::normal_distribution<double> dist(0.0, 0.03);
  for (cplx& v : b.data()) v += cplx(dist(rng), dist(rng));
  SsimOptions fixed;
  fixed.dynamic_range = 1.0;
  CHECK(ssim(a, b, fixed) == doctest::Approx(ssim(b, a, fixed)).epsilon(1e-14));
}

TEST_CASE("nrmse worked examples") {
  const ComplexGrid ref = random_grid(10, 10, 1);

  // Doubling the reference is exactly distance one.
  const ComplexGrid twice = ref * cplx(2.0, 0.0);
  CHECK(nrmse(ref, twice) == doctest::Approx(1.0).epsilon(1e-14));

  // A perturbation of one percent of the norm measures one percent.
  ComplexGrid e = random_grid(10, 10, 2);
  const double target = 0.01 * norm2(ref) / norm2(e);
  e *= cplx(target, 0.0);
  const ComplexGrid perturbed = ref + e;
  CHECK(nrmse(ref, perturbed) == doctest::Approx(0.01).epsilon(1e-12));

  CHECK(nrmse(ref, ref) == 0.0);

  ComplexGrid zero(10, 10);
  CHECK_THROWS_AS((void)nrmse(zero, ref), std::invalid_argument);
}

TEST_CASE("motion error averages over all shots including exact ones") {
  const int J = 4;
  const MotionParams truth = MotionParams::identity(J);
  MotionParams est = MotionParams::identity(J);
  est.rotations[2] = 1.0 * kPi / 180.0; // one degree on a single shot

  const MotionError err = motion_error(est, truth);
  CHECK(err.rmse_theta_deg == doctest::Approx(0.5).epsilon(1e-12)); // sqrt(1/4)
  CHECK(err.rmse_translation_px == doctest::Approx(0.0));

  // Translation example: a single 2 px offset in one shot of four.
  MotionParams est_t = MotionParams::identity(J);
  est_t.translations[1] = {2.0, 0.0};
  const MotionError err_t = motion_error(est_t, truth);
  CHECK(err_t.rmse_theta_deg == doctest::Approx(0.0));
  CHECK(err_t.rmse_translation_px == doctest::Approx(1.0).epsilon(1e-12)); // sqrt(4/4)
}

TEST_CASE("motion error is invariant to a global rigid gauge change") {
  auto rng = make_rng(RngSeed{31}, 11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  MotionParams truth = MotionParams::identity(5);
  MotionParams est = MotionParams::identity(5);
  for (int j = 1; j < 5; ++j) {
    truth.rotations[j] = 0.04 * u(rng);
    truth.translations[j] = {1.5 * u(rng), 1.5 * u(rng)};
    est.rotations[j] = truth.rotations[j] + 0.002 * u(rng);
    est.translations[j] = {truth.translations[j][0] + 0.05 * u(rng),
                           truth.translations[j][1] + 0.05 * u(rng)};
  }
  const MotionError base = motion_error(est, truth);

  // Right-compose every estimated shot with one global rigid transform:
  // theta_j + gamma and t_j + R(theta_j) g.
  const double gamma = 0.8;
  const double gx = 2.0, gy = -1.0;
  MotionParams shifted = est;
  for (int j = 0; j < 5; ++j) {
    const double ct = std::cos(est.rotations[j]);
    const double st = std::sin(est.rotations[j]);
    shifted.rotations[j] = est.rotations[j] + gamma;
    shifted.translations[j][0] = est.translations[j][0] + ct * gx - st * gy;
    shifted.translations[j][1] = est.translations[j][1] + st * gx + ct * gy;
  }

  const MotionError moved = motion_error(shifted, truth);
  CHECK(moved.rmse_theta_deg == doctest::Approx(base.rmse_theta_deg).epsilon(1e-10));
  CHECK(moved.rmse_translation_px ==
        doctest::Approx(base.rmse_translation_px).epsilon(1e-10));

  // Composing the estimate with the truth's own gauge zeroes the error.
  MotionParams regauged = truth;
  for (int j = 0; j < 5; ++j) {
    const double ct = std::cos(truth.rotations[j]);
    const double st = std::sin(truth.rotations[j]);
    regauged.rotations[j] = truth.rotations[j] + gamma;
    regauged.translations[j][0] = truth.translations[j][0] + ct * gx - st * gy;
    regauged.translations[j][1] = truth.translations[j][1] + st * gx + ct * gy;
  }
  const MotionError zero = motion_error(regauged, truth);
  CHECK(zero.rmse_theta_deg < 1e-10);
  CHECK(zero.rmse_translation_px < 1e-10);
}

TEST_CASE("gauge alignment pins shot zero to identity") {
  MotionParams m = MotionParams::identity(3);
  m.rotations = {0.3, 0.5, -0.2};
  m.translations = {{1.0, -2.0}, {0.5, 0.5}, {-1.0, 3.0}};
  const MotionParams aligned = align_motion_gauge(m);
  CHECK(aligned.rotations[0] == 0.0);
  CHECK(aligned.translations[0][0] == doctest::Approx(0.0));
  CHECK(aligned.translations[0][1] == doctest::Approx(0.0));
}
