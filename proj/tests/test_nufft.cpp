#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jsmoco/geometry.hpp"
#include "jsmoco/nufft.hpp"
#include "jsmoco/types.hpp"

using namespace jsmoco;

namespace {

constexpr double kPi = std::numbers::pi;

ComplexGrid random_grid(int h, int w, std::uint64_t stream) {
  std::mt19937_64 rng = make_rng(RngSeed{917}, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexGrid g(h, w);
  for (cplx &v : g.data()) v = cplx(normal(rng), normal(rng));
  return g;
}

double rel_l2(std::span<const cplx> ref, std::span<const cplx> got) {
  REQUIRE(ref.size() == got.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += std::norm(got[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return std::sqrt(num / den);
}

} // namespace

TEST_CASE("centred FFT is unitary and self-consistent on odd and even sizes") {
  for (const auto& [h, w] : {std::pair{8, 8}, std::pair{7, 5}, std::pair{6, 10}}) {
    const ComplexGrid x = random_grid(h, w, 1);
    const ComplexGrid k = fft2_centered(x);
    CHECK(std::abs(norm2(k) - norm2(x)) / norm2(x) < 1e-12);
    const ComplexGrid rt = ifft2_centered(k);
    CHECK(rel_l2(x.data(), rt.data()) < 1e-12);
  }
}

TEST_CASE("centre impulse transforms to a flat spectrum") {
  ComplexGrid x(8, 8);
  x(4, 4) = cplx(1.0, 0.0);
  const ComplexGrid k = fft2_centered(x);
  for (const cplx &v : k.data()) {
    CHECK(v.real() == doctest::Approx(1.0 / 8.0));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("direct DFT agrees with the centred FFT on the lattice") {
  const ComplexGrid x = random_grid(8, 6, 2);
  const auto direct = dft_direct(x, cartesian_coords(8, 6));
  const ComplexGrid k = fft2_centered(x);
  CHECK(rel_l2(k.data(), direct) < 1e-12);
}

TEST_CASE("gridded transform matches the direct DFT on rotated coordinates") {
  const ComplexGrid x = random_grid(16, 16, 3);
  const KCoords base = cartesian_coords(16, 16);
  std::mt19937_64 rng = make_rng(RngSeed{10}, 4);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  for (int trial = 0; trial < 5; ++trial) {
    const KCoords coords = rotate_coords(base, angle(rng));
    const auto exact = dft_direct(x, coords);

    const auto fast = nufft_forward(x, coords);
    CHECK(rel_l2(exact, fast) < 1e-5);

    NufftOptions smooth;
    smooth.kernel_width = 8;
    smooth.smooth_edge = true;
    const auto fast8 = nufft_forward(x, coords, smooth);
    CHECK(rel_l2(exact, fast8) < 1e-6);
  }
}

TEST_CASE("on-lattice coordinates short-circuit to the exact FFT") {
  const ComplexGrid x = random_grid(12, 12, 5);
  const auto values = nufft_forward(x, cartesian_coords(12, 12));
  const ComplexGrid k = fft2_centered(x);
  CHECK(rel_l2(k.data(), values) < 1e-14);
}

TEST_CASE("coordinates beyond the nominal band stay exact via periodicity") {
  // |k| may exceed pi after rotation; the oversampled grid covers it and the
  // direct DFT is 2*pi periodic, so both sides evaluate the same polynomial
  const ComplexGrid x = random_grid(16, 16, 6);
  KCoords coords;
  coords.push_back({kPi + 0.3, -0.7});
  coords.push_back({-kPi - 0.2, kPi + 0.1});
  coords.push_back({1.1 * kPi, -1.3 * kPi});
  const auto exact = dft_direct(x, coords);
  const auto fast = nufft_forward(x, coords);
  CHECK(rel_l2(exact, fast) < 1e-5);
}

TEST_CASE("coordinates outside the oversampled band raise") {
  const ComplexGrid x = random_grid(8, 8, 7);
  const KCoords coords{{2.0 * kPi + 0.2, 0.0}};
  CHECK_THROWS_AS(nufft_forward(x, coords), std::domain_error);
}

TEST_CASE("spread is the exact transpose of interpolation") {
  for (const bool smooth : {false, true}) {
    NufftOptions opts;
    if (smooth) {
      opts.kernel_width = 8;
      opts.smooth_edge = true;
    }
    const int n = 20;
    const ComplexGrid x = random_grid(n, n, 8);
    const KCoords coords = rotate_coords(cartesian_coords(n, n), 0.4321);

    const auto ax = nufft_forward(x, coords, opts);
    std::mt19937_64 rng = make_rng(RngSeed{11}, 9);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<cplx> y(coords.size());
    for (cplx &v : y) v = cplx(normal(rng), normal(rng));
    const ComplexGrid aty = nufft_adjoint(y, coords, n, n, opts);

    const cplx lhs = vdot(std::span<const cplx>(y), std::span<const cplx>(ax));
    const cplx rhs = vdot(aty, x);
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-13);
  }
}

TEST_CASE("kernel shapes and derivatives are consistent") {
  for (const bool smooth : {false, true}) {
    NufftOptions opts;
    opts.kernel_width = smooth ? 8 : 6;
    opts.smooth_edge = smooth;
    const NufftPlan plan(16, 16, opts);
    const double half = opts.kernel_width / 2.0;

    CHECK(plan.kernel(0.0) == doctest::Approx(1.0));
    CHECK(plan.kernel(half + 0.01) == 0.0);
    if (smooth) {
      // flattened window: value and slope vanish at the edge
      CHECK(plan.kernel(half - 1e-7) == doctest::Approx(0.0).epsilon(1e-10));
      CHECK(std::abs(plan.kernel_derivative(half - 1e-7)) < 1e-5);
    } else {
      CHECK(plan.kernel(half - 1e-12) > 1e-6); // classic window steps at the edge
    }

    // derivative against a central difference of the kernel itself
    const double h = 1e-6;
    for (const double u : {0.3, -1.2, 2.1, -2.6}) {
      const double fd = (plan.kernel(u + h) - plan.kernel(u - h)) / (2.0 * h);
      CHECK(plan.kernel_derivative(u) == doctest::Approx(fd).epsilon(1e-5));
    }

    // analytic window transform against Simpson quadrature
    for (const double nu : {0.0, 0.05, 0.13, 0.22}) {
      const int m = 4000;
      const double du = 2.0 * half / m;
      double acc = 0.0;
      for (int i = 0; i <= m; ++i) {
        const double u = -half + i * du;
        const double wgt = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += wgt * plan.kernel(u) * std::cos(2.0 * kPi * nu * u);
      }
      acc *= du / 3.0;
      CHECK(plan.kernel_transform(nu) == doctest::Approx(acc).epsilon(1e-8));
    }
  }
}

TEST_CASE("stencil gradient weights differentiate the interpolation") {
  NufftOptions opts;
  opts.kernel_width = 8;
  opts.smooth_edge = true;
  const NufftPlan plan(12, 12, opts);
  const ComplexGrid x = random_grid(12, 12, 12);
  const auto spectrum = plan.image_to_spectrum(x);

  const KCoords coords{{0.321, -0.77}, {2.2, 1.9}, {-2.9, 0.4}};
  const auto st = plan.make_stencil(coords, true);
  std::vector<cplx> dkx(coords.size()), dky(coords.size());
  plan.apply_gradient(spectrum, st, dkx, dky);

  const double h = 1e-6;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (const int axis : {0, 1}) {
      KCoords plus{coords[i]};
      KCoords minus{coords[i]};
      (axis == 0 ? plus[0].kx : plus[0].ky) += h;
      (axis == 0 ? minus[0].kx : minus[0].ky) -= h;
      std::vector<cplx> vp(1), vm(1);
      plan.apply(spectrum, plan.make_stencil(plus, false), vp);
      plan.apply(spectrum, plan.make_stencil(minus, false), vm);
      const cplx fd = (vp[0] - vm[0]) / (2.0 * h);
      const cplx an = axis == 0 ? dkx[i] : dky[i];
      CHECK(std::abs(fd - an) / std::abs(fd) < 1e-6);
    }
  }
}
