#pragma once

#include <memory>
#include <span>
#include <vector>

#include "jsmoco/geometry.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco {

namespace detail {
struct FftwPlans;
}

/// Orthonormal centred 2D DFT: DC at (h/2, w/2) in both domains, scaled by
/// 1/sqrt(h*w). fft2_centered followed by ifft2_centered is the identity.
ComplexGrid fft2_centered(const ComplexGrid &image);
ComplexGrid ifft2_centered(const ComplexGrid &kspace);

/// Brute-force evaluation of sum_r image(r) * exp(-j*(kx*dx + ky*dy)) /
/// sqrt(h*w) with (dx, dy) the pixel offsets from the centre. Reference
/// implementation for validating the gridded transform; O(h*w) per sample.
std::vector<cplx> dft_direct(const ComplexGrid &image, std::span<const KPoint> coords);

struct NufftOptions {
  double oversampling = 2.0;
  int kernel_width = 6;
  /// When set, the Kaiser-Bessel window has its Taylor head subtracted so the
  /// kernel value and slope both vanish at the window edge. Off-grid sample
  /// values are then C1 in the coordinates, which finite-difference motion
  /// checks require; the cost is slightly higher aliasing at a given width,
  /// so pair it with kernel_width 8.
  bool smooth_edge = false;
};

/// Gridded type-2 NUFFT for a fixed image size: deapodized zero-padded FFT on
/// an oversampled grid followed by Kaiser-Bessel interpolation. The spread
/// path is the exact transpose of the interpolation path, so adjoint tests
/// hold to machine precision. Interpolation indices wrap periodically, which
/// is exact for the oversampled spectrum of a supported image; coordinates
/// are accepted for |k| <= pi * oversampling.
class NufftPlan {
public:
  NufftPlan(int height, int width, NufftOptions options = {});

  int height() const { return h_; }
  int width() const { return w_; }
  int os_height() const { return hos_; }
  int os_width() const { return wos_; }
  const NufftOptions &options() const { return options_; }
  double max_coord() const;

  using Spectrum = std::vector<cplx>; // os_height*os_width, row-major, DC centred

  Spectrum zero_spectrum() const;
  Spectrum image_to_spectrum(const ComplexGrid &image) const;
  ComplexGrid spectrum_to_image(const Spectrum &spectrum) const; // exact adjoint

  /// Interpolation taps and weights for a fixed coordinate set, reusable
  /// across coils and across the value / k-gradient / transpose passes.
  struct Stencil {
    std::size_t count = 0;
    bool has_gradient = false;
    std::vector<int> ix, iy;        // count * kernel_width wrapped grid indices
    std::vector<double> wx, wy;     // matching kernel weights
    std::vector<double> dwx, dwy;   // d(weight)/d(kx), d(weight)/d(ky); gradient stencils only
  };

  Stencil make_stencil(std::span<const KPoint> coords, bool with_gradient) const;
  void apply(const Spectrum &spectrum, const Stencil &stencil, std::span<cplx> values) const;
  /// Frequency-domain derivatives of the interpolant at each coordinate.
  void apply_gradient(const Spectrum &spectrum, const Stencil &stencil,
                      std::span<cplx> d_kx, std::span<cplx> d_ky) const;
  void apply_transpose(const Stencil &stencil, std::span<const cplx> samples,
                       Spectrum &accum) const;

  double kernel(double u) const;
  double kernel_derivative(double u) const;
  /// Continuous Fourier transform of the window at nu cycles per grid unit;
  /// the deapodization divides by its values at the image pixel positions.
  double kernel_transform(double nu) const;
  double kernel_beta() const { return beta_; }

private:
  double kernel_exact(double u) const;
  double kernel_derivative_exact(double u) const;

  int h_, w_, hos_, wos_;
  NufftOptions options_;
  double beta_;
  double norm_; // kernel peak normalizer for the selected window shape
  std::vector<double> inv_deapod_; // h*w, includes the 1/sqrt(h*w) scale
  // cubic Hermite tabulation of the (even) window on [0, W/2]. Stencil
  // construction evaluates the window tens of thousands of times per call,
  // so the Bessel forms are sampled once here; the interpolant tracks them
  // to ~1e-12 and kernel_derivative is its exact derivative, keeping value
  // and slope consistent to machine precision.
  int tab_n_ = 0;
  double tab_step_ = 0.0, tab_inv_step_ = 0.0;
  std::vector<double> tab_f_, tab_d_;
  std::shared_ptr<detail::FftwPlans> fftw_;
};

/// One-shot conveniences over NufftPlan. Both short-circuit to the centred
/// FFT when every coordinate lies on the Cartesian lattice, making on-grid
/// evaluation exact rather than kernel-accurate.
std::vector<cplx> nufft_forward(const ComplexGrid &image, std::span<const KPoint> coords,
                                const NufftOptions &options = {});
ComplexGrid nufft_adjoint(std::span<const cplx> samples, std::span<const KPoint> coords,
                          int height, int width, const NufftOptions &options = {});

} // namespace jsmoco
