#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jsmoco/types.hpp"

namespace jsmoco {

/// Coil sensitivity maps parameterized as 2D polynomials over pixel
/// coordinates normalized to [-1, 1] per axis. Each coil stores two real
/// coefficient blocks (real part, imaginary part) over the (order+1)^2
/// monomials x^p y^q with 0 <= p, q <= order, (p, q) lexicographic.
struct PolyCoeffs {
  int num_coils = 0;
  int order = 0;
  std::vector<double> values; // num_coils * 2 * basis_size, coil-major, real block first

  static int basis_size(int order) { return (order + 1) * (order + 1); }
  int basis() const { return basis_size(order); }
  /// Total real degrees of freedom, 2 * num_coils * (order+1)^2.
  int total_count() const { return num_coils * 2 * basis(); }

  double &at(int coil, int part, int p, int q) {
    return values[((coil * 2 + part) * (order + 1) + p) * (order + 1) + q];
  }
  double at(int coil, int part, int p, int q) const {
    return values[((coil * 2 + part) * (order + 1) + p) * (order + 1) + q];
  }
  std::span<double> part(int coil, int which) {
    return std::span<double>(values).subspan((coil * 2 + which) * basis(), basis());
  }
  std::span<const double> part(int coil, int which) const {
    return std::span<const double>(values).subspan((coil * 2 + which) * basis(), basis());
  }

  static PolyCoeffs zeros(int num_coils, int order);
  void scale(double s);
  /// Complex global phase rotation applied to every coil map.
  void rotate_phase(cplx unit);
};

/// Monomial design matrix: one row per pixel (row-major), one column per
/// (p, q) pair in lexicographic order, entries xn^p * yn^q with
/// xn = 2*col/(w-1) - 1 and yn = 2*row/(h-1) - 1. Requires h, w >= 2.
Eigen::MatrixXd csm_basis(int height, int width, int order);

/// Shared immutable basis, memoized on (height, width, order).
std::shared_ptr<const Eigen::MatrixXd> csm_basis_cached(int height, int width, int order);

/// Evaluates the per-coil complex sensitivity maps on the pixel grid.
std::vector<ComplexGrid> eval_csm(const PolyCoeffs &coeffs, int height, int width);

struct CsmFitResult {
  PolyCoeffs coeffs;
  double residual = 0.0; // sqrt of the summed squared fit residual over coils
};

/// Least-squares projection of complex coil maps onto the polynomial basis.
/// `support` (optional, h*w, nonzero = keep) restricts the fitted pixels.
/// Throws when the restricted basis is rank-deficient or has fewer rows than
/// columns.
CsmFitResult fit_csm(std::span<const ComplexGrid> maps, int order,
                     std::span<const std::uint8_t> support = {});

/// Rescales coefficients so the sum-of-squares map sum_i |S_i|^2 has unit
/// mean over the pixel grid. Returns the applied positive scale; images must
/// be divided by it to keep the forward model unchanged.
std::pair<PolyCoeffs, double> normalize_csm_gauge(const PolyCoeffs &coeffs,
                                                  int height, int width);

/// Rotates the shared complex phase so that sum over coils and pixels of
/// S_i(r) is real and non-negative, pinning the phase gauge between image and
/// maps. Returns the applied unit factor; images must be multiplied by its
/// conjugate. Leaves the coefficients unchanged when the sum is degenerate.
std::pair<PolyCoeffs, cplx> canonical_csm_phase(const PolyCoeffs &coeffs,
                                                int height, int width);

} // namespace jsmoco
