#pragma once

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include "jsmoco/csm.hpp"
#include "jsmoco/geometry.hpp"
#include "jsmoco/nufft.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco {

/// Which coordinates the translation phase ramp is evaluated at: the nominal
/// plan coordinates (translation applied before rotation in the object frame)
/// or the rotated ones.
enum class TranslationPhase { nominal, rotated };

enum class GradMode { analytic, finite_difference };

struct ForwardModelOptions {
  /// The model defaults to the edge-flattened window at width 8: motion
  /// scores need sample values that stay differentiable as rotated
  /// coordinates sweep across interpolation cells, and the wider window
  /// restores the aliasing margin that flattening costs.
  NufftOptions nufft{.oversampling = 2.0, .kernel_width = 8, .smooth_edge = true};
  TranslationPhase translation_phase = TranslationPhase::nominal;
  GradMode motion_gradients = GradMode::analytic;
  int threads = 1; // coil-level parallelism; reductions stay fixed-order
};

struct ForwardOutputs {
  Measurements predicted;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_shot_slices;
};

struct MotionGrad {
  std::vector<double> d_theta;
  std::vector<std::array<double, 2>> d_translation;
};

/// Motion- and sensitivity-parameterized acquisition operator
///   y_{i,k} = NUFFT{ S_i(phi) * x }( R(theta_j) p_k ) * exp(-j t_j . p_k)
/// for sample k in shot j, plus its adjoint in x and data-term gradients in
/// each unknown block. Shots whose rotated coordinates fall on the Cartesian
/// lattice (identity rotation in particular) are evaluated through the exact
/// centred FFT; all other shots go through the gridded transform. Gradients
/// differentiate the implemented interpolation, so finite-difference checks
/// agree to kernel smoothness rather than gridding accuracy.
///
/// Interpolation geometry and evaluated coil maps are memoized on the exact
/// parameter values, so alternating-block iterations that revisit a pose or
/// coefficient vector skip the rebuild. The memos mutate under const: a single
/// instance must not be driven from multiple threads concurrently (the
/// internal coil/shot parallelism controlled by options().threads is fine).
class ForwardModel {
public:
  ForwardModel(AcquisitionPlan plan, int num_coils, int csm_order,
               ForwardModelOptions options = {});

  const AcquisitionPlan &plan() const { return plan_; }
  int num_coils() const { return num_coils_; }
  int csm_order() const { return csm_order_; }
  const ForwardModelOptions &options() const { return options_; }

  ForwardOutputs forward(const ComplexGrid &x, const MotionParams &motion,
                         const PolyCoeffs &coeffs) const;

  /// x-adjoint of the operator at fixed (motion, coeffs):
  /// sum_i conj(S_i) * NUFFT^H{ conj(phase) * y_i }.
  ComplexGrid adjoint_x(const Measurements &y, const MotionParams &motion,
                        const PolyCoeffs &coeffs) const;

  /// Approximate likelihood score in x: A^H(y - A x) / (gamma_t^2 + sigma^2).
  ComplexGrid grad_x_data(const Measurements &y, const ComplexGrid &x,
                          const MotionParams &motion, const PolyCoeffs &coeffs,
                          double gamma_t, double sigma) const;

  /// Likelihood score in the motion block, -(1/(2 sigma^2)) d||y - A x||^2,
  /// via the analytic derivative of the interpolation (or centred finite
  /// differences when options().motion_gradients says so).
  MotionGrad grad_m_data(const Measurements &y, const ComplexGrid &x,
                         const MotionParams &motion, const PolyCoeffs &coeffs,
                         double sigma) const;

  /// Likelihood score in the coefficient block: per-coil backprojection of
  /// the residual followed by projection onto the monomial basis.
  PolyCoeffs grad_phi_data(const Measurements &y, const ComplexGrid &x,
                           const MotionParams &motion, const PolyCoeffs &coeffs,
                           double sigma) const;

private:
  struct ShotGeometry;
  using ShotList = std::vector<ShotGeometry>;

  /// Pose-keyed memo. Plain and gradient geometries occupy separate slots: a
  /// plain build may route on-lattice shots through the exact FFT, which a
  /// gradient build never does, so one must never substitute for the other.
  std::shared_ptr<const ShotList> prepare_shots(const MotionParams &motion,
                                                bool with_gradient) const;
  /// Coefficient-keyed memo of the evaluated per-coil sensitivity maps.
  std::shared_ptr<const std::vector<ComplexGrid>> coil_maps(const PolyCoeffs &coeffs) const;
  std::vector<ComplexGrid> coil_images(const ComplexGrid &x,
                                       const PolyCoeffs &coeffs) const;
  void forward_into(const std::vector<ComplexGrid> &coil_imgs,
                    const ShotList &shots, Measurements &out) const;
  /// Per-coil adjoint images NUFFT^H{conj(phase) * v_i} without coil weights.
  std::vector<ComplexGrid> backproject(const Measurements &v,
                                       const ShotList &shots) const;
  MotionGrad grad_m_analytic(const Measurements &y, const ComplexGrid &x,
                             const MotionParams &motion, const PolyCoeffs &coeffs,
                             double sigma) const;
  MotionGrad grad_m_fd(const Measurements &y, const ComplexGrid &x,
                       const MotionParams &motion, const PolyCoeffs &coeffs,
                       double sigma) const;

  AcquisitionPlan plan_;
  int num_coils_;
  int csm_order_;
  ForwardModelOptions options_;
  NufftPlan nufft_;
  KCoords nominal_coords_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> shot_slices_;
  std::shared_ptr<const Eigen::MatrixXd> basis_;

  // memo slots (geometry: [0] plain, [1] gradient), keyed on exact values
  mutable std::array<MotionParams, 2> geom_key_;
  mutable std::array<std::shared_ptr<const ShotList>, 2> geom_slot_;
  mutable std::vector<double> maps_key_;
  mutable std::shared_ptr<const std::vector<ComplexGrid>> maps_slot_;
};

/// One-shot conveniences constructing a transient ForwardModel.
ForwardOutputs forward(const ComplexGrid &x, const MotionParams &motion,
                       const PolyCoeffs &coeffs, const AcquisitionPlan &plan,
                       const ForwardModelOptions &options = {});
ComplexGrid adjoint_x(const Measurements &y, const MotionParams &motion,
                      const PolyCoeffs &coeffs, const AcquisitionPlan &plan,
                      const ForwardModelOptions &options = {});

} // namespace jsmoco
