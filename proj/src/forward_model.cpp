#include "jsmoco/forward_model.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace jsmoco {

struct ForwardModel::ShotGeometry {
  double theta = 0.0;
  std::array<double, 2> t{0.0, 0.0};
  std::size_t count = 0;
  KCoords rotated;
  std::optional<std::vector<int>> grid_idx; // set when every sample is on the lattice
  NufftPlan::Stencil stencil;               // built when gridding (or gradients) needed
  std::vector<cplx> phase;                  // translation phase per sample
};

namespace {

void check_shapes(const AcquisitionPlan &plan, int num_coils, int csm_order,
                  const ComplexGrid *x, const MotionParams *motion,
                  const PolyCoeffs *coeffs, const Measurements *y) {
  if (x && (x->height() != plan.height || x->width() != plan.width))
    throw std::invalid_argument("forward model: image shape does not match the plan");
  if (motion && motion->num_shots() != plan.num_shots)
    throw std::invalid_argument("forward model: motion shot count does not match the plan");
  if (motion && motion->translations.size() != motion->rotations.size())
    throw std::invalid_argument("forward model: motion blocks disagree on shot count");
  if (coeffs && coeffs->num_coils != num_coils)
    throw std::invalid_argument("forward model: coefficient coil count mismatch");
  if (coeffs && coeffs->order != csm_order)
    throw std::invalid_argument("forward model: coefficient order mismatch");
  if (y && (y->num_coils() != num_coils || y->samples_per_coil() != plan.num_samples()))
    throw std::invalid_argument("forward model: measurement shape does not match the plan");
}

} // namespace

ForwardModel::ForwardModel(AcquisitionPlan plan, int num_coils, int csm_order,
                           ForwardModelOptions options)
    : plan_(std::move(plan)), num_coils_(num_coils), csm_order_(csm_order),
      options_(options), nufft_(plan_.height, plan_.width, options.nufft) {
  plan_.validate();
  if (num_coils_ <= 0) throw std::invalid_argument("forward model: need at least one coil");
  if (csm_order_ < 0) throw std::invalid_argument("forward model: order must be non-negative");
  if (options_.threads < 1) options_.threads = 1;
  nominal_coords_ = plan_.sample_coords();
  shot_slices_ = plan_.shot_slices();
  basis_ = csm_basis_cached(plan_.height, plan_.width, csm_order_);
}

std::shared_ptr<const ForwardModel::ShotList>
ForwardModel::prepare_shots(const MotionParams &motion, bool with_gradient) const {
  const int slot = with_gradient ? 1 : 0;
  if (geom_slot_[slot] && geom_key_[slot].rotations == motion.rotations &&
      geom_key_[slot].translations == motion.translations)
    return geom_slot_[slot];

  auto shots = std::make_shared<ShotList>(plan_.num_shots);
  parallel_for(plan_.num_shots, options_.threads, [&](int j) {
    ShotGeometry &geom = (*shots)[j];
    geom.theta = motion.rotations[j];
    geom.t = motion.translations[j];

    KCoords nominal;
    for (const auto &[start, len] : shot_slices_[j])
      nominal.insert(nominal.end(), nominal_coords_.begin() + start,
                     nominal_coords_.begin() + start + len);
    geom.count = nominal.size();
    geom.rotated = rotate_coords(nominal, geom.theta);

    if (with_gradient) {
      geom.stencil = nufft_.make_stencil(geom.rotated, true);
    } else {
      geom.grid_idx = cartesian_indices(geom.rotated, plan_.height, plan_.width);
      if (!geom.grid_idx) geom.stencil = nufft_.make_stencil(geom.rotated, false);
    }

    const KCoords &phase_coords =
        (options_.translation_phase == TranslationPhase::nominal) ? nominal : geom.rotated;
    geom.phase = translation_phase(phase_coords, geom.t[0], geom.t[1]);
  });
  geom_key_[slot] = motion;
  geom_slot_[slot] = shots;
  return shots;
}

std::shared_ptr<const std::vector<ComplexGrid>>
ForwardModel::coil_maps(const PolyCoeffs &coeffs) const {
  if (maps_slot_ && maps_key_ == coeffs.values) return maps_slot_;
  auto maps = std::make_shared<std::vector<ComplexGrid>>(
      eval_csm(coeffs, plan_.height, plan_.width));
  maps_key_ = coeffs.values;
  maps_slot_ = std::move(maps);
  return maps_slot_;
}

std::vector<ComplexGrid> ForwardModel::coil_images(const ComplexGrid &x,
                                                   const PolyCoeffs &coeffs) const {
  const auto maps = coil_maps(coeffs);
  std::vector<ComplexGrid> imgs;
  imgs.reserve(num_coils_);
  for (int i = 0; i < num_coils_; ++i) {
    ComplexGrid img(plan_.height, plan_.width);
    for (std::size_t k = 0; k < img.size(); ++k)
      img.data()[k] = (*maps)[i].data()[k] * x.data()[k];
    imgs.push_back(std::move(img));
  }
  return imgs;
}

void ForwardModel::forward_into(const std::vector<ComplexGrid> &coil_imgs,
                                const ShotList &shots, Measurements &out) const {
  bool need_os = false;
  bool need_exact = false;
  for (const ShotGeometry &geom : shots)
    (geom.grid_idx ? need_exact : need_os) = true;

  parallel_for(num_coils_, options_.threads, [&](int i) {
    NufftPlan::Spectrum spectrum;
    ComplexGrid kspace;
    if (need_os) spectrum = nufft_.image_to_spectrum(coil_imgs[i]);
    if (need_exact) kspace = fft2_centered(coil_imgs[i]);

    auto dst = out.coil(i);
    std::vector<cplx> values;
    for (int j = 0; j < plan_.num_shots; ++j) {
      const ShotGeometry &geom = shots[j];
      values.resize(geom.count);
      if (geom.grid_idx) {
        for (std::size_t k = 0; k < geom.count; ++k)
          values[k] = kspace.data()[(*geom.grid_idx)[k]];
      } else {
        nufft_.apply(spectrum, geom.stencil, values);
      }
      std::size_t local = 0;
      for (const auto &[start, len] : shot_slices_[j])
        for (std::size_t k = 0; k < len; ++k, ++local)
          dst[start + k] = values[local] * geom.phase[local];
    }
  });
}

std::vector<ComplexGrid> ForwardModel::backproject(const Measurements &v,
                                                   const ShotList &shots) const {
  std::vector<ComplexGrid> images(num_coils_);
  parallel_for(num_coils_, options_.threads, [&](int i) {
    NufftPlan::Spectrum os_accum;
    ComplexGrid exact_accum;
    bool os_used = false;
    bool exact_used = false;

    auto src = v.coil(i);
    std::vector<cplx> chunk;
    for (int j = 0; j < plan_.num_shots; ++j) {
      const ShotGeometry &geom = shots[j];
      chunk.resize(geom.count);
      std::size_t local = 0;
      for (const auto &[start, len] : shot_slices_[j])
        for (std::size_t k = 0; k < len; ++k, ++local)
          chunk[local] = std::conj(geom.phase[local]) * src[start + k];

      if (geom.grid_idx) {
        if (!exact_used) exact_accum = ComplexGrid(plan_.height, plan_.width);
        exact_used = true;
        for (std::size_t k = 0; k < geom.count; ++k)
          exact_accum.data()[(*geom.grid_idx)[k]] += chunk[k];
      } else {
        if (!os_used) os_accum = nufft_.zero_spectrum();
        os_used = true;
        nufft_.apply_transpose(geom.stencil, chunk, os_accum);
      }
    }

    ComplexGrid img(plan_.height, plan_.width);
    if (exact_used) img += ifft2_centered(exact_accum);
    if (os_used) img += nufft_.spectrum_to_image(os_accum);
    images[i] = std::move(img);
  });
  return images;
}

ForwardOutputs ForwardModel::forward(const ComplexGrid &x, const MotionParams &motion,
                                     const PolyCoeffs &coeffs) const {
  check_shapes(plan_, num_coils_, csm_order_, &x, &motion, &coeffs, nullptr);
  const auto shots = prepare_shots(motion, false);
  const auto imgs = coil_images(x, coeffs);
  ForwardOutputs out{Measurements(num_coils_, plan_.num_samples()), shot_slices_};
  forward_into(imgs, *shots, out.predicted);
  return out;
}

ComplexGrid ForwardModel::adjoint_x(const Measurements &y, const MotionParams &motion,
                                    const PolyCoeffs &coeffs) const {
  check_shapes(plan_, num_coils_, csm_order_, nullptr, &motion, &coeffs, &y);
  const auto shots = prepare_shots(motion, false);
  const auto back = backproject(y, *shots);
  const auto maps = coil_maps(coeffs);
  ComplexGrid acc(plan_.height, plan_.width);
  for (int i = 0; i < num_coils_; ++i)
    for (std::size_t k = 0; k < acc.size(); ++k)
      acc.data()[k] += std::conj((*maps)[i].data()[k]) * back[i].data()[k];
  return acc;
}

ComplexGrid ForwardModel::grad_x_data(const Measurements &y, const ComplexGrid &x,
                                      const MotionParams &motion, const PolyCoeffs &coeffs,
                                      double gamma_t, double sigma) const {
  const double denom = gamma_t * gamma_t + sigma * sigma;
  if (!(denom > 0.0))
    throw std::invalid_argument("grad_x_data: gamma_t and sigma cannot both be zero");
  const Measurements residual = y - forward(x, motion, coeffs).predicted;
  ComplexGrid g = adjoint_x(residual, motion, coeffs);
  g *= 1.0 / denom;
  return g;
}

MotionGrad ForwardModel::grad_m_data(const Measurements &y, const ComplexGrid &x,
                                     const MotionParams &motion, const PolyCoeffs &coeffs,
                                     double sigma) const {
  check_shapes(plan_, num_coils_, csm_order_, &x, &motion, &coeffs, &y);
  if (!(sigma > 0.0)) throw std::invalid_argument("grad_m_data: sigma must be positive");
  return (options_.motion_gradients == GradMode::analytic)
             ? grad_m_analytic(y, x, motion, coeffs, sigma)
             : grad_m_fd(y, x, motion, coeffs, sigma);
}

MotionGrad ForwardModel::grad_m_analytic(const Measurements &y, const ComplexGrid &x,
                                         const MotionParams &motion, const PolyCoeffs &coeffs,
                                         double sigma) const {
  const int J = plan_.num_shots;
  const auto shots = prepare_shots(motion, true);
  const auto imgs = coil_images(x, coeffs);
  const bool rotated_phase = options_.translation_phase == TranslationPhase::rotated;

  // per-coil partials, reduced coil-major afterwards so the result does not
  // depend on the thread schedule
  std::vector<std::vector<double>> dtheta(num_coils_, std::vector<double>(J, 0.0));
  std::vector<std::vector<double>> dtx(num_coils_, std::vector<double>(J, 0.0));
  std::vector<std::vector<double>> dty(num_coils_, std::vector<double>(J, 0.0));

  parallel_for(num_coils_, options_.threads, [&](int i) {
    const auto spectrum = nufft_.image_to_spectrum(imgs[i]);
    auto yi = y.coil(i);
    std::vector<cplx> values, d_kx, d_ky;
    for (int j = 0; j < J; ++j) {
      const ShotGeometry &geom = (*shots)[j];
      values.resize(geom.count);
      d_kx.resize(geom.count);
      d_ky.resize(geom.count);
      nufft_.apply(spectrum, geom.stencil, values);
      nufft_.apply_gradient(spectrum, geom.stencil, d_kx, d_ky);

      const double ct = std::cos(geom.theta);
      const double st = std::sin(geom.theta);
      double acc_theta = 0.0;
      double acc_tx = 0.0;
      double acc_ty = 0.0;
      std::size_t local = 0;
      for (const auto &[start, len] : shot_slices_[j]) {
        for (std::size_t k = 0; k < len; ++k, ++local) {
          const KPoint p = nominal_coords_[start + k];
          const double da = -st * p.kx - ct * p.ky; // d(rotated kx)/d(theta)
          const double db = ct * p.kx - st * p.ky;  // d(rotated ky)/d(theta)
          const cplx predicted = values[local] * geom.phase[local];
          const cplx residual = yi[start + k] - predicted;

          cplx dpred_dtheta = (d_kx[local] * da + d_ky[local] * db) * geom.phase[local];
          const KPoint q = rotated_phase ? geom.rotated[local] : p;
          if (rotated_phase) {
            // the phase ramp rides on the rotated coordinates too
            dpred_dtheta += predicted * cplx(0.0, -(geom.t[0] * da + geom.t[1] * db));
          }
          acc_theta += std::real(std::conj(residual) * dpred_dtheta);
          acc_tx += std::real(std::conj(residual) * (predicted * cplx(0.0, -q.kx)));
          acc_ty += std::real(std::conj(residual) * (predicted * cplx(0.0, -q.ky)));
        }
      }
      dtheta[i][j] = acc_theta;
      dtx[i][j] = acc_tx;
      dty[i][j] = acc_ty;
    }
  });

  MotionGrad grad;
  grad.d_theta.assign(J, 0.0);
  grad.d_translation.assign(J, {0.0, 0.0});
  const double weight = 1.0 / (sigma * sigma);
  for (int i = 0; i < num_coils_; ++i)
    for (int j = 0; j < J; ++j) {
      grad.d_theta[j] += weight * dtheta[i][j];
      grad.d_translation[j][0] += weight * dtx[i][j];
      grad.d_translation[j][1] += weight * dty[i][j];
    }
  return grad;
}

MotionGrad ForwardModel::grad_m_fd(const Measurements &y, const ComplexGrid &x,
                                   const MotionParams &motion, const PolyCoeffs &coeffs,
                                   double sigma) const {
  const int J = plan_.num_shots;
  const auto imgs = coil_images(x, coeffs);

  // shared per-coil transforms; both paths may be needed across perturbations
  std::vector<NufftPlan::Spectrum> spectra(num_coils_);
  std::vector<ComplexGrid> kspaces(num_coils_);
  std::vector<bool> have_spectrum(num_coils_, false);
  std::vector<bool> have_kspace(num_coils_, false);

  // squared residual restricted to shot j under a single perturbed shot pose
  auto shot_residual_sq = [&](int j, double theta, double tx, double ty) {
    KCoords nominal;
    for (const auto &[start, len] : shot_slices_[j])
      nominal.insert(nominal.end(), nominal_coords_.begin() + start,
                     nominal_coords_.begin() + start + len);
    const KCoords rotated = rotate_coords(nominal, theta);
    const auto grid_idx = cartesian_indices(rotated, plan_.height, plan_.width);
    NufftPlan::Stencil stencil;
    if (!grid_idx) stencil = nufft_.make_stencil(rotated, false);
    const KCoords &phase_coords =
        (options_.translation_phase == TranslationPhase::nominal) ? nominal : rotated;
    const std::vector<cplx> phase = translation_phase(phase_coords, tx, ty);

    double acc = 0.0;
    std::vector<cplx> values(rotated.size());
    for (int i = 0; i < num_coils_; ++i) {
      if (grid_idx) {
        if (!have_kspace[i]) {
          kspaces[i] = fft2_centered(imgs[i]);
          have_kspace[i] = true;
        }
        for (std::size_t k = 0; k < values.size(); ++k)
          values[k] = kspaces[i].data()[(*grid_idx)[k]];
      } else {
        if (!have_spectrum[i]) {
          spectra[i] = nufft_.image_to_spectrum(imgs[i]);
          have_spectrum[i] = true;
        }
        nufft_.apply(spectra[i], stencil, values);
      }
      auto yi = y.coil(i);
      std::size_t local = 0;
      for (const auto &[start, len] : shot_slices_[j])
        for (std::size_t k = 0; k < len; ++k, ++local)
          acc += std::norm(yi[start + k] - values[local] * phase[local]);
    }
    return acc;
  };

  MotionGrad grad;
  grad.d_theta.assign(J, 0.0);
  grad.d_translation.assign(J, {0.0, 0.0});
  const double weight = -1.0 / (2.0 * sigma * sigma);
  constexpr double h_theta = 1e-4;
  constexpr double h_trans = 1e-3;
  for (int j = 0; j < J; ++j) {
    const double theta = motion.rotations[j];
    const double tx = motion.translations[j][0];
    const double ty = motion.translations[j][1];
    grad.d_theta[j] = weight *
                      (shot_residual_sq(j, theta + h_theta, tx, ty) -
                       shot_residual_sq(j, theta - h_theta, tx, ty)) /
                      (2.0 * h_theta);
    grad.d_translation[j][0] = weight *
                               (shot_residual_sq(j, theta, tx + h_trans, ty) -
                                shot_residual_sq(j, theta, tx - h_trans, ty)) /
                               (2.0 * h_trans);
    grad.d_translation[j][1] = weight *
                               (shot_residual_sq(j, theta, tx, ty + h_trans) -
                                shot_residual_sq(j, theta, tx, ty - h_trans)) /
                               (2.0 * h_trans);
  }
  return grad;
}

PolyCoeffs ForwardModel::grad_phi_data(const Measurements &y, const ComplexGrid &x,
                                       const MotionParams &motion, const PolyCoeffs &coeffs,
                                       double sigma) const {
  check_shapes(plan_, num_coils_, csm_order_, &x, &motion, &coeffs, &y);
  if (!(sigma > 0.0)) throw std::invalid_argument("grad_phi_data: sigma must be positive");

  const Measurements residual = y - forward(x, motion, coeffs).predicted;
  const auto shots = prepare_shots(motion, false);
  const auto back = backproject(residual, *shots);

  const std::size_t npix = static_cast<std::size_t>(plan_.height) * plan_.width;
  const double weight = 1.0 / (sigma * sigma);
  PolyCoeffs grad = PolyCoeffs::zeros(num_coils_, csm_order_);
  Eigen::VectorXd qre(npix), qim(npix);
  for (int i = 0; i < num_coils_; ++i) {
    for (std::size_t k = 0; k < npix; ++k) {
      const cplx q = std::conj(x.data()[k]) * back[i].data()[k];
      qre(static_cast<Eigen::Index>(k)) = q.real();
      qim(static_cast<Eigen::Index>(k)) = q.imag();
    }
    const Eigen::VectorXd gre = basis_->transpose() * qre;
    const Eigen::VectorXd gim = basis_->transpose() * qim;
    auto re = grad.part(i, 0);
    auto im = grad.part(i, 1);
    for (int k = 0; k < grad.basis(); ++k) {
      re[k] = weight * gre(k);
      im[k] = weight * gim(k);
    }
  }
  return grad;
}

ForwardOutputs forward(const ComplexGrid &x, const MotionParams &motion,
                       const PolyCoeffs &coeffs, const AcquisitionPlan &plan,
                       const ForwardModelOptions &options) {
  ForwardModel model(plan, coeffs.num_coils, coeffs.order, options);
  return model.forward(x, motion, coeffs);
}

ComplexGrid adjoint_x(const Measurements &y, const MotionParams &motion,
                      const PolyCoeffs &coeffs, const AcquisitionPlan &plan,
                      const ForwardModelOptions &options) {
  ForwardModel model(plan, coeffs.num_coils, coeffs.order, options);
  return model.adjoint_x(y, motion, coeffs);
}

} // namespace jsmoco
