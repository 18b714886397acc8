#include "jsmoco/sampler.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace jsmoco {

void langevin_step(std::span<double> value, std::span<const double> score,
                   double lambda, std::mt19937_64 &rng, bool inject_noise) {
  if (value.size() != score.size())
    throw std::invalid_argument("langevin_step: value/score size mismatch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("langevin_step: lambda must be >= 0");
  const double noise_scale = std::sqrt(2.0 * lambda);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double z = inject_noise ? normal(rng) : 0.0;
    value[i] += lambda * score[i] + noise_scale * z;
  }
}

ComplexGrid langevin_step(const ComplexGrid &value, const ComplexGrid &score,
                          double lambda, std::mt19937_64 &rng, bool inject_noise) {
  if (!value.same_shape(score))
    throw std::invalid_argument("langevin_step: value/score shape mismatch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("langevin_step: lambda must be >= 0");
  const double noise_scale = std::sqrt(2.0 * lambda);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexGrid out = value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double zr = inject_noise ? normal(rng) : 0.0;
    const double zi = inject_noise ? normal(rng) : 0.0;
    out.data()[i] += lambda * score.data()[i] + noise_scale * cplx(zr, zi);
  }
  return out;
}

void SamplerTrace::to_csv(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("trace: cannot write " + path.string());
  const int J = rows.empty() ? 0 : static_cast<int>(rows.front().theta.size());
  out << "step,t,inner,sigma,residual";
  for (int j = 0; j < J; ++j) out << ",theta_" << j;
  for (int j = 0; j < J; ++j) out << ",tx_" << j << ",ty_" << j;
  out << ",phi_norm\n";
  out.precision(17);
  for (const TraceRow &row : rows) {
    out << row.step << "," << row.t << "," << row.inner << "," << row.sigma << ","
        << row.residual;
    for (double v : row.theta) out << "," << v;
    for (const auto &t : row.translation) out << "," << t[0] << "," << t[1];
    out << "," << row.phi_norm << "\n";
  }
  if (!out) throw std::runtime_error("trace: failed writing " + path.string());
}

namespace {

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void validate_config(const Measurements &y, const AcquisitionPlan &plan,
                     const SamplerConfig &cfg) {
  plan.validate();
  if (y.num_coils() < 1)
    throw std::invalid_argument("sample_joint: need at least one coil");
  if (y.samples_per_coil() != plan.num_samples())
    throw std::invalid_argument("sample_joint: measurement size does not match the plan");
  if (cfg.num_steps < 1) throw std::invalid_argument("sample_joint: num_steps must be >= 1");
  if (cfg.inner_loops < 1)
    throw std::invalid_argument("sample_joint: inner_loops must be >= 1");
  if (cfg.trace_every < 1)
    throw std::invalid_argument("sample_joint: trace_every must be >= 1");
  if (cfg.csm_order < 0) throw std::invalid_argument("sample_joint: csm_order must be >= 0");
  if (!(cfg.eps_x >= 0.0 && cfg.eps_m >= 0.0 && cfg.eps_phi >= 0.0))
    throw std::invalid_argument("sample_joint: step scales must be >= 0");
  if (!(cfg.sigma_noise >= 0.0))
    throw std::invalid_argument("sample_joint: sigma_noise must be >= 0");
  if (cfg.freeze_motion && !cfg.init_motion)
    throw std::invalid_argument("sample_joint: freeze_motion requires init_motion");
  if (cfg.freeze_csm && !cfg.init_csm)
    throw std::invalid_argument("sample_joint: freeze_csm requires init_csm");
  if (cfg.init_motion && cfg.init_motion->num_shots() != plan.num_shots)
    throw std::invalid_argument("sample_joint: init_motion shot count mismatch");
  if (cfg.init_csm && (cfg.init_csm->num_coils != y.num_coils() ||
                       cfg.init_csm->order != cfg.csm_order))
    throw std::invalid_argument("sample_joint: init_csm does not match coils/order");
}

} // namespace

SampleResult sample_joint(const Measurements &y, const AcquisitionPlan &plan,
                          const ScorePrior &prior, const SamplerConfig &cfg) {
  validate_config(y, plan, cfg);

  const int h = plan.height;
  const int w = plan.width;
  const int J = plan.num_shots;

  ForwardModelOptions model_opts = cfg.model;
  if (model_opts.threads < 1) model_opts.threads = 1;
  const ForwardModel model(plan, y.num_coils(), cfg.csm_order, model_opts);
  const NoiseSchedule sched = ve_schedule(cfg.sigma_min, cfg.sigma_max, cfg.num_steps);

  auto rng_x_init = make_rng(cfg.seed, 1);
  auto rng_m_init = make_rng(cfg.seed, 2);
  auto rng_phi_init = make_rng(cfg.seed, 3);
  auto rng_x = make_rng(cfg.seed, 4);
  auto rng_m = make_rng(cfg.seed, 5);
  auto rng_phi = make_rng(cfg.seed, 6);
  std::normal_distribution<double> normal(0.0, 1.0);

  // x_T ~ N(0, sigma_max^2) per real component
  ComplexGrid x(h, w);
  for (std::size_t k = 0; k < x.size(); ++k)
    x.data()[k] = cfg.sigma_max * cplx(normal(rng_x_init), normal(rng_x_init));

  MotionParams motion;
  if (cfg.init_motion) {
    motion = *cfg.init_motion;
  } else {
    motion = MotionParams::identity(J);
    for (int j = 0; j < J; ++j) {
      motion.rotations[j] = cfg.sigma_m_init * normal(rng_m_init);
      motion.translations[j][0] = cfg.sigma_m_init * normal(rng_m_init);
      motion.translations[j][1] = cfg.sigma_m_init * normal(rng_m_init);
    }
  }
  if (cfg.gauge_fix && !cfg.freeze_motion) {
    motion.rotations[0] = 0.0;
    motion.translations[0] = {0.0, 0.0};
  }

  PolyCoeffs coeffs;
  if (cfg.init_csm) {
    coeffs = *cfg.init_csm;
  } else {
    coeffs = PolyCoeffs::zeros(y.num_coils(), cfg.csm_order);
    for (double &v : coeffs.values) v = cfg.sigma_phi_init * normal(rng_phi_init);
    if (cfg.gauge_fix && !cfg.freeze_csm) {
      // bring the random draw onto the gauge once, without touching x: the
      // image is still pure noise, so no counter-scaling is meaningful here
      coeffs = normalize_csm_gauge(coeffs, h, w).first;
      coeffs = canonical_csm_phase(coeffs, h, w).first;
    }
  }

  SamplerTrace trace;
  const int T = sched.steps();
  const int total = T * cfg.inner_loops;
  const double sigma_first = sched.sigmas.front();
  const double sigma_last = sched.sigmas.back();
  double residual0 = -1.0;
  int sweep = 0;

  std::vector<double> m_flat(3 * J), m_score(3 * J);
  for (int ti = 0; ti < T; ++ti) {
    const double sigma_t = sched.sigmas[ti];
    const double gamma_t = sigma_t; // posterior perturbation tracks the schedule
    const double denom = gamma_t * gamma_t + cfg.sigma_noise * cfg.sigma_noise;
    const double sigma_eff = std::sqrt(denom);
    const double lambda_x = cfg.eps_x * cfg.dynamic_range * cfg.dynamic_range *
                            (sigma_t * sigma_t) / (sigma_last * sigma_last);
    const double lambda_m = cfg.eps_m * sigma_t / sigma_first;
    const double lambda_phi = cfg.eps_phi * sigma_t / sigma_first;

    for (int n = 1; n <= cfg.inner_loops; ++n) {
      const Measurements residual = y - model.forward(x, motion, coeffs).predicted;
      const double res_sq = norm2(residual) * norm2(residual);
      if (!std::isfinite(res_sq))
        throw DivergenceError("sample_joint: non-finite residual at t=" +
                                  std::to_string(T - 1 - ti) + " n=" + std::to_string(n),
                              trace);
      if (residual0 < 0.0) residual0 = (res_sq > 0.0) ? res_sq : 1.0;
      if (res_sq > 1e6 * residual0)
        throw DivergenceError(
            "sample_joint: residual " + std::to_string(res_sq) + " exceeds 1e6 x initial " +
                std::to_string(residual0) + " at t=" + std::to_string(T - 1 - ti) +
                " n=" + std::to_string(n),
            trace);

      // x block: prior score plus likelihood score
      {
        ComplexGrid gx = model.adjoint_x(residual, motion, coeffs);
        gx *= 1.0 / denom;
        ComplexGrid sx = prior.score(x, sigma_t);
        sx += gx;
        x = langevin_step(x, sx, lambda_x, rng_x);
      }

      // motion block
      if (!cfg.freeze_motion) {
        const MotionGrad gm = model.grad_m_data(y, x, motion, coeffs, sigma_eff);
        for (int j = 0; j < J; ++j) {
          m_flat[j] = motion.rotations[j];
          m_flat[J + 2 * j] = motion.translations[j][0];
          m_flat[J + 2 * j + 1] = motion.translations[j][1];
          m_score[j] = gm.d_theta[j];
          m_score[J + 2 * j] = gm.d_translation[j][0];
          m_score[J + 2 * j + 1] = gm.d_translation[j][1];
        }
        langevin_step(m_flat, m_score, lambda_m, rng_m);
        for (int j = 0; j < J; ++j) {
          motion.rotations[j] = wrap_angle(m_flat[j]);
          motion.translations[j][0] = m_flat[J + 2 * j];
          motion.translations[j][1] = m_flat[J + 2 * j + 1];
        }
        if (cfg.gauge_fix) {
          motion.rotations[0] = 0.0;
          motion.translations[0] = {0.0, 0.0};
        }
      }

      // coefficient block
      if (!cfg.freeze_csm) {
        PolyCoeffs gphi = model.grad_phi_data(y, x, motion, coeffs, sigma_eff);
        if (cfg.phi_prior_std > 0.0) {
          const double inv_var = 1.0 / (cfg.phi_prior_std * cfg.phi_prior_std);
          for (std::size_t k = 0; k < gphi.values.size(); ++k)
            gphi.values[k] -= inv_var * coeffs.values[k];
        }
        langevin_step(coeffs.values, gphi.values, lambda_phi, rng_phi);
        if (cfg.gauge_fix) {
          auto [normed, scale] = normalize_csm_gauge(coeffs, h, w);
          auto [phased, unit] = canonical_csm_phase(normed, h, w);
          coeffs = std::move(phased);
          x *= std::conj(unit) / scale; // keep S_i * x invariant
        }
      }

      ++sweep;
      if ((sweep - 1) % cfg.trace_every == 0 || sweep == 1 || sweep == total) {
        TraceRow row;
        row.step = sweep;
        row.t = T - 1 - ti;
        row.inner = n;
        row.sigma = sigma_t;
        row.residual = res_sq; // residual entering this sweep
        row.theta = motion.rotations;
        row.translation = motion.translations;
        row.phi_norm = l2_norm(coeffs.values);
        trace.rows.push_back(std::move(row));
      }
    }
  }

  return {std::move(x), std::move(motion), std::move(coeffs), std::move(trace)};
}

} // namespace jsmoco
