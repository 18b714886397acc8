#include "jsmoco/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <vector>

#include "jsmoco/io.hpp"
#include "jsmoco/metrics.hpp"
#include "jsmoco/nufft.hpp"
#include "jsmoco/version.hpp"

namespace jsmoco {

namespace {

using nlohmann::json;

void reject_unknown(const json &j, const std::set<std::string> &allowed,
                    const std::string &where) {
  if (!j.is_object()) throw ConfigError(where + ": config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.contains(it.key()))
      throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

template <typename T>
T require(const json &j, const std::string &key, const std::string &where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json &j, const std::string &key, T fallback, const std::string &where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

std::string run_id_of(const std::filesystem::path &run_dir) {
  auto name = run_dir.filename().string();
  if (name.empty()) name = run_dir.parent_path().filename().string();
  return name.empty() ? std::string("run") : name;
}

json coeff_count_block(int num_coils, int order) {
  const int per_part = PolyCoeffs::basis_size(order);
  json block;
  block["order"] = order;
  block["num_coils"] = num_coils;
  block["basis_per_part"] = per_part;
  block["coeff_count"] = 2 * num_coils * per_part;
  block["coeff_count_note"] =
      "2*c*(N+1)^2 real coefficients: each of the c coils has separate real and "
      "imaginary blocks over the (N+1)^2 monomials x^p y^q with 0 <= p, q <= N; "
      "a 2*c*N^2 count would drop the exponent-N row and column of each block";
  return block;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int report_config_error(const std::exception &e) {
  std::cerr << "error: " << e.what() << "\n";
  return kExitConfig;
}

} // namespace

SimConfig parse_sim_config(const json &j) {
  const std::string where = "simulate config";
  reject_unknown(j,
                 {"height", "width", "num_coils", "num_shots", "accel", "acs_lines",
                  "scheme", "ordering", "csm_order", "k_theta_deg", "k_t_px",
                  "noise_sigma", "phase_strength", "direct_dft", "seed"},
                 where);
  SimConfig c;
  c.height = require<int>(j, "height", where);
  c.width = require<int>(j, "width", where);
  c.num_coils = require<int>(j, "num_coils", where);
  c.num_shots = require<int>(j, "num_shots", where);
  c.accel = require<double>(j, "accel", where);
  c.seed = require<std::uint64_t>(j, "seed", where);
  c.acs_lines = get_or<int>(j, "acs_lines", c.acs_lines, where);
  c.scheme = get_or<std::string>(j, "scheme", c.scheme, where);
  c.ordering = get_or<std::string>(j, "ordering", c.ordering, where);
  c.csm_order = get_or<int>(j, "csm_order", c.csm_order, where);
  c.k_theta_deg = get_or<double>(j, "k_theta_deg", c.k_theta_deg, where);
  c.k_t_px = get_or<double>(j, "k_t_px", c.k_t_px, where);
  c.noise_sigma = get_or<double>(j, "noise_sigma", c.noise_sigma, where);
  c.phase_strength = get_or<double>(j, "phase_strength", c.phase_strength, where);
  c.direct_dft = get_or<bool>(j, "direct_dft", c.direct_dft, where);
  if (c.scheme != "equispaced" && c.scheme != "random-lines")
    throw ConfigError(where + ": field 'scheme' must be 'equispaced' or 'random-lines'");
  if (c.ordering != "sequential" && c.ordering != "interleaved")
    throw ConfigError(where + ": field 'ordering' must be 'sequential' or 'interleaved'");
  return c;
}

json sim_config_json(const SimConfig &c) {
  json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["num_coils"] = c.num_coils;
  j["num_shots"] = c.num_shots;
  j["accel"] = c.accel;
  j["acs_lines"] = c.acs_lines;
  j["scheme"] = c.scheme;
  j["ordering"] = c.ordering;
  j["csm_order"] = c.csm_order;
  j["k_theta_deg"] = c.k_theta_deg;
  j["k_t_px"] = c.k_t_px;
  j["noise_sigma"] = c.noise_sigma;
  j["phase_strength"] = c.phase_strength;
  j["direct_dft"] = c.direct_dft;
  j["seed"] = c.seed;
  return j;
}

ReconConfig parse_recon_config(const json &j) {
  const std::string where = "recon config";
  reject_unknown(j,
                 {"sigma_min", "sigma_max", "num_steps", "inner_loops", "eps_x",
                  "dynamic_range", "eps_m", "eps_phi", "sigma_noise", "sigma_m_init",
                  "sigma_phi_init", "csm_order", "phi_prior_std", "seed", "gauge_fix",
                  "trace_every", "prior", "prior_alpha", "prior_rho", "prior_command",
                  "translation_phase", "motion_gradients"},
                 where);
  ReconConfig c;
  SamplerConfig &s = c.sampler;
  s.sigma_min = get_or<double>(j, "sigma_min", s.sigma_min, where);
  s.sigma_max = get_or<double>(j, "sigma_max", s.sigma_max, where);
  s.num_steps = get_or<int>(j, "num_steps", s.num_steps, where);
  s.inner_loops = get_or<int>(j, "inner_loops", s.inner_loops, where);
  s.eps_x = get_or<double>(j, "eps_x", s.eps_x, where);
  s.dynamic_range = get_or<double>(j, "dynamic_range", s.dynamic_range, where);
  s.eps_m = get_or<double>(j, "eps_m", s.eps_m, where);
  s.eps_phi = get_or<double>(j, "eps_phi", s.eps_phi, where);
  s.sigma_noise = get_or<double>(j, "sigma_noise", s.sigma_noise, where);
  s.sigma_m_init = get_or<double>(j, "sigma_m_init", s.sigma_m_init, where);
  s.sigma_phi_init = get_or<double>(j, "sigma_phi_init", s.sigma_phi_init, where);
  s.csm_order = get_or<int>(j, "csm_order", s.csm_order, where);
  s.phi_prior_std = get_or<double>(j, "phi_prior_std", s.phi_prior_std, where);
  s.seed.value = get_or<std::uint64_t>(j, "seed", s.seed.value, where);
  s.gauge_fix = get_or<bool>(j, "gauge_fix", s.gauge_fix, where);
  s.trace_every = get_or<int>(j, "trace_every", s.trace_every, where);

  const std::string phase = get_or<std::string>(j, "translation_phase", "nominal", where);
  if (phase == "nominal")
    s.model.translation_phase = TranslationPhase::nominal;
  else if (phase == "rotated")
    s.model.translation_phase = TranslationPhase::rotated;
  else
    throw ConfigError(where + ": field 'translation_phase' must be 'nominal' or 'rotated'");

  const std::string grads = get_or<std::string>(j, "motion_gradients", "analytic", where);
  if (grads == "analytic")
    s.model.motion_gradients = GradMode::analytic;
  else if (grads == "fd")
    s.model.motion_gradients = GradMode::finite_difference;
  else
    throw ConfigError(where + ": field 'motion_gradients' must be 'analytic' or 'fd'");

  c.prior = get_or<std::string>(j, "prior", c.prior, where);
  c.prior_alpha = get_or<double>(j, "prior_alpha", c.prior_alpha, where);
  c.prior_rho = get_or<double>(j, "prior_rho", c.prior_rho, where);
  c.prior_command = get_or<std::string>(j, "prior_command", c.prior_command, where);
  if (c.prior != "smoothness" && c.prior != "denoiser" && c.prior != "external")
    throw ConfigError(where + ": field 'prior' must be 'smoothness', 'denoiser' or 'external'");
  if (c.prior == "external" && c.prior_command.empty())
    throw ConfigError(where + ": prior 'external' requires field 'prior_command'");
  return c;
}

json recon_config_json(const ReconConfig &c) {
  const SamplerConfig &s = c.sampler;
  json j;
  j["sigma_min"] = s.sigma_min;
  j["sigma_max"] = s.sigma_max;
  j["num_steps"] = s.num_steps;
  j["inner_loops"] = s.inner_loops;
  j["eps_x"] = s.eps_x;
  j["dynamic_range"] = s.dynamic_range;
  j["eps_m"] = s.eps_m;
  j["eps_phi"] = s.eps_phi;
  j["sigma_noise"] = s.sigma_noise;
  j["sigma_m_init"] = s.sigma_m_init;
  j["sigma_phi_init"] = s.sigma_phi_init;
  j["csm_order"] = s.csm_order;
  j["phi_prior_std"] = s.phi_prior_std;
  j["seed"] = s.seed.value;
  j["gauge_fix"] = s.gauge_fix;
  j["trace_every"] = s.trace_every;
  j["translation_phase"] =
      s.model.translation_phase == TranslationPhase::nominal ? "nominal" : "rotated";
  j["motion_gradients"] =
      s.model.motion_gradients == GradMode::analytic ? "analytic" : "fd";
  j["prior"] = c.prior;
  j["prior_alpha"] = c.prior_alpha;
  j["prior_rho"] = c.prior_rho;
  j["prior_command"] = c.prior_command;
  return j;
}

std::optional<ReconMode> parse_recon_mode(const std::string &name) {
  if (name == "joint") return ReconMode::joint;
  if (name == "fixed-csm") return ReconMode::fixed_csm;
  if (name == "fixed-motion") return ReconMode::fixed_motion;
  if (name == "zero-fill") return ReconMode::zero_fill;
  return std::nullopt;
}

std::string recon_mode_name(ReconMode mode) {
  switch (mode) {
    case ReconMode::joint: return "joint";
    case ReconMode::fixed_csm: return "fixed-csm";
    case ReconMode::fixed_motion: return "fixed-motion";
    case ReconMode::zero_fill: return "zero-fill";
  }
  return "joint";
}

int cmd_simulate(const std::filesystem::path &config_path,
                 const std::filesystem::path &run_dir, bool force) {
  try {
    const SimConfig cfg = parse_sim_config(io::load_json(config_path));

    const auto manifest_path = run_dir / "manifest.json";
    if (std::filesystem::exists(manifest_path) && !force)
      throw ConfigError(manifest_path.string() + " exists; pass --force to overwrite");
    std::filesystem::create_directories(run_dir);

    const SampleScheme scheme =
        cfg.scheme == "equispaced" ? SampleScheme::equispaced : SampleScheme::random_lines;
    const ShotOrdering ordering = cfg.ordering == "sequential" ? ShotOrdering::sequential
                                                               : ShotOrdering::interleaved;
    const RngSeed seed{cfg.seed};
    const AcquisitionPlan plan = make_plan(cfg.height, cfg.width, cfg.accel, cfg.acs_lines,
                                           cfg.num_shots, scheme, ordering, seed);
    const ComplexGrid x = shepp_logan(cfg.height, cfg.width, cfg.phase_strength);
    const SynthCsm csm = synth_csm(cfg.num_coils, cfg.height, cfg.width, cfg.csm_order, seed);
    const MotionParams motion = draw_motion(cfg.num_shots, cfg.k_theta_deg, cfg.k_t_px, seed);
    SimulateOptions sim_opts;
    sim_opts.noise_sigma = cfg.noise_sigma;
    sim_opts.direct_dft = cfg.direct_dft;
    const Measurements y = simulate_acquisition(x, csm.coeffs, motion, plan, seed, sim_opts);

    io::save_grid(x, run_dir / "x_true", "image");
    ComplexGrid stacked(cfg.num_coils * cfg.height, cfg.width);
    for (int i = 0; i < cfg.num_coils; ++i)
      std::copy(csm.maps[i].data().begin(), csm.maps[i].data().end(),
                stacked.data().begin() + static_cast<std::size_t>(i) * cfg.height * cfg.width);
    io::save_grid(stacked, run_dir / "csm_true", "csm",
                  json{{"num_coils", cfg.num_coils}});
    io::save_coeffs(csm.coeffs, run_dir / "phi_true");
    io::save_motion_csv(motion, run_dir / "m_true.csv");
    io::save_plan(plan, run_dir / "plan");
    io::save_measurements(y, run_dir / "y");

    json manifest;
    manifest["version"] = kVersion;
    manifest["command"] = "simulate";
    manifest["run_id"] = run_id_of(run_dir);
    manifest["config"] = sim_config_json(cfg);
    manifest["artifacts"] = {"x_true", "csm_true", "phi_true", "m_true.csv", "plan", "y"};
    manifest["acquired_lines"] = plan.num_lines();
    manifest["acceleration_achieved"] =
        static_cast<double>(cfg.height) / plan.num_lines();
    manifest["csm"] = coeff_count_block(cfg.num_coils, cfg.csm_order);
    io::save_json(manifest, manifest_path);
    return kExitOk;
  } catch (const ConfigError &e) {
    return report_config_error(e);
  } catch (const io::FormatError &e) {
    return report_config_error(e);
  } catch (const std::invalid_argument &e) {
    return report_config_error(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_recon(const std::filesystem::path &run_dir,
              const std::filesystem::path &config_path, const std::string &mode_name,
              bool force, const CliOverrides &overrides) {
  try {
    const auto mode_opt = parse_recon_mode(mode_name);
    if (!mode_opt)
      throw ConfigError("unknown mode '" + mode_name +
                        "' (expected joint, fixed-csm, fixed-motion or zero-fill)");
    const ReconMode mode = *mode_opt;
    const std::string mode_tag = recon_mode_name(mode);

    if (!std::filesystem::exists(run_dir / "manifest.json"))
      throw ConfigError(run_dir.string() + " does not contain manifest.json; simulate first");
    const AcquisitionPlan plan = io::load_plan(run_dir / "plan");
    const Measurements y = io::load_measurements(run_dir / "y");

    if (mode == ReconMode::zero_fill) {
      const auto out = run_dir / ("x_est_" + mode_tag);
      if (std::filesystem::exists(io::header_path(out)) && !force)
        throw ConfigError(io::header_path(out).string() + " exists; pass --force to overwrite");
      io::save_grid(zero_fill_recon(y, plan), out, "image");
      return kExitOk;
    }

    ReconConfig cfg;
    if (!config_path.empty()) cfg = parse_recon_config(io::load_json(config_path));
    SamplerConfig &s = cfg.sampler;
    if (overrides.seed) s.seed.value = *overrides.seed;
    if (overrides.trace_every) s.trace_every = *overrides.trace_every;
    s.model.threads = overrides.deterministic ? 1 : env_thread_cap();

    if (mode == ReconMode::fixed_csm) {
      PolyCoeffs truth = io::load_coeffs(run_dir / "phi_true");
      s.csm_order = truth.order;
      s.init_csm = std::move(truth);
      s.freeze_csm = true;
    } else if (mode == ReconMode::fixed_motion) {
      s.init_motion = io::load_motion_csv(run_dir / "m_true.csv");
      s.freeze_motion = true;
    }

    const auto manifest_path = run_dir / ("recon_manifest_" + mode_tag + ".json");
    if (std::filesystem::exists(manifest_path) && !force)
      throw ConfigError(manifest_path.string() + " exists; pass --force to overwrite");

    std::unique_ptr<ScorePrior> prior;
    if (cfg.prior == "smoothness")
      prior = make_smoothness_prior(cfg.prior_alpha);
    else if (cfg.prior == "denoiser")
      prior = make_denoiser_surrogate_prior(cfg.prior_rho);
    else
      prior = make_external_process_prior(cfg.prior_command, run_dir / "score_tmp");

    const auto trace_path = run_dir / ("trace_" + mode_tag + ".csv");
    Timer timer;
    SampleResult result;
    try {
      result = sample_joint(y, plan, *prior, s);
    } catch (const DivergenceError &e) {
      e.trace.to_csv(trace_path); // keep the partial trace for diagnosis
      std::cerr << "error: " << e.what() << "\n";
      return kExitDiverged;
    }
    const double wall = timer.seconds();

    io::save_grid(result.x, run_dir / ("x_est_" + mode_tag), "image");
    io::save_motion_csv(result.motion, run_dir / ("m_est_" + mode_tag + ".csv"));
    io::save_coeffs(result.coeffs, run_dir / ("phi_est_" + mode_tag));
    result.trace.to_csv(trace_path);

    json manifest;
    manifest["version"] = kVersion;
    manifest["command"] = "recon";
    manifest["mode"] = mode_tag;
    manifest["run_id"] = run_id_of(run_dir);
    manifest["config"] = recon_config_json(cfg);
    manifest["deterministic"] = overrides.deterministic;
    manifest["threads"] = s.model.threads;
    manifest["prior"] = prior->describe();
    manifest["nufft"] = {{"oversampling", s.model.nufft.oversampling},
                         {"kernel_width", s.model.nufft.kernel_width}};
    manifest["csm"] = coeff_count_block(y.num_coils(), s.csm_order);
    manifest["artifacts"] = {"x_est_" + mode_tag, "m_est_" + mode_tag + ".csv",
                             "phi_est_" + mode_tag, "trace_" + mode_tag + ".csv"};
    io::save_json(manifest, manifest_path);

    // wall time lives outside the manifest so deterministic reruns stay
    // byte-identical on every compared artifact
    io::save_json(json{{"wall_seconds", wall}}, run_dir / ("timing_" + mode_tag + ".json"));
    return kExitOk;
  } catch (const ConfigError &e) {
    return report_config_error(e);
  } catch (const io::FormatError &e) {
    return report_config_error(e);
  } catch (const std::invalid_argument &e) {
    return report_config_error(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_eval(const std::filesystem::path &run_dir) {
  try {
    if (!std::filesystem::exists(run_dir / "manifest.json"))
      throw ConfigError(run_dir.string() + " does not contain manifest.json; simulate first");
    const json manifest = io::load_json(run_dir / "manifest.json");
    const ComplexGrid x_true = io::load_grid(run_dir / "x_true");
    const MotionParams m_true = io::load_motion_csv(run_dir / "m_true.csv");
    const PolyCoeffs phi_true = io::load_coeffs(run_dir / "phi_true");

    const double accel = manifest.at("config").at("accel").get<double>();
    const double k_theta = manifest.at("config").at("k_theta_deg").get<double>();
    const double k_t = manifest.at("config").at("k_t_px").get<double>();

    struct Row {
      std::string mode;
      double psnr_db = 0.0, ssim_v = 0.0, nrmse_v = 0.0;
      std::optional<MotionError> motion;
      std::optional<double> csm_nrmse;
      std::optional<double> runtime_s;
    };
    std::vector<Row> rows;
    std::vector<std::pair<std::string, ComplexGrid>> estimates;

    for (const char *mode : {"joint", "fixed-csm", "fixed-motion", "zero-fill"}) {
      const auto base = run_dir / (std::string("x_est_") + mode);
      if (!std::filesystem::exists(io::header_path(base))) continue;
      Row row;
      row.mode = mode;
      ComplexGrid x_est = io::load_grid(base);
      row.psnr_db = psnr(x_true, x_est);
      row.ssim_v = ssim(x_true, x_est);
      row.nrmse_v = nrmse(x_true, x_est);

      const auto m_path = run_dir / (std::string("m_est_") + mode + ".csv");
      if (std::filesystem::exists(m_path))
        row.motion = motion_error(io::load_motion_csv(m_path), m_true);

      const auto phi_path = run_dir / (std::string("phi_est_") + mode);
      if (std::filesystem::exists(io::header_path(phi_path))) {
        const PolyCoeffs phi_est = io::load_coeffs(phi_path);
        // compare per-pixel maps after putting both sets on the unit-scale
        // gauge; orders may differ between estimate and truth
        const auto ref = eval_csm(
            normalize_csm_gauge(phi_true, x_true.height(), x_true.width()).first,
            x_true.height(), x_true.width());
        const auto est = eval_csm(
            normalize_csm_gauge(phi_est, x_true.height(), x_true.width()).first,
            x_true.height(), x_true.width());
        if (ref.size() == est.size()) {
          std::vector<cplx> ref_flat, est_flat;
          for (std::size_t i = 0; i < ref.size(); ++i) {
            ref_flat.insert(ref_flat.end(), ref[i].data().begin(), ref[i].data().end());
            est_flat.insert(est_flat.end(), est[i].data().begin(), est[i].data().end());
          }
          row.csm_nrmse = nrmse(std::span<const cplx>(ref_flat),
                                std::span<const cplx>(est_flat));
        }
      }

      const auto timing_path = run_dir / (std::string("timing_") + mode + ".json");
      if (std::filesystem::exists(timing_path))
        row.runtime_s = io::load_json(timing_path).at("wall_seconds").get<double>();

      estimates.emplace_back(mode, std::move(x_est));
      rows.push_back(std::move(row));
    }

    if (rows.empty())
      throw ConfigError(run_dir.string() + " has no reconstruction outputs to evaluate");

    std::ofstream out(run_dir / "metrics.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write metrics.csv");
    const std::string run_id = manifest.at("run_id").get<std::string>();
    out.precision(10);
    out << "run_id,mode,psnr_db,ssim,nrmse,motion_rmse_theta_deg,motion_rmse_t_px,"
           "csm_nrmse,accel,k_theta_deg,k_t_px,runtime_s\n";
    for (const Row &row : rows) {
      out << run_id << "," << row.mode << "," << row.psnr_db << "," << row.ssim_v << ","
          << row.nrmse_v << ",";
      if (row.motion) out << row.motion->rmse_theta_deg;
      out << ",";
      if (row.motion) out << row.motion->rmse_translation_px;
      out << ",";
      if (row.csm_nrmse) out << *row.csm_nrmse;
      out << "," << accel << "," << k_theta << "," << k_t << ",";
      if (row.runtime_s) out << *row.runtime_s;
      out << "\n";
    }
    out.close();

    // centre-line magnitude profiles for quick visual comparison
    const int h = x_true.height();
    const int w = x_true.width();
    for (const bool along_row : {true, false}) {
      const auto path = run_dir / (along_row ? "profiles_row.csv" : "profiles_col.csv");
      std::ofstream prof(path, std::ios::trunc);
      if (!prof) throw std::runtime_error("cannot write " + path.string());
      prof.precision(10);
      prof << "index,true";
      for (const auto &[mode, grid] : estimates) prof << "," << mode;
      prof << "\n";
      const int n = along_row ? w : h;
      for (int k = 0; k < n; ++k) {
        prof << k << ","
             << std::abs(along_row ? x_true(h / 2, k) : x_true(k, w / 2));
        for (const auto &[mode, grid] : estimates)
          prof << "," << std::abs(along_row ? grid(h / 2, k) : grid(k, w / 2));
        prof << "\n";
      }
    }
    return kExitOk;
  } catch (const ConfigError &e) {
    return report_config_error(e);
  } catch (const io::FormatError &e) {
    return report_config_error(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_selftest(bool perturb_adjoint) {
  struct Check {
    std::string name;
    double rel = 0.0;
    double tol = 0.0;
  };
  std::vector<Check> checks;
  const RngSeed seed{20240915};

  try {
    // transform round trip and energy preservation
    {
      std::mt19937_64 rng = make_rng(seed, 1);
      std::normal_distribution<double> normal(0.0, 1.0);
      ComplexGrid x(16, 16);
      for (cplx &v : x.data()) v = cplx(normal(rng), normal(rng));
      const ComplexGrid rt = ifft2_centered(fft2_centered(x));
      checks.push_back({"fft_round_trip", nrmse(x, rt), 1e-10});
      const ComplexGrid k = fft2_centered(x);
      checks.push_back(
          {"fft_parseval", std::abs(norm2(k) - norm2(x)) / norm2(x), 1e-10});
    }

    // gridded transform against the brute-force reference
    {
      std::mt19937_64 rng = make_rng(seed, 2);
      std::normal_distribution<double> normal(0.0, 1.0);
      ComplexGrid x(24, 24);
      for (cplx &v : x.data()) v = cplx(normal(rng), normal(rng));
      const KCoords coords = rotate_coords(cartesian_coords(24, 24), 0.31);
      const auto fast = nufft_forward(x, coords);
      const auto exact = dft_direct(x, coords);
      checks.push_back({"nufft_vs_direct_dft",
                        nrmse(std::span<const cplx>(exact), std::span<const cplx>(fast)),
                        1e-5});

      // adjoint identity <Ax, y> == <x, A^H y>
      std::vector<cplx> ysamp(coords.size());
      for (cplx &v : ysamp) v = cplx(normal(rng), normal(rng));
      ComplexGrid back = nufft_adjoint(ysamp, coords, 24, 24);
      if (perturb_adjoint) back *= 1.001; // deliberate fault for the selftest test
      const cplx lhs = vdot(std::span<const cplx>(ysamp), std::span<const cplx>(fast));
      const cplx rhs = vdot(back, x);
      checks.push_back({"nufft_adjoint_identity", std::abs(lhs - rhs) / std::abs(lhs), 1e-10});
    }

    // full operator adjoint and gradient probes on a small joint instance
    {
      const AcquisitionPlan plan = make_plan(16, 16, 2.0, 4, 2, SampleScheme::equispaced,
                                             ShotOrdering::sequential, seed);
      std::mt19937_64 rng = make_rng(seed, 3);
      std::normal_distribution<double> normal(0.0, 1.0);
      ComplexGrid x(16, 16);
      for (cplx &v : x.data()) v = cplx(normal(rng), normal(rng));
      const SynthCsm csm = synth_csm(2, 16, 16, 2, seed);
      MotionParams motion = MotionParams::identity(2);
      motion.rotations[1] = 0.035;
      motion.translations[1] = {0.4, -0.3};

      const ForwardModel model(plan, 2, 2, {});
      const auto fwd = model.forward(x, motion, csm.coeffs);
      Measurements y(2, plan.num_samples());
      for (cplx &v : y.flat()) v = cplx(normal(rng), normal(rng));
      ComplexGrid back = model.adjoint_x(y, motion, csm.coeffs);
      if (perturb_adjoint) back *= 1.001;
      const cplx lhs = vdot(y.flat(), fwd.predicted.flat());
      const cplx rhs = vdot(back, x);
      checks.push_back({"forward_adjoint_identity", std::abs(lhs - rhs) / std::abs(lhs), 1e-10});

      // x-gradient against a central difference of the data term
      const double sigma = 0.7;
      const ComplexGrid gx = model.grad_x_data(y, x, motion, csm.coeffs, 0.0, sigma);
      auto loss = [&](const ComplexGrid &img) {
        const Measurements r = y - model.forward(img, motion, csm.coeffs).predicted;
        const double n = norm2(r);
        return -n * n / (2.0 * sigma * sigma);
      };
      const double h = 1e-5;
      double max_rel = 0.0;
      std::mt19937_64 pick = make_rng(seed, 4);
      std::uniform_int_distribution<std::size_t> pixel(0, x.size() - 1);
      for (int probe = 0; probe < 4; ++probe) {
        const std::size_t k = pixel(pick);
        for (const bool real_part : {true, false}) {
          ComplexGrid xp = x;
          ComplexGrid xm = x;
          const cplx delta = real_part ? cplx(h, 0.0) : cplx(0.0, h);
          xp.data()[k] += delta;
          xm.data()[k] -= delta;
          const double fd = (loss(xp) - loss(xm)) / (2.0 * h);
          const double an = real_part ? gx.data()[k].real() : gx.data()[k].imag();
          max_rel = std::max(max_rel, std::abs(fd - an) / std::max(1e-12, std::abs(fd)));
        }
      }
      checks.push_back({"grad_x_fd", max_rel, 1e-4});

      // analytic motion gradient against the built-in finite-difference path
      const MotionGrad ga = model.grad_m_data(y, x, motion, csm.coeffs, sigma);
      ForwardModelOptions fd_opts;
      fd_opts.motion_gradients = GradMode::finite_difference;
      const ForwardModel fd_model(plan, 2, 2, fd_opts);
      const MotionGrad gf = fd_model.grad_m_data(y, x, motion, csm.coeffs, sigma);
      double num = 0.0;
      double den = 0.0;
      for (int j = 0; j < 2; ++j) {
        num += (ga.d_theta[j] - gf.d_theta[j]) * (ga.d_theta[j] - gf.d_theta[j]);
        den += gf.d_theta[j] * gf.d_theta[j];
        for (int c = 0; c < 2; ++c) {
          num += (ga.d_translation[j][c] - gf.d_translation[j][c]) *
                 (ga.d_translation[j][c] - gf.d_translation[j][c]);
          den += gf.d_translation[j][c] * gf.d_translation[j][c];
        }
      }
      checks.push_back({"grad_m_fd", std::sqrt(num / den), 1e-4});

      // coefficient gradient against a central difference
      const PolyCoeffs gphi = model.grad_phi_data(y, x, motion, csm.coeffs, sigma);
      auto loss_phi = [&](const PolyCoeffs &c) {
        const Measurements r = y - model.forward(x, motion, c).predicted;
        const double n = norm2(r);
        return -n * n / (2.0 * sigma * sigma);
      };
      double max_rel_phi = 0.0;
      std::mt19937_64 pick_phi = make_rng(seed, 5);
      std::uniform_int_distribution<std::size_t> slot(0, csm.coeffs.values.size() - 1);
      for (int probe = 0; probe < 6; ++probe) {
        const std::size_t k = slot(pick_phi);
        PolyCoeffs cp = csm.coeffs;
        PolyCoeffs cm = csm.coeffs;
        cp.values[k] += h;
        cm.values[k] -= h;
        const double fd = (loss_phi(cp) - loss_phi(cm)) / (2.0 * h);
        max_rel_phi = std::max(max_rel_phi,
                               std::abs(fd - gphi.values[k]) / std::max(1e-12, std::abs(fd)));
      }
      checks.push_back({"grad_phi_fd", max_rel_phi, 1e-4});
    }
  } catch (const std::exception &e) {
    std::cerr << "selftest aborted: " << e.what() << "\n";
    return kExitCheckFailed;
  }

  bool ok = true;
  for (const Check &c : checks) {
    const bool pass = c.rel <= c.tol;
    ok = ok && pass;
    std::printf("check %-26s rel_err=%10.3e tol=%8.1e %s\n", c.name.c_str(), c.rel, c.tol,
                pass ? "PASS" : "FAIL");
  }
  return ok ? kExitOk : kExitCheckFailed;
}

} // namespace jsmoco
