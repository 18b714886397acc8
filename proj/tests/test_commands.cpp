#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsmoco/commands.hpp"
#include "jsmoco/io.hpp"

using namespace jsmoco;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("jsmoco_cmd_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_json(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  const fs::path p = dir / name;
  io::save_json(j, p);
  return p;
}

nlohmann::json small_sim() {
  return {{"height", 16},   {"width", 16},     {"num_coils", 2}, {"num_shots", 2},
          {"accel", 2.0},   {"acs_lines", 4},  {"csm_order", 2}, {"k_theta_deg", 1.0},
          {"k_t_px", 1.0},  {"seed", 3}};
}

nlohmann::json tiny_recon() {
  return {{"num_steps", 4},  {"inner_loops", 1}, {"eps_x", 1e-6}, {"eps_m", 1e-6},
          {"eps_phi", 1e-7}, {"csm_order", 2},   {"seed", 5}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(JSMOCO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("sim config parsing validates the schema") {
  CHECK(parse_sim_config(small_sim()).height == 16);

  SUBCASE("unknown field") {
    auto j = small_sim();
    j["heigth"] = 32;
    CHECK_THROWS_WITH_AS((void)parse_sim_config(j),
                         doctest::Contains("heigth"), ConfigError);
  }
  SUBCASE("missing required field") {
    auto j = small_sim();
    j.erase("num_coils");
    CHECK_THROWS_WITH_AS((void)parse_sim_config(j),
                         doctest::Contains("num_coils"), ConfigError);
  }
  SUBCASE("wrong type") {
    auto j = small_sim();
    j["height"] = "big";
    CHECK_THROWS_WITH_AS((void)parse_sim_config(j),
                         doctest::Contains("height"), ConfigError);
  }
  SUBCASE("bad enum value") {
    auto j = small_sim();
    j["scheme"] = "spiral";
    CHECK_THROWS_WITH_AS((void)parse_sim_config(j),
                         doctest::Contains("scheme"), ConfigError);
  }
  SUBCASE("round trip through json") {
    const SimConfig c = parse_sim_config(small_sim());
    const SimConfig back = parse_sim_config(sim_config_json(c));
    CHECK(back.height == c.height);
    CHECK(back.accel == c.accel);
    CHECK(back.seed == c.seed);
  }
}

TEST_CASE("recon config parsing validates priors and overrides") {
  const ReconConfig base = parse_recon_config(tiny_recon());
  CHECK(base.sampler.num_steps == 4);
  CHECK(base.prior == "smoothness");

  SUBCASE("external prior requires a command") {
    auto j = tiny_recon();
    j["prior"] = "external";
    CHECK_THROWS_WITH_AS((void)parse_recon_config(j),
                         doctest::Contains("prior_command"), ConfigError);
    j["prior_command"] = "/usr/bin/true";
    CHECK(parse_recon_config(j).prior_command == "/usr/bin/true");
  }
  SUBCASE("unknown prior name") {
    auto j = tiny_recon();
    j["prior"] = "diffusion-v9";
    CHECK_THROWS_AS((void)parse_recon_config(j), ConfigError);
  }
  SUBCASE("unknown field") {
    auto j = tiny_recon();
    j["stepz"] = 1;
    CHECK_THROWS_WITH_AS((void)parse_recon_config(j),
                         doctest::Contains("stepz"), ConfigError);
  }
  SUBCASE("defaults apply when the config is empty") {
    const ReconConfig c = parse_recon_config(nlohmann::json::object());
    CHECK(c.sampler.csm_order == 15); // documented default polynomial order
    CHECK(c.sampler.num_steps == 200);
  }
}

TEST_CASE("recon mode names round trip") {
  for (const auto mode : {ReconMode::joint, ReconMode::fixed_csm, ReconMode::fixed_motion,
                          ReconMode::zero_fill}) {
    const auto parsed = parse_recon_mode(recon_mode_name(mode));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == mode);
  }
  CHECK(!parse_recon_mode("hybrid").has_value());
}

TEST_CASE("simulate writes the documented artifacts and manifest") {
  TempDir dir("sim");
  const fs::path cfg = write_json(dir.path, "sim.json", small_sim());
  const fs::path run = dir.path / "run";
  REQUIRE(cmd_simulate(cfg, run, false) == kExitOk);

  for (const std::string base : {"x_true", "csm_true", "phi_true", "plan", "y"}) {
    CHECK(fs::exists(io::header_path(run / base)));
    CHECK(fs::exists(io::payload_path(run / base)));
  }
  CHECK(fs::exists(run / "m_true.csv"));

  const auto manifest = io::load_json(run / "manifest.json");
  CHECK(manifest.at("command") == "simulate");
  CHECK(manifest.at("config").at("height") == 16);
  // 2 coils, order 2: 2 * 2 * (2+1)^2 real coefficients.
  CHECK(manifest.at("csm").at("coeff_count") == 36);
  CHECK(manifest.at("csm").at("basis_per_part") == 9);
  const std::string note = manifest.at("csm").at("coeff_count_note");
  CHECK(note.find("(N+1)^2") != std::string::npos);
  CHECK(note.find("N^2") != std::string::npos); // explains the would-be undercount

  // Acceleration bookkeeping: 16 lines / accel 2 -> 8 acquired.
  CHECK(manifest.at("acquired_lines") == 8);
  CHECK(manifest.at("acceleration_achieved") == doctest::Approx(2.0));

  // A second run refuses to overwrite without force.
  CHECK(cmd_simulate(cfg, run, false) == kExitConfig);
  CHECK(cmd_simulate(cfg, run, true) == kExitOk);
}

TEST_CASE("recon writes per-mode artifacts and zero fill is minimal") {
  TempDir dir("recon");
  const fs::path cfg = write_json(dir.path, "sim.json", small_sim());
  const fs::path rcfg = write_json(dir.path, "recon.json", tiny_recon());
  const fs::path run = dir.path / "run";
  REQUIRE(cmd_simulate(cfg, run, false) == kExitOk);

  REQUIRE(cmd_recon(run, rcfg, "zero-fill", false, {}) == kExitOk);
  CHECK(fs::exists(io::header_path(run / "x_est_zero-fill")));
  CHECK(!fs::exists(run / "m_est_zero-fill.csv"));
  CHECK(!fs::exists(run / "trace_zero-fill.csv"));

  REQUIRE(cmd_recon(run, rcfg, "joint", false, {}) == kExitOk);
  CHECK(fs::exists(io::header_path(run / "x_est_joint")));
  CHECK(fs::exists(run / "m_est_joint.csv"));
  CHECK(fs::exists(io::header_path(run / "phi_est_joint")));
  CHECK(fs::exists(run / "trace_joint.csv"));
  CHECK(fs::exists(run / "timing_joint.json"));
  const auto rman = io::load_json(run / "recon_manifest_joint.json");
  CHECK(rman.at("mode") == "joint");
  CHECK(rman.at("config").at("num_steps") == 4);

  // Re-running the same mode without force refuses.
  CHECK(cmd_recon(run, rcfg, "joint", false, {}) == kExitConfig);

  // Unknown mode and missing manifest are config errors.
  CHECK(cmd_recon(run, rcfg, "hybrid", false, {}) == kExitConfig);
  CHECK(cmd_recon(dir.path / "nope", rcfg, "joint", false, {}) == kExitConfig);
}

TEST_CASE("eval scores every reconstructed mode into metrics csv") {
  TempDir dir("eval");
  const fs::path cfg = write_json(dir.path, "sim.json", small_sim());
  const fs::path rcfg = write_json(dir.path, "recon.json", tiny_recon());
  const fs::path run = dir.path / "run";
  REQUIRE(cmd_simulate(cfg, run, false) == kExitOk);

  // Eval before any reconstruction is a config error.
  CHECK(cmd_eval(run) == kExitConfig);

  REQUIRE(cmd_recon(run, rcfg, "zero-fill", false, {}) == kExitOk);
  REQUIRE(cmd_recon(run, rcfg, "joint", false, {}) == kExitOk);
  REQUIRE(cmd_eval(run) == kExitOk);

  REQUIRE(fs::exists(run / "metrics.csv"));
  CHECK(first_line(run / "metrics.csv") ==
        "run_id,mode,psnr_db,ssim,nrmse,motion_rmse_theta_deg,motion_rmse_t_px,"
        "csm_nrmse,accel,k_theta_deg,k_t_px,runtime_s");
  const std::string body = slurp(run / "metrics.csv");
  CHECK(body.find(",joint,") != std::string::npos);
  CHECK(body.find(",zero-fill,") != std::string::npos);

  CHECK(fs::exists(run / "profiles_row.csv"));
  CHECK(fs::exists(run / "profiles_col.csv"));
  const std::string prof_header = first_line(run / "profiles_row.csv");
  CHECK(prof_header.find("index,true") == 0);
  CHECK(prof_header.find("joint") != std::string::npos);
}

TEST_CASE("cli subprocess end to end") {
  TempDir dir("cli");
  const fs::path cfg = write_json(dir.path, "sim.json", small_sim());
  const fs::path rcfg = write_json(dir.path, "recon.json", tiny_recon());
  const fs::path run = dir.path / "run";

  CHECK(run_cli("--version") == kExitOk);
  CHECK(run_cli("selftest --perturb-adjoint") == kExitCheckFailed);

  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + run.string()) ==
          kExitOk);
  // Overwrite without --force is a config error at the process level.
  CHECK(run_cli("simulate --config " + cfg.string() + " --out " + run.string()) ==
        kExitConfig);

  // Deterministic reruns produce byte-identical estimates.
  const fs::path run2 = dir.path / "run2";
  fs::create_directories(run2);
  for (const std::string base : {"x_true", "csm_true", "phi_true", "plan", "y"}) {
    fs::copy_file(io::header_path(run / base), io::header_path(run2 / base));
    fs::copy_file(io::payload_path(run / base), io::payload_path(run2 / base));
  }
  fs::copy_file(run / "m_true.csv", run2 / "m_true.csv");
  fs::copy_file(run / "manifest.json", run2 / "manifest.json");

  const std::string recon_args = " --config " + rcfg.string() + " --mode joint --deterministic";
  REQUIRE(run_cli("recon --run " + run.string() + recon_args) == kExitOk);
  REQUIRE(run_cli("recon --run " + run2.string() + recon_args) == kExitOk);
  CHECK(slurp(io::payload_path(run / "x_est_joint")) ==
        slurp(io::payload_path(run2 / "x_est_joint")));
  CHECK(slurp(run / "m_est_joint.csv") == slurp(run2 / "m_est_joint.csv"));
  CHECK(slurp(io::payload_path(run / "phi_est_joint")) ==
        slurp(io::payload_path(run2 / "phi_est_joint")));
  CHECK(slurp(run / "trace_joint.csv") == slurp(run2 / "trace_joint.csv"));

  // Bad config file path surfaces as a config error.
  CHECK(run_cli("recon --run " + run.string() + " --config /no/such.json --mode joint") ==
        kExitConfig);
}
