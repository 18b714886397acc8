#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "jsmoco/csm.hpp"
#include "jsmoco/geometry.hpp"
#include "jsmoco/types.hpp"

namespace jsmoco::io {

/// Raised on malformed headers, payload size mismatches, unsupported dtype
/// declarations and non-finite payload values.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Grids are stored as a <base>.hdr.json / <base>.bin pair: a JSON header
/// carrying shape [rows, cols], dtype "complex128", byte order
/// "little-endian", layout "row-major" and a semantic tag, plus a raw payload
/// of interleaved re/im doubles in row-major order. Headers are written with
/// sorted keys so identical content is byte-identical.
struct GridHeader {
  int rows = 0;
  int cols = 0;
  std::string semantic;
  nlohmann::json extras; // any additional header fields, e.g. plan metadata
};

std::filesystem::path header_path(const std::filesystem::path &base);
std::filesystem::path payload_path(const std::filesystem::path &base);

void save_grid(const ComplexGrid &grid, const std::filesystem::path &base,
               const std::string &semantic = "image",
               const nlohmann::json &extras = nlohmann::json::object());
ComplexGrid load_grid(const std::filesystem::path &base, GridHeader *header = nullptr);

/// Measurements round-trip through a [num_coils, samples] grid with semantic
/// "measurements".
void save_measurements(const Measurements &meas, const std::filesystem::path &base);
Measurements load_measurements(const std::filesystem::path &base);

/// Plans round-trip through the 0/1 mask grid (semantic "mask") with the
/// acquisition order, shot assignment and shot count in header fields.
void save_plan(const AcquisitionPlan &plan, const std::filesystem::path &base);
AcquisitionPlan load_plan(const std::filesystem::path &base);

/// Coefficients round-trip through a [2*num_coils, (order+1)^2] grid with
/// semantic "csm-coeffs" (rows alternate real/imag blocks per coil) plus
/// num_coils and order header fields.
void save_coeffs(const PolyCoeffs &coeffs, const std::filesystem::path &base);
PolyCoeffs load_coeffs(const std::filesystem::path &base);

/// Motion parameters as CSV with header "shot,theta_rad,tx_px,ty_px".
void save_motion_csv(const MotionParams &motion, const std::filesystem::path &path);
MotionParams load_motion_csv(const std::filesystem::path &path);

/// Deterministic JSON-to-file helper (sorted keys, 2-space indent, trailing
/// newline).
void save_json(const nlohmann::json &value, const std::filesystem::path &path);
nlohmann::json load_json(const std::filesystem::path &path);

} // namespace jsmoco::io
