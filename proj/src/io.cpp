#include "jsmoco/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace jsmoco::io {

static_assert(std::endian::native == std::endian::little,
              "grid payloads are little-endian; big-endian hosts are unsupported");

namespace {

nlohmann::json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return j;
}

template <typename T>
T require_field(const nlohmann::json &j, const std::string &key, const std::string &where) {
  if (!j.contains(key)) throw FormatError(where + ": missing header field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw FormatError(where + ": header field '" + key + "' has the wrong type");
  }
}

} // namespace

std::filesystem::path header_path(const std::filesystem::path &base) {
  auto p = base;
  p += ".hdr.json";
  return p;
}

std::filesystem::path payload_path(const std::filesystem::path &base) {
  auto p = base;
  p += ".bin";
  return p;
}

void save_json(const nlohmann::json &value, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << value.dump(2) << "\n";
  if (!out) throw FormatError("failed writing " + path.string());
}

nlohmann::json load_json(const std::filesystem::path &path) { return read_json_file(path); }

void save_grid(const ComplexGrid &grid, const std::filesystem::path &base,
               const std::string &semantic, const nlohmann::json &extras) {
  nlohmann::json header = extras.is_null() ? nlohmann::json::object() : extras;
  header["shape"] = {grid.height(), grid.width()};
  header["dtype"] = "complex128";
  header["order"] = "little-endian";
  header["layout"] = "row-major";
  header["semantic"] = semantic;
  save_json(header, header_path(base));

  std::ofstream out(payload_path(base), std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + payload_path(base).string());
  out.write(reinterpret_cast<const char *>(grid.data().data()),
            static_cast<std::streamsize>(grid.size() * sizeof(cplx)));
  if (!out) throw FormatError("failed writing " + payload_path(base).string());
}

ComplexGrid load_grid(const std::filesystem::path &base, GridHeader *header) {
  const auto hpath = header_path(base);
  const nlohmann::json j = read_json_file(hpath);
  const std::string where = hpath.string();

  const auto shape = require_field<std::vector<int>>(j, "shape", where);
  if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0)
    throw FormatError(where + ": shape must be two positive extents");
  if (require_field<std::string>(j, "dtype", where) != "complex128")
    throw FormatError(where + ": unsupported dtype (expected complex128)");
  if (require_field<std::string>(j, "order", where) != "little-endian")
    throw FormatError(where + ": unsupported byte order (expected little-endian)");
  if (require_field<std::string>(j, "layout", where) != "row-major")
    throw FormatError(where + ": unsupported layout (expected row-major)");
  const std::string semantic = require_field<std::string>(j, "semantic", where);

  const auto ppath = payload_path(base);
  std::ifstream in(ppath, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + ppath.string());
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  const std::size_t count = static_cast<std::size_t>(shape[0]) * shape[1];
  if (bytes != count * sizeof(cplx))
    throw FormatError(ppath.string() + ": payload holds " + std::to_string(bytes) +
                      " bytes, header implies " + std::to_string(count * sizeof(cplx)));
  std::vector<cplx> data(count);
  in.seekg(0);
  in.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw FormatError("failed reading " + ppath.string());
  for (const cplx &v : data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw FormatError(ppath.string() + ": payload contains non-finite values");

  if (header != nullptr) {
    header->rows = shape[0];
    header->cols = shape[1];
    header->semantic = semantic;
    header->extras = j;
  }
  return ComplexGrid(shape[0], shape[1], std::move(data));
}

void save_measurements(const Measurements &meas, const std::filesystem::path &base) {
  ComplexGrid grid(meas.num_coils(), static_cast<int>(meas.samples_per_coil()),
                   std::vector<cplx>(meas.flat().begin(), meas.flat().end()));
  save_grid(grid, base, "measurements");
}

Measurements load_measurements(const std::filesystem::path &base) {
  GridHeader header;
  ComplexGrid grid = load_grid(base, &header);
  if (header.semantic != "measurements")
    throw FormatError(header_path(base).string() + ": semantic '" + header.semantic +
                      "' is not 'measurements'");
  return Measurements(grid.height(),
                      std::vector<cplx>(grid.data().begin(), grid.data().end()));
}

void save_plan(const AcquisitionPlan &plan, const std::filesystem::path &base) {
  ComplexGrid mask(plan.height, plan.width);
  for (std::size_t k = 0; k < mask.size(); ++k)
    mask.data()[k] = cplx(plan.mask[k] ? 1.0 : 0.0, 0.0);
  nlohmann::json extras;
  extras["acquired_lines"] = plan.acquired_lines;
  extras["shot_of_line"] = plan.shot_of_line;
  extras["num_shots"] = plan.num_shots;
  save_grid(mask, base, "mask", extras);
}

AcquisitionPlan load_plan(const std::filesystem::path &base) {
  GridHeader header;
  ComplexGrid mask = load_grid(base, &header);
  const std::string where = header_path(base).string();
  if (header.semantic != "mask")
    throw FormatError(where + ": semantic '" + header.semantic + "' is not 'mask'");

  AcquisitionPlan plan;
  plan.height = mask.height();
  plan.width = mask.width();
  plan.acquired_lines = require_field<std::vector<int>>(header.extras, "acquired_lines", where);
  plan.shot_of_line = require_field<std::vector<int>>(header.extras, "shot_of_line", where);
  plan.num_shots = require_field<int>(header.extras, "num_shots", where);
  plan.mask.resize(mask.size());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const cplx v = mask.data()[k];
    if (v.imag() != 0.0 || (v.real() != 0.0 && v.real() != 1.0))
      throw FormatError(where + ": mask entries must be 0 or 1");
    plan.mask[k] = static_cast<std::uint8_t>(v.real() != 0.0);
  }
  try {
    plan.validate();
  } catch (const std::invalid_argument &e) {
    throw FormatError(where + ": " + e.what());
  }
  return plan;
}

void save_coeffs(const PolyCoeffs &coeffs, const std::filesystem::path &base) {
  const int nb = coeffs.basis();
  ComplexGrid grid(coeffs.num_coils * 2, nb);
  for (int i = 0; i < coeffs.num_coils; ++i)
    for (int part = 0; part < 2; ++part) {
      auto src = coeffs.part(i, part);
      for (int k = 0; k < nb; ++k) grid(i * 2 + part, k) = cplx(src[k], 0.0);
    }
  nlohmann::json extras;
  extras["num_coils"] = coeffs.num_coils;
  extras["poly_order"] = coeffs.order;
  save_grid(grid, base, "csm-coeffs", extras);
}

PolyCoeffs load_coeffs(const std::filesystem::path &base) {
  GridHeader header;
  ComplexGrid grid = load_grid(base, &header);
  const std::string where = header_path(base).string();
  if (header.semantic != "csm-coeffs")
    throw FormatError(where + ": semantic '" + header.semantic + "' is not 'csm-coeffs'");
  const int num_coils = require_field<int>(header.extras, "num_coils", where);
  const int order = require_field<int>(header.extras, "poly_order", where);
  if (num_coils <= 0 || order < 0) throw FormatError(where + ": invalid coil count or order");
  const int nb = PolyCoeffs::basis_size(order);
  if (grid.height() != num_coils * 2 || grid.width() != nb)
    throw FormatError(where + ": coefficient grid shape does not match num_coils/order");

  PolyCoeffs coeffs = PolyCoeffs::zeros(num_coils, order);
  for (int i = 0; i < num_coils; ++i)
    for (int part = 0; part < 2; ++part) {
      auto dst = coeffs.part(i, part);
      for (int k = 0; k < nb; ++k) {
        const cplx v = grid(i * 2 + part, k);
        if (v.imag() != 0.0)
          throw FormatError(where + ": coefficient entries must be real-valued");
        dst[k] = v.real();
      }
    }
  return coeffs;
}

void save_motion_csv(const MotionParams &motion, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "shot,theta_rad,tx_px,ty_px\n";
  out.precision(17);
  for (int j = 0; j < motion.num_shots(); ++j)
    out << j << "," << motion.rotations[j] << "," << motion.translations[j][0] << ","
        << motion.translations[j][1] << "\n";
  if (!out) throw FormatError("failed writing " + path.string());
}

MotionParams load_motion_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "shot,theta_rad,tx_px,ty_px")
    throw FormatError(path.string() + ": unexpected CSV header");
  MotionParams motion;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    double values[4];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(row, cell, ',')) throw FormatError(path.string() + ": short row");
      try {
        values[k] = std::stod(cell);
      } catch (const std::exception &) {
        throw FormatError(path.string() + ": unparsable cell '" + cell + "'");
      }
    }
    if (static_cast<int>(values[0]) != expected)
      throw FormatError(path.string() + ": shot indices must be consecutive from 0");
    ++expected;
    motion.rotations.push_back(values[1]);
    motion.translations.push_back({values[2], values[3]});
  }
  if (motion.num_shots() == 0) throw FormatError(path.string() + ": no motion rows");
  return motion;
}

} // namespace jsmoco::io
