#include "jsmoco/csm.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

namespace jsmoco {

PolyCoeffs PolyCoeffs::zeros(int num_coils, int order) {
  if (num_coils <= 0) throw std::invalid_argument("PolyCoeffs: need at least one coil");
  if (order < 0) throw std::invalid_argument("PolyCoeffs: order must be non-negative");
  PolyCoeffs c;
  c.num_coils = num_coils;
  c.order = order;
  c.values.assign(static_cast<std::size_t>(num_coils) * 2 * basis_size(order), 0.0);
  return c;
}

void PolyCoeffs::scale(double s) {
  for (double &v : values) v *= s;
}

void PolyCoeffs::rotate_phase(cplx unit) {
  const int b = basis();
  for (int i = 0; i < num_coils; ++i) {
    auto re = part(i, 0);
    auto im = part(i, 1);
    for (int k = 0; k < b; ++k) {
      const cplx rotated = cplx(re[k], im[k]) * unit;
      re[k] = rotated.real();
      im[k] = rotated.imag();
    }
  }
}

Eigen::MatrixXd csm_basis(int height, int width, int order) {
  if (height < 2 || width < 2)
    throw std::invalid_argument("csm_basis: grid must be at least 2x2");
  if (order < 0) throw std::invalid_argument("csm_basis: order must be non-negative");
  const int nb = PolyCoeffs::basis_size(order);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(height) * width, nb);
  std::vector<double> xpow(order + 1), ypow(order + 1);
  for (int r = 0; r < height; ++r) {
    const double yn = 2.0 * r / (height - 1) - 1.0;
    ypow[0] = 1.0;
    for (int p = 1; p <= order; ++p) ypow[p] = ypow[p - 1] * yn;
    for (int c = 0; c < width; ++c) {
      const double xn = 2.0 * c / (width - 1) - 1.0;
      xpow[0] = 1.0;
      for (int p = 1; p <= order; ++p) xpow[p] = xpow[p - 1] * xn;
      const Eigen::Index row = static_cast<Eigen::Index>(r) * width + c;
      for (int p = 0; p <= order; ++p)
        for (int q = 0; q <= order; ++q)
          basis(row, p * (order + 1) + q) = xpow[p] * ypow[q];
    }
  }
  return basis;
}

std::shared_ptr<const Eigen::MatrixXd> csm_basis_cached(int height, int width, int order) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const Eigen::MatrixXd>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(height, width, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto basis = std::make_shared<const Eigen::MatrixXd>(csm_basis(height, width, order));
  cache[key] = basis;
  return basis;
}

std::vector<ComplexGrid> eval_csm(const PolyCoeffs &coeffs, int height, int width) {
  auto basis = csm_basis_cached(height, width, coeffs.order);
  const int nb = coeffs.basis();
  std::vector<ComplexGrid> maps;
  maps.reserve(coeffs.num_coils);
  for (int i = 0; i < coeffs.num_coils; ++i) {
    Eigen::Map<const Eigen::VectorXd> re(coeffs.part(i, 0).data(), nb);
    Eigen::Map<const Eigen::VectorXd> im(coeffs.part(i, 1).data(), nb);
    const Eigen::VectorXd mre = (*basis) * re;
    const Eigen::VectorXd mim = (*basis) * im;
    ComplexGrid map(height, width);
    for (std::size_t k = 0; k < map.size(); ++k)
      map.data()[k] = cplx(mre(static_cast<Eigen::Index>(k)), mim(static_cast<Eigen::Index>(k)));
    maps.push_back(std::move(map));
  }
  return maps;
}

CsmFitResult fit_csm(std::span<const ComplexGrid> maps, int order,
                     std::span<const std::uint8_t> support) {
  if (maps.empty()) throw std::invalid_argument("fit_csm: need at least one map");
  const int height = maps[0].height();
  const int width = maps[0].width();
  for (const ComplexGrid &m : maps)
    if (m.height() != height || m.width() != width)
      throw std::invalid_argument("fit_csm: maps must share one shape");
  const std::size_t npix = static_cast<std::size_t>(height) * width;
  if (!support.empty() && support.size() != npix)
    throw std::invalid_argument("fit_csm: support mask size mismatch");

  std::vector<Eigen::Index> rows;
  rows.reserve(npix);
  for (std::size_t k = 0; k < npix; ++k)
    if (support.empty() || support[k] != 0) rows.push_back(static_cast<Eigen::Index>(k));

  const int nb = PolyCoeffs::basis_size(order);
  if (rows.size() < static_cast<std::size_t>(nb))
    throw std::invalid_argument("fit_csm: " + std::to_string(rows.size()) +
                                " supported pixels cannot determine " + std::to_string(nb) +
                                " basis coefficients");

  auto full = csm_basis_cached(height, width, order);
  Eigen::MatrixXd basis(rows.size(), nb);
  for (std::size_t r = 0; r < rows.size(); ++r) basis.row(r) = full->row(rows[r]);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < nb)
    throw std::runtime_error("fit_csm: restricted basis is rank-deficient (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(nb) + ")");

  PolyCoeffs coeffs = PolyCoeffs::zeros(static_cast<int>(maps.size()), order);
  double residual_sq = 0.0;
  Eigen::VectorXd rhs(rows.size());
  for (int i = 0; i < coeffs.num_coils; ++i) {
    for (int part = 0; part < 2; ++part) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const cplx v = maps[i].data()[rows[r]];
        rhs(static_cast<Eigen::Index>(r)) = (part == 0) ? v.real() : v.imag();
      }
      const Eigen::VectorXd sol = qr.solve(rhs);
      residual_sq += (basis * sol - rhs).squaredNorm();
      auto dst = coeffs.part(i, part);
      for (int k = 0; k < nb; ++k) dst[k] = sol(k);
    }
  }
  return {std::move(coeffs), std::sqrt(residual_sq)};
}

std::pair<PolyCoeffs, double> normalize_csm_gauge(const PolyCoeffs &coeffs,
                                                  int height, int width) {
  const auto maps = eval_csm(coeffs, height, width);
  double mean_sos = 0.0;
  for (const ComplexGrid &m : maps)
    for (const cplx &v : m.data()) mean_sos += std::norm(v);
  mean_sos /= static_cast<double>(height) * width;
  if (!(mean_sos > 1e-300))
    throw std::runtime_error("normalize_csm_gauge: sensitivity maps are identically zero");
  const double scale = 1.0 / std::sqrt(mean_sos);
  PolyCoeffs out = coeffs;
  out.scale(scale);
  return {std::move(out), scale};
}

std::pair<PolyCoeffs, cplx> canonical_csm_phase(const PolyCoeffs &coeffs,
                                                int height, int width) {
  const auto maps = eval_csm(coeffs, height, width);
  cplx total(0.0, 0.0);
  double magnitude = 0.0;
  for (const ComplexGrid &m : maps)
    for (const cplx &v : m.data()) {
      total += v;
      magnitude += std::abs(v);
    }
  PolyCoeffs out = coeffs;
  if (std::abs(total) <= 1e-9 * magnitude || magnitude == 0.0)
    return {std::move(out), cplx(1.0, 0.0)}; // degenerate: phase left untouched
  const cplx unit = std::conj(total) / std::abs(total);
  out.rotate_phase(unit);
  return {std::move(out), unit};
}

} // namespace jsmoco
