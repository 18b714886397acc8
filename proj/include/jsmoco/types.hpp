#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace jsmoco {

using cplx = std::complex<double>;

/// 2D complex-valued array in row-major order, used for images, coil
/// sensitivity maps and Cartesian k-space. Index convention throughout the
/// library: (row, col) == (y, x).
class ComplexGrid {
public:
  ComplexGrid() = default;
  ComplexGrid(int height, int width);
  ComplexGrid(int height, int width, std::vector<cplx> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  cplx &operator()(int row, int col) { return data_[index(row, col)]; }
  const cplx &operator()(int row, int col) const { return data_[index(row, col)]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool same_shape(const ComplexGrid &other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;

  ComplexGrid &operator+=(const ComplexGrid &rhs);
  ComplexGrid &operator-=(const ComplexGrid &rhs);
  ComplexGrid &operator*=(cplx s);

private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<cplx> data_;
};

ComplexGrid operator+(ComplexGrid lhs, const ComplexGrid &rhs);
ComplexGrid operator-(ComplexGrid lhs, const ComplexGrid &rhs);
ComplexGrid operator*(ComplexGrid grid, cplx s);

/// l2 norm of the flattened values.
double norm2(std::span<const cplx> v);
double norm2(const ComplexGrid &g);
/// sum_k conj(a_k) * b_k
cplx vdot(std::span<const cplx> a, std::span<const cplx> b);
cplx vdot(const ComplexGrid &a, const ComplexGrid &b);

/// Per-coil complex samples at the acquired k-space locations. Stored flat,
/// coil-major, with identical sample ordering across coils (the ordering of
/// the acquisition plan that produced them).
class Measurements {
public:
  Measurements() = default;
  Measurements(int num_coils, std::size_t samples_per_coil);
  Measurements(int num_coils, std::vector<cplx> flat);

  int num_coils() const { return num_coils_; }
  std::size_t samples_per_coil() const { return per_coil_; }

  std::span<cplx> coil(int i) {
    return std::span<cplx>(data_).subspan(i * per_coil_, per_coil_);
  }
  std::span<const cplx> coil(int i) const {
    return std::span<const cplx>(data_).subspan(i * per_coil_, per_coil_);
  }
  std::span<cplx> flat() { return data_; }
  std::span<const cplx> flat() const { return data_; }

private:
  int num_coils_ = 0;
  std::size_t per_coil_ = 0;
  std::vector<cplx> data_;
};

Measurements operator-(const Measurements &a, const Measurements &b);
double norm2(const Measurements &m);

/// Seed for every stochastic operation. Identical seed + identical
/// configuration gives bitwise-identical outputs in single-threaded runs.
struct RngSeed {
  std::uint64_t value = 0;
};

std::uint64_t splitmix64(std::uint64_t &state);

/// Deterministic generator for an independent stream derived from
/// (seed, stream id). Distinct stream ids decorrelate parameter blocks.
std::mt19937_64 make_rng(RngSeed seed, std::uint64_t stream);

/// Thread cap from JSMOCO_THREADS (>=1); 1 when unset or unparsable.
int env_thread_cap();

/// Runs fn(0..n-1) on up to `threads` workers. Work items are independent;
/// callers own any reduction and must keep it fixed-order for reproducibility.
void parallel_for(int n, int threads, const std::function<void(int)> &fn);

} // namespace jsmoco
