#include "jsmoco/types.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace jsmoco {

ComplexGrid::ComplexGrid(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("ComplexGrid: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width, cplx(0.0, 0.0));
}

ComplexGrid::ComplexGrid(int height, int width, std::vector<cplx> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("ComplexGrid: dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("ComplexGrid: data size does not match dimensions");
}

bool ComplexGrid::all_finite() const {
  for (const cplx &v : data_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

ComplexGrid &ComplexGrid::operator+=(const ComplexGrid &rhs) {
  if (!same_shape(rhs)) throw std::invalid_argument("ComplexGrid: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

ComplexGrid &ComplexGrid::operator-=(const ComplexGrid &rhs) {
  if (!same_shape(rhs)) throw std::invalid_argument("ComplexGrid: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

ComplexGrid &ComplexGrid::operator*=(cplx s) {
  for (cplx &v : data_) v *= s;
  return *this;
}

ComplexGrid operator+(ComplexGrid lhs, const ComplexGrid &rhs) { return lhs += rhs; }
ComplexGrid operator-(ComplexGrid lhs, const ComplexGrid &rhs) { return lhs -= rhs; }
ComplexGrid operator*(ComplexGrid grid, cplx s) { return grid *= s; }

double norm2(std::span<const cplx> v) {
  double acc = 0.0;
  for (const cplx &x : v) acc += std::norm(x);
  return std::sqrt(acc);
}

double norm2(const ComplexGrid &g) { return norm2(g.data()); }

cplx vdot(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw std::invalid_argument("vdot: size mismatch");
  cplx acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

cplx vdot(const ComplexGrid &a, const ComplexGrid &b) {
  if (!a.same_shape(b)) throw std::invalid_argument("vdot: shape mismatch");
  return vdot(a.data(), b.data());
}

Measurements::Measurements(int num_coils, std::size_t samples_per_coil)
    : num_coils_(num_coils), per_coil_(samples_per_coil) {
  if (num_coils <= 0) throw std::invalid_argument("Measurements: need at least one coil");
  data_.assign(num_coils_ * per_coil_, cplx(0.0, 0.0));
}

Measurements::Measurements(int num_coils, std::vector<cplx> flat)
    : num_coils_(num_coils), data_(std::move(flat)) {
  if (num_coils <= 0) throw std::invalid_argument("Measurements: need at least one coil");
  if (data_.size() % num_coils_ != 0)
    throw std::invalid_argument("Measurements: flat size not divisible by coil count");
  per_coil_ = data_.size() / num_coils_;
}

Measurements operator-(const Measurements &a, const Measurements &b) {
  if (a.num_coils() != b.num_coils() || a.samples_per_coil() != b.samples_per_coil())
    throw std::invalid_argument("Measurements: shape mismatch");
  std::vector<cplx> out(a.flat().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.flat()[i] - b.flat()[i];
  return Measurements(a.num_coils(), std::move(out));
}

double norm2(const Measurements &m) { return norm2(m.flat()); }

std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_rng(RngSeed seed, std::uint64_t stream) {
  std::uint64_t state = seed.value;
  std::uint64_t a = splitmix64(state);
  state ^= 0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(state);
  return std::mt19937_64(a ^ (b + 0x2545f4914f6cdd1dULL * (stream + 1)));
}

int env_thread_cap() {
  const char *raw = std::getenv("JSMOCO_THREADS");
  if (raw == nullptr) return 1;
  char *end = nullptr;
  long v = std::strtol(raw, &end, 10);
  if (end == raw || v < 1) return 1;
  return static_cast<int>(v);
}

void parallel_for(int n, int threads, const std::function<void(int)> &fn) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread &t : pool) t.join();
}

} // namespace jsmoco
