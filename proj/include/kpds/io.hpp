#pragma once

// SPF1 snapshot files.
//
// Layout: "SPF1", then little-endian u32 version, u32 nx, u32 ny, f64 lx,
// f64 ly, f64 t, u8 is_complex, then nx*ny values in row-major order with x
// as the slow index (index ix*ny + iy); complex values as (re, im) pairs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpds/spectral_grid.hpp"

namespace kpds {

inline constexpr std::uint32_t spf1_version = 1;

struct Snapshot {
  std::uint32_t nx = 0, ny = 0;
  double lx = 1.0, ly = 1.0, t = 0.0;
  bool is_complex = false;
  std::vector<double> payload;  // nx*ny reals or 2*nx*ny interleaved

  Grid2D grid() const { return Grid2D(nx, ny, lx, ly); }
};

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("SPF1: truncated file");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T value;
  std::memcpy(&value, b, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_spf1(std::ostream& os, const Snapshot& s) {
  const std::size_t expected = static_cast<std::size_t>(s.nx) * s.ny * (s.is_complex ? 2 : 1);
  if (s.payload.size() != expected) throw DimensionMismatch("write_spf1: payload size does not match header");
  os.write("SPF1", 4);
  detail::put_le<std::uint32_t>(os, spf1_version);
  detail::put_le<std::uint32_t>(os, s.nx);
  detail::put_le<std::uint32_t>(os, s.ny);
  detail::put_le<double>(os, s.lx);
  detail::put_le<double>(os, s.ly);
  detail::put_le<double>(os, s.t);
  detail::put_le<std::uint8_t>(os, s.is_complex ? 1 : 0);
  for (double x : s.payload) detail::put_le<double>(os, x);
  if (!os) throw std::runtime_error("write_spf1: write failed");
}

inline Snapshot read_spf1(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SPF1", 4) != 0) throw std::runtime_error("SPF1: bad magic");
  Snapshot s;
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != spf1_version) throw std::runtime_error("SPF1: unsupported version " + std::to_string(version));
  s.nx = detail::get_le<std::uint32_t>(is);
  s.ny = detail::get_le<std::uint32_t>(is);
  s.lx = detail::get_le<double>(is);
  s.ly = detail::get_le<double>(is);
  s.t = detail::get_le<double>(is);
  s.is_complex = detail::get_le<std::uint8_t>(is) != 0;
  const std::size_t n = static_cast<std::size_t>(s.nx) * s.ny * (s.is_complex ? 2 : 1);
  s.payload.resize(n);
  for (double& x : s.payload) x = detail::get_le<double>(is);
  return s;
}

/// Physical-space snapshot of a state; real payload when `real_field`.
inline Snapshot make_snapshot(const SpectralField& v, double t, bool real_field) {
  const ComplexLattice u = inverse_transform(v);
  Snapshot s;
  s.nx = static_cast<std::uint32_t>(v.grid.nx());
  s.ny = static_cast<std::uint32_t>(v.grid.ny());
  s.lx = v.grid.lx();
  s.ly = v.grid.ly();
  s.t = t;
  s.is_complex = !real_field;
  s.payload.reserve(u.values.size() * (real_field ? 1 : 2));
  for (const cplx& z : u.values) {
    s.payload.push_back(z.real());
    if (!real_field) s.payload.push_back(z.imag());
  }
  return s;
}

inline void write_spf1(const std::string& path, const Snapshot& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_spf1(os, s);
}

inline Snapshot read_spf1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_spf1(is);
}

}  // namespace kpds
