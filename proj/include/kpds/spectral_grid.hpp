#pragma once

// Periodic 2D grid, Fourier-coefficient lattices, FFTW-backed transforms and
// the diagonal Fourier multipliers (d/dx, d/dy, regularized d/dx^-1).

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kpds {

using cplx = std::complex<double>;

/// Allocator that hands out FFTW-aligned storage so every buffer can be used
/// with the shared plans below.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using CVec = std::vector<cplx, FftwAllocator<cplx>>;
using RVec = std::vector<double, FftwAllocator<double>>;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

/// Periodic rectangle [-pi lx, pi lx) x [-pi ly, pi ly) with nx x ny nodes.
/// Lattices are stored row-major with x as the slow index: index = ix*ny + iy.
class Grid2D {
 public:
  Grid2D(std::size_t nx, std::size_t ny, double lx = 1.0, double ly = 1.0)
      : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
    if (!is_power_of_two(nx) || !is_power_of_two(ny))
      throw std::invalid_argument("Grid2D: nx and ny must be powers of two >= 2");
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
      throw std::invalid_argument("Grid2D: lx and ly must be positive and finite");
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  std::size_t size() const { return nx_ * ny_; }
  std::size_t index(std::size_t ix, std::size_t iy) const { return ix * ny_ + iy; }

  double dx() const { return 2.0 * std::numbers::pi * lx_ / static_cast<double>(nx_); }
  double dy() const { return 2.0 * std::numbers::pi * ly_ / static_cast<double>(ny_); }
  double cell_area() const { return dx() * dy(); }
  double area() const { return 4.0 * std::numbers::pi * std::numbers::pi * lx_ * ly_; }

  double x(std::size_t ix) const { return -std::numbers::pi * lx_ + static_cast<double>(ix) * dx(); }
  double y(std::size_t iy) const { return -std::numbers::pi * ly_ + static_cast<double>(iy) * dy(); }

  // Signed mode number in standard DFT ordering.
  long mode_x(std::size_t ix) const { return mode(ix, nx_); }
  long mode_y(std::size_t iy) const { return mode(iy, ny_); }
  double kx(std::size_t ix) const { return static_cast<double>(mode_x(ix)) / lx_; }
  double ky(std::size_t iy) const { return static_cast<double>(mode_y(iy)) / ly_; }
  bool nyquist_x(std::size_t ix) const { return ix == nx_ / 2; }
  bool nyquist_y(std::size_t iy) const { return iy == ny_ / 2; }

  // DFT index of the mode -m (conjugate partner for Hermitian symmetry).
  std::size_t mirror_x(std::size_t ix) const { return (nx_ - ix) % nx_; }
  std::size_t mirror_y(std::size_t iy) const { return (ny_ - iy) % ny_; }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  static long mode(std::size_t i, std::size_t n) {
    return i < n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
  }

  std::size_t nx_, ny_;
  double lx_, ly_;
};

/// Values on the physical nodes of a grid.
template <class T>
struct Lattice {
  Grid2D grid;
  std::vector<T, FftwAllocator<T>> values;

  explicit Lattice(const Grid2D& g) : grid(g), values(g.size()) {}
  Lattice(const Grid2D& g, std::vector<T, FftwAllocator<T>> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw DimensionMismatch("Lattice: size does not match grid");
  }

  T& operator()(std::size_t ix, std::size_t iy) { return values[grid.index(ix, iy)]; }
  const T& operator()(std::size_t ix, std::size_t iy) const { return values[grid.index(ix, iy)]; }
};

using RealLattice = Lattice<double>;
using ComplexLattice = Lattice<cplx>;

/// Complex Fourier coefficients of a 2D field (unnormalized forward DFT).
struct SpectralField {
  Grid2D grid;
  CVec coeffs;

  explicit SpectralField(const Grid2D& g) : grid(g), coeffs(g.size()) {}
  SpectralField(const Grid2D& g, CVec c) : grid(g), coeffs(std::move(c)) {
    if (coeffs.size() != grid.size()) throw DimensionMismatch("SpectralField: size does not match grid");
  }

  cplx& operator()(std::size_t ix, std::size_t iy) { return coeffs[grid.index(ix, iy)]; }
  const cplx& operator()(std::size_t ix, std::size_t iy) const { return coeffs[grid.index(ix, iy)]; }
  std::span<cplx> span() { return coeffs; }
  std::span<const cplx> span() const { return coeffs; }
};

/// Elementwise Fourier multiplier.
struct MultiplierTable {
  Grid2D grid;
  CVec values;
  std::string description;

  MultiplierTable(const Grid2D& g, std::string desc) : grid(g), values(g.size()), description(std::move(desc)) {}

  cplx& operator()(std::size_t ix, std::size_t iy) { return values[grid.index(ix, iy)]; }
  const cplx& operator()(std::size_t ix, std::size_t iy) const { return values[grid.index(ix, iy)]; }
};

// ---------------------------------------------------------------------------
// Transform provider

enum class PlannerMode { estimate, measure };

/// Planner rigor; KPDS_FFTW_PLANNER=estimate selects FFTW_ESTIMATE.
inline PlannerMode planner_mode() {
  static const PlannerMode mode = [] {
    const char* env = std::getenv("KPDS_FFTW_PLANNER");
    if (env && std::string(env) == "estimate") return PlannerMode::estimate;
    return PlannerMode::measure;
  }();
  return mode;
}

/// Immutable FFTW plans for one (nx, ny) shape: in-place complex transforms
/// and out-of-place real/half-complex transforms. Shared process-wide; FFTW's
/// execute calls are thread-safe, the planner is serialized by a mutex.
class FftPlan {
 public:
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }

  static std::shared_ptr<const FftPlan> get(std::size_t nx, std::size_t ny) {
    static std::mutex cache_mutex;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const FftPlan>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[{nx, ny}];
    if (!slot) slot = std::shared_ptr<const FftPlan>(new FftPlan(nx, ny));
    return slot;
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t half_ny() const { return ny_ / 2 + 1; }
  std::size_t half_size() const { return nx_ * half_ny(); }

  void forward(cplx* data) const { fftw_execute_dft(forward_, as_fftw(data), as_fftw(data)); }
  void backward(cplx* data) const { fftw_execute_dft(backward_, as_fftw(data), as_fftw(data)); }
  // Real input of nx*ny values to nx*(ny/2+1) half-spectrum.
  void r2c(double* in, cplx* out) const { fftw_execute_dft_r2c(r2c_, in, as_fftw(out)); }
  // Half-spectrum to real output; `in` is overwritten.
  void c2r(cplx* in, double* out) const { fftw_execute_dft_c2r(c2r_, as_fftw(in), out); }

 private:
  FftPlan(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
    std::lock_guard lock(planner_mutex());
    const unsigned flags = planner_mode() == PlannerMode::measure ? FFTW_MEASURE : FFTW_ESTIMATE;
    const int n0 = static_cast<int>(nx), n1 = static_cast<int>(ny);
    CVec c(nx * ny);
    CVec h(nx * (ny / 2 + 1));
    RVec r(nx * ny);
    forward_ = fftw_plan_dft_2d(n0, n1, as_fftw(c.data()), as_fftw(c.data()), FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft_2d(n0, n1, as_fftw(c.data()), as_fftw(c.data()), FFTW_BACKWARD, flags);
    r2c_ = fftw_plan_dft_r2c_2d(n0, n1, r.data(), as_fftw(h.data()), flags);
    c2r_ = fftw_plan_dft_c2r_2d(n0, n1, as_fftw(h.data()), r.data(), flags);
    if (!forward_ || !backward_ || !r2c_ || !c2r_) throw std::runtime_error("FftPlan: FFTW planning failed");
  }

  static fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t nx_, ny_;
  fftw_plan forward_{}, backward_{}, r2c_{}, c2r_{};
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
  if (!(a == b)) throw DimensionMismatch(std::string(what) + ": grid mismatch");
}

/// Unnormalized forward DFT of a physical lattice.
inline SpectralField forward_transform(const ComplexLattice& u, const Grid2D& grid) {
  require_same_grid(u.grid, grid, "forward_transform");
  if (u.values.size() != grid.size()) throw DimensionMismatch("forward_transform: lattice size");
  SpectralField v(grid, CVec(u.values.begin(), u.values.end()));
  FftPlan::get(grid.nx(), grid.ny())->forward(v.coeffs.data());
  return v;
}

inline SpectralField forward_transform(const RealLattice& u, const Grid2D& grid) {
  require_same_grid(u.grid, grid, "forward_transform");
  if (u.values.size() != grid.size()) throw DimensionMismatch("forward_transform: lattice size");
  SpectralField v(grid);
  for (std::size_t i = 0; i < u.values.size(); ++i) v.coeffs[i] = u.values[i];
  FftPlan::get(grid.nx(), grid.ny())->forward(v.coeffs.data());
  return v;
}

/// Inverse DFT carrying the 1/(nx ny) factor.
inline ComplexLattice inverse_transform(const SpectralField& v) {
  if (v.coeffs.size() != v.grid.size()) throw DimensionMismatch("inverse_transform: coefficient count");
  ComplexLattice u(v.grid, CVec(v.coeffs.begin(), v.coeffs.end()));
  FftPlan::get(v.grid.nx(), v.grid.ny())->backward(u.values.data());
  const double scale = 1.0 / static_cast<double>(v.grid.size());
  for (auto& z : u.values) z *= scale;
  return u;
}

inline RealLattice real_part(const ComplexLattice& u) {
  RealLattice r(u.grid);
  for (std::size_t i = 0; i < u.values.size(); ++i) r.values[i] = u.values[i].real();
  return r;
}

// ---------------------------------------------------------------------------
// Multipliers

inline MultiplierTable multiplier_dx(const Grid2D& grid) {
  MultiplierTable m(grid, "d/dx");
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const cplx s = grid.nyquist_x(ix) ? cplx{} : cplx(0.0, grid.kx(ix));
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) m(ix, iy) = s;
  }
  return m;
}

inline MultiplierTable multiplier_dy(const Grid2D& grid) {
  MultiplierTable m(grid, "d/dy");
  for (std::size_t ix = 0; ix < grid.nx(); ++ix)
    for (std::size_t iy = 0; iy < grid.ny(); ++iy)
      m(ix, iy) = grid.nyquist_y(iy) ? cplx{} : cplx(0.0, grid.ky(iy));
  return m;
}

/// Regularization shift of the antiderivative symbol: one machine epsilon.
inline constexpr double inverse_dx_delta = 0x1p-52;

/// Regularized antiderivative -i/(kx + i lambda delta). Finite at kx = 0,
/// where it equals -1/(lambda delta).
inline MultiplierTable multiplier_inv_dx(const Grid2D& grid, int lambda) {
  if (lambda != 1 && lambda != -1) throw std::invalid_argument("multiplier_inv_dx: lambda must be +1 or -1");
  MultiplierTable m(grid, "inv-dx");
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const cplx s = cplx(0.0, -1.0) / cplx(grid.kx(ix), lambda * inverse_dx_delta);
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) m(ix, iy) = s;
  }
  return m;
}

inline SpectralField apply(const MultiplierTable& m, const SpectralField& v) {
  require_same_grid(m.grid, v.grid, "apply");
  SpectralField out(v.grid);
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) out.coeffs[i] = m.values[i] * v.coeffs[i];
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Rectangle rule over the periodic cell; spectrally accurate for smooth data.
inline double quadrature(std::span<const double> u, const Grid2D& grid) {
  if (u.size() != grid.size()) throw DimensionMismatch("quadrature: lattice size");
  double sum = 0.0;
  for (double x : u) sum += x;
  return sum * grid.cell_area();
}

inline double quadrature(const RealLattice& u) { return quadrature(std::span<const double>(u.values), u.grid); }

}  // namespace kpds
