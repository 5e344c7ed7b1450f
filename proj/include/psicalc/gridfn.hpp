#pragma once

#include "psicalc/expr.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace psicalc {

/// 3D frequency lattice for the d = 3 model fiber: n points per axis with
/// centered indices a, b, c in [-n/2, n/2); xi = (a*dxi0, b*dxi, c*dxi).
/// Dual spatial spacings are dy0 = 2pi/(n*dxi0), dy = 2pi/(n*dxi).
///
/// A grid is "commensurate" with the Levi constant ell when
/// dxi0 = n*dxi^2/(pi*ell); then the twisted-convolution phase at vertical
/// index a is exactly exp(-2pi i a/n * (...)), periodic on the torus.
struct Grid3 {
  int n = 32;
  double dxi0 = 1.0;
  double dxi = 1.0;

  static Grid3 commensurate(int n, double dxi, double ell);

  double dy() const { return 2.0 * M_PI / (n * dxi); }
  double dy0() const { return 2.0 * M_PI / (n * dxi0); }
  int lo() const { return -n / 2; }
  int hi() const { return n / 2 - 1; }
  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n) *
           static_cast<std::size_t>(n);
  }
  /// storage index for centered indices
  std::size_t idx(int a, int b, int c) const {
    return (static_cast<std::size_t>(a - lo()) * n + static_cast<std::size_t>(b - lo())) * n +
           static_cast<std::size_t>(c - lo());
  }
  /// covector at centered indices
  void xi_at(int a, int b, int c, double* out) const {
    out[0] = a * dxi0;
    out[1] = b * dxi;
    out[2] = c * dxi;
  }
  double pseudo_norm_at(int a, int b, int c) const {
    double x0 = a * dxi0, x1 = b * dxi, x2 = c * dxi;
    return std::pow(x0 * x0 + x1 * x1 * x1 * x1 + x2 * x2 * x2 * x2, 0.25);
  }
  /// Largest pseudo-norm fully contained in the box.
  double pseudo_norm_max() const {
    double v = (n / 2 - 1) * dxi;
    double v0 = (n / 2 - 1) * dxi0;
    return std::pow(std::min(v0 * v0, v * v * v * v), 0.25);
  }
  friend bool operator==(const Grid3& a, const Grid3& b) {
    return a.n == b.n && a.dxi0 == b.dxi0 && a.dxi == b.dxi;
  }
};

/// Complex samples on a Grid3 frequency lattice (also reused for spatial
/// slices). Layout: idx(a, b, c).
struct GridData3 {
  Grid3 grid;
  std::vector<Cx> v;

  GridData3() = default;
  explicit GridData3(const Grid3& g) : grid(g), v(g.size(), Cx(0, 0)) {}
  Cx& at(int a, int b, int c) { return v[grid.idx(a, b, c)]; }
  Cx at(int a, int b, int c) const { return v[grid.idx(a, b, c)]; }
};

/// Samples of a homogeneous symbol on the lattice. `degree` enables
/// evaluation anywhere by anisotropic rescaling onto a trusted shell.
struct GridSymbol {
  GridData3 data;
  Cx degree{0.0, 0.0};
  double cutoff_radius = 0.0;  // pseudo-norm below which samples were zeroed

  /// Evaluate by homogeneous extension: scale xi onto the trusted shell,
  /// interpolate trilinearly, undo the scaling with t^degree.
  Cx eval_homogeneous(const double* xi) const;
};

/// Centered 2D transforms of the horizontal slice at vertical index a.
/// Forward: F(k) = sum_m f(m) exp(-2pi i k.m / n); inverse includes 1/n^2.
void fft2_slice_centered(GridData3& data, int a, int sign);

/// Smooth cutoff: 0 for r <= r0, 1 for r >= r1, C-infinity in between.
double smooth_step(double r, double r0, double r1);

// ---------------------------------------------------------------------------
// Serialization: small textual header + little-endian complex128 payload.

void write_grid_binary(std::ostream& os, const GridSymbol& s);
GridSymbol read_grid_binary(std::istream& is);

/// CSV shell report: pseudo-norm shell statistics of |values|.
std::string shell_report_csv(const GridSymbol& s, int shells = 8);

}  // namespace psicalc
