#pragma once

#include "psicalc/multiindex.hpp"

#include <complex>

namespace psicalc {

using Cx = std::complex<double>;

/// Argument of lambda normalized to [0, 2pi), i.e. with the cut on the
/// positive real axis.
double arg_cut(Cx lambda);

/// Open angular sector theta < arg lambda < theta' with
/// 0 < theta < pi < theta' < 2pi; always avoids the positive real axis.
struct AngularSector {
  double theta;
  double theta_prime;

  AngularSector(double th, double thp);

  /// Open-sector membership; `slack` widens the sector by a tolerance so
  /// contour rays lying exactly on the edge still count as inside.
  bool contains(Cx lambda, double slack = 0.0) const;
};

/// Conic subset Theta = [R^d x Lambda] u {(xi, lambda): |lambda| < rho * |xi|^2}
/// of (covector, parameter) space, closed under (xi, lambda) -> (t.xi, t^2 lambda).
/// The anisotropic variant replaces |xi| by the pseudo-norm.
struct ConicDomain {
  AngularSector sector;
  double rho;
  int dim;
  Regime regime;

  ConicDomain(AngularSector sec, double rho_, int dim_, Regime reg);

  bool contains(const Covector& xi, Cx lambda) const;
};

/// Keyhole contour around [0, infinity): an incoming ray at angle `theta`
/// from infinity down to radius `r`, the circle |lambda| = r swept clockwise
/// from theta to theta - 2pi, and the outgoing ray back to infinity. The
/// orientation winds once counterclockwise around the ray [r, infinity).
struct KeyholeContour {
  double r;
  double theta;

  KeyholeContour(double radius, double ray_angle);
};

}  // namespace psicalc
