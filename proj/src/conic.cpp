#include "psicalc/conic.hpp"

#include <cmath>

namespace psicalc {

double arg_cut(Cx lambda) {
  double a = std::arg(lambda);
  if (a < 0) a += 2.0 * M_PI;
  return a;
}

AngularSector::AngularSector(double th, double thp) : theta(th), theta_prime(thp) {
  if (!(0.0 < theta && theta < M_PI && M_PI < theta_prime && theta_prime < 2.0 * M_PI))
    throw Error("sector must satisfy 0 < theta < pi < theta' < 2pi");
}

bool AngularSector::contains(Cx lambda, double slack) const {
  if (lambda == Cx(0.0, 0.0)) return false;
  double a = arg_cut(lambda);
  return a > theta - slack && a < theta_prime + slack;
}

ConicDomain::ConicDomain(AngularSector sec, double rho_, int dim_, Regime reg)
    : sector(sec), rho(rho_), dim(dim_), regime(reg) {
  if (!(rho > 0.0)) throw Error("conic domain needs rho > 0");
}

bool ConicDomain::contains(const Covector& xi, Cx lambda) const {
  if (sector.contains(lambda, 1e-12)) return true;
  Covector v = xi;
  v.regime = regime;
  double nsq = norm_sq_for_domain(v);
  if (nsq == 0.0) return false;
  return std::abs(lambda) < rho * nsq;
}

KeyholeContour::KeyholeContour(double radius, double ray_angle)
    : r(radius), theta(ray_angle) {
  if (!(r > 0.0)) throw Error("contour radius must be positive");
  if (!(theta > 0.0 && theta < M_PI))
    throw Error("contour ray angle must lie in (0, pi)");
}

}  // namespace psicalc
