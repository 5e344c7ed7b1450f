#pragma once

#include "psicalc/conic.hpp"

#include <functional>

namespace psicalc {

/// Gauss-Legendre nodes/weights on [-1, 1]; cached per order.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct ContourQuadratureOptions {
  double rel_tol = 1e-10;       // doubling stops when successive estimates agree
  double tail_cut = 1e-14;      // ray truncation relative to the running total
  int max_nodes_per_panel = 512;
  int circle_panels = 8;
  int max_ray_panels = 256;     // dyadic panels, reach r * 2^256 at most
};

struct ContourIntegralResult {
  Cx value;
  double est_rel_error;
  int nodes_used;
};

/// Evaluates (i/2pi) * contour integral of lambda^s f(lambda) dlambda over the
/// keyhole contour. The power lambda^s uses the argument continued along the
/// contour: arg = theta on the incoming ray, decreasing through the clockwise
/// circle, theta - 2pi on the outgoing ray. f must be single-valued
/// (rational in lambda for all uses here).
ContourIntegralResult contour_power_integral(
    const std::function<Cx(Cx)>& f, const KeyholeContour& contour, Cx s,
    const ContourQuadratureOptions& opts = {});

}  // namespace psicalc
