#include "psicalc/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace psicalc {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) {
      nodes = it->second.first;
      weights = it->second.second;
      return;
    }
  }
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev initial guess, Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(n, std::make_pair(nodes, weights));
}

namespace {

// lambda^s with an explicitly tracked argument.
Cx lambda_pow(double modulus, double arg, Cx s) {
  return std::exp(s * Cx(std::log(modulus), arg));
}

struct PieceSums {
  Cx rays;    // combined incoming + outgoing rays
  Cx circle;
};

PieceSums integrate_pieces(const std::function<Cx(Cx)>& f,
                           const KeyholeContour& contour, Cx s, int m,
                           const ContourQuadratureOptions& opts,
                           int* nodes_used) {
  std::vector<double> gx, gw;
  gauss_legendre(m, gx, gw);
  const double r = contour.r, theta = contour.theta;
  const Cx eit(std::cos(theta), std::sin(theta));

  // Rays: both run along angle theta geometrically; the integrands differ
  // only in the power's argument (theta incoming, theta - 2pi outgoing), so
  // one pass over rho covers both:
  //   I_in + I_out = e^{i theta} (e^{i s (theta - 2pi)} - e^{i s theta})
  //                  * Integral_r^inf rho^s f(rho e^{i theta}) drho
  Cx ray_prefactor =
      eit * (std::exp(s * Cx(0.0, theta - 2.0 * M_PI)) - std::exp(s * Cx(0.0, theta)));
  Cx ray_sum(0.0, 0.0);
  if (std::abs(ray_prefactor) > 0.0) {
    double running = 0.0;
    int quiet_panels = 0;
    for (int k = 0; k < opts.max_ray_panels; ++k) {
      double a = r * std::pow(2.0, k), b = 2.0 * a;
      Cx panel(0.0, 0.0);
      for (int j = 0; j < m; ++j) {
        double rho = 0.5 * (a + b) + 0.5 * (b - a) * gx[static_cast<std::size_t>(j)];
        Cx val = std::exp(s * Cx(std::log(rho), 0.0)) * f(rho * eit);
        panel += gw[static_cast<std::size_t>(j)] * val;
        ++*nodes_used;
      }
      panel *= 0.5 * (b - a);
      ray_sum += panel;
      running = std::max(running, std::abs(ray_sum));
      if (std::abs(panel) < opts.tail_cut * std::max(running, 1e-300)) {
        if (++quiet_panels >= 2) break;
      } else {
        quiet_panels = 0;
      }
    }
  }
  Cx rays = ray_prefactor * ray_sum;

  // Circle: lambda = r e^{it}, t from theta down to theta - 2pi (clockwise);
  // the power uses arg = t. dlambda = i r e^{it} dt.
  Cx circle(0.0, 0.0);
  const int P = opts.circle_panels;
  for (int p = 0; p < P; ++p) {
    double t1 = theta - 2.0 * M_PI * (p + 1) / P;
    double t2 = theta - 2.0 * M_PI * p / P;
    Cx panel(0.0, 0.0);
    for (int j = 0; j < m; ++j) {
      double t = 0.5 * (t1 + t2) + 0.5 * (t2 - t1) * gx[static_cast<std::size_t>(j)];
      Cx eitt(std::cos(t), std::sin(t));
      Cx lam = r * eitt;
      Cx val = lambda_pow(r, t, s) * f(lam) * Cx(0.0, 1.0) * r * eitt;
      panel += gw[static_cast<std::size_t>(j)] * val;
      ++*nodes_used;
    }
    panel *= 0.5 * (t2 - t1);
    circle += panel;
  }
  // The sweep runs from theta to theta - 2pi, i.e. against the increasing-t
  // panels above.
  circle = -circle;
  return {rays, circle};
}

}  // namespace

ContourIntegralResult contour_power_integral(const std::function<Cx(Cx)>& f,
                                             const KeyholeContour& contour, Cx s,
                                             const ContourQuadratureOptions& opts) {
  const Cx pref = Cx(0.0, 1.0) / (2.0 * M_PI);
  int nodes = 0;
  Cx prev(0.0, 0.0);
  bool have_prev = false;
  for (int m = 16; m <= opts.max_nodes_per_panel; m *= 2) {
    PieceSums ps = integrate_pieces(f, contour, s, m, opts, &nodes);
    Cx total = pref * (ps.rays + ps.circle);
    if (have_prev) {
      double scale = std::max({std::abs(total), std::abs(prev), 1e-300});
      double change = std::abs(total - prev) / scale;
      if (change < opts.rel_tol)
        return {total, change, nodes};
    }
    prev = total;
    have_prev = true;
  }
  return {prev, opts.rel_tol, nodes};
}

}  // namespace psicalc
