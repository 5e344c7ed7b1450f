#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/linalg.hpp"
#include "psicalc/seeley.hpp"

#include <random>

using namespace psicalc;

namespace {

Expr X0() { return Expr::variable(vx(0)); }
Expr Xi0() { return Expr::variable(vxi(0)); }
Expr L() { return Expr::variable(vlambda()); }

AngularSector default_sector() { return AngularSector(M_PI / 4, 7 * M_PI / 4); }

// 1D Laplacian-type symbol xi^2 (+ optional lower-order constant).
AsymptoticSymbol laplace_1d(Expr leading, Expr order0 = Expr::zero()) {
  return AsymptoticSymbol{Cx(2, 0), Regime::Isotropic, 1, false,
                          {std::move(leading), Expr::zero(), std::move(order0)}};
}

double rel_err(Cx a, Cx b) {
  double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

GridFn1D band_limited(const Grid1D& g, int klo, int khi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridFn1D hat(static_cast<std::size_t>(g.n), Cx(0, 0));
  for (int k = g.freq_lo(); k <= g.freq_hi(); ++k) {
    int ak = std::abs(k);
    if (ak < klo || ak > khi) continue;
    hat[static_cast<std::size_t>(k - g.freq_lo())] = Cx(u(rng), u(rng));
  }
  return idft(g, hat);
}

}  // namespace

TEST_CASE("rho lower bound") {
  // p2 = xi^2: constant 1 on the unit sphere
  CHECK(rho_lower_bound(Expr::pow_int(Xi0(), 2), 1) == doctest::Approx(0.99));
  // p2 = (2 + sin x) xi^2: infimum 1
  Expr p2 = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  CHECK(rho_lower_bound(p2, 1) == doctest::Approx(0.99).epsilon(1e-6));
  // sign change rejected
  Expr bad = Expr::pow_int(Expr::variable(vxi(0)), 2) -
             Expr::pow_int(Expr::variable(vxi(1)), 2);
  CHECK_THROWS_AS(rho_lower_bound(bad, 2), EllipticityError);
}

TEST_CASE("resolvent recursion: constant coefficients kill all corrections") {
  auto p = laplace_1d(Expr::pow_int(Xi0(), 2));
  auto q = resolvent_parametrix(p, default_sector(), 4);
  Expr q0 = Expr::pow_int(Expr::pow_int(Xi0(), 2) - L(), -1);
  CHECK(q.symbol.term(0).same(q0));
  for (int j = 1; j <= 4; ++j) CHECK(q.symbol.term(j).is_zero());
}

TEST_CASE("resolvent recursion: constant shift lands at j = 2") {
  // p = xi^2 + c with c = 3: q_{-3} = 0, q_{-4} = -c (xi^2-lambda)^{-2}
  auto p = laplace_1d(Expr::pow_int(Xi0(), 2), Expr::integer(3));
  auto q = resolvent_parametrix(p, default_sector(), 3);
  CHECK(q.symbol.term(1).is_zero());
  Expr expect =
      Expr::integer(-3) * Expr::pow_int(Expr::pow_int(Xi0(), 2) - L(), -2);
  CHECK(q.symbol.term(2).same(expect));
}

TEST_CASE("resolvent terms are homogeneous of degree -2-j") {
  Expr p2 = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto q = resolvent_parametrix(laplace_1d(p2), default_sector(), 3);
  CHECK(!q.symbol.term(1).is_zero());
  for (int j = 0; j <= 3; ++j) {
    auto term = q.symbol.homogeneous(j, q.domain);
    CHECK(term.verify_degree(1, 17));
  }
}

TEST_CASE("variable coefficients produce cross terms checked on the torus") {
  // Brute-force operator-composition oracle: (Op(p2) - lambda) Op(Q_N) - I
  // must shrink on band-limited inputs as N grows.
  Expr p2 = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto p = laplace_1d(p2);
  Grid1D g(128);
  Cx lambda(-1.0, 0.0);
  Env extra;
  extra.set_lambda(lambda);
  std::mt19937_64 rng(5);
  GridFn1D u = band_limited(g, 12, 20, rng);
  double unorm = l2_norm(u);
  SymbolTable1D ptab = SymbolTable1D::build(p2 - L(), g, extra);

  double prev = 1e9;
  for (int N : {0, 1, 2}) {
    auto q = resolvent_parametrix(p, default_sector(), N);
    std::vector<Expr> acc;
    for (int j = 0; j <= N; ++j) acc.push_back(q.symbol.term(j));
    SymbolTable1D qtab = SymbolTable1D::build(Expr::sum(acc), g, extra);
    GridFn1D w = apply_op(ptab, apply_op(qtab, u));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= u[i];
    double defect = l2_norm(w) / unorm;
    CHECK(defect < prev * 0.5);  // each term buys at least a factor ~1/K
    prev = defect;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("parametrix defect decays at order -(N+1) in the band index") {
  Expr p2 = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto p = laplace_1d(p2);
  Grid1D g(128);
  Env extra;
  extra.set_lambda(Cx(-1.0, 0.0));
  SymbolTable1D ptab = SymbolTable1D::build(p2 - L(), g, extra);
  const int N = 1;
  auto q = resolvent_parametrix(p, default_sector(), N);
  std::vector<Expr> acc;
  for (int j = 0; j <= N; ++j) acc.push_back(q.symbol.term(j));
  SymbolTable1D qtab = SymbolTable1D::build(Expr::sum(acc), g, extra);

  std::mt19937_64 rng(9);
  std::vector<double> logk, logd;
  for (int K : {8, 16, 32}) {
    GridFn1D u = band_limited(g, K, 2 * K - 1, rng);
    GridFn1D w = apply_op(ptab, apply_op(qtab, u));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= u[i];
    logk.push_back(std::log(K));
    logd.push_back(std::log(l2_norm(w) / l2_norm(u)));
  }
  // least-squares slope
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logk.size(); ++i) {
    mx += logk[i];
    my += logd[i];
  }
  mx /= logk.size();
  my /= logd.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < logk.size(); ++i) {
    num += (logk[i] - mx) * (logd[i] - my);
    den += (logk[i] - mx) * (logk[i] - mx);
  }
  double slope = num / den;
  CHECK(slope == doctest::Approx(-(N + 1)).epsilon(0.2));
}

TEST_CASE("contour power term: Cauchy values and homogeneity") {
  auto p = laplace_1d(Expr::pow_int(Xi0(), 2));
  auto q = resolvent_parametrix(p, default_sector(), 2);

  // q0 = (xi^2 - lambda)^{-1}: the contour integral equals (xi^2)^s.
  Cx v = contour_power_term(q, 0, Cx(-1.0, 0.0), {0.0}, {2.0});
  CHECK(rel_err(v, Cx(0.25, 0.0)) < 1e-8);
  Cx v2 = contour_power_term(q, 0, Cx(-0.5, 0.0), {0.0}, {2.0});
  CHECK(rel_err(v2, Cx(0.5, 0.0)) < 1e-8);

  // homogeneity p_{s,2s-j}(x, t xi) = t^{2s-j} p_{s,2s-j}(x, xi)
  Expr p2v = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto qv = resolvent_parametrix(laplace_1d(p2v), default_sector(), 2);
  const Cx s(-0.7, 0.1);
  for (int j = 0; j <= 2; ++j) {
    if (qv.symbol.term(j).is_zero()) continue;
    Cx base = contour_power_term(qv, j, s, {0.3}, {1.7});
    for (double t : {0.5, 2.0, 5.0}) {
      Cx scaled = contour_power_term(qv, j, s, {0.3}, {1.7 * t});
      Cx expect = std::pow(Cx(t, 0.0), 2.0 * s - Cx(j, 0)) * base;
      CHECK(rel_err(scaled, expect) < 1e-8);
    }
  }

  // domain violation on an oversized contour radius
  CHECK_THROWS_AS(
      contour_power_term(q, 0, Cx(-1.0, 0.0), {0.0}, {1.0}, {}, 10.0),
      DomainViolationError);
  // Re s >= 0 is rejected on the direct path
  CHECK_THROWS_AS(contour_power_term(q, 0, Cx(0.5, 0.0), {0.0}, {1.0}), Error);
}

TEST_CASE("complex power symbol closed forms") {
  // p = xi^2, s = -1: leading term xi^-2, all lower terms zero
  auto p = laplace_1d(Expr::pow_int(Xi0(), 2));
  auto ps = complex_power_symbol(p, RatC(-1), default_sector(), 3);
  CHECK(ps.term(0).same(Expr::pow_int(Xi0(), -2)));
  for (int j = 1; j <= 3; ++j) CHECK(ps.term(j).is_zero());

  // s = -1/2: leading term evaluates to |xi|^{-1}
  auto ph = complex_power_symbol(p, RatC(Rat(-1, 2)), default_sector(), 1);
  Env env;
  env.set_xi(0, Cx(3.0, 0.0));
  CHECK(rel_err(ph.term(0).eval(env), Cx(1.0 / 3.0, 0.0)) < 1e-14);

  // variable coefficients: leading term (2+sin x)^s |xi|^{2s}
  Expr p2v = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto pv = complex_power_symbol(laplace_1d(p2v), RatC(Rat(-1, 2)),
                                 default_sector(), 2);
  Env env2;
  env2.set_x(0, Cx(0.4, 0.0)).set_xi(0, Cx(1.5, 0.0));
  Cx expect = std::pow((2.0 + std::sin(0.4)) * 1.5 * 1.5, -0.5);
  CHECK(rel_err(pv.term(0).eval(env2), expect) < 1e-12);
}

TEST_CASE("closed forms agree with contour quadrature term by term") {
  Expr p2v = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  auto p = laplace_1d(p2v);
  const RatC s(Rat(-3, 4));
  auto power = complex_power_symbol(p, s, default_sector(), 2);
  auto q = resolvent_parametrix(p, default_sector(), 2);
  for (int j = 0; j <= 2; ++j) {
    if (power.term(j).is_zero()) {
      CHECK(std::abs(contour_power_term(q, j, s.to_complex(), {1.1}, {1.3})) < 1e-10);
      continue;
    }
    Env env;
    env.set_x(0, Cx(1.1, 0.0)).set_xi(0, Cx(1.3, 0.0));
    Cx closed = power.term(j).eval(env);
    Cx quad = contour_power_term(q, j, s.to_complex(), {1.1}, {1.3});
    CHECK(rel_err(closed, quad) < 1e-8);
  }
}

TEST_CASE("extend power for Re s >= 0") {
  auto p = laplace_1d(Expr::pow_int(Xi0(), 2));
  // s = 1 returns the symbol itself
  auto p1 = extend_power(p, RatC(1), default_sector(), 2);
  CHECK(p1.term(0).same(Expr::pow_int(Xi0(), 2)));
  for (int j = 1; j <= 2; ++j) CHECK(p1.term(j).is_zero());

  // s = 1/2 evaluates to |xi|
  auto ph = extend_power(p, RatC(Rat(1, 2)), default_sector(), 2);
  Env env;
  env.set_xi(0, Cx(2.0, 0.0));
  CHECK(rel_err(ph.term(0).eval(env), Cx(2.0, 0.0)) < 1e-12);

  // s = 0 gives the identity symbol
  auto p0 = extend_power(p, RatC(0), default_sector(), 2);
  CHECK(p0.term(0).same(Expr::one()));
  for (int j = 1; j <= 2; ++j) CHECK(p0.term(j).is_zero());
}

TEST_CASE("classical quantization examples") {
  Grid1D g(64);
  Env extra;
  // p = xi^2 on e^{ikx} multiplies by k^2
  AsymptoticSymbol p = laplace_1d(Expr::pow_int(Xi0(), 2));
  GridFn1D u(static_cast<std::size_t>(g.n));
  const int k0 = 5;
  for (int j = 0; j < g.n; ++j)
    u[static_cast<std::size_t>(j)] = std::exp(Cx(0.0, k0 * g.x(j)));
  GridFn1D pu = quantize_classical(p, g, extra, u);
  for (int j = 0; j < g.n; ++j)
    CHECK(rel_err(pu[static_cast<std::size_t>(j)],
                  Cx(k0 * k0, 0.0) * u[static_cast<std::size_t>(j)]) < 1e-10);

  // identity symbol
  AsymptoticSymbol one{Cx(0, 0), Regime::Isotropic, 1, false, {Expr::one()}};
  GridFn1D iu = quantize_classical(one, g, extra, u);
  for (int j = 0; j < g.n; ++j)
    CHECK(rel_err(iu[static_cast<std::size_t>(j)], u[static_cast<std::size_t>(j)]) < 1e-12);
}

TEST_CASE("spectral oracle: truncated resolvent inverts Delta - lambda") {
  // p = truncated parametrix of Delta - lambda at lambda = -1 applied after
  // (Delta+1): close to identity on smooth data.
  Expr p2 = (Expr::integer(2) + sin(X0())) * Expr::pow_int(Xi0(), 2);
  Grid1D g(128);
  Env extra;
  extra.set_lambda(Cx(-1.0, 0.0));
  auto q = resolvent_parametrix(laplace_1d(p2), default_sector(), 3);
  std::vector<Expr> acc;
  for (int j = 0; j <= 3; ++j) acc.push_back(q.symbol.term(j));
  SymbolTable1D qt = SymbolTable1D::build(Expr::sum(acc), g, extra);
  SymbolTable1D pt = SymbolTable1D::build(p2 - L(), g, extra);
  std::mt19937_64 rng(33);
  GridFn1D u = band_limited(g, 10, 30, rng);
  GridFn1D w = apply_op(qt, apply_op(pt, u));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= u[i];
  CHECK(l2_norm(w) / l2_norm(u) < 2e-2);
}
