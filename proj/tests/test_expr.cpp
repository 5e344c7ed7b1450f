#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/expr.hpp"

#include <random>

using namespace psicalc;

namespace {

Expr X(int i) { return Expr::variable(vx(i)); }
Expr Xi(int i) { return Expr::variable(vxi(i)); }
Expr L() { return Expr::variable(vlambda()); }
Expr S() { return Expr::variable(vs()); }

double rel_err(Cx a, Cx b) {
  double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("constant folding is exact") {
  Expr e = Expr::integer(1) / Expr::integer(3) + Expr::integer(1) / Expr::integer(6);
  REQUIRE(e.is_const());
  CHECK(e.as_const() == RatC(Rat(1) / Rat(2)));

  Expr z = (Expr::i() * Expr::i()) + Expr::one();
  CHECK(z.is_zero());
}

TEST_CASE("canonical collection of like terms") {
  Expr a = Xi(1) * Xi(1) + Expr::integer(2) * Xi(1) * Xi(1);
  Expr b = Expr::integer(3) * Expr::pow_int(Xi(1), 2);
  CHECK(a.same(b));

  Expr c = Xi(1) * Xi(2) - Xi(2) * Xi(1);
  CHECK(c.is_zero());

  // merged integer powers across a product
  Expr d = Expr::pow_int(Xi(1) + Expr::one(), -1) *
           Expr::pow_int(Xi(1) + Expr::one(), -2);
  CHECK(d.same(Expr::pow_int(Xi(1) + Expr::one(), -3)));

  // positive powers of sums expand
  Expr e = Expr::pow_int(Xi(1) + Expr::one(), 2);
  CHECK(e.same(Expr::pow_int(Xi(1), 2) + Expr::integer(2) * Xi(1) + Expr::one()));
}

TEST_CASE("differentiation examples") {
  // d/dxi1 (xi1^2) = 2 xi1
  Expr e1 = Expr::pow_int(Xi(1), 2).derivative(vxi(1));
  CHECK(e1.same(Expr::integer(2) * Xi(1)));

  // d/dlambda (xi1^2 - lambda)^-1 = (xi1^2 - lambda)^-2
  Expr q = Expr::pow_int(Expr::pow_int(Xi(1), 2) - L(), -1);
  Expr dq = q.derivative(vlambda());
  CHECK(dq.same(Expr::pow_int(Expr::pow_int(Xi(1), 2) - L(), -2)));

  // absent variable
  CHECK((X(0) * Xi(0)).derivative(vxi(1)).is_zero());

  // D convention: D_x x = 1/i = -i
  Expr dd = X(0).derivative_D(vx(0));
  CHECK(dd.same(Expr::constant(RatC(Rat(0), Rat(-1)))));
}

TEST_CASE("derivative matches central finite differences at random points") {
  // (2 + sin x0) * xi0^2 * (xi0^2 - lambda)^-1 and friends
  std::vector<Expr> exprs = {
      (Expr::integer(2) + sin(X(0))) * Expr::pow_int(Xi(0), 2),
      Expr::pow_int(Expr::pow_int(Xi(0), 2) - L(), -2) * X(0),
      exp(X(0) * Expr::constant(RatC(Rat(1, 2)))) + cos(Xi(0)),
      Expr::pow(Expr::integer(2) + sin(X(0)), S()),
  };
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& e : exprs) {
    for (VarId v : {vx(0), vxi(0)}) {
      Expr de = e.derivative(v);
      for (int trial = 0; trial < 20; ++trial) {
        Env env;
        env.set_x(0, Cx(u(rng), 0));
        env.set_xi(0, Cx(2.0 + u(rng), 0));
        env.set_lambda(Cx(-1.5 + 0.3 * u(rng), 0.4));
        env.set_s(Cx(-0.7, 0.1));
        const double h = 1e-5;
        Env ep = env, em = env;
        ep.set(v, env.get(v) + h);
        em.set(v, env.get(v) - h);
        Cx fd = (e.eval(ep) - e.eval(em)) / (2 * h);
        Cx an = de.eval(env);
        CHECK(rel_err(fd, an) < 1e-6);
      }
    }
  }
}

TEST_CASE("evaluation examples") {
  Expr q = Expr::pow_int(Expr::pow_int(Xi(1), 2) - L(), -1);
  Env env;
  env.set_xi(1, 2.0).set_lambda(1.0);
  CHECK(rel_err(q.eval(env), Cx(1.0 / 3.0, 0)) < 1e-15);

  Env pole;
  pole.set_xi(1, 1.0).set_lambda(1.0);
  CHECK_THROWS_AS(q.eval(pole), PoleError);

  Expr ls = Expr::pow(L(), S());
  Env e2;
  e2.set_lambda(1.0).set_s(-1.0);
  CHECK(rel_err(ls.eval(e2), Cx(1, 0)) < 1e-15);

  // branch: lambda^s on the negative real axis, arg = pi
  Env e3;
  e3.set_lambda(-1.0).set_s(Cx(0.5, 0));
  CHECK(rel_err(ls.eval(e3), Cx(0, 1)) < 1e-14);
}

TEST_CASE("exact rational evaluation") {
  Expr e = (Xi(0) * Xi(0) + Expr::integer(3) * X(1)) /
           (Expr::one() - Xi(0) * Expr::constant(RatC(Rat(1, 7))));
  RatEnv env;
  env[vxi(0)] = RatC(Rat(1, 2));
  env[vx(1)] = RatC(Rat(2, 3));
  RatC v = e.eval_exact(env);
  // (1/4 + 2) / (1 - 1/14) = (9/4) / (13/14) = 63/26
  CHECK(v == RatC(Rat(63, 26)));

  RatEnv at_pole;
  at_pole[vxi(0)] = RatC(Rat(7));
  at_pole[vx(1)] = RatC(Rat(0));
  CHECK_THROWS_AS(e.eval_exact(at_pole), PoleError);
}

TEST_CASE("print/parse round trip") {
  std::vector<Expr> exprs = {
      Expr::pow_int(Xi(0), 2) + Expr::pow_int(Xi(1), 4),
      (Expr::integer(2) + sin(X(0))) * Expr::pow_int(Xi(0), 2) - L(),
      Expr::pow(Expr::pow_int(Xi(0), 2) + Expr::one(), S()),
      Expr::constant(RatC(Rat(3, 4), Rat(-2))) * Xi(1) + Expr::i(),
      Expr::pow_int(Expr::pow_int(Xi(1), 2) - L(), -3) * X(0) * X(0),
      Expr::zero(),
      -Xi(2),
  };
  for (const auto& e : exprs) {
    std::string s1 = e.str();
    Expr back = Expr::parse(s1);
    CHECK(back.same(e));
    CHECK(back.str() == s1);
  }
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(Expr::parse("xi0 + "), ParseError);
  CHECK_THROWS_AS(Expr::parse("foo(3)"), ParseError);
  CHECK_THROWS_AS(Expr::parse("xi0 ^ s"), ParseError);  // needs parens
  CHECK_THROWS_AS(Expr::parse(""), ParseError);
  try {
    Expr::parse("xi0 +\n* 3");
  } catch (const ParseError& pe) {
    CHECK(pe.line == 2);
  }
}

TEST_CASE("homogeneity detection") {
  // anisotropic degree 4
  Expr e1 = Expr::pow_int(Xi(0), 2) + Expr::pow_int(Xi(1), 4);
  auto d1 = detect_homogeneity(e1, Regime::Anisotropic, 3, false);
  REQUIRE(d1.has_value());
  CHECK(std::abs(*d1 - Cx(4, 0)) < 1e-9);

  // resolvent leading term: isotropic with parameter, degree -2
  Expr e2 = Expr::pow_int(Expr::pow_int(Xi(0), 2) + Expr::pow_int(Xi(1), 2) - L(), -1);
  auto d2 = detect_homogeneity(e2, Regime::Isotropic, 2, true);
  REQUIRE(d2.has_value());
  CHECK(std::abs(*d2 - Cx(-2, 0)) < 1e-9);

  // mixed weights: not homogeneous
  Expr e3 = Xi(0) + Xi(1);
  CHECK(!detect_homogeneity(e3, Regime::Anisotropic, 3, false).has_value());

  // multiplicativity of degrees
  Expr f = Expr::pow_int(Xi(1), 2);
  Expr g = Xi(0);
  auto df = detect_homogeneity(f, Regime::Anisotropic, 2, false);
  auto dg = detect_homogeneity(g, Regime::Anisotropic, 2, false);
  auto dfg = detect_homogeneity(f * g, Regime::Anisotropic, 2, false);
  REQUIRE((df && dg && dfg));
  CHECK(std::abs(*dfg - (*df + *dg)) < 1e-9);

  // complex degree via symbolic power: (xi0^2+xi1^2)^s has degree 2s
  Expr h = Expr::pow(Expr::pow_int(Xi(0), 2) + Expr::pow_int(Xi(1), 2), S());
  // substitute a concrete s to test numerically
  std::map<VarId, Expr> sub{{vs(), Expr::constant(RatC(Rat(-1, 2)))}};
  auto dh = detect_homogeneity(h.substitute(sub), Regime::Isotropic, 2, false);
  REQUIRE(dh.has_value());
  CHECK(std::abs(*dh - Cx(-1, 0)) < 1e-8);
}

TEST_CASE("substitution and scaling") {
  Expr e = Expr::pow_int(Xi(0), 2) * X(1);
  Expr scaled = scale_covector(e, Regime::Anisotropic, 2, Expr::variable(vt()), false);
  // xi0 -> t^2 xi0, so e -> t^4 xi0^2 x1
  Expr expect = Expr::pow_int(Expr::variable(vt()), 4) * e;
  CHECK(scaled.same(expect));
}

TEST_CASE("compiled evaluation agrees with tree evaluation") {
  Expr e = (Expr::integer(2) + sin(X(0))) *
               Expr::pow_int(Expr::pow_int(Xi(0), 2) - L(), -2) +
           Expr::pow(Expr::integer(2) + cos(X(0)), S());
  CompiledExpr prog(e);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Env env;
    env.set_x(0, Cx(u(rng), 0));
    env.set_xi(0, Cx(2.0 + u(rng), 0.1 * u(rng)));
    env.set_lambda(Cx(-2.0 + u(rng), u(rng)));
    env.set_s(Cx(-0.4, 0.2));
    CHECK(rel_err(prog.eval_env(env), e.eval(env)) < 1e-14);
  }
}
