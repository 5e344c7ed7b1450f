#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/conic.hpp"
#include "psicalc/quadrature.hpp"

#include <random>

using namespace psicalc;

TEST_CASE("sector validation and membership") {
  CHECK_THROWS_AS(AngularSector(0.0, 4.0), Error);
  CHECK_THROWS_AS(AngularSector(0.5, M_PI / 2), Error);  // theta' must exceed pi
  CHECK_THROWS_AS(AngularSector(2.0, 1.0), Error);

  AngularSector sec(M_PI / 4, 7 * M_PI / 4);
  CHECK(sec.contains(Cx(-1.0, 0.0)));          // arg = pi
  CHECK(sec.contains(Cx(0.0, 1.0)));           // arg = pi/2
  CHECK(!sec.contains(Cx(1.0, 0.0)));          // positive real axis
  CHECK(!sec.contains(Cx(1.0, 1e-6)));         // just above the cut
  CHECK(!sec.contains(Cx(0.0, 0.0)));
}

TEST_CASE("conic domain closure under anisotropic scaling") {
  AngularSector sec(M_PI / 4, 7 * M_PI / 4);
  ConicDomain dom(sec, 0.7, 3, Regime::Anisotropic);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0), tdist(0.01, 10.0);
  int checked = 0;
  for (int trial = 0; trial < 20000 && checked < 1000; ++trial) {
    Covector xi({u(rng), u(rng), u(rng)}, Regime::Anisotropic);
    Cx lam(u(rng), u(rng));
    if (!dom.contains(xi, lam)) continue;
    ++checked;
    double t = tdist(rng);
    Covector txi = dilate(xi, t);
    CHECK(dom.contains(txi, t * t * lam));
  }
  CHECK(checked == 1000);
  // contains R^d x Lambda even at xi = 0
  CHECK(dom.contains(Covector({0, 0, 0}, Regime::Anisotropic), Cx(-5.0, 0.0)));
}

TEST_CASE("Cauchy identity for constant symbols") {
  // (i/2pi) contour integral of lambda^s (c - lambda)^{-1} equals c^s.
  const double cs[] = {1.0, 4.0, 2.5};
  const Cx ss[] = {{-1.0, 0.0}, {-0.5, 0.0}, {-0.3, 0.2}};
  for (double c : cs) {
    for (Cx s : ss) {
      KeyholeContour contour(0.5 * c, 3 * M_PI / 4);
      auto f = [c](Cx lam) { return 1.0 / (c - lam); };
      auto res = contour_power_integral(f, contour, s);
      Cx expect = std::exp(s * std::log(c));
      CHECK(std::abs(res.value - expect) < 1e-8 * std::abs(expect));
    }
  }
}

TEST_CASE("contour radius independence") {
  const double c = 2.5;
  const Cx s(-0.5, 0.1);
  Cx ref;
  bool first = true;
  for (double frac : {0.5, 0.25, 0.1, 0.05}) {
    KeyholeContour contour(frac * c, 2 * M_PI / 3);
    auto res = contour_power_integral([c](Cx lam) { return 1.0 / (c - lam); },
                                      contour, s);
    if (first) {
      ref = res.value;
      first = false;
    } else {
      CHECK(std::abs(res.value - ref) < 1e-8 * std::abs(ref));
    }
  }
}

TEST_CASE("higher-order poles integrate to derivative values") {
  // (i/2pi) contour of lambda^s (c-lambda)^{-2} = -s c^{s-1}
  const double c = 3.0;
  const Cx s(-0.7, 0.0);
  KeyholeContour contour(1.0, M_PI / 2);
  auto res = contour_power_integral(
      [c](Cx lam) { return 1.0 / ((c - lam) * (c - lam)); }, contour, s);
  Cx expect = -s * std::exp((s - 1.0) * std::log(c));
  CHECK(std::abs(res.value - expect) < 1e-8 * std::abs(expect));
}

TEST_CASE("integer powers see only the circle") {
  // s = -1 makes lambda^s single-valued; the result is the residue at 0.
  KeyholeContour contour(0.5, M_PI / 2);
  const double c = 2.0;
  auto res = contour_power_integral([c](Cx lam) { return 1.0 / (c - lam); },
                                    contour, Cx(-1.0, 0.0));
  CHECK(std::abs(res.value - Cx(1.0 / c, 0.0)) < 1e-10);
}
