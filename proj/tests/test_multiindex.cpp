#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/multiindex.hpp"

#include <random>

using namespace psicalc;

TEST_CASE("weighted length") {
  CHECK(weighted_length(MultiIndex{1, 0, 0}) == 2);
  CHECK(weighted_length(MultiIndex{0, 0, 0}) == 0);
  CHECK(weighted_length(MultiIndex{1, 2, 3}) == 7);
  // |beta| <= <beta> <= 2|beta|
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    MultiIndex b(4), c(4);
    for (int i = 0; i < 4; ++i) {
      b[i] = static_cast<int>(rng() % 5);
      c[i] = static_cast<int>(rng() % 5);
    }
    int wb = weighted_length(b);
    CHECK(b.length() <= wb);
    CHECK(wb <= 2 * b.length());
    CHECK(weighted_length(b + c) == wb + weighted_length(c));
  }
}

TEST_CASE("dilations") {
  Covector xi({1.0, 1.0, 0.0}, Regime::Anisotropic);
  Covector d2 = dilate(xi, 2.0);
  CHECK(d2[0] == doctest::Approx(4.0));
  CHECK(d2[1] == doctest::Approx(2.0));
  CHECK(d2[2] == doctest::Approx(0.0));

  Covector e({1.0, 0.0, 0.0}, Regime::Anisotropic);
  CHECK(dilate(e, 3.0)[0] == doctest::Approx(9.0));
  CHECK_THROWS_AS(dilate(e, 0.0), Error);
  CHECK_THROWS_AS(dilate(e, -1.0), Error);

  // identity scale
  Covector any({0.3, -1.2, 2.5}, Regime::Anisotropic);
  Covector one = dilate(any, 1.0);
  for (int i = 0; i < 3; ++i) CHECK(one[i] == doctest::Approx(any[i]));
}

TEST_CASE("pseudo-norm homogeneity and semigroup law") {
  CHECK(pseudo_norm(Covector({1, 0, 0}, Regime::Anisotropic)) == doctest::Approx(1.0));
  CHECK(pseudo_norm(Covector({0, 1, 0}, Regime::Anisotropic)) == doctest::Approx(1.0));

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), tpos(0.05, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    Covector xi({u(rng), u(rng), u(rng)}, Regime::Anisotropic);
    double t = tpos(rng), ss = tpos(rng);
    // semigroup law: exact arithmetic identity is only floating-exact for
    // the composition order, so compare to relative 1e-12
    Covector a = dilate(dilate(xi, t), ss);
    Covector b = dilate(xi, t * ss);
    for (int i = 0; i < 3; ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    double lhs = pseudo_norm(dilate(xi, t));
    double rhs = t * pseudo_norm(xi);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  // zero iff zero
  CHECK(pseudo_norm(Covector({0, 0, 0}, Regime::Anisotropic)) == 0.0);
  CHECK(pseudo_norm(Covector({0, 1e-8, 0}, Regime::Anisotropic)) > 0.0);
}

TEST_CASE("pseudo-norm of dilate example") {
  Covector xi({1.0, 1.0, 0.0}, Regime::Anisotropic);
  CHECK(pseudo_norm(dilate(xi, 2.0)) ==
        doctest::Approx(2.0 * pseudo_norm(xi)).epsilon(1e-12));
}

TEST_CASE("isotropic regime uses euclidean norm and plain scaling") {
  Covector xi({3.0, 4.0}, Regime::Isotropic);
  CHECK(pseudo_norm(xi) == doctest::Approx(5.0));
  Covector d = dilate(xi, 2.0);
  CHECK(d[0] == doctest::Approx(6.0));
  CHECK(d[1] == doctest::Approx(8.0));
}
