#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/heisenberg.hpp"

#include <random>

using namespace psicalc;

namespace {

GroupPoint rand_point(std::mt19937_64& rng, int dim) {
  GroupPoint p(static_cast<std::size_t>(dim));
  for (auto& v : p)
    v = Rat(static_cast<long>(rng() % 2001) - 1000, 1 + static_cast<long>(rng() % 97));
  return p;
}

}  // namespace

TEST_CASE("group law worked example on H1") {
  // g = (0,(1,0)), h = (0,(0,1)) -> (1/2,(1,1))
  GroupFiber g = GroupFiber::h1();
  GroupPoint a{Rat(0), Rat(1), Rat(0)}, b{Rat(0), Rat(0), Rat(1)};
  GroupPoint ab = group_multiply(g, a, b);
  CHECK(ab[0] == Rat(1, 2));
  CHECK(ab[1] == Rat(1));
  CHECK(ab[2] == Rat(1));
}

TEST_CASE("inverse and identity are exact") {
  GroupFiber g = GroupFiber::h1();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    GroupPoint a = rand_point(rng, 3);
    GroupPoint inv = group_inverse(g, a);
    GroupPoint e = group_multiply(g, a, inv);
    for (const auto& v : e) CHECK(v == Rat(0));
  }
}

TEST_CASE("abelian degeneration is vector addition") {
  GroupFiber g = GroupFiber::abelian(1);
  GroupPoint a{Rat(1), Rat(2), Rat(3)}, b{Rat(4), Rat(5), Rat(6)};
  GroupPoint ab = group_multiply(g, a, b);
  CHECK(ab[0] == Rat(5));
  CHECK(ab[1] == Rat(7));
  CHECK(ab[2] == Rat(9));
}

TEST_CASE("associativity exact on 1000 random triples") {
  GroupFiber g = GroupFiber::h1();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    GroupPoint a = rand_point(rng, 3), b = rand_point(rng, 3), c = rand_point(rng, 3);
    GroupPoint l = group_multiply(g, group_multiply(g, a, b), c);
    GroupPoint r = group_multiply(g, a, group_multiply(g, b, c));
    for (int i = 0; i < 3; ++i) CHECK(l[static_cast<std::size_t>(i)] == r[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("dilations are group automorphisms, exactly") {
  GroupFiber g = GroupFiber::h1();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    GroupPoint a = rand_point(rng, 3), b = rand_point(rng, 3);
    Rat t(1 + static_cast<long>(rng() % 50), 1 + static_cast<long>(rng() % 7));
    GroupPoint lhs = group_dilate(g, group_multiply(g, a, b), t);
    GroupPoint rhs = group_multiply(g, group_dilate(g, a, t), group_dilate(g, b, t));
    for (int i = 0; i < 3; ++i) CHECK(lhs[static_cast<std::size_t>(i)] == rhs[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("Levi form validation") {
  LeviForm bad;
  bad.mat = {{Rat(0), Rat(1)}, {Rat(1), Rat(0)}};  // symmetric, not antisymmetric
  CHECK_THROWS_AS(bad.validate(), Error);

  LeviForm degenerate;
  degenerate.mat = {{Rat(0), Rat(0)}, {Rat(0), Rat(0)}};
  degenerate.nondegenerate = true;
  CHECK_THROWS_AS(degenerate.validate(), Error);
  degenerate.nondegenerate = false;
  CHECK_NOTHROW(degenerate.validate());
}
