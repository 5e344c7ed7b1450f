#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psicalc/frameop.hpp"

#include <random>

using namespace psicalc;

namespace {

Expr X(int i) { return Expr::variable(vx(i)); }
Expr Eta(int i) { return Expr::variable(vxi(i)); }

}  // namespace

TEST_CASE("model frame brackets: [X1, X2] = X0") {
  HFrame fr = HFrame::model_h1();
  fr.validate();
  FrameOp x1 = FrameOp::frame_field(fr, 1);
  FrameOp x2 = FrameOp::frame_field(fr, 2);
  FrameOp x0 = FrameOp::frame_field(fr, 0);
  FrameOp bracket = x1.compose(x2) - x2.compose(x1);
  FrameOp diff = bracket - x0;
  CHECK(diff.is_zero());
  CHECK((x0.compose(x1) - x1.compose(x0)).is_zero());
}

TEST_CASE("frame normal form puts coordinate operators in X basis") {
  HFrame fr = HFrame::model_h1();
  // d1 = X1 + (x2/2) X0
  FrameOp d1 = FrameOp::coordinate_derivative(1, 3);
  auto nf = d1.frame_normal_form(fr);
  MultiIndex e1{0, 1, 0}, e0{1, 0, 0};
  REQUIRE(nf.count(e1) == 1);
  CHECK(nf.at(e1).same(Expr::one()));
  REQUIRE(nf.count(e0) == 1);
  CHECK(nf.at(e0).same(Expr::constant(RatC(Rat(1, 2))) * X(2)));

  // reordered product: X2 X1 = X1 X2 - X0
  FrameOp p = FrameOp::frame_field(fr, 2).compose(FrameOp::frame_field(fr, 1));
  auto nf2 = p.frame_normal_form(fr);
  MultiIndex e12{0, 1, 1};
  REQUIRE(nf2.count(e12) == 1);
  CHECK(nf2.at(e12).same(Expr::one()));
  REQUIRE(nf2.count(e0) == 1);
  CHECK(nf2.at(e0).same(Expr::integer(-1)));
}

TEST_CASE("heisenberg order weights the X0 direction twice") {
  HFrame fr = HFrame::model_h1();
  FrameOp x0 = FrameOp::frame_field(fr, 0);
  FrameOp x1 = FrameOp::frame_field(fr, 1);
  CHECK(x0.heisenberg_order(fr) == 2);
  CHECK(x1.heisenberg_order(fr) == 1);
  CHECK(x1.compose(x1).heisenberg_order(fr) == 2);
  CHECK(x0.compose(x1).heisenberg_order(fr) == 3);
  // sublaplacian
  FrameOp sub = FrameOp::zero(3) - x1.compose(x1) - FrameOp::frame_field(fr, 2).compose(FrameOp::frame_field(fr, 2));
  CHECK(sub.heisenberg_order(fr) == 2);
}

TEST_CASE("heisenberg symbols of the frame fields are the covectors") {
  HFrame fr = HFrame::model_h1();
  for (int j = 0; j < 3; ++j) {
    Expr sym = FrameOp::frame_field(fr, j).heisenberg_symbol(fr);
    CHECK(sym.same(Expr::i() * Eta(j)));
  }
  // sublaplacian: -(X1^2 + X2^2) has symbol eta1^2 + eta2^2 exactly
  FrameOp x1 = FrameOp::frame_field(fr, 1), x2 = FrameOp::frame_field(fr, 2);
  FrameOp sub = FrameOp::zero(3) - x1.compose(x1) - x2.compose(x2);
  Expr sym = sub.heisenberg_symbol(fr);
  CHECK(sym.same(Expr::pow_int(Eta(1), 2) + Expr::pow_int(Eta(2), 2)));
}

TEST_CASE("self-adjoint operators have pointwise Hermitian symbols") {
  HFrame fr = HFrame::model_h1();
  FrameOp x1 = FrameOp::frame_field(fr, 1), x2 = FrameOp::frame_field(fr, 2);
  FrameOp p = x1.compose(x2) + x2.compose(x1);  // self-adjoint by symmetry
  FrameOp diff = p - p.formal_adjoint();
  CHECK(diff.is_zero());
  Expr sym = p.heisenberg_symbol(fr);
  CHECK(sym.same(expr_conjugate(sym)));  // real

  // X_j is skew-adjoint
  FrameOp skew = x1 + x1.formal_adjoint();
  CHECK(skew.is_zero());
}

namespace {

// Exact integral of a polynomial expression over the box [-1,1]^3.
RatC poly_integral_box(const Expr& e) {
  auto axis = [](int k) {  // integral of x^k over [-1, 1]
    return (k % 2) ? Rat(0) : Rat(2, k + 1);
  };
  RatC total(0);
  std::vector<Expr> terms =
      e.kind() == NodeKind::Sum ? e.children() : std::vector<Expr>{e};
  for (const auto& t : terms) {
    if (t.is_zero()) continue;
    RatC coef(1);
    int pow[3] = {0, 0, 0};
    std::vector<Expr> factors =
        t.kind() == NodeKind::Prod ? t.children() : std::vector<Expr>{t};
    for (const auto& f : factors) {
      if (f.kind() == NodeKind::Const) {
        coef *= f.as_const();
      } else if (f.kind() == NodeKind::Var) {
        pow[f.as_var().index] += 1;
      } else if (f.kind() == NodeKind::IntPow && f.base().kind() == NodeKind::Var) {
        pow[f.base().as_var().index] += static_cast<int>(f.int_exponent());
      } else {
        throw Error("not a polynomial term");
      }
    }
    total += coef * RatC(axis(pow[0]) * axis(pow[1]) * axis(pow[2]));
  }
  return total;
}

}  // namespace

TEST_CASE("adjoint matches integration by parts, exactly") {
  HFrame fr = HFrame::model_h1();
  FrameOp op = FrameOp::frame_field(fr, 1)
                   .compose(FrameOp::multiplication(X(2) * X(2), 3))
                   .compose(FrameOp::frame_field(fr, 0));
  FrameOp adj = op.formal_adjoint();
  // Polynomial bump (1-x_i^2)^3 vanishes at the box boundary to high order,
  // so every boundary term of the integration by parts is exactly zero and
  // <op F, G> = <F, adj G> holds as an identity of rational numbers.
  Expr bump = Expr::one();
  for (int i = 0; i < 3; ++i)
    bump = bump * Expr::pow_int(Expr::one() - Expr::pow_int(X(i), 2), 3);
  Expr F = (X(1) * X(2) + Expr::integer(2) * X(0)) * bump;
  Expr G = (X(0) * X(1) + Expr::i() * X(2)) * bump;
  RatC lhs = poly_integral_box(op.apply_to(F) * expr_conjugate(G));
  RatC rhs = poly_integral_box(F * expr_conjugate(adj.apply_to(G)));
  CHECK(lhs == rhs);
}

TEST_CASE("star product of polynomial symbols preserves the grading") {
  HFrame fr = HFrame::model_h1();
  // sigma(X1) * sigma(X2) = symbol of X1 X2: i eta1 * i eta2 + (i/2) i eta0
  Expr s1 = Expr::i() * Eta(1), s2 = Expr::i() * Eta(2);
  Expr prod = star_product_poly(s1, s2, fr);
  FrameOp x1x2 = FrameOp::frame_field(fr, 1).compose(FrameOp::frame_field(fr, 2));
  CHECK(prod.same(x1x2.heisenberg_symbol(fr)));
  // the graded commutator reproduces the bracket symbol
  Expr comm = star_product_poly(s1, s2, fr) - star_product_poly(s2, s1, fr);
  CHECK(comm.same(Expr::i() * Eta(0)));

  // abelian fiber: pointwise product
  HFrame ab = HFrame::abelian(1);
  Expr pa = star_product_poly(Eta(1) * Eta(1), Eta(2), ab);
  CHECK(pa.same(Expr::pow_int(Eta(1), 2) * Eta(2)));
}

TEST_CASE("symbol class decomposition and estimate check") {
  HFrame fr = HFrame::model_h1();
  FrameOp x1 = FrameOp::frame_field(fr, 1), x2 = FrameOp::frame_field(fr, 2);
  // an order-2 operator with an order-1 x-dependent perturbation
  FrameOp op = FrameOp::zero(3) - x1.compose(x1) - x2.compose(x2) +
               FrameOp::multiplication(sin(X(1)), 3).compose(x2);
  auto cls = heisenberg_symbol_class_of(op, fr);
  CHECK(std::abs(cls.symbol.order - Cx(2, 0)) < 1e-12);
  CHECK(cls.symbol.term(0).same(Expr::pow_int(Eta(1), 2) + Expr::pow_int(Eta(2), 2)));
  CHECK(cls.symbol.term(1).same(Expr::i() * sin(X(1)) * Eta(2)));
  // every term is anisotropically homogeneous of the declared degree
  for (int j = 0; j <= cls.symbol.truncation_depth(); ++j)
    CHECK(cls.symbol.homogeneous(j).verify_degree(3, 5));
  // the remainder estimate constants stay bounded over dyadic shells
  for (int N : {1, 2}) {
    auto res = check_symbol_estimate(cls, N, MultiIndex{0, 0, 0}, MultiIndex{0, 0, 0});
    CHECK(res.passed);
    auto res2 = check_symbol_estimate(cls, N, MultiIndex{0, 1, 0}, MultiIndex{0, 1, 0});
    CHECK(res2.passed);
  }
}

TEST_CASE("quantize-then-symbol round trips differential symbols") {
  HFrame fr = HFrame::model_h1();
  std::vector<Expr> symbols = {
      Eta(1) * Eta(2) + Expr::i() * Eta(0),
      Expr::pow_int(Eta(1), 2) + Expr::pow_int(Eta(2), 2),
      Eta(0) * Eta(1),
  };
  for (const auto& p : symbols) {
    FrameOp op = quantize_poly_symbol(p, fr);
    CHECK(op.heisenberg_symbol(fr).same(p));
  }
}
