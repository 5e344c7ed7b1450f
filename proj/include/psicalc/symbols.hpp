#pragma once

#include "psicalc/conic.hpp"
#include "psicalc/expr.hpp"

#include <memory>

namespace psicalc {

/// One homogeneous component of an asymptotic symbol.
struct HomogeneousTerm {
  Cx degree;
  Regime regime;
  bool with_parameter = false;
  Expr expr;
  std::shared_ptr<const ConicDomain> domain;  // set when with_parameter

  /// Checks the homogeneity law of this term at the declared degree.
  /// Zero terms pass trivially.
  bool verify_degree(int dim, unsigned seed = 0, double tol = 1e-8) const {
    if (expr.is_zero()) return true;
    auto d = detect_homogeneity(expr, regime, dim, with_parameter, seed);
    return d && std::abs(*d - degree) < tol * std::max(1.0, std::abs(degree));
  }
};

/// Ordered list of homogeneous terms with degrees order, order-1, ...
struct AsymptoticSymbol {
  Cx order;
  Regime regime;
  int dim = 1;  // covector dimension
  bool with_parameter = false;
  std::vector<Expr> terms;  // term k has degree order - k
  int truncation_depth() const { return static_cast<int>(terms.size()) - 1; }

  Expr term(int k) const {
    return k >= 0 && k < static_cast<int>(terms.size()) ? terms[static_cast<std::size_t>(k)]
                                                        : Expr::zero();
  }
  HomogeneousTerm homogeneous(int k,
                              std::shared_ptr<const ConicDomain> dom = {}) const {
    return HomogeneousTerm{order - static_cast<double>(k), regime, with_parameter,
                           term(k), std::move(dom)};
  }
};

}  // namespace psicalc
