#pragma once

#include "psicalc/heisenberg.hpp"
#include "psicalc/symbols.hpp"

#include <map>

namespace psicalc {

/// H-frame on a chart: vector fields X_0,...,X_{2m} as first-order derivations
/// with polynomial coefficients, X_j = sum_k coef[j][k](x) d/dx_k. X_1..X_{2m}
/// span the hyperplane bundle; X_0 is the transverse direction.
struct HFrame {
  int m = 1;
  std::vector<std::vector<Expr>> coef;
  GroupFiber fiber;

  static HFrame model_h1();
  static HFrame abelian(int m);

  int dim() const { return 2 * m + 1; }
  /// Frame matrix must be invertible and the horizontal rows of full rank at
  /// sample points.
  void validate() const;
  std::vector<std::vector<Expr>> inverse_coef() const;
};

/// Differential operator with symbolic coefficients in coordinate form:
/// sum over derivative multi-indices beta of b_beta(x) d^beta.
class FrameOp {
 public:
  explicit FrameOp(int dim = 3) : dim_(dim) {}

  static FrameOp zero(int dim) { return FrameOp(dim); }
  static FrameOp identity(int dim);
  static FrameOp multiplication(const Expr& f, int dim);
  static FrameOp coordinate_derivative(int k, int dim);
  static FrameOp frame_field(const HFrame& frame, int j);

  int dim() const { return dim_; }
  bool is_zero() const;
  const std::map<MultiIndex, Expr>& terms() const { return terms_; }

  void add_term(const MultiIndex& beta, const Expr& coef);

  FrameOp compose(const FrameOp& other) const;
  friend FrameOp operator+(const FrameOp& a, const FrameOp& b);
  friend FrameOp operator-(const FrameOp& a, const FrameOp& b);
  FrameOp scaled(const Expr& factor) const;

  /// Exact action on a function of x.
  Expr apply_to(const Expr& f) const;

  /// Formal adjoint for the L^2 pairing with the Lebesgue/Popp volume of the
  /// model: (b d^beta)^* = (-1)^{|beta|} d^beta conj(b).
  FrameOp formal_adjoint() const;

  /// Normal-ordered frame-monomial expansion: op = sum e_alpha X^alpha with
  /// X^alpha = X_0^{a_0} X_1^{a_1} ... in this fixed order.
  std::map<MultiIndex, Expr> frame_normal_form(const HFrame& frame) const;

  /// Maximal weighted degree 2 a_0 + a_1 + ... over the frame-monomial
  /// expansion (X_0 weighs 2).
  int heisenberg_order(const HFrame& frame) const;

  /// Exact classical full symbol sum b_beta(x) (i xi)^beta.
  Expr classical_symbol() const;

  /// Exact Heisenberg full symbol p(x, eta) with
  /// classical_symbol()(x, xi) = p(x, c(x) xi).
  Expr heisenberg_symbol(const HFrame& frame) const;

 private:
  int dim_;
  std::map<MultiIndex, Expr> terms_;
};

/// Conjugation of coefficient expressions (variables treated as real).
Expr expr_conjugate(const Expr& e);

/// Splits a polynomial-in-eta expression into weighted-homogeneous parts,
/// keyed by degree (2 per eta_0 power, 1 per horizontal power).
std::map<int, Expr> weighted_parts(const Expr& p, int dim);

/// Full Heisenberg symbol of a differential operator organized as an
/// asymptotic symbol: term j carries degree (order - j).
struct HeisenbergSymbolClass {
  AsymptoticSymbol symbol;  // anisotropic, with exprs in (x, eta)
};

HeisenbergSymbolClass heisenberg_symbol_class_of(const FrameOp& op,
                                                 const HFrame& frame);

/// Exact star product of two x-independent polynomial symbols on the fiber:
/// quantize on the model frame, compose the operators, read the symbol back.
/// Preserves the weighted grading.
Expr star_product_poly(const Expr& p1, const Expr& p2, const HFrame& frame);

/// Quantization of an x-independent polynomial symbol as a left-invariant
/// differential operator on the frame's chart.
FrameOp quantize_poly_symbol(const Expr& p, const HFrame& frame);

/// Symbol-estimate fit for the Heisenberg symbol estimate: the fitted
/// constants C_N over dyadic pseudo-norm shells must not grow.
struct EstimateCheckResult {
  bool passed;
  double max_growth_ratio;
  std::vector<double> shell_constants;
};
EstimateCheckResult check_symbol_estimate(const HeisenbergSymbolClass& cls,
                                          int N, const MultiIndex& alpha,
                                          const MultiIndex& beta,
                                          unsigned seed = 0);

}  // namespace psicalc
