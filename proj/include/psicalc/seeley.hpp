#pragma once

#include "psicalc/quadrature.hpp"
#include "psicalc/symbols.hpp"

#include <functional>

namespace psicalc {

class EllipticityError : public Error {
 public:
  explicit EllipticityError(const std::string& what) : Error(what) {}
};

class DomainViolationError : public Error {
 public:
  explicit DomainViolationError(const std::string& what) : Error(what) {}
};

/// Sampled infimum of a principal symbol over the chart sample and the unit
/// sphere |xi| = 1, reduced by the 0.99 safety factor. Throws
/// EllipticityError when a sample is not strictly positive real.
double rho_lower_bound(const Expr& p2, int dim, int x_samples = 64,
                       int sphere_samples = 64);

/// Parametric resolvent symbol: asymptotic parametrix of p - lambda with
/// terms homogeneous of degree -2-j under (xi, lambda) -> (t xi, t^2 lambda).
struct ParametricResolventSymbol {
  AsymptoticSymbol symbol;  // order -2, isotropic, with parameter
  AsymptoticSymbol source;  // p, order 2
  AngularSector sector;
  double rho;
  std::shared_ptr<const ConicDomain> domain;
  Expr p2_minus_lambda;  // canonical pole base shared by every term
};

/// Seeley resolvent recursion:
///   q_{-2}   = (p_2 - lambda)^{-1}
///   q_{-2-j} = -q_{-2} sum_{|alpha|+k+l=j, l != j} 1/alpha!
///              d_xi^alpha p_{2-k} D_x^alpha q_{-2-l}
/// all exact.
ParametricResolventSymbol resolvent_parametrix(const AsymptoticSymbol& p,
                                               const AngularSector& sector,
                                               int depth);

/// Numerical contour integral p_{s,2s-j}(x, xi) = (i/2pi) Int lambda^s
/// q_{-2-j} dlambda over the keyhole with r = rho |xi|^2 / 2. Requires
/// Re s < 0 and the contour inside the domain.
Cx contour_power_term(const ParametricResolventSymbol& q, int j, Cx s,
                      const std::vector<double>& x,
                      const std::vector<double>& xi,
                      const ContourQuadratureOptions& opts = {},
                      double radius_override = 0.0);

/// Closed-form evaluation of the same contour integrals via the Cauchy
/// integral formula: every q-term is a combination sum_m f_m (p_2-lambda)^{-m},
/// and each pole contributes binomial(s, m-1)-type factors of p_2^{s-m+1}.
/// Returns the power symbol p_s with exact symbolic terms.
AsymptoticSymbol complex_power_symbol(const AsymptoticSymbol& p, RatC s,
                                      const AngularSector& sector, int depth);

/// Delegation for Re s >= 0: p^s = p^k # p^{s-k} with k the smallest integer
/// exceeding Re s.
AsymptoticSymbol extend_power(const AsymptoticSymbol& p, RatC s,
                              const AngularSector& sector, int depth);

/// Classical composition expansion r_j = sum_{|alpha|+k+l=j} 1/alpha!
/// d_xi^alpha a_k D_x^alpha b_l, truncated at `depth`.
AsymptoticSymbol compose_classical(const AsymptoticSymbol& a,
                                   const AsymptoticSymbol& b, int depth);

// ---------------------------------------------------------------------------
// 1D periodic grid, the oracle bed for the classical calculus.

/// Uniform periodic grid on [0, 2pi) with n points; functions are complex
/// samples, frequencies run over -n/2 .. n/2-1.
struct Grid1D {
  int n;
  explicit Grid1D(int n_) : n(n_) {}
  double x(int j) const { return 2.0 * M_PI * j / n; }
  int freq_lo() const { return -n / 2; }
  int freq_hi() const { return n / 2 - 1; }
};

using GridFn1D = std::vector<Cx>;

GridFn1D dft(const Grid1D& g, const GridFn1D& u);     // hat(u)(k), k indexed from freq_lo
GridFn1D idft(const Grid1D& g, const GridFn1D& hat);  // inverse

/// Symbol sample table p(x_j, k); lambda and s may be bound in `extra`.
struct SymbolTable1D {
  Grid1D grid;
  std::vector<std::vector<Cx>> values;  // [j][k - freq_lo]
  /// Zero-frequency handling: symbols singular at xi=0 get value 0 there.
  static SymbolTable1D build(const Expr& symbol, const Grid1D& grid,
                             const Env& extra, bool zero_dc = false);
};

/// Op(p)u(x_j) = sum_k e^{i k x_j} p(x_j, k) hat(u)(k).
GridFn1D apply_op(const SymbolTable1D& table, const GridFn1D& u);

/// Dense matrix of Op(p) in the nodal basis (column-major, n x n).
std::vector<Cx> op_matrix(const SymbolTable1D& table);

/// Warning hook for quantization diagnostics (aliasing etc.).
struct QuantizeDiagnostics {
  std::vector<std::string> warnings;
};

/// Quantizes an asymptotic symbol truncated at its stored depth; emits an
/// aliasing warning when the symbol order is positive and the grid is small.
GridFn1D quantize_classical(const AsymptoticSymbol& p, const Grid1D& grid,
                            const Env& extra, const GridFn1D& u,
                            QuantizeDiagnostics* diag = nullptr);

double l2_norm(const GridFn1D& u);

}  // namespace psicalc
