#pragma once

#include "psicalc/gridfn.hpp"
#include "psicalc/symbols.hpp"

#include <functional>

namespace psicalc {

class SingularOperatorError : public Error {
 public:
  SingularOperatorError(const std::string& what, double smallest)
      : Error(what + " (smallest spectral estimate " + std::to_string(smallest) + ")"),
        smallest_value(smallest) {}
  double smallest_value;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

/// Antisymmetric Levi form on the 2m horizontal directions, valued in the
/// 1-dimensional vertical direction.
struct LeviForm {
  std::vector<std::vector<Rat>> mat;  // 2m x 2m, antisymmetric
  bool nondegenerate = true;

  int h_dim() const { return static_cast<int>(mat.size()); }
  void validate() const;
  Rat apply(const std::vector<Rat>& a, const std::vector<Rat>& b) const;
  double apply_d(const double* a, const double* b) const;
};

/// Point of the group fiber: entry 0 vertical, entries 1..2m horizontal.
using GroupPoint = std::vector<Rat>;

/// The tangent group: (TM/H) + H with dilations t.(X0+X') = t^2 X0 + t X'
/// and law (X0+X').(Y0+Y') = X0+Y0+L(X',Y')/2 + X'+Y'.
struct GroupFiber {
  int m = 1;  // d = 2m+1
  LeviForm levi;

  static GroupFiber h1();           // standard H^1, L((a,b),(c,d)) = ad - bc
  static GroupFiber abelian(int m); // L = 0, nondegenerate flag off

  int dim() const { return 2 * m + 1; }
  /// sign-scaled Levi constant for the m=1 grid engine (mat[0][1])
  double ell() const { return m == 1 ? static_cast<double>(levi.mat[0][1]) : 1.0; }
};

GroupPoint group_multiply(const GroupFiber& g, const GroupPoint& a, const GroupPoint& b);
GroupPoint group_inverse(const GroupFiber& g, const GroupPoint& a);
GroupPoint group_dilate(const GroupFiber& g, const GroupPoint& a, const Rat& t);

// ---------------------------------------------------------------------------
// Star product engine (model fiber, d = 3).

/// A symbol evaluable on the frequency lattice: either an expression in
/// xi0..xi2 or precomputed samples.
class SampledSymbol {
 public:
  SampledSymbol(const Expr& e, Cx degree);       // sampled on demand
  SampledSymbol(GridSymbol samples);             // NOLINT
  Cx degree() const { return degree_; }
  /// Samples with the low-frequency cutoff applied.
  GridData3 sample(const Grid3& grid, double cutoff_r0, double cutoff_r1) const;
  bool is_expr() const { return has_expr_; }
  const Expr& expr() const { return expr_; }

 private:
  bool has_expr_ = false;
  Expr expr_;
  GridSymbol grid_;
  Cx degree_{0, 0};
};

struct StarOptions {
  double cutoff_lo = 0.0;  // pseudo-norm; 0 selects a grid-spacing default
  double cutoff_hi = 0.0;
  int threads = 0;         // 0 = serial
  bool check_convergence = true;
  // The star integral is nonlocal in xi; the horizontal summation is run on a
  // pad_factor-times-larger box (same spacings) and the requested grid is cut
  // from the center, so box-edge truncation stays out of the returned samples.
  int pad_factor = 2;
  // slice-solver controls (star inverses)
  int solver_max_iter = 800;
  double solver_tol = 1e-9;
};

/// Group-convolution star product of two homogeneous symbols, sampled on the
/// grid: inverse transform each factor horizontally per vertical slice, take
/// the twisted (group-law) convolution by direct summation, transform back.
/// With L = 0 this reduces exactly to the pointwise product of the samples.
GridSymbol star_product_numeric(const SampledSymbol& p1, const SampledSymbol& p2,
                                const GroupFiber& fiber, const Grid3& grid,
                                const StarOptions& opts = {});

struct InvertReport {
  double worst_residual = 0.0;  // max over slices of the final CG residual
  int max_iterations = 0;
};

/// Star-inverse of a homogeneous symbol: solves p * q = 1 slice by slice on
/// the quantized grid operator (preconditioned CG; the xi0 = 0 slice is the
/// abelian one and is solved diagonally). Throws SingularOperatorError when
/// a slice fails to converge.
GridSymbol invert_principal_symbol_numeric(const SampledSymbol& p,
                                           const GroupFiber& fiber,
                                           const Grid3& grid,
                                           const StarOptions& opts = {},
                                           InvertReport* report = nullptr);

/// Matrix-valued variant (entries row-major, dim x dim).
std::vector<GridSymbol> star_product_matrix(const std::vector<SampledSymbol>& p1,
                                            const std::vector<SampledSymbol>& p2,
                                            int dim, const GroupFiber& fiber,
                                            const Grid3& grid,
                                            const StarOptions& opts = {});

std::vector<GridSymbol> invert_principal_symbol_matrix(
    const std::vector<SampledSymbol>& p, int dim, const GroupFiber& fiber,
    const Grid3& grid, const StarOptions& opts = {}, InvertReport* report = nullptr);

/// Homogeneity check on sampled data: compares values at (4a, 2b, 2c) against
/// 2^degree * value(a, b, c) over exact lattice pairs; returns the median
/// relative error.
double grid_homogeneity_error(const GridSymbol& s);

/// Relative deviation of `s` from the constant 1 on mid-frequency shells
/// (pseudo-norm within [0.3, 0.6] of the box maximum).
double mid_shell_identity_residual(const GridSymbol& s);

/// Max modulus over mid-frequency shells.
double mid_shell_max(const GridSymbol& s);

}  // namespace psicalc
