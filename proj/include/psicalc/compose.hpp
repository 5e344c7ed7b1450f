#pragma once

#include "psicalc/frameop.hpp"

#include <map>
#include <optional>

namespace psicalc {

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& what) : Error(what) {}
};

/// Index tuple of one composition-expansion contribution
/// h_{alpha beta gamma delta} (D_xi^delta p) * (xi^gamma d_x^alpha d_xi^beta q),
/// subject to |alpha| + |beta| <= <beta> - <gamma> + <delta> = level and
/// |beta| = |gamma|.
struct HTuple {
  MultiIndex alpha, beta, gamma, delta;
  int level() const {
    return weighted_length(beta) - weighted_length(gamma) + weighted_length(delta);
  }
  std::string name() const;
  friend bool operator<(const HTuple& a, const HTuple& b) {
    if (!(a.alpha == b.alpha)) return a.alpha < b.alpha;
    if (!(a.beta == b.beta)) return a.beta < b.beta;
    if (!(a.gamma == b.gamma)) return a.gamma < b.gamma;
    return a.delta < b.delta;
  }
};

/// Calibrated coefficient table for the composition expansion.
struct HTable {
  int max_order = 0;
  std::map<HTuple, Expr> coefficients;  // zero entries omitted
  bool unique = true;
  std::vector<std::string> free_parameters;  // names of undetermined tuples
};

struct CalibrateOptions {
  // Polynomial ansatz degree for h(x); -1 derives it from the frame
  // coefficient degree times the calibration order (the h's are polynomials
  // in the coefficients and their derivatives).
  int h_poly_degree = -1;
  int max_ansatz_stage = 2;  // how far |beta| = |gamma| escalates
  bool error_if_underdetermined = false;
};

/// Solves for the h coefficients by requiring the expansion to reproduce the
/// exact products of monomial differential operators through weighted order
/// `max_order`. Throws CalibrationError when the system is inconsistent, or
/// (optionally) when free parameters remain.
HTable calibrate_h_coefficients(const HFrame& frame, int max_order,
                                const CalibrateOptions& opts = {});

/// One term of a composed symbol: an exact expression or x-coefficients times
/// grid samples.
struct ComposedTerm {
  Cx degree;
  std::optional<Expr> exact;                      // set for the symbolic route
  std::vector<std::pair<Expr, GridSymbol>> grid;  // sum of f_i(x) * samples_i
  bool is_exact() const { return exact.has_value(); }
};

struct ComposedSymbol {
  Cx order;
  std::vector<ComposedTerm> terms;  // term j at degree order - j
};

/// Composition expansion r_{m+m'-j} = sum_{k+l<=j} sum_tuples h (D^delta p_k)
/// * (xi^gamma d^alpha d^beta q_l). Polynomial terms compose exactly through
/// the fiber star product; sampled terms go through the grid engine.
ComposedSymbol compose_heisenberg(const HeisenbergSymbolClass& p,
                                  const HeisenbergSymbolClass& q, int depth,
                                  const HFrame& frame, const HTable& table);

/// Grid-backed variant for a sampled (x-independent) right factor.
ComposedSymbol compose_heisenberg_grid(const HeisenbergSymbolClass& p,
                                       const GridSymbol& q, int depth,
                                       const HFrame& frame, const HTable& table,
                                       const Grid3& grid,
                                       const StarOptions& opts = {});

/// Heisenberg parametrix: leading term is the numeric star-inverse of the
/// principal symbol; corrections are generated from the composition defect,
/// the lambda = 0 shadow of the parametric resolvent recursion.
struct HeisenbergParametrix {
  Cx order;                       // -m
  std::vector<GridSymbol> terms;  // term j at degree -m - j
};

HeisenbergParametrix heisenberg_parametrix(const HeisenbergSymbolClass& p,
                                           int depth, const HFrame& frame,
                                           const HTable& table, const Grid3& grid,
                                           const StarOptions& opts = {});

}  // namespace psicalc
