#pragma once

#include "psicalc/expr.hpp"

#include <complex>
#include <vector>

namespace psicalc {

/// Dense eigendecomposition A = V diag(w) V^{-1} (column-major input).
/// Wraps LAPACK zgeev.
struct EigResult {
  std::vector<Cx> values;
  std::vector<Cx> vectors;  // column-major right eigenvectors
};
EigResult eig_dense(int n, const std::vector<Cx>& a_colmajor);

/// Solves A x = b in place (column-major A, overwritten); wraps zgesv.
std::vector<Cx> solve_dense(int n, std::vector<Cx> a_colmajor, std::vector<Cx> b);

/// Applies f to A via eigendecomposition: V f(diag) V^{-1}. Eigenvalues with
/// |w| <= drop_tol are mapped to zero (pseudo-inverse style handling of
/// kernels).
std::vector<Cx> matrix_function(int n, const std::vector<Cx>& a_colmajor,
                                const std::function<Cx(Cx)>& f,
                                double drop_tol = 1e-10);

}  // namespace psicalc
