#include "psicalc/linalg.hpp"

#include <functional>

#include <lapacke.h>

namespace psicalc {

EigResult eig_dense(int n, const std::vector<Cx>& a_colmajor) {
  std::vector<Cx> a = a_colmajor;
  EigResult out;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  int info = LAPACKE_zgeev(
      LAPACK_COL_MAJOR, 'N', 'V', n,
      reinterpret_cast<lapack_complex_double*>(a.data()), n,
      reinterpret_cast<lapack_complex_double*>(out.values.data()), nullptr, n,
      reinterpret_cast<lapack_complex_double*>(out.vectors.data()), n);
  if (info != 0) throw Error("zgeev failed with info " + std::to_string(info));
  return out;
}

std::vector<Cx> solve_dense(int n, std::vector<Cx> a, std::vector<Cx> b) {
  std::vector<int> ipiv(static_cast<std::size_t>(n));
  int nrhs = static_cast<int>(b.size()) / n;
  int info = LAPACKE_zgesv(LAPACK_COL_MAJOR, n, nrhs,
                           reinterpret_cast<lapack_complex_double*>(a.data()), n,
                           ipiv.data(),
                           reinterpret_cast<lapack_complex_double*>(b.data()), n);
  if (info != 0) throw Error("zgesv failed with info " + std::to_string(info));
  return b;
}

std::vector<Cx> matrix_function(int n, const std::vector<Cx>& a_colmajor,
                                const std::function<Cx(Cx)>& f, double drop_tol) {
  EigResult eig = eig_dense(n, a_colmajor);
  double scale = 0.0;
  for (const auto& w : eig.values) scale = std::max(scale, std::abs(w));
  // F = V diag(f(w)) V^{-1}; with vd := V diag(f(w)) this is the solution of
  // V^T F^T = vd^T.
  std::vector<Cx> vd(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    Cx w = eig.values[static_cast<std::size_t>(c)];
    Cx fw = (std::abs(w) <= drop_tol * std::max(1.0, scale)) ? Cx(0.0, 0.0) : f(w);
    for (int r = 0; r < n; ++r)
      vd[static_cast<std::size_t>(c) * n + r] =
          eig.vectors[static_cast<std::size_t>(c) * n + r] * fw;
  }
  std::vector<Cx> vt(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  std::vector<Cx> vdt(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) {
      vt[static_cast<std::size_t>(r) * n + c] =
          eig.vectors[static_cast<std::size_t>(c) * n + r];
      vdt[static_cast<std::size_t>(r) * n + c] =
          vd[static_cast<std::size_t>(c) * n + r];
    }
  std::vector<Cx> xt = solve_dense(n, std::move(vt), std::move(vdt));
  std::vector<Cx> x(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r)
      x[static_cast<std::size_t>(c) * n + r] =
          xt[static_cast<std::size_t>(r) * n + c];
  return x;
}

}  // namespace psicalc
