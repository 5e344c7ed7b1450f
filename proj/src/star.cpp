#include "psicalc/heisenberg.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace psicalc {

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  int nt = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      for (int i = t; i < count; i += nt) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

using Slice = std::vector<Cx>;  // n*n, centered storage [b][c]

// Twist angle at vertical index a: theta = xi0 * ell * dy^2 / 2. On
// commensurate grids this is exactly +-2pi a / n.
double twist_angle(const Grid3& g, double ell, int a) {
  double xi0 = a * g.dxi0;
  return 0.5 * xi0 * ell * g.dy() * g.dy();
}

// Phase table ph[i][j] = exp(-i theta (i-h)(j-h)).
Slice phase_table(int n, double theta) {
  Slice ph(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  const int h = n / 2;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double arg = -theta * (i - h) * (j - h);
      ph[static_cast<std::size_t>(i) * n + j] = Cx(std::cos(arg), std::sin(arg));
    }
  return ph;
}

// Transposed copy of the first factor, reusable across many products with
// the same left symbol (the CG solves apply it hundreds of times).
struct TwistedLeft {
  int n;
  std::vector<Cx> At;  // At[m2][m1] = A[m1][m2]
  TwistedLeft(const Slice& A, int n_) : n(n_) {
    At.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        At[static_cast<std::size_t>(c) * n + b] = A[static_cast<std::size_t>(b) * n + c];
  }
};

// Twisted cyclic convolution C(n') = sum_m A(m) B(n'-m) e^{-i theta (m1^ n2^ - m2^ n1^)}
// in centered storage. theta must be 2pi/n-commensurate for exact wrap
// consistency; arbitrary theta uses centered representatives.
void twisted_conv_prepared(const TwistedLeft& left, const Slice& B, Slice& C,
                           const Slice& ph) {
  const int n = left.n;
  const int mask = n - 1;
  const int h = n / 2;
  // Bt doubled along the inner axis so the convolution index never wraps.
  std::vector<Cx> Btd(static_cast<std::size_t>(n) * static_cast<std::size_t>(2 * n));
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c) {
      Cx z = B[static_cast<std::size_t>(b) * n + c];
      Btd[static_cast<std::size_t>(c) * (2 * n) + b] = z;
      Btd[static_cast<std::size_t>(c) * (2 * n) + b + n] = z;
    }
  std::vector<Cx> Atld(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  std::vector<Cx> D(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int n2 = 0; n2 < n; ++n2) {
    // Atld[m2][m1] = A[m1][m2] * ph[m1][n2]
    for (int m2 = 0; m2 < n; ++m2) {
      const Cx* arow = &left.At[static_cast<std::size_t>(m2) * n];
      Cx* orow = &Atld[static_cast<std::size_t>(m2) * n];
      for (int m1 = 0; m1 < n; ++m1)
        orow[m1] = arow[m1] * ph[static_cast<std::size_t>(m1) * n + n2];
    }
    // D[m2][n1] = sum_m1 Atld[m2][m1] * B[n1-m1][n2-m2]
    for (int m2 = 0; m2 < n; ++m2) {
      const Cx* arow = &Atld[static_cast<std::size_t>(m2) * n];
      const Cx* brow = &Btd[static_cast<std::size_t>((n2 - m2 + h + 2 * n) & mask) * (2 * n)];
      Cx* drow = &D[static_cast<std::size_t>(m2) * n];
      for (int n1 = 0; n1 < n; ++n1) {
        const Cx* bseg = brow + ((n1 + h) & mask) + n;  // walk down, no wrap
        Cx acc(0.0, 0.0);
        for (int m1 = 0; m1 < n; ++m1) acc += arow[m1] * bseg[-m1];
        drow[n1] = acc;
      }
    }
    // C[n1][n2] = sum_m2 conj(ph[m2][n1]) D[m2][n1]
    for (int n1 = 0; n1 < n; ++n1) {
      Cx acc(0.0, 0.0);
      for (int m2 = 0; m2 < n; ++m2)
        acc += std::conj(ph[static_cast<std::size_t>(m2) * n + n1]) *
               D[static_cast<std::size_t>(m2) * n + n1];
      C[static_cast<std::size_t>(n1) * n + n2] = acc;
    }
  }
}

void twisted_conv(const Slice& A, const Slice& B, Slice& C, int n, const Slice& ph) {
  TwistedLeft left(A, n);
  twisted_conv_prepared(left, B, C, ph);
}

Slice get_slice(const GridData3& d, int a) {
  const int n = d.grid.n;
  Slice s(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  const int h = n / 2;
  std::copy_n(d.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(a + h) * n * n),
              static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * n), s.begin());
  return s;
}

void set_slice(GridData3& d, int a, const Slice& s) {
  const int n = d.grid.n;
  const int h = n / 2;
  std::copy(s.begin(), s.end(),
            d.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(a + h) * n * n));
}

// In-place centered 2D DFT of a standalone slice via a scratch GridData3-free
// routine: reuse fft2_slice_centered by viewing the slice as one layer.
struct SliceFFT {
  Grid3 grid2;  // same n; only n matters
  GridData3 scratch;
  explicit SliceFFT(const Grid3& g) : grid2(g), scratch() {
    Grid3 one = g;
    scratch.grid = one;
    scratch.v.assign(one.size(), Cx(0, 0));
  }
  void run(Slice& s, int sign) {
    const int n = grid2.n;
    const int h = n / 2;
    std::copy(s.begin(), s.end(),
              scratch.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(h) * n * n));
    fft2_slice_centered(scratch, 0, sign);
    std::copy_n(scratch.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(h) * n * n),
                static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * n), s.begin());
  }
};

void default_cutoffs(const Grid3& g, StarOptions opts, double& r0, double& r1) {
  r0 = opts.cutoff_lo > 0 ? opts.cutoff_lo : 1.5 * g.dxi;
  r1 = opts.cutoff_hi > 0 ? opts.cutoff_hi : 3.0 * g.dxi;
}

}  // namespace

SampledSymbol::SampledSymbol(const Expr& e, Cx degree)
    : has_expr_(true), expr_(e), degree_(degree) {}

SampledSymbol::SampledSymbol(GridSymbol samples)
    : has_expr_(false), grid_(std::move(samples)), degree_(grid_.degree) {}

GridData3 SampledSymbol::sample(const Grid3& grid, double r0, double r1) const {
  GridData3 out(grid);
  if (has_expr_) {
    CompiledExpr prog(expr_);
    const auto& vars = prog.vars();
    std::vector<Cx> vals(vars.size());
    std::vector<int> xi_slot(3, -1);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i].kind == VarKind::Xi && vars[i].index < 3)
        xi_slot[static_cast<std::size_t>(vars[i].index)] = static_cast<int>(i);
      else
        throw Error("fiber symbols may only depend on xi0..xi2");
    }
    for (int a = grid.lo(); a <= grid.hi(); ++a)
      for (int b = grid.lo(); b <= grid.hi(); ++b)
        for (int c = grid.lo(); c <= grid.hi(); ++c) {
          double xi[3];
          grid.xi_at(a, b, c, xi);
          double chi = smooth_step(grid.pseudo_norm_at(a, b, c), r0, r1);
          if (chi == 0.0) {
            out.at(a, b, c) = Cx(0.0, 0.0);
            continue;
          }
          for (int i = 0; i < 3; ++i)
            if (xi_slot[static_cast<std::size_t>(i)] >= 0)
              vals[static_cast<std::size_t>(xi_slot[static_cast<std::size_t>(i)])] =
                  Cx(xi[i], 0.0);
          out.at(a, b, c) = chi * prog.eval(vals.data());
        }
    return out;
  }
  if (grid_.data.grid == grid) {
    out.v = grid_.data.v;
    return out;
  }
  // Same spacings, larger box: keep the stored samples verbatim and fill the
  // outer ring by homogeneous extension.
  const Grid3& own = grid_.data.grid;
  bool compatible = own.dxi == grid.dxi && own.dxi0 == grid.dxi0 && grid.n >= own.n;
  for (int a = grid.lo(); a <= grid.hi(); ++a)
    for (int b = grid.lo(); b <= grid.hi(); ++b)
      for (int c = grid.lo(); c <= grid.hi(); ++c) {
        if (compatible && a >= own.lo() && a <= own.hi() && b >= own.lo() &&
            b <= own.hi() && c >= own.lo() && c <= own.hi()) {
          out.at(a, b, c) = grid_.data.at(a, b, c);
          continue;
        }
        double xi[3];
        grid.xi_at(a, b, c, xi);
        out.at(a, b, c) = grid_.eval_homogeneous(xi);
      }
  return out;
}

GridSymbol star_product_numeric(const SampledSymbol& p1, const SampledSymbol& p2,
                                const GroupFiber& fiber, const Grid3& grid,
                                const StarOptions& opts) {
  if (fiber.m != 1) throw Error("grid star product is implemented on the d=3 fiber");
  Cx deg = p1.degree() + p2.degree();
  if (opts.check_convergence && deg.real() >= 0.0)
    throw DivergenceError(
        "star product of total degree >= 0 is not absolutely convergent; "
        "disable check_convergence to use the regularized evaluation");
  double r0, r1;
  default_cutoffs(grid, opts, r0, r1);
  Grid3 work = grid;
  work.n = grid.n * std::max(1, opts.pad_factor);
  GridData3 P = p1.sample(work, r0, r1);
  GridData3 Q = p2.sample(work, r0, r1);
  const double ell = fiber.ell();
  GridData3 full(work);
  const int n = work.n;
  parallel_for(n, opts.threads, [&](int ia) {
    int a = work.lo() + ia;
    Slice A = get_slice(P, a);
    Slice B = get_slice(Q, a);
    SliceFFT fft(work);
    fft.run(A, +1);
    fft.run(B, +1);
    Slice C(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    double theta = twist_angle(work, ell, a);
    Slice ph = phase_table(n, theta);
    twisted_conv(A, B, C, n, ph);
    fft.run(C, -1);
    set_slice(full, a, C);
  });
  GridSymbol result;
  result.data = GridData3(grid);
  result.degree = deg;
  result.cutoff_radius = r1;
  for (int a = grid.lo(); a <= grid.hi(); ++a)
    for (int b = grid.lo(); b <= grid.hi(); ++b)
      for (int c = grid.lo(); c <= grid.hi(); ++c)
        result.data.at(a, b, c) = full.at(a, b, c);
  return result;
}

namespace {

// Hermitian twisted-convolution slice operator with diagonal-Fourier
// preconditioning, for the star-inverse solves.
struct SliceSolver {
  int n;
  TwistedLeft kernel;  // A_p, pre-transposed
  Slice ph;            // phase table
  SliceFFT fft;
  std::vector<double> precond;  // positive diagonal in frequency space

  SliceSolver(const Grid3& g, const Slice& a_p, double theta, std::vector<double> pre)
      : n(g.n), kernel(a_p, g.n), ph(phase_table(g.n, theta)), fft(g),
        precond(std::move(pre)) {}

  void apply(const Slice& x, Slice& out) { twisted_conv_prepared(kernel, x, out, ph); }

  void precondition(const Slice& r, Slice& z) {
    z = r;
    fft.run(z, -1);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] /= precond[i];
    fft.run(z, +1);
  }

  static Cx dot(const Slice& a, const Slice& b) {
    Cx s(0, 0);
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
  }

  // Preconditioned CG; returns relative residual achieved.
  double solve(const Slice& rhs, Slice& x, int max_iter, double tol, int* iters) {
    const std::size_t sz = rhs.size();
    x.assign(sz, Cx(0, 0));
    Slice r = rhs, z(sz), p(sz), ap(sz);
    double bnorm = std::sqrt(std::abs(dot(rhs, rhs)));
    if (bnorm == 0.0) return 0.0;
    precondition(r, z);
    p = z;
    Cx rz = dot(r, z);
    int it = 0;
    double relres = 1.0;
    for (; it < max_iter; ++it) {
      apply(p, ap);
      Cx pap = dot(p, ap);
      if (std::abs(pap) == 0.0) break;
      Cx alpha = rz / pap;
      for (std::size_t i = 0; i < sz; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      relres = std::sqrt(std::abs(dot(r, r))) / bnorm;
      if (relres < tol) break;
      precondition(r, z);
      Cx rz_new = dot(r, z);
      Cx beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < sz; ++i) p[i] = z[i] + beta * p[i];
    }
    if (iters) *iters = it + 1;
    return relres;
  }
};

}  // namespace

GridSymbol invert_principal_symbol_numeric(const SampledSymbol& p,
                                           const GroupFiber& fiber,
                                           const Grid3& grid,
                                           const StarOptions& opts,
                                           InvertReport* report) {
  if (fiber.m != 1) throw Error("grid star inverse is implemented on the d=3 fiber");
  double r0, r1;
  default_cutoffs(grid, opts, r0, r1);
  GridData3 P = p.sample(grid, r0, r1);
  const double ell = fiber.ell();
  const int n = grid.n;
  const int h = n / 2;
  GridSymbol result;
  result.data = GridData3(grid);
  result.degree = -p.degree();
  result.cutoff_radius = r1;

  // Scale floor: modes where the sampled symbol is essentially dead.
  double pmax = 0.0;
  for (const auto& v : P.v) pmax = std::max(pmax, std::abs(v));
  if (pmax == 0.0)
    throw SingularOperatorError("zero symbol has no star-inverse", 0.0);
  const double floor = 1e-10 * pmax;

  std::vector<double> worst(static_cast<std::size_t>(n), 0.0);
  std::vector<int> iters(static_cast<std::size_t>(n), 0);
  std::vector<int> failed(static_cast<std::size_t>(n), 0);
  std::vector<double> small_est(static_cast<std::size_t>(n), 0.0);

  parallel_for(n, opts.threads, [&](int ia) {
    int a = grid.lo() + ia;
    // The vertical Nyquist slice carries twist angle exactly pi, a grid
    // artifact with spurious near-zero modes; it lies outside the resolved
    // band and is left as zero.
    if (a == grid.lo() && ell != 0.0) return;
    Slice Pslice = get_slice(P, a);
    if (a == 0 || ell == 0.0) {
      // Abelian slice: the operator is diagonal in frequency space.
      Slice out(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
      int live = 0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (std::abs(Pslice[i]) > floor) {
          out[i] = 1.0 / Pslice[i];
          ++live;
        } else {
          out[i] = Cx(0, 0);
        }
      }
      if (live == 0) failed[static_cast<std::size_t>(ia)] = 1;
      set_slice(result.data, a, out);
      return;
    }
    double theta = twist_angle(grid, ell, a);
    double xi0 = std::abs(a * grid.dxi0 * ell);
    // the spectral floor of the twisted operator scales like xi0^{order/2}
    double gap = std::pow(xi0, std::max(1.0, 0.5 * p.degree().real()));
    std::vector<double> pre(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    double small = 1e300;
    for (std::size_t i = 0; i < pre.size(); ++i) {
      pre[i] = std::abs(Pslice[i]) + gap + floor;
      small = std::min(small, std::abs(Pslice[i]) + gap);
    }
    small_est[static_cast<std::size_t>(ia)] = small;
    Slice A = Pslice;
    SliceFFT fft(grid);
    fft.run(A, +1);  // kernel of the slice operator
    SliceSolver solver(grid, std::move(A), theta, std::move(pre));
    // RHS: slice representation of the symbol 1 = delta at the origin.
    Slice rhs(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Cx(0, 0));
    rhs[static_cast<std::size_t>(h) * n + h] = Cx(1.0, 0.0);
    Slice x;
    int it = 0;
    double res = solver.solve(rhs, x, opts.solver_max_iter, opts.solver_tol, &it);
    worst[static_cast<std::size_t>(ia)] = res;
    iters[static_cast<std::size_t>(ia)] = it;
    if (res > 1e-3) failed[static_cast<std::size_t>(ia)] = 1;
    fft.run(x, -1);
    set_slice(result.data, a, x);
  });

  double worst_res = 0.0;
  int max_it = 0;
  for (int ia = 0; ia < n; ++ia) {
    worst_res = std::max(worst_res, worst[static_cast<std::size_t>(ia)]);
    max_it = std::max(max_it, iters[static_cast<std::size_t>(ia)]);
    if (failed[static_cast<std::size_t>(ia)]) {
      throw SingularOperatorError("slice solve failed to converge; quantized operator near-singular",
                                  small_est[static_cast<std::size_t>(ia)]);
    }
  }
  if (report) {
    report->worst_residual = worst_res;
    report->max_iterations = max_it;
  }
  return result;
}

std::vector<GridSymbol> star_product_matrix(const std::vector<SampledSymbol>& p1,
                                            const std::vector<SampledSymbol>& p2,
                                            int dim, const GroupFiber& fiber,
                                            const Grid3& grid, const StarOptions& opts) {
  std::vector<GridSymbol> out;
  out.reserve(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i)
    for (int k = 0; k < dim; ++k) {
      GridSymbol acc;
      bool first = true;
      for (int j = 0; j < dim; ++j) {
        GridSymbol term = star_product_numeric(
            p1[static_cast<std::size_t>(i * dim + j)],
            p2[static_cast<std::size_t>(j * dim + k)], fiber, grid, opts);
        if (first) {
          acc = std::move(term);
          first = false;
        } else {
          for (std::size_t t = 0; t < acc.data.v.size(); ++t)
            acc.data.v[t] += term.data.v[t];
        }
      }
      out.push_back(std::move(acc));
    }
  return out;
}

std::vector<GridSymbol> invert_principal_symbol_matrix(
    const std::vector<SampledSymbol>& p, int dim, const GroupFiber& fiber,
    const Grid3& grid, const StarOptions& opts, InvertReport* report) {
  if (fiber.m != 1) throw Error("grid star inverse is implemented on the d=3 fiber");
  double r0, r1;
  default_cutoffs(grid, opts, r0, r1);
  const int n = grid.n;
  const int h = n / 2;
  const double ell = fiber.ell();
  std::vector<GridData3> P;
  Cx deg = p[0].degree();
  for (const auto& e : p) P.push_back(e.sample(grid, r0, r1));
  std::vector<GridSymbol> result(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
  for (auto& r : result) {
    r.data = GridData3(grid);
    r.degree = -deg;
    r.cutoff_radius = r1;
  }
  double pmax = 0.0;
  for (const auto& block : P)
    for (const auto& v : block.v) pmax = std::max(pmax, std::abs(v));
  if (pmax == 0.0)
    throw SingularOperatorError("zero symbol has no star-inverse", 0.0);
  const double floor = 1e-10 * pmax;

  std::vector<int> failed(static_cast<std::size_t>(n), 0);
  std::vector<double> worst(static_cast<std::size_t>(n), 0.0);
  std::vector<int> iters(static_cast<std::size_t>(n), 0);

  parallel_for(n, opts.threads, [&](int ia) {
    int a = grid.lo() + ia;
    if (a == grid.lo() && ell != 0.0) return;  // vertical Nyquist slice
    const std::size_t ss = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    std::vector<Slice> K(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
    SliceFFT fft(grid);
    for (int e = 0; e < dim * dim; ++e) {
      K[static_cast<std::size_t>(e)] = get_slice(P[static_cast<std::size_t>(e)], a);
    }
    if (a == 0 || ell == 0.0) {
      // abelian slice: pointwise dim x dim matrix inversion in frequency space
      for (std::size_t pt = 0; pt < ss; ++pt) {
        // Gather matrix
        std::vector<Cx> M(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
        double mscale = 0.0;
        for (int e = 0; e < dim * dim; ++e) {
          M[static_cast<std::size_t>(e)] = K[static_cast<std::size_t>(e)][pt];
          mscale = std::max(mscale, std::abs(M[static_cast<std::size_t>(e)]));
        }
        if (mscale <= floor) continue;  // dead mode -> zero
        // dim is tiny (1 or 2 here); closed-form inverse for 2x2
        if (dim == 1) {
          result[0].data.v[static_cast<std::size_t>(a + h) * ss + pt] = 1.0 / M[0];
        } else if (dim == 2) {
          Cx det = M[0] * M[3] - M[1] * M[2];
          if (std::abs(det) <= floor * floor) {
            failed[static_cast<std::size_t>(ia)] = 1;
            continue;
          }
          result[0].data.v[static_cast<std::size_t>(a + h) * ss + pt] = M[3] / det;
          result[1].data.v[static_cast<std::size_t>(a + h) * ss + pt] = -M[1] / det;
          result[2].data.v[static_cast<std::size_t>(a + h) * ss + pt] = -M[2] / det;
          result[3].data.v[static_cast<std::size_t>(a + h) * ss + pt] = M[0] / det;
        } else {
          throw Error("matrix star-inverse supports dim <= 2");
        }
      }
      return;
    }
    double theta = twist_angle(grid, ell, a);
    double xi0 = std::abs(a * grid.dxi0 * ell);
    double gap = std::pow(xi0, std::max(1.0, 0.5 * deg.real()));
    Slice ph = phase_table(n, theta);
    // kernels in position space, pre-transposed for the repeated applies
    std::vector<TwistedLeft> A;
    A.reserve(K.size());
    for (auto s : K) {
      fft.run(s, +1);
      A.emplace_back(s, n);
    }
    // block preconditioner: diagonal of |sum_j P_jj|/dim + xi0 + floor
    std::vector<double> pre(ss);
    for (std::size_t pt = 0; pt < ss; ++pt) {
      double diag = 0.0;
      for (int j = 0; j < dim; ++j)
        diag += std::abs(K[static_cast<std::size_t>(j * dim + j)][pt]);
      pre[pt] = diag / dim + gap + floor;
    }
    // Block CG on the dim*ss system, one RHS per identity column.
    auto block_apply = [&](const std::vector<Slice>& x, std::vector<Slice>& out) {
      Slice tmp(ss);
      for (int i = 0; i < dim; ++i) {
        out[static_cast<std::size_t>(i)].assign(ss, Cx(0, 0));
        for (int j = 0; j < dim; ++j) {
          twisted_conv_prepared(A[static_cast<std::size_t>(i * dim + j)],
                                x[static_cast<std::size_t>(j)], tmp, ph);
          for (std::size_t t = 0; t < ss; ++t)
            out[static_cast<std::size_t>(i)][t] += tmp[t];
        }
      }
    };
    auto block_pre = [&](const std::vector<Slice>& r, std::vector<Slice>& z) {
      for (int i = 0; i < dim; ++i) {
        z[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)];
        fft.run(z[static_cast<std::size_t>(i)], -1);
        for (std::size_t t = 0; t < ss; ++t) z[static_cast<std::size_t>(i)][t] /= pre[t];
        fft.run(z[static_cast<std::size_t>(i)], +1);
      }
    };
    auto block_dot = [&](const std::vector<Slice>& x, const std::vector<Slice>& y) {
      Cx s(0, 0);
      for (int i = 0; i < dim; ++i)
        for (std::size_t t = 0; t < ss; ++t)
          s += std::conj(x[static_cast<std::size_t>(i)][t]) * y[static_cast<std::size_t>(i)][t];
      return s;
    };
    for (int col = 0; col < dim; ++col) {
      std::vector<Slice> rhs(static_cast<std::size_t>(dim), Slice(ss, Cx(0, 0)));
      rhs[static_cast<std::size_t>(col)][static_cast<std::size_t>(h) * n + h] = Cx(1.0, 0.0);
      std::vector<Slice> x(static_cast<std::size_t>(dim), Slice(ss, Cx(0, 0)));
      std::vector<Slice> r = rhs, z(static_cast<std::size_t>(dim), Slice(ss)),
                         pv(static_cast<std::size_t>(dim), Slice(ss)),
                         ap(static_cast<std::size_t>(dim), Slice(ss));
      double bnorm = std::sqrt(std::abs(block_dot(rhs, rhs)));
      block_pre(r, z);
      pv = z;
      Cx rz = block_dot(r, z);
      double relres = 1.0;
      int it = 0;
      for (; it < opts.solver_max_iter; ++it) {
        block_apply(pv, ap);
        Cx pap = block_dot(pv, ap);
        if (std::abs(pap) == 0.0) break;
        Cx alpha = rz / pap;
        for (int i = 0; i < dim; ++i)
          for (std::size_t t = 0; t < ss; ++t) {
            x[static_cast<std::size_t>(i)][t] += alpha * pv[static_cast<std::size_t>(i)][t];
            r[static_cast<std::size_t>(i)][t] -= alpha * ap[static_cast<std::size_t>(i)][t];
          }
        relres = std::sqrt(std::abs(block_dot(r, r))) / bnorm;
        if (relres < opts.solver_tol) break;
        block_pre(r, z);
        Cx rz_new = block_dot(r, z);
        Cx beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < dim; ++i)
          for (std::size_t t = 0; t < ss; ++t)
            pv[static_cast<std::size_t>(i)][t] =
                z[static_cast<std::size_t>(i)][t] + beta * pv[static_cast<std::size_t>(i)][t];
      }
      worst[static_cast<std::size_t>(ia)] = std::max(worst[static_cast<std::size_t>(ia)], relres);
      iters[static_cast<std::size_t>(ia)] = std::max(iters[static_cast<std::size_t>(ia)], it + 1);
      if (relres > 1e-3) failed[static_cast<std::size_t>(ia)] = 1;
      // q column i at slice a
      for (int i = 0; i < dim; ++i) {
        Slice xi = x[static_cast<std::size_t>(i)];
        fft.run(xi, -1);
        // result entry (i, col)
        std::copy(xi.begin(), xi.end(),
                  result[static_cast<std::size_t>(i * dim + col)].data.v.begin() +
                      static_cast<std::ptrdiff_t>(static_cast<std::size_t>(a + h) * ss));
      }
    }
  });

  double worst_res = 0.0;
  int max_it = 0;
  for (int ia = 0; ia < n; ++ia) {
    worst_res = std::max(worst_res, worst[static_cast<std::size_t>(ia)]);
    max_it = std::max(max_it, iters[static_cast<std::size_t>(ia)]);
    if (failed[static_cast<std::size_t>(ia)])
      throw SingularOperatorError("matrix slice solve failed to converge", worst_res);
  }
  if (report) {
    report->worst_residual = worst_res;
    report->max_iterations = max_it;
  }
  return result;
}

double grid_homogeneity_error(const GridSymbol& s) {
  const Grid3& g = s.data.grid;
  Cx two_pow = std::exp(s.degree * std::log(Cx(2.0, 0.0)));
  double pmax = g.pseudo_norm_max();
  // Base points sit just above the regularized hole, scaled partners at
  // twice the pseudo-norm; both well inside the box.
  double lo = std::max(1.3 * s.cutoff_radius, 0.15 * pmax);
  double hi = 0.4 * pmax;
  std::vector<double> errs;
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        int a2 = 4 * a, b2 = 2 * b, c2 = 2 * c;
        if (a2 < g.lo() || a2 > g.hi() || b2 < g.lo() || b2 > g.hi() || c2 < g.lo() ||
            c2 > g.hi())
          continue;
        double pn = g.pseudo_norm_at(a, b, c);
        if (pn < lo || pn > hi) continue;
        Cx base = s.data.at(a, b, c);
        if (std::abs(base) < 1e-12) continue;
        Cx scaled = s.data.at(a2, b2, c2);
        errs.push_back(std::abs(scaled - two_pow * base) / std::abs(two_pow * base));
      }
  if (errs.empty()) return 0.0;
  std::sort(errs.begin(), errs.end());
  return errs[errs.size() / 2];
}

namespace {

template <typename F>
void for_mid_shell(const GridSymbol& s, F&& f) {
  const Grid3& g = s.data.grid;
  double pmax = g.pseudo_norm_max();
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        double pn = g.pseudo_norm_at(a, b, c);
        if (pn < 0.3 * pmax || pn > 0.6 * pmax) continue;
        f(s.data.at(a, b, c));
      }
}

}  // namespace

double mid_shell_identity_residual(const GridSymbol& s) {
  double worst = 0.0;
  for_mid_shell(s, [&](Cx v) { worst = std::max(worst, std::abs(v - Cx(1.0, 0.0))); });
  return worst;
}

double mid_shell_max(const GridSymbol& s) {
  double worst = 0.0;
  for_mid_shell(s, [&](Cx v) { worst = std::max(worst, std::abs(v)); });
  return worst;
}

}  // namespace psicalc
