#include "psicalc/quantize.hpp"

#include <cmath>
#include <random>
#include <thread>

#include <fftw3.h>

namespace psicalc {

namespace {

void run_parallel(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  int nt = std::min(threads, count);
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t]() {
      for (int i = t; i < count; i += nt) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

void fft3_centered(GridData3& data, int sign) {
  const int n = data.grid.n;
  const int h = n / 2;
  std::vector<Cx> buf(data.v.size());
  // ifftshift in all three axes
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        int as = (a + h) % n, bs = (b + h) % n, cs = (c + h) % n;
        buf[(static_cast<std::size_t>(as) * n + bs) * n + cs] =
            data.v[(static_cast<std::size_t>(a) * n + b) * n + c];
      }
  fftw_plan plan = fftw_plan_dft_3d(
      n, n, n, reinterpret_cast<fftw_complex*>(buf.data()),
      reinterpret_cast<fftw_complex*>(buf.data()),
      sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  double scale = sign == -1 ? 1.0 / data.grid.size() : 1.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        int as = (a + h) % n, bs = (b + h) % n, cs = (c + h) % n;
        data.v[(static_cast<std::size_t>(a) * n + b) * n + c] =
            buf[(static_cast<std::size_t>(as) * n + bs) * n + cs] * scale;
      }
}

GridData3 apply_differential(const FrameOp& op, const SpatialGrid& grid,
                             const GridData3& u) {
  const Grid3& g = grid.freq;
  const int n = g.n;
  GridData3 uhat = u;
  fft3_centered(uhat, -1);
  GridData3 out(g);
  // coefficient samples cached per distinct expression
  for (const auto& [beta, coef] : op.terms()) {
    // (d^beta u) via the spectral multiplier (i k)^beta
    GridData3 du(g);
    for (int a = g.lo(); a <= g.hi(); ++a)
      for (int b = g.lo(); b <= g.hi(); ++b)
        for (int c = g.lo(); c <= g.hi(); ++c) {
          Cx m(1.0, 0.0);
          double k0 = a * g.dxi0, k1 = b * g.dxi, k2 = c * g.dxi;
          for (int q = 0; q < beta[0]; ++q) m *= Cx(0.0, k0);
          for (int q = 0; q < beta[1]; ++q) m *= Cx(0.0, k1);
          for (int q = 0; q < beta[2]; ++q) m *= Cx(0.0, k2);
          du.at(a, b, c) = m * uhat.at(a, b, c);
        }
    fft3_centered(du, +1);
    CompiledExpr prog(coef);
    const auto& vars = prog.vars();
    std::vector<Cx> vals(vars.size());
    for (int a = g.lo(); a <= g.hi(); ++a)
      for (int b = g.lo(); b <= g.hi(); ++b)
        for (int c = g.lo(); c <= g.hi(); ++c) {
          for (std::size_t i = 0; i < vars.size(); ++i) {
            if (vars[i].kind != VarKind::X)
              throw Error("operator coefficients must depend on x only");
            double xv = vars[i].index == 0 ? grid.y0(a)
                        : vars[i].index == 1 ? grid.y(b)
                                             : grid.y(c);
            vals[i] = Cx(xv, 0.0);
          }
          out.at(a, b, c) += prog.eval(vals.data()) * du.at(a, b, c);
        }
  }
  return out;
}

GridData3 quantize_heisenberg(const SampledSymbol& p, const HFrame& frame,
                              const SpatialGrid& grid, const GridData3& u,
                              int threads) {
  if (frame.dim() != 3) throw Error("grid quantization is for the d = 3 model");
  const Grid3& g = grid.freq;
  const int n = g.n;
  GridData3 uhat = u;
  fft3_centered(uhat, -1);
  GridData3 out(g);
  // evaluator for p at arbitrary eta
  std::unique_ptr<CompiledExpr> prog;
  std::vector<int> slots(3, -1);
  GridSymbol sampled;
  bool use_expr = p.is_expr();
  if (use_expr) {
    prog = std::make_unique<CompiledExpr>(p.expr());
    for (std::size_t i = 0; i < prog->vars().size(); ++i) {
      VarId v = prog->vars()[i];
      if (v.kind != VarKind::Xi || v.index > 2)
        throw Error("quantized symbols depend on xi only");
      slots[static_cast<std::size_t>(v.index)] = static_cast<int>(i);
    }
  } else {
    sampled.data = p.sample(g, 1e-300, 2e-300);
    sampled.degree = p.degree();
    sampled.cutoff_radius = 0.0;
  }

  // Pu(x0, x') = sum_{k0} e^{i k0 x0} sum_{k'} p(eta(x', k)) uhat(k) e^{i k'.x'}
  // with eta = (k0, k1 - x2 k0 / 2, k2 + x1 k0 / 2) on the model frame.
  run_parallel(n, threads, [&](int ia) {
    int a = g.lo() + ia;
    double k0 = a * g.dxi0;
    std::vector<Cx> vals(use_expr ? prog->vars().size() : 0);
    for (int bx = g.lo(); bx <= g.hi(); ++bx) {
      double x1 = grid.y(bx);
      for (int cx = g.lo(); cx <= g.hi(); ++cx) {
        double x2 = grid.y(cx);
        Cx acc(0.0, 0.0);
        for (int bk = g.lo(); bk <= g.hi(); ++bk) {
          double k1 = bk * g.dxi;
          for (int ck = g.lo(); ck <= g.hi(); ++ck) {
            Cx uh = uhat.at(a, bk, ck);
            if (uh == Cx(0.0, 0.0)) continue;
            double k2 = ck * g.dxi;
            double eta[3] = {k0, k1 - 0.5 * x2 * k0, k2 + 0.5 * x1 * k0};
            Cx pv;
            if (use_expr) {
              for (int i = 0; i < 3; ++i)
                if (slots[static_cast<std::size_t>(i)] >= 0)
                  vals[static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])] =
                      Cx(eta[i], 0.0);
              pv = prog->eval(vals.data());
            } else {
              pv = sampled.eval_homogeneous(eta);
            }
            double ph = k1 * x1 + k2 * x2;
            acc += pv * uh * Cx(std::cos(ph), std::sin(ph));
          }
        }
        // vertical phase applied afterwards per x0 row
        out.at(a, bx, cx) = acc;
      }
    }
  });
  // assemble over x0: out currently holds G_{k0}(x'); transform the vertical
  // axis back to space: u(x0, x') = sum_{k0} e^{i k0 x0} G_{k0}(x')
  GridData3 full(g);
  for (int ax = g.lo(); ax <= g.hi(); ++ax) {
    double x0 = grid.y0(ax);
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        Cx acc(0.0, 0.0);
        for (int a = g.lo(); a <= g.hi(); ++a) {
          double k0 = a * g.dxi0;
          acc += out.at(a, b, c) * Cx(std::cos(k0 * x0), std::sin(k0 * x0));
        }
        full.at(ax, b, c) = acc;
      }
  }
  return full;
}

HFrame periodized_model_frame(const SpatialGrid& grid) {
  HFrame fr = HFrame::model_h1();
  double L = grid.freq.n * grid.freq.dy();
  // x -> (L/2pi) sin(2pi x / L), keeping value and first derivative at 0
  Expr scale = Expr::from_double(L / (2.0 * M_PI));
  Expr wavenum = Expr::from_double(2.0 * M_PI / L);
  auto periodize = [&](VarId v) {
    return scale * sin(wavenum * Expr::variable(v));
  };
  std::map<VarId, Expr> repl{{vx(1), periodize(vx(1))}, {vx(2), periodize(vx(2))}};
  for (auto& row : fr.coef)
    for (auto& e : row) e = e.substitute(repl);
  return fr;
}

GridData3 cg_solve_operator(const FrameOp& op, const SpatialGrid& grid,
                            const GridData3& f, double tol, int max_iter) {
  auto project = [](GridData3& v) {
    Cx mean(0.0, 0.0);
    for (const auto& z : v.v) mean += z;
    mean /= static_cast<double>(v.v.size());
    for (auto& z : v.v) z -= mean;
  };
  GridData3 rhs = f;
  project(rhs);
  GridData3 x(grid.freq);
  GridData3 r = rhs, p = rhs, ap(grid.freq);
  auto dot = [](const GridData3& a, const GridData3& b) {
    Cx s(0.0, 0.0);
    for (std::size_t i = 0; i < a.v.size(); ++i) s += std::conj(a.v[i]) * b.v[i];
    return s;
  };
  double bnorm = std::sqrt(std::abs(dot(rhs, rhs)));
  if (bnorm == 0.0) return x;
  Cx rr = dot(r, r);
  for (int it = 0; it < max_iter; ++it) {
    ap = apply_differential(op, grid, p);
    project(ap);
    Cx pap = dot(p, ap);
    if (std::abs(pap) == 0.0) break;
    Cx alpha = rr / pap;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      x.v[i] += alpha * p.v[i];
      r.v[i] -= alpha * ap.v[i];
    }
    Cx rr_new = dot(r, r);
    if (std::sqrt(std::abs(rr_new)) / bnorm < tol) break;
    Cx beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = r.v[i] + beta * p.v[i];
  }
  return x;
}

GridData3 random_band_data(const SpatialGrid& grid, double k_lo, double k_hi,
                           unsigned seed) {
  const Grid3& g = grid.freq;
  std::mt19937_64 rng(seed * 0x9e3779b9ull + 17u);
  auto uni = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
  GridData3 hat(g);
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        double pn = g.pseudo_norm_at(a, b, c);
        if (pn < k_lo || pn > k_hi) continue;
        double phase = 2.0 * M_PI * uni();
        hat.at(a, b, c) = Cx(std::cos(phase), std::sin(phase)) * (0.5 + uni());
      }
  fft3_centered(hat, +1);
  return hat;
}

double grid_l2(const GridData3& u) {
  double s = 0.0;
  for (const auto& z : u.v) s += std::norm(z);
  return std::sqrt(s / u.v.size());
}

}  // namespace psicalc
