#include "psicalc/seeley.hpp"

#include <algorithm>
#include <cmath>

namespace psicalc {

namespace {

// Deterministic sample directions on the unit sphere S^{d-1}.
std::vector<std::vector<double>> sphere_points(int dim, int count) {
  std::vector<std::vector<double>> pts;
  if (dim == 1) {
    pts.push_back({1.0});
    pts.push_back({-1.0});
    return pts;
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2.0 * M_PI * k / count;
      pts.push_back({std::cos(a), std::sin(a)});
    }
    return pts;
  }
  // Fibonacci lattice for d = 3 (higher d is out of scope for the charts here).
  if (dim != 3) throw Error("sphere sampling implemented for d <= 3");
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    double z = 1.0 - 2.0 * (k + 0.5) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double a = golden * k;
    pts.push_back({r * std::cos(a), r * std::sin(a), z});
  }
  return pts;
}

}  // namespace

double rho_lower_bound(const Expr& p2, int dim, int x_samples, int sphere_samples) {
  CompiledExpr prog(p2);
  auto dirs = sphere_points(dim, sphere_samples);
  double inf = std::numeric_limits<double>::infinity();
  // Chart sample: periodic box [0, 2pi)^dim in x. Expressions with fewer
  // x-variables simply ignore the extra assignments.
  int nx = x_samples;
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  // Sample x along each axis independently plus the diagonal; a full product
  // grid in d=3 would be wasteful and the coefficients here are mild.
  std::vector<std::vector<double>> xpts;
  for (int j = 0; j < nx; ++j) {
    double v = 2.0 * M_PI * j / nx;
    for (int axis = 0; axis < dim; ++axis) {
      std::vector<double> x(static_cast<std::size_t>(dim), 0.0);
      x[static_cast<std::size_t>(axis)] = v;
      xpts.push_back(x);
    }
    xpts.push_back(std::vector<double>(static_cast<std::size_t>(dim), v));
  }
  for (const auto& x : xpts) {
    for (const auto& dir : dirs) {
      Env env;
      for (int i = 0; i < dim; ++i) {
        env.set_x(i, Cx(x[static_cast<std::size_t>(i)], 0.0));
        env.set_xi(i, Cx(dir[static_cast<std::size_t>(i)], 0.0));
      }
      Cx v = prog.eval_env(env);
      if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real())) ||
          v.real() <= 0.0)
        throw EllipticityError("not positive-elliptic on chart");
      inf = std::min(inf, v.real());
    }
  }
  return 0.99 * inf;
}

ParametricResolventSymbol resolvent_parametrix(const AsymptoticSymbol& p,
                                               const AngularSector& sector,
                                               int depth) {
  if (depth < 0) throw Error("resolvent depth must be >= 0");
  if (std::abs(p.order - Cx(2.0, 0.0)) > 1e-12)
    throw Error("resolvent recursion expects an order-2 symbol");
  const int d = p.dim;
  Expr p2 = p.term(0);
  Expr pole_base = p2 - Expr::variable(vlambda());
  Expr q0 = Expr::pow_int(pole_base, -1);

  std::vector<Expr> q{q0};
  auto alphas = multiindices_up_to(d, depth);
  for (int j = 1; j <= depth; ++j) {
    std::vector<Expr> contributions;
    for (const auto& alpha : alphas) {
      int a = alpha.length();
      if (a > j) continue;
      for (int k = 0; k + a <= j; ++k) {
        int l = j - a - k;
        if (l == j) continue;  // the recursion never refers to itself
        if (k >= static_cast<int>(p.terms.size())) continue;
        Expr pk = p.term(k);
        if (pk.is_zero()) continue;
        Expr dp = pk;
        Expr dq = q[static_cast<std::size_t>(l)];
        for (int i = 0; i < d; ++i) {
          if (alpha[i] == 0) continue;
          dp = dp.derivative(vxi(i), alpha[i]);
          dq = dq.derivative_D(vx(i), alpha[i]);
        }
        if (dp.is_zero() || dq.is_zero()) continue;
        Expr inv_fact = Expr::constant(RatC(Rat(1) / factorial(alpha)));
        contributions.push_back(Expr::prod({inv_fact, dp, dq}));
      }
    }
    Expr sum_part = Expr::sum(std::move(contributions));
    q.push_back(Expr::prod({Expr::integer(-1), q0, sum_part}));
  }

  double rho = rho_lower_bound(p2, d);
  auto domain =
      std::make_shared<ConicDomain>(sector, rho, d, Regime::Isotropic);
  ParametricResolventSymbol out{
      AsymptoticSymbol{Cx(-2.0, 0.0), Regime::Isotropic, d, true, std::move(q)},
      p,
      sector,
      rho,
      domain,
      pole_base};
  return out;
}

Cx contour_power_term(const ParametricResolventSymbol& q, int j, Cx s,
                      const std::vector<double>& x,
                      const std::vector<double>& xi,
                      const ContourQuadratureOptions& opts,
                      double radius_override) {
  if (s.real() >= 0.0)
    throw Error("contour power term requires Re s < 0");
  if (j > q.symbol.truncation_depth())
    throw Error("resolvent term index beyond truncation depth");
  const int d = q.symbol.dim;
  double nsq = 0.0;
  for (double v : xi) nsq += v * v;
  if (nsq == 0.0) throw DomainViolationError("contour undefined at xi = 0");
  double r = radius_override > 0.0 ? radius_override : 0.5 * q.rho * nsq;
  // The circle must stay below rho |xi|^2 or the contour leaves the fiber of
  // the conic domain at this xi. This violation is the analyzer's hook.
  if (!(r < q.rho * nsq))
    throw DomainViolationError("contour radius leaves the conic domain");

  Expr term = q.symbol.term(j);
  if (term.is_zero()) return {0.0, 0.0};
  CompiledExpr prog(term);
  const auto& vars = prog.vars();
  std::vector<Cx> vals(vars.size());
  int lambda_slot = -1;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    VarId v = vars[i];
    if (v.kind == VarKind::Lambda) {
      lambda_slot = static_cast<int>(i);
    } else if (v.kind == VarKind::X) {
      if (v.index >= d) throw Error("x index out of range");
      vals[i] = Cx(x[static_cast<std::size_t>(v.index)], 0.0);
    } else if (v.kind == VarKind::Xi) {
      vals[i] = Cx(xi[static_cast<std::size_t>(v.index)], 0.0);
    } else {
      throw Error("unexpected free variable in resolvent term");
    }
  }
  KeyholeContour contour(r, q.sector.theta);
  auto f = [&](Cx lam) {
    if (lambda_slot >= 0) vals[static_cast<std::size_t>(lambda_slot)] = lam;
    return prog.eval(vals.data());
  };
  return contour_power_integral(f, contour, s, opts).value;
}

namespace {

// (i/2pi) contour of lambda^s (c - lambda)^{-m} dlambda =
//   -(-1)^m [ prod_{i=0}^{m-2} (s - i) / (m-1)! ] c^{s-m+1}
// evaluated by the residue at c; m = 1 gives c^s.
RatC pole_coefficient(RatC s, int m) {
  RatC prod(1);
  for (int i = 0; i + 1 < m; ++i) prod *= (s - RatC(i));
  RatC fact(1);
  for (int i = 2; i <= m - 1; ++i) fact *= RatC(i);
  RatC sign = (m % 2 == 0) ? RatC(-1) : RatC(1);
  return sign * prod / fact;
}

}  // namespace

AsymptoticSymbol complex_power_symbol(const AsymptoticSymbol& p, RatC s,
                                      const AngularSector& sector, int depth) {
  if (s.re() >= 0) return extend_power(p, s, sector, depth);
  ParametricResolventSymbol q = resolvent_parametrix(p, sector, depth);
  Expr p2 = p.term(0);
  Expr s_expr = Expr::constant(s);
  std::vector<Expr> out_terms;
  for (int j = 0; j <= depth; ++j) {
    Expr qj = q.symbol.term(j);
    if (qj.is_zero()) {
      out_terms.push_back(Expr::zero());
      continue;
    }
    // Split into sum_m f_m (p2 - lambda)^{-m}.
    std::vector<Expr> terms =
        qj.kind() == NodeKind::Sum ? qj.children() : std::vector<Expr>{qj};
    std::vector<Expr> assembled;
    for (const auto& t : terms) {
      std::vector<Expr> factors =
          t.kind() == NodeKind::Prod ? t.children() : std::vector<Expr>{t};
      int m = 0;
      std::vector<Expr> rest;
      for (const auto& f : factors) {
        if (f.kind() == NodeKind::IntPow && f.int_exponent() < 0 &&
            f.base().same(q.p2_minus_lambda)) {
          m = static_cast<int>(-f.int_exponent());
        } else {
          if (f.depends_on(vlambda()))
            throw Error("resolvent term has lambda outside the pole factor");
          rest.push_back(f);
        }
      }
      if (m == 0)
        throw Error("resolvent term lacks the (p2 - lambda) pole factor");
      RatC coef = pole_coefficient(s, m);
      Expr power =
          Expr::pow(p2, Expr::sum({s_expr, Expr::integer(-(m - 1))}));
      rest.push_back(Expr::constant(coef));
      rest.push_back(power);
      assembled.push_back(Expr::prod(std::move(rest)));
    }
    out_terms.push_back(Expr::sum(std::move(assembled)));
  }
  Cx order = 2.0 * s.to_complex();
  return AsymptoticSymbol{order, Regime::Isotropic, p.dim, false,
                          std::move(out_terms)};
}

AsymptoticSymbol extend_power(const AsymptoticSymbol& p, RatC s,
                              const AngularSector& sector, int depth) {
  if (s.re() < 0) return complex_power_symbol(p, s, sector, depth);
  // smallest integer k > Re s
  Rat re = s.re();
  auto num = boost::multiprecision::numerator(re);
  auto den = boost::multiprecision::denominator(re);
  long k = static_cast<long>(num / den) + 1;  // floor(re) + 1 for re >= 0
  AsymptoticSymbol pk = p;
  for (long i = 1; i < k; ++i) pk = compose_classical(pk, p, depth + 2 * static_cast<int>(k));
  AsymptoticSymbol q = complex_power_symbol(p, s - RatC(Rat(k)), sector, depth);
  AsymptoticSymbol r = compose_classical(pk, q, depth);
  r.order = 2.0 * s.to_complex();
  return r;
}

AsymptoticSymbol compose_classical(const AsymptoticSymbol& a,
                                   const AsymptoticSymbol& b, int depth) {
  if (a.dim != b.dim) throw Error("composition dimension mismatch");
  const int d = a.dim;
  auto alphas = multiindices_up_to(d, depth);
  std::vector<Expr> terms;
  for (int j = 0; j <= depth; ++j) {
    std::vector<Expr> parts;
    for (const auto& alpha : alphas) {
      int al = alpha.length();
      if (al > j) continue;
      for (int k = 0; k + al <= j; ++k) {
        int l = j - al - k;
        Expr ak = a.term(k), bl = b.term(l);
        if (ak.is_zero() || bl.is_zero()) continue;
        for (int i = 0; i < d; ++i) {
          if (alpha[i] == 0) continue;
          ak = ak.derivative(vxi(i), alpha[i]);
          bl = bl.derivative_D(vx(i), alpha[i]);
        }
        if (ak.is_zero() || bl.is_zero()) continue;
        parts.push_back(Expr::prod(
            {Expr::constant(RatC(Rat(1) / factorial(alpha))), ak, bl}));
      }
    }
    terms.push_back(Expr::sum(std::move(parts)));
  }
  return AsymptoticSymbol{a.order + b.order, a.regime, d,
                          a.with_parameter || b.with_parameter, std::move(terms)};
}

// ---------------------------------------------------------------------------

GridFn1D dft(const Grid1D& g, const GridFn1D& u) {
  const int n = g.n;
  GridFn1D out(static_cast<std::size_t>(n));
  for (int k = g.freq_lo(); k <= g.freq_hi(); ++k) {
    Cx acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      double ph = -k * g.x(j);
      acc += u[static_cast<std::size_t>(j)] * Cx(std::cos(ph), std::sin(ph));
    }
    out[static_cast<std::size_t>(k - g.freq_lo())] = acc / static_cast<double>(n);
  }
  return out;
}

GridFn1D idft(const Grid1D& g, const GridFn1D& hat) {
  const int n = g.n;
  GridFn1D out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Cx acc(0.0, 0.0);
    for (int k = g.freq_lo(); k <= g.freq_hi(); ++k) {
      double ph = k * g.x(j);
      acc += hat[static_cast<std::size_t>(k - g.freq_lo())] *
             Cx(std::cos(ph), std::sin(ph));
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

SymbolTable1D SymbolTable1D::build(const Expr& symbol, const Grid1D& grid,
                                   const Env& extra, bool zero_dc) {
  CompiledExpr prog(symbol);
  const auto& vars = prog.vars();
  SymbolTable1D table{grid, {}};
  table.values.assign(static_cast<std::size_t>(grid.n),
                      std::vector<Cx>(static_cast<std::size_t>(grid.n)));
  std::vector<Cx> vals(vars.size());
  int x_slot = -1, xi_slot = -1;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    VarId v = vars[i];
    if (v == vx(0))
      x_slot = static_cast<int>(i);
    else if (v == vxi(0))
      xi_slot = static_cast<int>(i);
    else
      vals[i] = extra.get(v);
  }
  for (int j = 0; j < grid.n; ++j) {
    for (int k = grid.freq_lo(); k <= grid.freq_hi(); ++k) {
      if (zero_dc && k == 0) {
        table.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(
            k - grid.freq_lo())] = Cx(0.0, 0.0);
        continue;
      }
      if (x_slot >= 0) vals[static_cast<std::size_t>(x_slot)] = Cx(grid.x(j), 0.0);
      if (xi_slot >= 0) vals[static_cast<std::size_t>(xi_slot)] = Cx(k, 0.0);
      table.values[static_cast<std::size_t>(j)]
                  [static_cast<std::size_t>(k - grid.freq_lo())] =
          prog.eval(vals.data());
    }
  }
  return table;
}

GridFn1D apply_op(const SymbolTable1D& table, const GridFn1D& u) {
  const Grid1D& g = table.grid;
  GridFn1D hat = dft(g, u);
  GridFn1D out(static_cast<std::size_t>(g.n));
  for (int j = 0; j < g.n; ++j) {
    Cx acc(0.0, 0.0);
    for (int k = g.freq_lo(); k <= g.freq_hi(); ++k) {
      double ph = k * g.x(j);
      acc += table.values[static_cast<std::size_t>(j)]
                         [static_cast<std::size_t>(k - g.freq_lo())] *
             hat[static_cast<std::size_t>(k - g.freq_lo())] *
             Cx(std::cos(ph), std::sin(ph));
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

std::vector<Cx> op_matrix(const SymbolTable1D& table) {
  const int n = table.grid.n;
  std::vector<Cx> mat(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  GridFn1D e(static_cast<std::size_t>(n), Cx(0.0, 0.0));
  for (int col = 0; col < n; ++col) {
    e.assign(static_cast<std::size_t>(n), Cx(0.0, 0.0));
    e[static_cast<std::size_t>(col)] = Cx(1.0, 0.0);
    GridFn1D col_v = apply_op(table, e);
    for (int row = 0; row < n; ++row)
      mat[static_cast<std::size_t>(col) * n + row] = col_v[static_cast<std::size_t>(row)];
  }
  return mat;
}

GridFn1D quantize_classical(const AsymptoticSymbol& p, const Grid1D& grid,
                            const Env& extra, const GridFn1D& u,
                            QuantizeDiagnostics* diag) {
  if (diag && p.order.real() > 0 && grid.n < 16)
    diag->warnings.push_back("aliasing: positive-order symbol on a small grid");
  std::vector<Expr> all;
  for (const auto& t : p.terms) all.push_back(t);
  Expr total = Expr::sum(std::move(all));
  bool zero_dc = p.order.real() < 0;
  SymbolTable1D table = SymbolTable1D::build(total, grid, extra, zero_dc);
  return apply_op(table, u);
}

double l2_norm(const GridFn1D& u) {
  double s = 0.0;
  for (const auto& v : u) s += std::norm(v);
  return std::sqrt(s / std::max<std::size_t>(1, u.size()));
}

}  // namespace psicalc
