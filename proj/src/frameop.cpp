#include "psicalc/frameop.hpp"

#include <algorithm>
#include <random>

namespace psicalc {

namespace {

Expr half() { return Expr::constant(RatC(Rat(1, 2))); }

Rat binom(int n, int k) {
  Rat r = 1;
  for (int i = 0; i < k; ++i) r *= Rat(n - i, i + 1);
  return r;
}

Rat multi_binom(const MultiIndex& b, const MultiIndex& mu) {
  Rat r = 1;
  for (int i = 0; i < b.dim(); ++i) r *= binom(b[i], mu[i]);
  return r;
}

}  // namespace

HFrame HFrame::model_h1() {
  HFrame f;
  f.m = 1;
  f.fiber = GroupFiber::h1();
  Expr x1 = Expr::variable(vx(1)), x2 = Expr::variable(vx(2));
  f.coef = {
      {Expr::one(), Expr::zero(), Expr::zero()},                  // X0 = d0
      {-(half() * x2), Expr::one(), Expr::zero()},                // X1 = d1 - x2/2 d0
      {half() * x1, Expr::zero(), Expr::one()},                   // X2 = d2 + x1/2 d0
  };
  return f;
}

HFrame HFrame::abelian(int m) {
  HFrame f;
  f.m = m;
  f.fiber = GroupFiber::abelian(m);
  int d = 2 * m + 1;
  f.coef.assign(static_cast<std::size_t>(d),
                std::vector<Expr>(static_cast<std::size_t>(d), Expr::zero()));
  for (int j = 0; j < d; ++j) f.coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = Expr::one();
  return f;
}

void HFrame::validate() const {
  int d = dim();
  if (static_cast<int>(coef.size()) != d) throw Error("frame row count mismatch");
  std::mt19937_64 rng(11);
  auto uni = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1p-53) - 1.0; };
  for (int sample = 0; sample < 16; ++sample) {
    Env env;
    for (int i = 0; i < d; ++i) env.set_x(i, Cx(uni(), 0.0));
    // numeric rank of the horizontal rows via Gaussian elimination
    std::vector<std::vector<Cx>> a(static_cast<std::size_t>(d - 1),
                                   std::vector<Cx>(static_cast<std::size_t>(d)));
    for (int r = 1; r < d; ++r)
      for (int c = 0; c < d; ++c)
        a[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(c)] =
            coef[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].eval(env);
    int rank = 0;
    for (int col = 0; col < d && rank < d - 1; ++col) {
      int piv = -1;
      double best = 1e-9;
      for (int r = rank; r < d - 1; ++r)
        if (std::abs(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) > best) {
          best = std::abs(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]);
          piv = r;
        }
      if (piv < 0) continue;
      std::swap(a[static_cast<std::size_t>(piv)], a[static_cast<std::size_t>(rank)]);
      for (int r = 0; r < d - 1; ++r) {
        if (r == rank) continue;
        Cx f = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
               a[static_cast<std::size_t>(rank)][static_cast<std::size_t>(col)];
        for (int c = 0; c < d; ++c)
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
              f * a[static_cast<std::size_t>(rank)][static_cast<std::size_t>(c)];
      }
      ++rank;
    }
    if (rank != d - 1)
      throw Error("frame horizontal fields do not span H at a sample point");
  }
}

std::vector<std::vector<Expr>> HFrame::inverse_coef() const {
  if (dim() != 3) throw Error("symbolic frame inverse implemented for d = 3");
  const auto& c = coef;
  auto minor2 = [&](int r0, int r1, int c0, int c1) {
    return c[static_cast<std::size_t>(r0)][static_cast<std::size_t>(c0)] *
               c[static_cast<std::size_t>(r1)][static_cast<std::size_t>(c1)] -
           c[static_cast<std::size_t>(r0)][static_cast<std::size_t>(c1)] *
               c[static_cast<std::size_t>(r1)][static_cast<std::size_t>(c0)];
  };
  Expr det = c[0][0] * minor2(1, 2, 1, 2) - c[0][1] * minor2(1, 2, 0, 2) +
             c[0][2] * minor2(1, 2, 0, 1);
  if (det.is_zero()) throw Error("frame matrix is singular");
  Expr inv_det = Expr::pow_int(det, -1);
  std::vector<std::vector<Expr>> inv(3, std::vector<Expr>(3, Expr::zero()));
  // adjugate transpose: inverse entry (i, j) is the cofactor C_ji / det
  int rows[3][2] = {{1, 2}, {0, 2}, {0, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Expr mm = minor2(rows[j][0], rows[j][1], rows[i][0], rows[i][1]);
      Expr sign = ((i + j) % 2 == 0) ? Expr::one() : Expr::integer(-1);
      inv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sign * mm * inv_det;
    }
  return inv;
}

FrameOp FrameOp::identity(int dim) {
  FrameOp op(dim);
  op.add_term(MultiIndex(dim), Expr::one());
  return op;
}

FrameOp FrameOp::multiplication(const Expr& f, int dim) {
  FrameOp op(dim);
  op.add_term(MultiIndex(dim), f);
  return op;
}

FrameOp FrameOp::coordinate_derivative(int k, int dim) {
  FrameOp op(dim);
  MultiIndex beta(dim);
  beta[k] = 1;
  op.add_term(beta, Expr::one());
  return op;
}

FrameOp FrameOp::frame_field(const HFrame& frame, int j) {
  FrameOp op(frame.dim());
  for (int k = 0; k < frame.dim(); ++k) {
    MultiIndex beta(frame.dim());
    beta[k] = 1;
    op.add_term(beta, frame.coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
  }
  return op;
}

bool FrameOp::is_zero() const { return terms_.empty(); }

void FrameOp::add_term(const MultiIndex& beta, const Expr& coef) {
  if (coef.is_zero()) return;
  auto it = terms_.find(beta);
  if (it == terms_.end()) {
    terms_.emplace(beta, coef);
  } else {
    Expr s = it->second + coef;
    if (s.is_zero())
      terms_.erase(it);
    else
      it->second = s;
  }
}

FrameOp FrameOp::compose(const FrameOp& other) const {
  FrameOp out(dim_);
  for (const auto& [beta, b] : terms_) {
    for (const auto& [gamma, c] : other.terms_) {
      // (b d^beta)(c d^gamma) = b sum_{mu <= beta} binom(beta, mu)
      //                         (d^mu c) d^{beta - mu + gamma}
      // enumerate mu <= beta
      MultiIndex mu(dim_);
      auto rec = [&](auto&& self, int pos) -> void {
        if (pos == dim_) {
          Expr dc = c;
          for (int i = 0; i < dim_ && !dc.is_zero(); ++i)
            if (mu[i] > 0) dc = dc.derivative(vx(i), mu[i]);
          if (dc.is_zero()) return;
          MultiIndex target(dim_);
          for (int i = 0; i < dim_; ++i) target[i] = beta[i] - mu[i] + gamma[i];
          out.add_term(target,
                       Expr::prod({Expr::constant(RatC(multi_binom(beta, mu))), b, dc}));
          return;
        }
        for (int v = 0; v <= beta[pos]; ++v) {
          mu[pos] = v;
          self(self, pos + 1);
        }
        mu[pos] = 0;
      };
      rec(rec, 0);
    }
  }
  return out;
}

FrameOp operator+(const FrameOp& a, const FrameOp& b) {
  FrameOp out = a;
  for (const auto& [beta, coef] : b.terms_) out.add_term(beta, coef);
  return out;
}

FrameOp operator-(const FrameOp& a, const FrameOp& b) {
  FrameOp out = a;
  for (const auto& [beta, coef] : b.terms_)
    out.add_term(beta, Expr::prod({Expr::integer(-1), coef}));
  return out;
}

FrameOp FrameOp::scaled(const Expr& factor) const {
  FrameOp out(dim_);
  for (const auto& [beta, coef] : terms_)
    out.add_term(beta, Expr::prod({factor, coef}));
  return out;
}

Expr FrameOp::apply_to(const Expr& f) const {
  std::vector<Expr> parts;
  for (const auto& [beta, coef] : terms_) {
    Expr df = f;
    for (int i = 0; i < dim_ && !df.is_zero(); ++i)
      if (beta[i] > 0) df = df.derivative(vx(i), beta[i]);
    if (df.is_zero()) continue;
    parts.push_back(Expr::prod({coef, df}));
  }
  return Expr::sum(std::move(parts));
}

Expr expr_conjugate(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::Const: {
      const RatC& c = e.as_const();
      return Expr::constant(RatC(c.re(), -c.im()));
    }
    case NodeKind::Var:
      return e;
    case NodeKind::Sum: {
      std::vector<Expr> t;
      for (const auto& c : e.children()) t.push_back(expr_conjugate(c));
      return Expr::sum(std::move(t));
    }
    case NodeKind::Prod: {
      std::vector<Expr> t;
      for (const auto& c : e.children()) t.push_back(expr_conjugate(c));
      return Expr::prod(std::move(t));
    }
    case NodeKind::IntPow:
      return Expr::pow_int(expr_conjugate(e.base()), e.int_exponent());
    case NodeKind::Pow:
      return Expr::pow(expr_conjugate(e.base()), expr_conjugate(e.exponent()));
    case NodeKind::Func:
      return Expr::func(e.func_kind(), expr_conjugate(e.base()));
  }
  throw Error("unreachable");
}

FrameOp FrameOp::formal_adjoint() const {
  FrameOp out(dim_);
  for (const auto& [beta, coef] : terms_) {
    // (b d^beta)^* = (-1)^{|beta|} d^beta conj(b) = compose derivative with
    // multiplication, then expand by Leibniz.
    FrameOp deriv(dim_);
    deriv.add_term(beta, Expr::constant(RatC(Rat((beta.length() % 2) ? -1 : 1))));
    FrameOp mult = FrameOp::multiplication(expr_conjugate(coef), dim_);
    out = out + deriv.compose(mult);
  }
  return out;
}

namespace {

// Enumerates all multi-indices of exact plain length k in dim entries.
std::vector<MultiIndex> multiindices_of_length(int dim, int k) {
  std::vector<MultiIndex> all = multiindices_up_to(dim, k), out;
  for (auto& a : all)
    if (a.length() == k) out.push_back(a);
  return out;
}

// Solves M e = rhs over the expression field by Gaussian elimination.
std::vector<Expr> solve_expr_system(std::vector<std::vector<Expr>> M,
                                    std::vector<Expr> rhs) {
  const int n = static_cast<int>(rhs.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    for (int r = col; r < n; ++r)
      if (!M[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)].is_zero()) {
        piv = r;
        break;
      }
    if (piv < 0) throw Error("frame normal-form system is singular");
    std::swap(M[static_cast<std::size_t>(piv)], M[static_cast<std::size_t>(col)]);
    std::swap(rhs[static_cast<std::size_t>(piv)], rhs[static_cast<std::size_t>(col)]);
    Expr inv = Expr::pow_int(M[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)], -1);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      Expr f = M[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
      if (f.is_zero()) continue;
      Expr factor = f * inv;
      for (int c = col; c < n; ++c)
        M[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
            M[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -
            factor * M[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
      rhs[static_cast<std::size_t>(r)] =
          rhs[static_cast<std::size_t>(r)] - factor * rhs[static_cast<std::size_t>(col)];
    }
  }
  std::vector<Expr> x(static_cast<std::size_t>(n), Expr::zero());
  for (int i = 0; i < n; ++i)
    x[static_cast<std::size_t>(i)] =
        rhs[static_cast<std::size_t>(i)] *
        Expr::pow_int(M[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)], -1);
  return x;
}

}  // namespace

std::map<MultiIndex, Expr> FrameOp::frame_normal_form(const HFrame& frame) const {
  const int d = dim_;
  int order = 0;
  for (const auto& [beta, coef] : terms_) order = std::max(order, beta.length());

  // Precompute frame monomials X^alpha in coordinate form.
  std::map<MultiIndex, FrameOp> monomials;
  std::vector<FrameOp> fields;
  for (int j = 0; j < d; ++j) fields.push_back(FrameOp::frame_field(frame, j));
  for (const auto& alpha : multiindices_up_to(d, order)) {
    FrameOp acc = FrameOp::identity(d);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < alpha[j]; ++k) acc = acc.compose(fields[static_cast<std::size_t>(j)]);
    monomials.emplace(alpha, std::move(acc));
  }

  std::map<MultiIndex, Expr> result;
  FrameOp remaining = *this;
  for (int k = order; k >= 1; --k) {
    auto alphas = multiindices_of_length(d, k);
    auto betas = multiindices_of_length(d, k);
    const int nn = static_cast<int>(alphas.size());
    std::vector<std::vector<Expr>> M(static_cast<std::size_t>(nn),
                                     std::vector<Expr>(static_cast<std::size_t>(nn), Expr::zero()));
    std::vector<Expr> rhs(static_cast<std::size_t>(nn), Expr::zero());
    for (int bi = 0; bi < nn; ++bi) {
      auto it = remaining.terms().find(betas[static_cast<std::size_t>(bi)]);
      if (it != remaining.terms().end()) rhs[static_cast<std::size_t>(bi)] = it->second;
      for (int ai = 0; ai < nn; ++ai) {
        const FrameOp& mono = monomials.at(alphas[static_cast<std::size_t>(ai)]);
        auto mt = mono.terms().find(betas[static_cast<std::size_t>(bi)]);
        if (mt != mono.terms().end())
          M[static_cast<std::size_t>(bi)][static_cast<std::size_t>(ai)] = mt->second;
      }
    }
    std::vector<Expr> e = solve_expr_system(std::move(M), std::move(rhs));
    for (int ai = 0; ai < nn; ++ai) {
      if (e[static_cast<std::size_t>(ai)].is_zero()) continue;
      result[alphas[static_cast<std::size_t>(ai)]] = e[static_cast<std::size_t>(ai)];
      remaining = remaining - monomials.at(alphas[static_cast<std::size_t>(ai)])
                                  .scaled(e[static_cast<std::size_t>(ai)]);
    }
  }
  // order-0 remainder is the multiplication part
  auto it = remaining.terms().find(MultiIndex(d));
  if (it != remaining.terms().end() && !it->second.is_zero())
    result[MultiIndex(d)] = it->second;
  // sanity: nothing but the constant term may remain
  for (const auto& [beta, coef] : remaining.terms()) {
    if (beta.length() > 0 && !coef.is_zero())
      throw Error("frame normal form left a nonzero derivative remainder");
  }
  return result;
}

int FrameOp::heisenberg_order(const HFrame& frame) const {
  auto nf = frame_normal_form(frame);
  int order = 0;
  for (const auto& [alpha, coef] : nf) {
    if (coef.is_zero()) continue;
    order = std::max(order, weighted_length(alpha));
  }
  return order;
}

Expr FrameOp::classical_symbol() const {
  std::vector<Expr> parts;
  for (const auto& [beta, coef] : terms_) {
    std::vector<Expr> fs{coef};
    for (int i = 0; i < dim_; ++i)
      if (beta[i] > 0)
        fs.push_back(Expr::pow_int(Expr::i() * Expr::variable(vxi(i)), beta[i]));
    parts.push_back(Expr::prod(std::move(fs)));
  }
  return Expr::sum(std::move(parts));
}

Expr FrameOp::heisenberg_symbol(const HFrame& frame) const {
  Expr cl = classical_symbol();
  auto inv = frame.inverse_coef();
  // xi_k -> sum_j inv[k][j] eta_j, with eta living on the same xi slots
  std::map<VarId, Expr> repl;
  for (int k = 0; k < dim_; ++k) {
    std::vector<Expr> parts;
    for (int j = 0; j < dim_; ++j)
      parts.push_back(inv[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] *
                      Expr::variable(vxi(j)));
    repl[vxi(k)] = Expr::sum(std::move(parts));
  }
  return cl.substitute(repl);
}

std::map<int, Expr> weighted_parts(const Expr& p, int dim) {
  std::vector<Expr> terms =
      p.kind() == NodeKind::Sum ? p.children() : std::vector<Expr>{p};
  std::map<int, std::vector<Expr>> buckets;
  for (const auto& t : terms) {
    if (t.is_zero()) continue;
    // weighted degree in the eta (xi-slot) variables
    int deg = 0;
    std::vector<Expr> factors =
        t.kind() == NodeKind::Prod ? t.children() : std::vector<Expr>{t};
    for (const auto& f : factors) {
      Expr base = f;
      long n = 1;
      if (f.kind() == NodeKind::IntPow) {
        base = f.base();
        n = f.int_exponent();
      }
      if (base.kind() == NodeKind::Var && base.as_var().kind == VarKind::Xi) {
        int w = base.as_var().index == 0 ? 2 : 1;
        deg += static_cast<int>(n) * w;
      } else if (base.depends_on(vxi(0)) || base.depends_on(vxi(1)) ||
                 (dim > 2 && base.depends_on(vxi(2)))) {
        throw Error("expression is not polynomial in the covector variables");
      }
    }
    buckets[deg].push_back(t);
  }
  std::map<int, Expr> out;
  for (auto& [deg, parts] : buckets) out.emplace(deg, Expr::sum(std::move(parts)));
  return out;
}

HeisenbergSymbolClass heisenberg_symbol_class_of(const FrameOp& op,
                                                 const HFrame& frame) {
  Expr p = op.heisenberg_symbol(frame);
  auto parts = weighted_parts(p, frame.dim());
  int top = parts.empty() ? 0 : parts.rbegin()->first;
  std::vector<Expr> terms;
  for (int deg = top; deg >= 0; --deg) {
    auto it = parts.find(deg);
    terms.push_back(it == parts.end() ? Expr::zero() : it->second);
  }
  HeisenbergSymbolClass out;
  out.symbol = AsymptoticSymbol{Cx(top, 0), Regime::Anisotropic, frame.dim(), false,
                                std::move(terms)};
  return out;
}

FrameOp quantize_poly_symbol(const Expr& p, const HFrame& frame) {
  const int d = frame.dim();
  // substitute eta = c(x) xi, expand, then read off xi^beta coefficients
  std::map<VarId, Expr> repl;
  for (int j = 0; j < d; ++j) {
    std::vector<Expr> parts;
    for (int k = 0; k < d; ++k)
      parts.push_back(frame.coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] *
                      Expr::variable(vxi(k)));
    repl[vxi(j)] = Expr::sum(std::move(parts));
  }
  Expr cl = p.substitute(repl);
  // collect monomials in xi: Op(xi^beta) = (-i d)^beta
  FrameOp out(d);
  std::vector<Expr> terms =
      cl.kind() == NodeKind::Sum ? cl.children() : std::vector<Expr>{cl};
  for (const auto& t : terms) {
    if (t.is_zero()) continue;
    MultiIndex beta(d);
    std::vector<Expr> coef_parts;
    std::vector<Expr> factors =
        t.kind() == NodeKind::Prod ? t.children() : std::vector<Expr>{t};
    for (const auto& f : factors) {
      Expr base = f;
      long nn = 1;
      if (f.kind() == NodeKind::IntPow) {
        base = f.base();
        nn = f.int_exponent();
      }
      if (base.kind() == NodeKind::Var && base.as_var().kind == VarKind::Xi) {
        beta[base.as_var().index] += static_cast<int>(nn);
      } else {
        coef_parts.push_back(f);
      }
    }
    // (-i)^{|beta|}
    coef_parts.push_back(
        Expr::constant(RatC(Rat(0), Rat(-1)).pow_int(beta.length())));
    out.add_term(beta, Expr::prod(std::move(coef_parts)));
  }
  return out;
}

Expr star_product_poly(const Expr& p1, const Expr& p2, const HFrame& frame) {
  if (p1.depends_on(vx(0)) || p1.depends_on(vx(1)) || p1.depends_on(vx(2)) ||
      p2.depends_on(vx(0)) || p2.depends_on(vx(1)) || p2.depends_on(vx(2)))
    throw Error("fiber star product expects x-independent symbols");
  FrameOp a = quantize_poly_symbol(p1, frame);
  FrameOp b = quantize_poly_symbol(p2, frame);
  return a.compose(b).heisenberg_symbol(frame);
}

EstimateCheckResult check_symbol_estimate(const HeisenbergSymbolClass& cls,
                                          int N, const MultiIndex& alpha,
                                          const MultiIndex& beta, unsigned seed) {
  const int d = cls.symbol.dim;
  // remainder after N terms, exactly
  std::vector<Expr> tail;
  for (int j = N; j <= cls.symbol.truncation_depth(); ++j)
    tail.push_back(cls.symbol.term(j));
  Expr rem = Expr::sum(std::move(tail));
  for (int i = 0; i < d; ++i) {
    if (alpha[i] > 0) rem = rem.derivative(vx(i), alpha[i]);
    if (beta[i] > 0) rem = rem.derivative(vxi(i), beta[i]);
  }
  double m = cls.symbol.order.real();
  double expo = m - N - weighted_length(beta);
  EstimateCheckResult out{true, 0.0, {}};
  if (rem.is_zero()) return out;
  CompiledExpr prog(rem);
  std::mt19937_64 rng(seed * 77 + 5);
  auto uni = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
  for (int shell = 0; shell <= 4; ++shell) {
    double lo = std::pow(2.0, shell), hi = 2.0 * lo;
    double c_shell = 0.0;
    for (int samp = 0; samp < 200; ++samp) {
      double r = lo + (hi - lo) * uni();
      // random direction on the pseudo-sphere, scaled anisotropically
      double u0 = 2 * uni() - 1, u1 = 2 * uni() - 1, u2 = 2 * uni() - 1;
      double pn = std::pow(u0 * u0 + u1 * u1 * u1 * u1 + u2 * u2 * u2 * u2, 0.25);
      if (pn < 1e-3) continue;
      Env env;
      env.set_xi(0, Cx(u0 * (r / pn) * (r / pn), 0.0));
      env.set_xi(1, Cx(u1 * (r / pn), 0.0));
      env.set_xi(2, Cx(u2 * (r / pn), 0.0));
      for (int i = 0; i < d; ++i) env.set_x(i, Cx(2 * uni() - 1, 0.0));
      double val = std::abs(prog.eval_env(env));
      c_shell = std::max(c_shell, val / std::pow(r, expo));
    }
    out.shell_constants.push_back(c_shell);
  }
  for (std::size_t i = 1; i < out.shell_constants.size(); ++i) {
    if (out.shell_constants[i - 1] <= 0) continue;
    double ratio = out.shell_constants[i] / out.shell_constants[i - 1];
    out.max_growth_ratio = std::max(out.max_growth_ratio, ratio);
  }
  if (out.max_growth_ratio > 1.1) out.passed = false;
  return out;
}

}  // namespace psicalc
