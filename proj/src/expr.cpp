#include "psicalc/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>

namespace psicalc {

struct Node {
  NodeKind kind;
  RatC cval;
  VarId var{VarKind::X, 0};
  FuncKind fk{FuncKind::Sin};
  long ipow = 0;
  std::vector<Expr> ch;
};

namespace {

Expr wrap(std::shared_ptr<const Node> n);

Expr raw_const(RatC c) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Const;
  n->cval = std::move(c);
  return wrap(n);
}

Expr raw_var(VarId v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Var;
  n->var = v;
  return wrap(n);
}

Expr raw_node(NodeKind k, std::vector<Expr> ch) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->ch = std::move(ch);
  return wrap(n);
}

Expr raw_intpow(Expr base, long p) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::IntPow;
  n->ipow = p;
  n->ch = {std::move(base)};
  return wrap(n);
}

Expr raw_func(FuncKind f, Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Func;
  n->fk = f;
  n->ch = {std::move(arg)};
  return wrap(n);
}

}  // namespace

Expr make_expr(std::shared_ptr<const Node> n) { return Expr(std::move(n)); }

namespace {
Expr wrap(std::shared_ptr<const Node> n) { return make_expr(std::move(n)); }
}  // namespace

Expr::Expr() : node_(zero().node_) {}

NodeKind Expr::kind() const { return node_->kind; }
const RatC& Expr::as_const() const { return node_->cval; }
VarId Expr::as_var() const { return node_->var; }
FuncKind Expr::func_kind() const { return node_->fk; }
long Expr::int_exponent() const { return node_->ipow; }
const Expr& Expr::base() const { return node_->ch[0]; }
const Expr& Expr::exponent() const { return node_->ch[1]; }
const std::vector<Expr>& Expr::children() const { return node_->ch; }

bool Expr::is_zero() const {
  return kind() == NodeKind::Const && as_const().is_zero();
}
bool Expr::is_one() const {
  return kind() == NodeKind::Const && as_const().is_one();
}

int compare(const Expr& a, const Expr& b) {
  if (a.node() == b.node()) return 0;
  int ka = static_cast<int>(a.kind()), kb = static_cast<int>(b.kind());
  if (ka != kb) return ka < kb ? -1 : 1;
  switch (a.kind()) {
    case NodeKind::Const:
      return compare(a.as_const(), b.as_const());
    case NodeKind::Var: {
      VarId va = a.as_var(), vb = b.as_var();
      if (va == vb) return 0;
      return va < vb ? -1 : 1;
    }
    case NodeKind::Func: {
      int fa = static_cast<int>(a.func_kind()), fb = static_cast<int>(b.func_kind());
      if (fa != fb) return fa < fb ? -1 : 1;
      return compare(a.base(), b.base());
    }
    case NodeKind::Pow: {
      int c = compare(a.base(), b.base());
      if (c != 0) return c;
      return compare(a.exponent(), b.exponent());
    }
    case NodeKind::IntPow: {
      int c = compare(a.base(), b.base());
      if (c != 0) return c;
      if (a.int_exponent() == b.int_exponent()) return 0;
      return a.int_exponent() < b.int_exponent() ? -1 : 1;
    }
    case NodeKind::Prod:
    case NodeKind::Sum: {
      const auto& ca = a.children();
      const auto& cb = b.children();
      std::size_t n = std::min(ca.size(), cb.size());
      for (std::size_t i = 0; i < n; ++i) {
        int c = compare(ca[i], cb[i]);
        if (c != 0) return c;
      }
      if (ca.size() == cb.size()) return 0;
      return ca.size() < cb.size() ? -1 : 1;
    }
  }
  return 0;
}

namespace {

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

// (base, exponent) view of a canonical non-constant factor.
void factor_parts(const Expr& f, Expr& base, Expr& exp) {
  switch (f.kind()) {
    case NodeKind::IntPow:
      base = f.base();
      exp = Expr::integer(f.int_exponent());
      return;
    case NodeKind::Pow:
      base = f.base();
      exp = f.exponent();
      return;
    default:
      base = f;
      exp = Expr::one();
      return;
  }
}

// (coefficient, monic part) of a canonical term; monic==one() iff constant.
void split_coef(const Expr& term, RatC& coef, Expr& monic) {
  if (term.kind() == NodeKind::Const) {
    coef = term.as_const();
    monic = Expr::one();
    return;
  }
  if (term.kind() == NodeKind::Prod &&
      term.children()[0].kind() == NodeKind::Const) {
    coef = term.children()[0].as_const();
    const auto& ch = term.children();
    if (ch.size() == 2) {
      monic = ch[1];
    } else {
      monic = raw_node(NodeKind::Prod, std::vector<Expr>(ch.begin() + 1, ch.end()));
    }
    return;
  }
  coef = RatC(1);
  monic = term;
}

Expr term_with_coef(const RatC& coef, const Expr& monic) {
  if (monic.is_one()) return raw_const(coef);
  if (coef.is_one()) return monic;
  std::vector<Expr> ch{raw_const(coef)};
  if (monic.kind() == NodeKind::Prod) {
    for (const auto& f : monic.children()) ch.push_back(f);
  } else {
    ch.push_back(monic);
  }
  return raw_node(NodeKind::Prod, std::move(ch));
}

}  // namespace

Expr Expr::constant(RatC c) { return raw_const(std::move(c)); }
Expr Expr::variable(VarId v) { return raw_var(v); }

Expr Expr::sum(std::vector<Expr> terms) {
  RatC const_acc(0);
  std::map<Expr, RatC, ExprLess> by_monic;
  std::vector<Expr> work = std::move(terms);
  while (!work.empty()) {
    Expr e = work.back();
    work.pop_back();
    if (e.kind() == NodeKind::Sum) {
      for (const auto& c : e.children()) work.push_back(c);
      continue;
    }
    RatC coef;
    Expr monic;
    split_coef(e, coef, monic);
    if (monic.is_one()) {
      const_acc += coef;
    } else {
      auto it = by_monic.find(monic);
      if (it == by_monic.end())
        by_monic.emplace(monic, coef);
      else
        it->second += coef;
    }
  }
  std::vector<Expr> out;
  if (!const_acc.is_zero()) out.push_back(raw_const(const_acc));
  for (const auto& [monic, coef] : by_monic) {
    if (coef.is_zero()) continue;
    out.push_back(term_with_coef(coef, monic));
  }
  std::sort(out.begin(), out.end(),
            [](const Expr& a, const Expr& b) { return compare(a, b) < 0; });
  if (out.empty()) return raw_const(RatC(0));
  if (out.size() == 1) return out[0];
  return raw_node(NodeKind::Sum, std::move(out));
}

Expr Expr::prod(std::vector<Expr> factors) {
  // Worklist pass: fold constants, merge exponents over equal bases. Rebuilt
  // factors that fold further (constant powers, expanded sums) re-enter the
  // pass; depth is bounded because every pass strictly simplifies.
  for (int depth = 0; depth < 64; ++depth) {
    RatC coef(1);
    std::map<Expr, std::vector<Expr>, ExprLess> exps;
    std::vector<Expr> work = std::move(factors);
    while (!work.empty()) {
      Expr e = work.back();
      work.pop_back();
      switch (e.kind()) {
        case NodeKind::Const:
          coef *= e.as_const();
          if (coef.is_zero()) return zero();
          break;
        case NodeKind::Prod:
          for (const auto& c : e.children()) work.push_back(c);
          break;
        default: {
          Expr base, exp;
          factor_parts(e, base, exp);
          exps[base].push_back(exp);
          break;
        }
      }
    }
    std::vector<Expr> built;
    bool redo = false;
    for (auto& [base, elist] : exps) {
      Expr etot = sum(std::move(elist));
      if (etot.is_zero()) continue;
      Expr f;
      if (etot.kind() == NodeKind::Const && etot.as_const().is_integer()) {
        long n = etot.as_const().as_long();
        f = pow_int(base, n);
      } else {
        f = pow(base, etot);
      }
      // pow_int/pow may fold to a constant, expand to a sum, or split into a
      // product; any of those goes around again.
      if (f.kind() != NodeKind::Var && f.kind() != NodeKind::Func &&
          f.kind() != NodeKind::IntPow && f.kind() != NodeKind::Pow &&
          f.kind() != NodeKind::Sum)
        redo = true;
      built.push_back(f);
    }
    if (redo) {
      built.push_back(raw_const(coef));
      factors = std::move(built);
      continue;
    }
    // Distribute over a remaining plain-sum factor, if any.
    auto sum_it = std::find_if(built.begin(), built.end(), [](const Expr& f) {
      return f.kind() == NodeKind::Sum;
    });
    if (sum_it != built.end()) {
      Expr s = *sum_it;
      built.erase(sum_it);
      built.push_back(raw_const(coef));
      std::vector<Expr> terms;
      terms.reserve(s.children().size());
      for (const auto& t : s.children()) {
        std::vector<Expr> part = built;
        part.push_back(t);
        terms.push_back(prod(std::move(part)));
      }
      return sum(std::move(terms));
    }
    std::sort(built.begin(), built.end(),
              [](const Expr& a, const Expr& b) { return compare(a, b) < 0; });
    if (built.empty()) return raw_const(coef);
    if (coef.is_one() && built.size() == 1) return built[0];
    std::vector<Expr> ch;
    if (!coef.is_one()) ch.push_back(raw_const(coef));
    for (auto& f : built) ch.push_back(std::move(f));
    if (ch.size() == 1) return ch[0];
    return raw_node(NodeKind::Prod, std::move(ch));
  }
  throw Error("product normalization did not converge");
}

Expr Expr::pow_int(const Expr& base, long n) {
  if (n == 0) return one();
  if (n == 1) return base;
  switch (base.kind()) {
    case NodeKind::Const: {
      if (base.as_const().is_zero() && n < 0)
        throw PoleError("reciprocal of exact zero");
      return raw_const(base.as_const().pow_int(n));
    }
    case NodeKind::IntPow:
      return pow_int(base.base(), n * base.int_exponent());
    case NodeKind::Pow:
      // (b^e)^n = b^(n e) is exact for integer n.
      return pow(base.base(), prod({integer(n), base.exponent()}));
    case NodeKind::Prod: {
      std::vector<Expr> fs;
      for (const auto& c : base.children()) fs.push_back(pow_int(c, n));
      return prod(std::move(fs));
    }
    case NodeKind::Sum: {
      if (n < 0) return raw_intpow(base, n);
      // Expand term-by-term; routing through prod() would just re-merge the
      // equal sum bases into the power being expanded.
      auto terms_of = [](const Expr& e) {
        return e.kind() == NodeKind::Sum ? e.children() : std::vector<Expr>{e};
      };
      Expr acc = base;
      for (long k = 1; k < n; ++k) {
        std::vector<Expr> out;
        for (const auto& ta : terms_of(acc))
          for (const auto& tb : terms_of(base)) out.push_back(prod({ta, tb}));
        acc = sum(std::move(out));
      }
      return acc;
    }
    default:
      return raw_intpow(base, n);
  }
}

Expr Expr::pow(const Expr& base, const Expr& exponent) {
  if (exponent.is_zero()) return one();
  if (exponent.kind() == NodeKind::Const && exponent.as_const().is_integer())
    return pow_int(base, exponent.as_const().as_long());
  if (base.is_one()) return one();
  if (base.is_zero()) return zero();
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::Pow;
  node->ch = {base, exponent};
  return wrap(node);
}

Expr Expr::func(FuncKind f, const Expr& arg) {
  if (arg.is_zero()) {
    switch (f) {
      case FuncKind::Sin: return zero();
      case FuncKind::Cos: return one();
      case FuncKind::Exp: return one();
      case FuncKind::Log: break;
    }
  }
  if (f == FuncKind::Log && arg.is_one()) return zero();
  return raw_func(f, arg);
}

bool Expr::depends_on(VarId v) const {
  switch (kind()) {
    case NodeKind::Const:
      return false;
    case NodeKind::Var:
      return as_var() == v;
    default:
      for (const auto& c : children())
        if (c.depends_on(v)) return true;
      return false;
  }
}

Expr Expr::derivative(VarId v, int order) const {
  if (order < 0) throw Error("derivative order must be >= 0");
  Expr e = *this;
  for (int k = 0; k < order; ++k) {
    switch (e.kind()) {
      case NodeKind::Const:
        e = zero();
        break;
      case NodeKind::Var:
        e = (e.as_var() == v) ? one() : zero();
        break;
      case NodeKind::Sum: {
        std::vector<Expr> t;
        for (const auto& c : e.children()) t.push_back(c.derivative(v));
        e = sum(std::move(t));
        break;
      }
      case NodeKind::Prod: {
        const auto& ch = e.children();
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < ch.size(); ++i) {
          if (!ch[i].depends_on(v)) continue;
          std::vector<Expr> fs;
          for (std::size_t j = 0; j < ch.size(); ++j)
            fs.push_back(i == j ? ch[j].derivative(v) : ch[j]);
          terms.push_back(prod(std::move(fs)));
        }
        e = sum(std::move(terms));
        break;
      }
      case NodeKind::IntPow: {
        long n = e.int_exponent();
        e = prod({integer(n), pow_int(e.base(), n - 1), e.base().derivative(v)});
        break;
      }
      case NodeKind::Pow: {
        if (e.exponent().depends_on(v))
          throw Error("derivative with respect to a symbolic-exponent variable");
        Expr em1 = sum({e.exponent(), integer(-1)});
        e = prod({e.exponent(), pow(e.base(), em1), e.base().derivative(v)});
        break;
      }
      case NodeKind::Func: {
        Expr db = e.base().derivative(v);
        switch (e.func_kind()) {
          case FuncKind::Sin:
            e = prod({func(FuncKind::Cos, e.base()), db});
            break;
          case FuncKind::Cos:
            e = prod({integer(-1), func(FuncKind::Sin, e.base()), db});
            break;
          case FuncKind::Exp:
            e = prod({func(FuncKind::Exp, e.base()), db});
            break;
          case FuncKind::Log:
            e = prod({db, pow_int(e.base(), -1)});
            break;
        }
        break;
      }
    }
  }
  return e;
}

Expr Expr::derivative_D(VarId v, int order) const {
  // D = (1/i) d/dv, so order derivatives pick up (-i)^order.
  return prod({constant(RatC(Rat(0), Rat(-1)).pow_int(order)), derivative(v, order)});
}

Cx Env::get(VarId v) const {
  auto it = vals_.find(v);
  if (it == vals_.end())
    throw Error("unbound variable " + var_name(v) + " in evaluation");
  return it->second;
}

namespace {

// Power with the branch cut on the positive real axis, arg in [0, 2pi);
// real positive bases get arg 0 so c^s is the principal value.
Cx pow_cut(Cx base, Cx expo) {
  if (base == Cx(0.0, 0.0)) {
    if (expo.real() > 0) return {0.0, 0.0};
    throw PoleError("0 raised to a non-positive power");
  }
  double a = std::arg(base);
  if (a < 0) a += 2.0 * M_PI;
  Cx logb(std::log(std::abs(base)), a);
  return std::exp(expo * logb);
}

Cx ipow_cx(Cx z, long n) {
  if (n == 0) return {1.0, 0.0};
  bool inv = n < 0;
  unsigned long k = inv ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
  if (inv && z == Cx(0.0, 0.0)) throw PoleError("pole: reciprocal of zero");
  Cx acc(1.0, 0.0), b = z;
  while (k) {
    if (k & 1) acc *= b;
    b *= b;
    k >>= 1;
  }
  return inv ? Cx(1.0, 0.0) / acc : acc;
}

}  // namespace

Cx Expr::eval(const Env& env) const {
  switch (kind()) {
    case NodeKind::Const:
      return as_const().to_complex();
    case NodeKind::Var:
      return env.get(as_var());
    case NodeKind::Sum: {
      Cx s(0.0, 0.0);
      for (const auto& c : children()) s += c.eval(env);
      return s;
    }
    case NodeKind::Prod: {
      Cx p(1.0, 0.0);
      for (const auto& c : children()) p *= c.eval(env);
      return p;
    }
    case NodeKind::IntPow:
      return ipow_cx(base().eval(env), int_exponent());
    case NodeKind::Pow:
      return pow_cut(base().eval(env), exponent().eval(env));
    case NodeKind::Func: {
      Cx a = base().eval(env);
      switch (func_kind()) {
        case FuncKind::Sin: return std::sin(a);
        case FuncKind::Cos: return std::cos(a);
        case FuncKind::Exp: return std::exp(a);
        case FuncKind::Log:
          if (a == Cx(0.0, 0.0)) throw PoleError("log of zero");
          return std::log(a);
      }
      break;
    }
  }
  throw Error("unreachable expression kind");
}

RatC Expr::eval_exact(const RatEnv& env) const {
  switch (kind()) {
    case NodeKind::Const:
      return as_const();
    case NodeKind::Var: {
      auto it = env.find(as_var());
      if (it == env.end())
        throw Error("unbound variable " + var_name(as_var()) + " in exact evaluation");
      return it->second;
    }
    case NodeKind::Sum: {
      RatC s(0);
      for (const auto& c : children()) s += c.eval_exact(env);
      return s;
    }
    case NodeKind::Prod: {
      RatC p(1);
      for (const auto& c : children()) p *= c.eval_exact(env);
      return p;
    }
    case NodeKind::IntPow: {
      RatC b = base().eval_exact(env);
      if (b.is_zero() && int_exponent() < 0)
        throw PoleError("pole: reciprocal of zero at given point");
      return b.pow_int(int_exponent());
    }
    default:
      throw Error("expression is not rational; exact evaluation unavailable");
  }
}

Expr Expr::substitute(const std::map<VarId, Expr>& repl) const {
  switch (kind()) {
    case NodeKind::Const:
      return *this;
    case NodeKind::Var: {
      auto it = repl.find(as_var());
      return it == repl.end() ? *this : it->second;
    }
    case NodeKind::Sum: {
      std::vector<Expr> t;
      for (const auto& c : children()) t.push_back(c.substitute(repl));
      return sum(std::move(t));
    }
    case NodeKind::Prod: {
      std::vector<Expr> t;
      for (const auto& c : children()) t.push_back(c.substitute(repl));
      return prod(std::move(t));
    }
    case NodeKind::IntPow:
      return pow_int(base().substitute(repl), int_exponent());
    case NodeKind::Pow:
      return pow(base().substitute(repl), exponent().substitute(repl));
    case NodeKind::Func:
      return func(func_kind(), base().substitute(repl));
  }
  throw Error("unreachable expression kind");
}

std::string var_name(VarId v) {
  switch (v.kind) {
    case VarKind::X: return "x" + std::to_string(v.index);
    case VarKind::Xi: return "xi" + std::to_string(v.index);
    case VarKind::Lambda: return "lambda";
    case VarKind::S: return "s";
    case VarKind::T: return "t";
  }
  return "?";
}

Expr scale_covector(const Expr& e, Regime regime, int dim, const Expr& t,
                    bool with_parameter) {
  std::map<VarId, Expr> repl;
  for (int i = 0; i < dim; ++i) {
    int w = (regime == Regime::Anisotropic && i == 0) ? 2 : 1;
    repl[vxi(i)] = Expr::prod({Expr::pow_int(t, w), Expr::variable(vxi(i))});
  }
  if (with_parameter)
    repl[vlambda()] =
        Expr::prod({Expr::pow_int(t, 2), Expr::variable(vlambda())});
  return e.substitute(repl);
}

namespace {

// Structural weighted degree, when the expression is manifestly homogeneous.
std::optional<Cx> structural_degree(const Expr& e, Regime regime,
                                    bool with_parameter) {
  switch (e.kind()) {
    case NodeKind::Const:
      return Cx(0.0, 0.0);
    case NodeKind::Var: {
      VarId v = e.as_var();
      if (v.kind == VarKind::Xi)
        return Cx((regime == Regime::Anisotropic && v.index == 0) ? 2.0 : 1.0, 0.0);
      if (v.kind == VarKind::Lambda && with_parameter) return Cx(2.0, 0.0);
      return Cx(0.0, 0.0);
    }
    case NodeKind::Func: {
      auto d = structural_degree(e.base(), regime, with_parameter);
      if (d && std::abs(*d) < 1e-12) return Cx(0.0, 0.0);
      return std::nullopt;
    }
    case NodeKind::IntPow: {
      auto d = structural_degree(e.base(), regime, with_parameter);
      if (!d) return std::nullopt;
      return *d * static_cast<double>(e.int_exponent());
    }
    case NodeKind::Pow: {
      if (e.exponent().kind() != NodeKind::Const) {
        auto d = structural_degree(e.base(), regime, with_parameter);
        if (d && std::abs(*d) < 1e-12) return Cx(0.0, 0.0);
        return std::nullopt;
      }
      auto d = structural_degree(e.base(), regime, with_parameter);
      if (!d) return std::nullopt;
      return *d * e.exponent().as_const().to_complex();
    }
    case NodeKind::Prod: {
      Cx total(0.0, 0.0);
      for (const auto& c : e.children()) {
        auto d = structural_degree(c, regime, with_parameter);
        if (!d) return std::nullopt;
        total += *d;
      }
      return total;
    }
    case NodeKind::Sum: {
      std::optional<Cx> deg;
      for (const auto& c : e.children()) {
        if (c.is_zero()) continue;
        auto d = structural_degree(c, regime, with_parameter);
        if (!d) return std::nullopt;
        if (!deg) {
          deg = d;
        } else if (std::abs(*deg - *d) > 1e-12) {
          return std::nullopt;
        }
      }
      return deg ? deg : std::optional<Cx>(Cx(0.0, 0.0));
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Cx> detect_homogeneity(const Expr& e, Regime regime, int dim,
                                     bool with_parameter, unsigned seed) {
  if (e.is_zero()) return Cx(0.0, 0.0);
  if (auto d = structural_degree(e, regime, with_parameter)) return d;

  // Numeric fallback: 8 sample points, 3 scales, relative tolerance 1e-9.
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x42ull);
  auto uni = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
  };
  const double scales[3] = {2.0, 3.5, 0.7};
  std::optional<Cx> degree;
  int successes = 0;
  for (int attempt = 0; attempt < 64 && successes < 8; ++attempt) {
    Env env;
    for (int i = 0; i < dim; ++i) {
      env.set_xi(i, Cx((0.5 + uni()) * (uni() < 0.5 ? -1.0 : 1.0), 0.0));
      env.set_x(i, Cx(2.0 * uni() - 1.0, 0.0));
    }
    env.set_lambda(Cx((0.5 + uni()) * std::cos(2 * M_PI * uni()),
                      (0.5 + uni()) * std::sin(2 * M_PI * uni())));
    env.set_s(Cx(-0.5 - uni(), 0.0));
    Cx base_val;
    try {
      base_val = e.eval(env);
    } catch (const PoleError&) {
      continue;
    }
    if (std::abs(base_val) < 1e-14) continue;
    bool ok = true;
    for (double t : scales) {
      Env scaled = env;
      for (int i = 0; i < dim; ++i) {
        int w = (regime == Regime::Anisotropic && i == 0) ? 2 : 1;
        scaled.set_xi(i, env.get(vxi(i)) * std::pow(t, w));
      }
      if (with_parameter) scaled.set_lambda(env.get(vlambda()) * (t * t));
      Cx scaled_val;
      try {
        scaled_val = e.eval(scaled);
      } catch (const PoleError&) {
        ok = false;
        break;
      }
      Cx ratio = scaled_val / base_val;
      if (!degree) {
        Cx m = std::log(ratio) / std::log(t);
        degree = m;
      }
      Cx expect = std::exp(*degree * std::log(Cx(t, 0.0)));
      if (std::abs(ratio - expect) > 1e-9 * std::abs(expect)) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (degree) return std::nullopt;  // inconsistent with first estimate
      continue;
    }
    ++successes;
  }
  if (successes >= 8) return degree;
  return std::nullopt;
}

CompiledExpr::CompiledExpr(const Expr& e) {
  std::map<VarId, int> slots;
  compile(e, slots, 1);
  vars_.resize(slots.size());
  for (const auto& [v, idx] : slots) vars_[static_cast<std::size_t>(idx)] = v;
}

void CompiledExpr::compile(const Expr& e, std::map<VarId, int>& slots, int depth) {
  max_stack_ = std::max(max_stack_, depth);
  switch (e.kind()) {
    case NodeKind::Const:
      ops_.push_back({0, 0, e.as_const().to_complex()});
      return;
    case NodeKind::Var: {
      auto it = slots.find(e.as_var());
      int idx;
      if (it == slots.end()) {
        idx = static_cast<int>(slots.size());
        slots.emplace(e.as_var(), idx);
      } else {
        idx = it->second;
      }
      ops_.push_back({1, idx, {}});
      return;
    }
    case NodeKind::Sum: {
      int i = 0;
      for (const auto& c : e.children()) compile(c, slots, depth + i++);
      ops_.push_back({2, static_cast<int>(e.children().size()), {}});
      return;
    }
    case NodeKind::Prod: {
      int i = 0;
      for (const auto& c : e.children()) compile(c, slots, depth + i++);
      ops_.push_back({3, static_cast<int>(e.children().size()), {}});
      return;
    }
    case NodeKind::IntPow:
      compile(e.base(), slots, depth);
      ops_.push_back({4, static_cast<int>(e.int_exponent()), {}});
      return;
    case NodeKind::Pow:
      compile(e.base(), slots, depth);
      compile(e.exponent(), slots, depth + 1);
      ops_.push_back({5, 0, {}});
      return;
    case NodeKind::Func:
      compile(e.base(), slots, depth);
      ops_.push_back({6, static_cast<int>(e.func_kind()), {}});
      return;
  }
}

Cx CompiledExpr::eval(const Cx* values) const {
  // Stack depth is bounded by compile-time max; use a small local buffer.
  Cx stack[64];
  std::vector<Cx> heap;
  Cx* sp = stack;
  if (max_stack_ + 8 > 64) {
    heap.resize(static_cast<std::size_t>(max_stack_ + 8));
    sp = heap.data();
  }
  int top = 0;
  for (const auto& op : ops_) {
    switch (op.code) {
      case 0:
        sp[top++] = op.cval;
        break;
      case 1:
        sp[top++] = values[op.arg];
        break;
      case 2: {
        Cx s(0, 0);
        for (int k = 0; k < op.arg; ++k) s += sp[--top];
        sp[top++] = s;
        break;
      }
      case 3: {
        Cx p(1, 0);
        for (int k = 0; k < op.arg; ++k) p *= sp[--top];
        sp[top++] = p;
        break;
      }
      case 4:
        sp[top - 1] = ipow_cx(sp[top - 1], op.arg);
        break;
      case 5: {
        Cx e = sp[--top];
        sp[top - 1] = pow_cut(sp[top - 1], e);
        break;
      }
      case 6: {
        Cx a = sp[top - 1];
        switch (static_cast<FuncKind>(op.arg)) {
          case FuncKind::Sin: sp[top - 1] = std::sin(a); break;
          case FuncKind::Cos: sp[top - 1] = std::cos(a); break;
          case FuncKind::Exp: sp[top - 1] = std::exp(a); break;
          case FuncKind::Log:
            if (a == Cx(0.0, 0.0)) throw PoleError("log of zero");
            sp[top - 1] = std::log(a);
            break;
        }
        break;
      }
    }
  }
  return sp[0];
}

Cx CompiledExpr::eval_env(const Env& env) const {
  std::vector<Cx> vals(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) vals[i] = env.get(vars_[i]);
  return eval(vals.data());
}

}  // namespace psicalc
