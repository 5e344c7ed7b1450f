#pragma once

#include "psicalc/multiindex.hpp"
#include "psicalc/rational.hpp"

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psicalc {

using Cx = std::complex<double>;

enum class VarKind : int { X = 0, Xi = 1, Lambda = 2, S = 3, T = 4 };

/// Identity of a free variable: coordinates x_i, covector components xi_i,
/// the spectral parameter lambda, the power parameter s, and an auxiliary
/// scale variable t used by homogeneity checks.
struct VarId {
  VarKind kind;
  int index;
  friend bool operator==(VarId a, VarId b) {
    return a.kind == b.kind && a.index == b.index;
  }
  friend bool operator<(VarId a, VarId b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.index < b.index;
  }
};

inline VarId vx(int i) { return {VarKind::X, i}; }
inline VarId vxi(int i) { return {VarKind::Xi, i}; }
inline VarId vlambda() { return {VarKind::Lambda, 0}; }
inline VarId vs() { return {VarKind::S, 0}; }
inline VarId vt() { return {VarKind::T, 0}; }

std::string var_name(VarId v);

enum class NodeKind : int {
  Const = 0,
  Var = 1,
  Func = 2,
  Pow = 3,     // base ^ (symbolic exponent)
  IntPow = 4,  // base ^ n, n integer != 0, 1
  Prod = 5,
  Sum = 6,
};

enum class FuncKind : int { Sin = 0, Cos = 1, Exp = 2, Log = 3 };

class Expr;
struct Node;

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int col)
      : Error(what + " at line " + std::to_string(line) + ", column " +
              std::to_string(col)),
        line(line),
        col(col) {}
  int line, col;
};

/// Map from variables to complex values for numeric evaluation.
class Env {
 public:
  Env& set(VarId v, Cx value) {
    vals_[v] = value;
    return *this;
  }
  Env& set_x(int i, Cx v) { return set(vx(i), v); }
  Env& set_xi(int i, Cx v) { return set(vxi(i), v); }
  Env& set_lambda(Cx v) { return set(vlambda(), v); }
  Env& set_s(Cx v) { return set(vs(), v); }
  Cx get(VarId v) const;

 private:
  std::map<VarId, Cx> vals_;
};

/// Exact evaluation environment (rational values only).
using RatEnv = std::map<VarId, RatC>;

/// Immutable symbolic expression over complex-rational constants, the
/// variables x_i, xi_i, lambda, s, and the operations sum, product, integer
/// power (reciprocals are negative integer powers), power with symbolic
/// exponent, and sin/cos/exp/log.
///
/// Every constructor normalizes to a canonical expanded sum-of-products form:
/// constants are folded exactly, like terms are collected, and integer powers
/// of equal bases merge. Structural equality of canonical forms is therefore
/// a usable notion of expression equality.
class Expr {
 public:
  Expr();  // zero

  static Expr zero() { return constant(RatC(0)); }
  static Expr one() { return constant(RatC(1)); }
  static Expr constant(RatC c);
  static Expr integer(long v) { return constant(RatC(v)); }
  static Expr i() { return constant(RatC::i()); }
  static Expr variable(VarId v);
  static Expr from_double(double v) { return constant(RatC(rat_from_double(v))); }
  static Expr from_complex(Cx z) { return constant(ratc_from_complex(z)); }

  static Expr sum(std::vector<Expr> terms);
  static Expr prod(std::vector<Expr> factors);
  static Expr pow_int(const Expr& base, long n);
  static Expr pow(const Expr& base, const Expr& exponent);
  static Expr func(FuncKind f, const Expr& arg);

  NodeKind kind() const;
  const RatC& as_const() const;
  VarId as_var() const;
  FuncKind func_kind() const;
  long int_exponent() const;
  const Expr& base() const;      // IntPow / Pow / Func argument
  const Expr& exponent() const;  // Pow
  const std::vector<Expr>& children() const;  // Sum / Prod

  bool is_zero() const;
  bool is_one() const;
  bool is_const() const { return kind() == NodeKind::Const; }

  bool depends_on(VarId v) const;

  Expr derivative(VarId v, int order = 1) const;
  /// D = (1/i) d/dv convention.
  Expr derivative_D(VarId v, int order = 1) const;

  Cx eval(const Env& env) const;           // throws PoleError on exact poles
  RatC eval_exact(const RatEnv& env) const;  // rational expressions only

  Expr substitute(const std::map<VarId, Expr>& repl) const;

  /// Deterministic canonical text form; parse() round-trips it.
  std::string str() const;
  static Expr parse(std::string_view text);

  friend int compare(const Expr& a, const Expr& b);
  bool same(const Expr& other) const { return compare(*this, other) == 0; }

  friend Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b) {
    return sum({a, prod({integer(-1), b})});
  }
  friend Expr operator*(const Expr& a, const Expr& b) { return prod({a, b}); }
  friend Expr operator/(const Expr& a, const Expr& b) {
    return prod({a, pow_int(b, -1)});
  }
  Expr operator-() const { return prod({integer(-1), *this}); }

  const Node* node() const { return node_.get(); }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
  friend struct Node;
  friend Expr make_expr(std::shared_ptr<const Node>);
};

inline Expr sin(const Expr& e) { return Expr::func(FuncKind::Sin, e); }
inline Expr cos(const Expr& e) { return Expr::func(FuncKind::Cos, e); }
inline Expr exp(const Expr& e) { return Expr::func(FuncKind::Exp, e); }
inline Expr log(const Expr& e) { return Expr::func(FuncKind::Log, e); }

/// Structural degree bookkeeping plus numeric fallback (8 points, 3 scales,
/// relative tolerance 1e-9). Returns the complex degree m with
/// e(x, t.xi, t^2 lambda) = t^m e(x, xi, lambda), or nullopt when the
/// expression is not homogeneous. `dim` is the covector dimension.
std::optional<Cx> detect_homogeneity(const Expr& e, Regime regime, int dim,
                                     bool with_parameter, unsigned seed = 0);

/// Substitutes xi_i -> t^{w_i} xi_i (and lambda -> t^2 lambda when
/// with_parameter) with the given expression for t.
Expr scale_covector(const Expr& e, Regime regime, int dim, const Expr& t,
                    bool with_parameter);

/// Flat postfix program for fast repeated numeric evaluation of one Expr.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  /// Variables appearing in the expression, in slot order.
  const std::vector<VarId>& vars() const { return vars_; }
  /// Evaluate with values[i] bound to vars()[i].
  Cx eval(const Cx* values) const;
  Cx eval_env(const Env& env) const;

 private:
  struct Op {
    int code;  // 0 push const, 1 push var, 2 add(n), 3 mul(n), 4 ipow(n),
               // 5 pow, 6 func(n = FuncKind)
    int arg;
    Cx cval;
  };
  std::vector<Op> ops_;
  std::vector<VarId> vars_;
  int max_stack_ = 0;
  void compile(const Expr& e, std::map<VarId, int>& slots, int depth);
};

}  // namespace psicalc
