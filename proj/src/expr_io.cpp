#include "psicalc/expr.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace psicalc {

namespace {

std::string rat_str(const Rat& r) {
  std::ostringstream os;
  os << boost::multiprecision::numerator(r);
  if (boost::multiprecision::denominator(r) != 1)
    os << "/" << boost::multiprecision::denominator(r);
  return os.str();
}

// Prints a constant. `as_factor` adds parentheses whenever the printed form
// would not bind as a single atom under * and ^.
std::string const_str(const RatC& c, bool as_factor) {
  if (c.im() == 0) {
    std::string s = rat_str(c.re());
    if (as_factor && (c.re() < 0)) return "(" + s + ")";
    return s;
  }
  if (c.re() == 0) {
    std::string s;
    if (c.im() == 1)
      s = "i";
    else if (c.im() == -1)
      s = "-i";
    else
      s = rat_str(c.im()) + "*i";
    if (as_factor && c.im() != 1) return "(" + s + ")";
    return s;
  }
  std::string s = rat_str(c.re());
  if (c.im() > 0)
    s += "+" + (c.im() == 1 ? std::string("i") : rat_str(c.im()) + "*i");
  else
    s += "-" + (c.im() == -1 ? std::string("i") : rat_str(-c.im()) + "*i");
  return "(" + s + ")";
}

void print_expr(const Expr& e, std::string& out);

void print_base(const Expr& b, std::string& out) {
  bool parens = false;
  switch (b.kind()) {
    case NodeKind::Sum:
    case NodeKind::Prod:
    case NodeKind::IntPow:
    case NodeKind::Pow:
      parens = true;
      break;
    case NodeKind::Const: {
      const RatC& c = b.as_const();
      parens = !(c.im() == 0 && c.re() >= 0 &&
                 boost::multiprecision::denominator(c.re()) == 1);
      break;
    }
    default:
      break;
  }
  if (parens) out += "(";
  print_expr(b, out);
  if (parens) out += ")";
}

void print_factor(const Expr& f, std::string& out) {
  switch (f.kind()) {
    case NodeKind::IntPow:
      print_base(f.base(), out);
      out += "^" + std::to_string(f.int_exponent());
      return;
    case NodeKind::Pow: {
      print_base(f.base(), out);
      out += "^(";
      print_expr(f.exponent(), out);
      out += ")";
      return;
    }
    default:
      print_base(f, out);
      return;
  }
}

void print_term(const Expr& t, std::string& out) {
  if (t.kind() == NodeKind::Prod) {
    const auto& ch = t.children();
    std::size_t first = 0;
    if (ch[0].kind() == NodeKind::Const) {
      const RatC& c = ch[0].as_const();
      if (c == RatC(-1)) {
        out += "-";
      } else {
        out += const_str(c, true);
        out += "*";
      }
      first = 1;
    }
    for (std::size_t i = first; i < ch.size(); ++i) {
      if (i > first) out += "*";
      print_factor(ch[i], out);
    }
    return;
  }
  if (t.kind() == NodeKind::Const) {
    out += const_str(t.as_const(), false);
    return;
  }
  print_factor(t, out);
}

void print_expr(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::Sum: {
      const auto& ch = e.children();
      for (std::size_t i = 0; i < ch.size(); ++i) {
        // Fold a leading negative coefficient into the separating minus.
        Expr term = ch[i];
        bool negate = false;
        if (term.kind() == NodeKind::Const) {
          if (term.as_const().im() == 0 && term.as_const().re() < 0) negate = true;
        } else if (term.kind() == NodeKind::Prod &&
                   term.children()[0].kind() == NodeKind::Const) {
          const RatC& c = term.children()[0].as_const();
          if (c.im() == 0 && c.re() < 0) negate = true;
        }
        if (i == 0) {
          print_term(term, out);
        } else if (negate) {
          out += " - ";
          print_term(Expr::prod({Expr::integer(-1), term}), out);
        } else {
          out += " + ";
          print_term(term, out);
        }
      }
      return;
    }
    case NodeKind::Var:
      out += var_name(e.as_var());
      return;
    case NodeKind::Func: {
      switch (e.func_kind()) {
        case FuncKind::Sin: out += "sin("; break;
        case FuncKind::Cos: out += "cos("; break;
        case FuncKind::Exp: out += "exp("; break;
        case FuncKind::Log: out += "log("; break;
      }
      print_expr(e.base(), out);
      out += ")";
      return;
    }
    default:
      print_term(e, out);
      return;
  }
}

// ---------------------------------------------------------------------------
// Parser: recursive descent over the grammar documented in
// docs/expr-grammar.md. All numeric literals become exact rationals.

struct Lexer {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1, col = 1;

  void skip_ws() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' ||
            text[pos] == '\r')) {
      if (text[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++pos;
    }
  }
  bool eof() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  char take() {
    char c = peek();
    ++pos;
    ++col;
    return c;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, line, col);
  }
};

Expr parse_sum(Lexer& lx);

Rat parse_number(Lexer& lx) {
  std::string digits;
  while (std::isdigit(static_cast<unsigned char>(lx.peek()))) digits += lx.take();
  if (digits.empty()) lx.fail("expected a number");
  Rat r{boost::multiprecision::cpp_int(digits)};
  if (lx.peek() == '.') {
    lx.take();
    std::string frac;
    while (std::isdigit(static_cast<unsigned char>(lx.peek()))) frac += lx.take();
    if (frac.empty()) lx.fail("expected digits after decimal point");
    Rat scale = 1;
    for (std::size_t k = 0; k < frac.size(); ++k) scale *= 10;
    r += Rat(boost::multiprecision::cpp_int(frac)) / scale;
  }
  return r;
}

Expr parse_atom(Lexer& lx) {
  char c = lx.peek();
  if (c == '(') {
    lx.take();
    Expr e = parse_sum(lx);
    if (lx.peek() != ')') lx.fail("expected ')'");
    lx.take();
    return e;
  }
  if (std::isdigit(static_cast<unsigned char>(c))) {
    return Expr::constant(RatC(parse_number(lx)));
  }
  if (std::isalpha(static_cast<unsigned char>(c))) {
    std::string ident;
    while (std::isalnum(static_cast<unsigned char>(lx.peek()))) ident += lx.take();
    if (ident == "i") return Expr::i();
    if (ident == "lambda") return Expr::variable(vlambda());
    if (ident == "s") return Expr::variable(vs());
    if (ident == "t") return Expr::variable(vt());
    auto call = [&](FuncKind f) {
      if (lx.peek() != '(') lx.fail("expected '(' after " + ident);
      lx.take();
      Expr arg = parse_sum(lx);
      if (lx.peek() != ')') lx.fail("expected ')'");
      lx.take();
      return Expr::func(f, arg);
    };
    if (ident == "sin") return call(FuncKind::Sin);
    if (ident == "cos") return call(FuncKind::Cos);
    if (ident == "exp") return call(FuncKind::Exp);
    if (ident == "log") return call(FuncKind::Log);
    if (ident.size() > 1 && ident.substr(0, 2) == "xi") {
      std::string n = ident.substr(2);
      if (!n.empty() && std::all_of(n.begin(), n.end(), [](char d) {
            return std::isdigit(static_cast<unsigned char>(d));
          }))
        return Expr::variable(vxi(std::stoi(n)));
    }
    if (ident[0] == 'x') {
      std::string n = ident.substr(1);
      if (!n.empty() && std::all_of(n.begin(), n.end(), [](char d) {
            return std::isdigit(static_cast<unsigned char>(d));
          }))
        return Expr::variable(vx(std::stoi(n)));
    }
    lx.fail("unknown identifier '" + ident + "'");
  }
  lx.fail("unexpected character");
}

Expr parse_postfix(Lexer& lx) {
  Expr base = parse_atom(lx);
  if (lx.peek() != '^') return base;
  lx.take();
  if (lx.peek() == '(') {
    lx.take();
    Expr e = parse_sum(lx);
    if (lx.peek() != ')') lx.fail("expected ')'");
    lx.take();
    return Expr::pow(base, e);
  }
  bool neg = false;
  if (lx.peek() == '-') {
    lx.take();
    neg = true;
  }
  if (!std::isdigit(static_cast<unsigned char>(lx.peek())))
    lx.fail("expected an integer or parenthesized exponent after '^'");
  Rat n = parse_number(lx);
  if (boost::multiprecision::denominator(n) != 1)
    lx.fail("integer exponent expected; use ^(a/b) for non-integers");
  long v = static_cast<long>(boost::multiprecision::numerator(n));
  return Expr::pow_int(base, neg ? -v : v);
}

Expr parse_unary(Lexer& lx) {
  if (lx.peek() == '-') {
    lx.take();
    return Expr::prod({Expr::integer(-1), parse_unary(lx)});
  }
  if (lx.peek() == '+') {
    lx.take();
    return parse_unary(lx);
  }
  return parse_postfix(lx);
}

Expr parse_term(Lexer& lx) {
  Expr acc = parse_unary(lx);
  while (true) {
    char c = lx.peek();
    if (c == '*') {
      lx.take();
      acc = Expr::prod({acc, parse_unary(lx)});
    } else if (c == '/') {
      lx.take();
      acc = Expr::prod({acc, Expr::pow_int(parse_unary(lx), -1)});
    } else {
      return acc;
    }
  }
}

Expr parse_sum(Lexer& lx) {
  Expr acc = parse_term(lx);
  while (true) {
    char c = lx.peek();
    if (c == '+') {
      lx.take();
      acc = Expr::sum({acc, parse_term(lx)});
    } else if (c == '-') {
      lx.take();
      acc = Expr::sum({acc, Expr::prod({Expr::integer(-1), parse_term(lx)})});
    } else {
      return acc;
    }
  }
}

}  // namespace

std::string Expr::str() const {
  std::string out;
  print_expr(*this, out);
  return out;
}

Expr Expr::parse(std::string_view text) {
  Lexer lx{text};
  if (lx.eof()) throw ParseError("empty expression", lx.line, lx.col);
  Expr e = parse_sum(lx);
  if (!lx.eof()) lx.fail("trailing input after expression");
  return e;
}

}  // namespace psicalc
