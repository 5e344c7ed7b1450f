#include "psicalc/compose.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace psicalc {

namespace {

std::string mi_str(const MultiIndex& m) {
  std::string s = "(";
  for (int i = 0; i < m.dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(m[i]);
  }
  return s + ")";
}

using Sig = std::array<int, 6>;  // x0, x1, x2, eta0, eta1, eta2
using PolyMap = std::map<Sig, RatC>;

// Exact coefficient map of a polynomial expression in (x, eta).
PolyMap poly_coeffs(const Expr& e) {
  PolyMap out;
  std::vector<Expr> terms =
      e.kind() == NodeKind::Sum ? e.children() : std::vector<Expr>{e};
  for (const auto& t : terms) {
    if (t.is_zero()) continue;
    Sig sig{0, 0, 0, 0, 0, 0};
    RatC coef(1);
    std::vector<Expr> factors =
        t.kind() == NodeKind::Prod ? t.children() : std::vector<Expr>{t};
    for (const auto& f : factors) {
      Expr base = f;
      long n = 1;
      if (f.kind() == NodeKind::IntPow) {
        base = f.base();
        n = f.int_exponent();
      }
      if (base.kind() == NodeKind::Const && n == 1) {
        coef *= base.as_const();
      } else if (base.kind() == NodeKind::Var) {
        VarId v = base.as_var();
        if (v.kind == VarKind::X && v.index < 3)
          sig[static_cast<std::size_t>(v.index)] += static_cast<int>(n);
        else if (v.kind == VarKind::Xi && v.index < 3)
          sig[static_cast<std::size_t>(3 + v.index)] += static_cast<int>(n);
        else
          throw Error("unexpected variable in calibration polynomial");
      } else {
        throw Error("calibration expects polynomial expressions");
      }
    }
    auto it = out.find(sig);
    if (it == out.end())
      out.emplace(sig, coef);
    else {
      it->second += coef;
      if (it->second.is_zero()) out.erase(it);
    }
  }
  return out;
}

// Splits the canonical factors of each term into an x-part and an eta-part;
// fails on factors mixing both (never produced by the symbol machinery here).
void split_xy(const Expr& term, Expr& x_part, Expr& eta_part) {
  std::vector<Expr> xs, es;
  std::vector<Expr> factors =
      term.kind() == NodeKind::Prod ? term.children() : std::vector<Expr>{term};
  for (const auto& f : factors) {
    bool has_eta = f.depends_on(vxi(0)) || f.depends_on(vxi(1)) || f.depends_on(vxi(2));
    bool has_x = f.depends_on(vx(0)) || f.depends_on(vx(1)) || f.depends_on(vx(2));
    if (has_eta && has_x)
      throw Error("composition factor mixes base and covector variables");
    if (has_eta)
      es.push_back(f);
    else
      xs.push_back(f);
  }
  x_part = Expr::prod(std::move(xs));
  eta_part = Expr::prod(std::move(es));
}

// Monomial exponent vector of a pure eta-monomial.
MultiIndex eta_exponents(const Expr& mono, int d) {
  MultiIndex out(d);
  std::vector<Expr> factors =
      mono.kind() == NodeKind::Prod ? mono.children() : std::vector<Expr>{mono};
  for (const auto& f : factors) {
    Expr base = f;
    long n = 1;
    if (f.kind() == NodeKind::IntPow) {
      base = f.base();
      n = f.int_exponent();
    }
    if (base.is_one()) continue;
    if (base.kind() == NodeKind::Const) continue;
    if (base.kind() != NodeKind::Var || base.as_var().kind != VarKind::Xi)
      throw Error("not an eta monomial");
    out[base.as_var().index] += static_cast<int>(n);
  }
  return out;
}

RatC const_coef_of(const Expr& mono) {
  if (mono.kind() == NodeKind::Prod && mono.children()[0].kind() == NodeKind::Const)
    return mono.children()[0].as_const();
  if (mono.kind() == NodeKind::Const) return mono.as_const();
  return RatC(1);
}

/// Cache of fiberwise star products of eta monomials.
class MonoStarCache {
 public:
  explicit MonoStarCache(const HFrame& frame) : frame_(frame) {}
  const Expr& get(const MultiIndex& a, const MultiIndex& b) {
    auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Expr pa = eta_monomial(a), pb = eta_monomial(b);
    Expr r = star_product_poly(pa, pb, frame_);
    return cache_.emplace(key, std::move(r)).first->second;
  }

  Expr eta_monomial(const MultiIndex& a) const {
    std::vector<Expr> f;
    for (int i = 0; i < a.dim(); ++i)
      if (a[i] > 0) f.push_back(Expr::pow_int(Expr::variable(vxi(i)), a[i]));
    return Expr::prod(std::move(f));
  }

 private:
  const HFrame& frame_;
  std::map<std::pair<MultiIndex, MultiIndex>, Expr> cache_;
};

// Separable star product: distributes the fiber star over canonical terms,
// pulling x-coefficients out of the fiberwise product.
Expr star_separable(const Expr& p, const Expr& q, MonoStarCache& cache, int d) {
  if (p.is_zero() || q.is_zero()) return Expr::zero();
  std::vector<Expr> pterms = p.kind() == NodeKind::Sum ? p.children() : std::vector<Expr>{p};
  std::vector<Expr> qterms = q.kind() == NodeKind::Sum ? q.children() : std::vector<Expr>{q};
  std::vector<Expr> parts;
  for (const auto& pt : pterms) {
    Expr px, pe;
    split_xy(pt, px, pe);
    MultiIndex pa = eta_exponents(pe, d);
    RatC pc = const_coef_of(pe);
    // strip the constant from the eta part (it lives in pe's coefficient)
    for (const auto& qt : qterms) {
      Expr qx, qe;
      split_xy(qt, qx, qe);
      MultiIndex qb = eta_exponents(qe, d);
      RatC qc = const_coef_of(qe);
      const Expr& st = cache.get(pa, qb);
      parts.push_back(Expr::prod(
          {px, qx, Expr::constant(pc * qc), st}));
    }
  }
  return Expr::sum(std::move(parts));
}

std::vector<MultiIndex> indices_of_weight(int d, int w) {
  std::vector<MultiIndex> out;
  for (auto& m : multiindices_up_to(d, w))
    if (weighted_length(m) == w) out.push_back(m);
  return out;
}

std::vector<MultiIndex> indices_of_length(int d, int len) {
  std::vector<MultiIndex> out;
  for (auto& m : multiindices_up_to(d, len))
    if (m.length() == len) out.push_back(m);
  return out;
}

std::vector<HTuple> tuples_at_level(int d, int level, int stage) {
  std::vector<HTuple> out;
  if (level <= 0) return out;
  for (int bs = 0; bs <= stage; ++bs) {
    for (const auto& beta : indices_of_length(d, bs)) {
      for (const auto& gamma : indices_of_length(d, bs)) {
        int wdelta = level - weighted_length(beta) + weighted_length(gamma);
        if (wdelta < 0) continue;
        for (const auto& delta : indices_of_weight(d, wdelta)) {
          for (int al = 0; al + bs <= level; ++al) {
            for (const auto& alpha : indices_of_length(d, al)) {
              out.push_back(HTuple{alpha, beta, gamma, delta});
            }
          }
        }
      }
    }
  }
  return out;
}

// Incremental exact row-echelon accumulator over Q(i), sparse rows.
class RationalEchelon {
 public:
  using SparseRow = std::map<int, RatC>;

  explicit RationalEchelon(int cols) : cols_(cols) {}

  // Returns false when the row is inconsistent with the accumulated system.
  bool add_row(SparseRow row, RatC rhs) {
    while (!row.empty()) {
      int lead = row.begin()->first;
      auto pit = rows_.find(lead);
      if (pit == rows_.end()) break;
      RatC f = row.begin()->second;
      const auto& [prow, prhs] = pit->second;
      for (const auto& [c, v] : prow) {
        auto it = row.find(c);
        RatC nv = (it == row.end() ? RatC(0) : it->second) - f * v;
        if (nv.is_zero()) {
          if (it != row.end()) row.erase(it);
        } else if (it == row.end()) {
          row.emplace(c, nv);
        } else {
          it->second = nv;
        }
      }
      rhs = rhs - f * prhs;
    }
    if (row.empty()) return rhs.is_zero();
    int piv = row.begin()->first;
    RatC inv = RatC(1) / row.begin()->second;
    for (auto& [c, v] : row) v = v * inv;
    rhs = rhs * inv;
    rows_.emplace(piv, std::make_pair(std::move(row), rhs));
    return true;
  }

  int rank() const { return static_cast<int>(rows_.size()); }

  // Solution with free variables set to zero; returns the free column list.
  std::vector<RatC> solve(std::vector<int>& free_cols) const {
    std::vector<RatC> x(static_cast<std::size_t>(cols_), RatC(0));
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
      int piv = it->first;
      const auto& [row, rhs] = it->second;
      RatC v = rhs;
      for (const auto& [c, coef] : row) {
        if (c == piv) continue;
        v = v - coef * x[static_cast<std::size_t>(c)];
      }
      x[static_cast<std::size_t>(piv)] = v;
    }
    free_cols.clear();
    for (int c = 0; c < cols_; ++c)
      if (rows_.find(c) == rows_.end()) free_cols.push_back(c);
    return x;
  }

 private:
  int cols_;
  std::map<int, std::pair<SparseRow, RatC>> rows_;  // leading column -> row
};

struct PairFamily {
  std::vector<MultiIndex> p_monos;                     // eta exponents
  std::vector<std::pair<MultiIndex, MultiIndex>> q_monos;  // (x, eta) exponents
};

PairFamily calibration_family(int d, int max_order, int u_max) {
  PairFamily fam;
  for (const auto& a : multiindices_up_to(d, max_order))
    if (weighted_length(a) <= max_order) fam.p_monos.push_back(a);
  for (const auto& b : multiindices_up_to(d, max_order)) {
    if (weighted_length(b) > max_order) continue;
    for (const auto& u : multiindices_up_to(d, u_max))
      fam.q_monos.emplace_back(u, b);
  }
  return fam;
}

// D_xi^delta applied to the eta monomial a: coefficient and new exponents.
bool apply_D_delta(const MultiIndex& a, const MultiIndex& delta, RatC& coef,
                   MultiIndex& out) {
  coef = RatC(1);
  out = a;
  for (int i = 0; i < a.dim(); ++i) {
    if (delta[i] > a[i]) return false;
    for (int k = 0; k < delta[i]; ++k) coef *= RatC(out[i] - k);
    out[i] -= delta[i];
  }
  // D = (1/i) d  per derivative
  coef *= RatC(Rat(0), Rat(-1)).pow_int(delta.length());
  return true;
}

// plain d^beta on the eta monomial b
bool apply_d_beta(const MultiIndex& b, const MultiIndex& beta, RatC& coef,
                  MultiIndex& out) {
  coef = RatC(1);
  out = b;
  for (int i = 0; i < b.dim(); ++i) {
    if (beta[i] > b[i]) return false;
    for (int k = 0; k < beta[i]; ++k) coef *= RatC(out[i] - k);
    out[i] -= beta[i];
  }
  return true;
}

}  // namespace

std::string HTuple::name() const {
  return "h[alpha=" + mi_str(alpha) + ",beta=" + mi_str(beta) +
         ",gamma=" + mi_str(gamma) + ",delta=" + mi_str(delta) + "]";
}

HTable calibrate_h_coefficients(const HFrame& frame, int max_order,
                                const CalibrateOptions& opts) {
  if (max_order > 4) throw Error("calibration is scoped to weighted order <= 4");
  const int d = frame.dim();
  MonoStarCache cache(frame);
  PairFamily fam = calibration_family(d, max_order, std::min(max_order, 2));

  // Exact product symbols, split into weighted parts, computed once.
  struct PairData {
    MultiIndex a;           // p exponents
    MultiIndex u, b;        // q exponents
    std::map<int, PolyMap> exact_by_level;
  };
  std::vector<PairData> pairs;
  for (const auto& a : fam.p_monos) {
    Expr pa = cache.eta_monomial(a);
    FrameOp opa = quantize_poly_symbol(pa, frame);
    for (const auto& [u, b] : fam.q_monos) {
      std::vector<Expr> f{cache.eta_monomial(b)};
      for (int i = 0; i < d; ++i)
        if (u[i] > 0) f.push_back(Expr::pow_int(Expr::variable(vx(i)), u[i]));
      Expr qb = Expr::prod(std::move(f));
      FrameOp opb = quantize_poly_symbol(qb, frame);
      Expr r = opa.compose(opb).heisenberg_symbol(frame);
      PairData pd{a, u, b, {}};
      int total = weighted_length(a) + weighted_length(b);
      for (auto& [deg, part] : weighted_parts(r, d))
        pd.exact_by_level[total - deg] = poly_coeffs(part);
      pairs.push_back(std::move(pd));
    }
  }

  // x-polynomial ansatz exponents for h(x)
  int hdeg = opts.h_poly_degree;
  if (hdeg < 0) {
    int coef_deg = 0;
    for (const auto& row : frame.coef)
      for (const auto& e : row) {
        // degree of the polynomial coefficient
        auto pm = poly_coeffs(e);
        for (const auto& [sig, c] : pm)
          coef_deg = std::max(coef_deg, sig[0] + sig[1] + sig[2]);
      }
    hdeg = coef_deg * max_order;
  }
  std::vector<MultiIndex> hx;
  for (const auto& v : multiindices_up_to(d, hdeg)) hx.push_back(v);

  HTable table;
  table.max_order = max_order;
  table.coefficients.emplace(
      HTuple{MultiIndex(d), MultiIndex(d), MultiIndex(d), MultiIndex(d)},
      Expr::one());

  for (int stage = 0; stage <= opts.max_ansatz_stage; ++stage) {
    bool consistent = true;
    std::map<HTuple, Expr> solved;
    std::vector<std::string> free_names;
    for (int level = 1; level <= max_order && consistent; ++level) {
      auto tuples = tuples_at_level(d, level, stage);
      const int ncols = static_cast<int>(tuples.size() * hx.size());
      RationalEchelon ech(ncols);
      // Row source: every pair, every monomial signature in the level part.
      for (const auto& pd : pairs) {
        // S_T maps for this pair at this level
        std::vector<PolyMap> smaps(tuples.size());
        for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
          const HTuple& T = tuples[ti];
          RatC c1, c2, c3;
          MultiIndex da(d), db(d), dxu(d);
          if (!apply_D_delta(pd.a, T.delta, c1, da)) continue;
          if (!apply_d_beta(pd.b, T.beta, c2, db)) continue;
          // d_x^alpha x^u
          if (!apply_d_beta(pd.u, T.alpha, c3, dxu)) continue;
          MultiIndex rb = db + T.gamma;
          const Expr& st = cache.get(da, rb);
          if (st.is_zero()) continue;
          PolyMap sm = poly_coeffs(st);
          // multiply by x^{u - alpha} and constants
          RatC cc = c1 * c2 * c3;
          PolyMap shifted;
          for (const auto& [sig, coef] : sm) {
            Sig s2 = sig;
            for (int i = 0; i < d; ++i) s2[static_cast<std::size_t>(i)] += dxu[i];
            shifted.emplace(s2, coef * cc);
          }
          smaps[ti] = std::move(shifted);
        }
        // union of output signatures: exact-product monomials plus every
        // x^v-shifted S_T monomial
        std::map<Sig, int> sigs;
        auto lv = pd.exact_by_level.find(level);
        if (lv != pd.exact_by_level.end())
          for (const auto& [sig, coef] : lv->second) sigs[sig] = 1;
        for (const auto& sm : smaps)
          for (const auto& [sig, coef] : sm)
            for (const auto& v : hx) {
              Sig s2 = sig;
              for (int i = 0; i < d; ++i) s2[static_cast<std::size_t>(i)] += v[i];
              sigs[s2] = 1;
            }
        for (const auto& [sig, dummy] : sigs) {
          RationalEchelon::SparseRow row;
          bool any = false;
          for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
            if (smaps[ti].empty()) continue;
            // multiplying h's x^v ansatz monomial shifts the S_T signature;
            // the row entry at `sig` for (T, v) is S_T[sig - v]
            for (std::size_t vi = 0; vi < hx.size(); ++vi) {
              Sig base = sig;
              bool ok = true;
              for (int i = 0; i < d; ++i) {
                base[static_cast<std::size_t>(i)] -= hx[vi][i];
                if (base[static_cast<std::size_t>(i)] < 0) ok = false;
              }
              if (!ok) continue;
              auto it2 = smaps[ti].find(base);
              if (it2 == smaps[ti].end()) continue;
              row[static_cast<int>(ti * hx.size() + vi)] = it2->second;
              any = true;
            }
          }
          RatC rhs(0);
          if (lv != pd.exact_by_level.end()) {
            auto it = lv->second.find(sig);
            if (it != lv->second.end()) rhs = it->second;
          }
          if (!any && rhs.is_zero()) continue;
          if (!ech.add_row(std::move(row), rhs)) {
            if (std::getenv("PSICALC_CALIBRATE_DEBUG")) {
              std::fprintf(stderr,
                           "inconsistent: level=%d stage=%d p=%s q=x^%s eta^%s "
                           "sig=[%d %d %d | %d %d %d]\n",
                           level, stage, mi_str(pd.a).c_str(), mi_str(pd.u).c_str(),
                           mi_str(pd.b).c_str(), sig[0], sig[1], sig[2], sig[3],
                           sig[4], sig[5]);
            }
            consistent = false;
            break;
          }
        }
        if (!consistent) break;
      }
      if (!consistent) break;
      std::vector<int> free_cols;
      std::vector<RatC> sol = ech.solve(free_cols);
      for (int fc : free_cols) {
        std::size_t ti = static_cast<std::size_t>(fc) / hx.size();
        free_names.push_back(tuples[ti].name());
      }
      for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
        std::vector<Expr> parts;
        for (std::size_t vi = 0; vi < hx.size(); ++vi) {
          const RatC& c = sol[ti * hx.size() + vi];
          if (c.is_zero()) continue;
          std::vector<Expr> f{Expr::constant(c)};
          for (int i = 0; i < d; ++i)
            if (hx[vi][i] > 0)
              f.push_back(Expr::pow_int(Expr::variable(vx(i)), hx[vi][i]));
          parts.push_back(Expr::prod(std::move(f)));
        }
        Expr h = Expr::sum(std::move(parts));
        if (!h.is_zero()) solved.emplace(tuples[ti], h);
      }
    }
    if (consistent) {
      for (auto& [t, h] : solved) table.coefficients.emplace(t, h);
      table.unique = free_names.empty();
      std::sort(free_names.begin(), free_names.end());
      free_names.erase(std::unique(free_names.begin(), free_names.end()),
                       free_names.end());
      table.free_parameters = std::move(free_names);
      if (!table.unique && opts.error_if_underdetermined) {
        std::string msg = "underdetermined h system; free parameters:";
        for (const auto& s : table.free_parameters) msg += " " + s;
        throw CalibrationError(msg);
      }
      return table;
    }
  }
  throw CalibrationError(
      "composition products are inconsistent with the tuple ansatz");
}

ComposedSymbol compose_heisenberg(const HeisenbergSymbolClass& p,
                                  const HeisenbergSymbolClass& q, int depth,
                                  const HFrame& frame, const HTable& table) {
  if (table.coefficients.empty() || table.max_order < depth)
    throw CalibrationError(
        "h coefficients are not calibrated to the requested depth");
  const int d = frame.dim();
  MonoStarCache cache(frame);
  ComposedSymbol out;
  out.order = p.symbol.order + q.symbol.order;
  for (int j = 0; j <= depth; ++j) {
    std::vector<Expr> parts;
    for (int k = 0; k <= j; ++k) {
      for (int l = 0; k + l <= j; ++l) {
        Expr pk = p.symbol.term(k), ql = q.symbol.term(l);
        if (pk.is_zero() || ql.is_zero()) continue;
        int level = j - k - l;
        if (level == 0) {
          parts.push_back(star_separable(pk, ql, cache, d));
          continue;
        }
        for (const auto& [T, h] : table.coefficients) {
          if (T.level() != level || h.is_zero()) continue;
          if (T.level() == 0) continue;
          Expr dp = pk;
          for (int i = 0; i < d && !dp.is_zero(); ++i)
            if (T.delta[i] > 0) dp = dp.derivative_D(vxi(i), T.delta[i]);
          if (dp.is_zero()) continue;
          Expr dq = ql;
          for (int i = 0; i < d && !dq.is_zero(); ++i) {
            if (T.alpha[i] > 0) dq = dq.derivative(vx(i), T.alpha[i]);
            if (T.beta[i] > 0 && !dq.is_zero())
              dq = dq.derivative(vxi(i), T.beta[i]);
          }
          if (dq.is_zero()) continue;
          std::vector<Expr> gfac{dq};
          for (int i = 0; i < d; ++i)
            if (T.gamma[i] > 0)
              gfac.push_back(Expr::pow_int(Expr::variable(vxi(i)), T.gamma[i]));
          Expr rhs = Expr::prod(std::move(gfac));
          parts.push_back(h * star_separable(dp, rhs, cache, d));
        }
      }
    }
    ComposedTerm term;
    term.degree = out.order - static_cast<double>(j);
    term.exact = Expr::sum(std::move(parts));
    out.terms.push_back(std::move(term));
  }
  return out;
}

namespace {

GridSymbol grid_scale(const GridSymbol& s, Cx factor) {
  GridSymbol out = s;
  for (auto& v : out.data.v) v *= factor;
  return out;
}

void grid_accumulate(GridSymbol& acc, const GridSymbol& t) {
  if (acc.data.v.empty()) {
    acc = t;
    return;
  }
  for (std::size_t i = 0; i < acc.data.v.size(); ++i) acc.data.v[i] += t.data.v[i];
}

// Centered-difference derivative of sampled data along axis i (0 vertical),
// degree drops by the axis weight.
GridSymbol grid_derivative(const GridSymbol& s, int axis) {
  const Grid3& g = s.data.grid;
  GridSymbol out;
  out.data = GridData3(g);
  out.degree = s.degree - Cx(axis == 0 ? 2.0 : 1.0, 0.0);
  out.cutoff_radius = s.cutoff_radius;
  double h = axis == 0 ? g.dxi0 : g.dxi;
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        int ia = a, ib = b, ic = c;
        int ja = a, jb = b, jc = c;
        if (axis == 0) {
          ia = std::min(a + 1, g.hi());
          ja = std::max(a - 1, g.lo());
        } else if (axis == 1) {
          ib = std::min(b + 1, g.hi());
          jb = std::max(b - 1, g.lo());
        } else {
          ic = std::min(c + 1, g.hi());
          jc = std::max(c - 1, g.lo());
        }
        double span = (axis == 0 ? (ia - ja) : axis == 1 ? (ib - jb) : (ic - jc)) * h;
        if (span == 0.0) continue;
        out.data.at(a, b, c) = (s.data.at(ia, ib, ic) - s.data.at(ja, jb, jc)) / span;
      }
  return out;
}

GridSymbol grid_multiply_monomial(const GridSymbol& s, const MultiIndex& gamma) {
  const Grid3& g = s.data.grid;
  GridSymbol out = s;
  out.degree = s.degree + Cx(weighted_length(gamma), 0.0);
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        double xi[3];
        g.xi_at(a, b, c, xi);
        double m = 1.0;
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < gamma[i]; ++k) m *= xi[i];
        out.data.at(a, b, c) *= m;
      }
  return out;
}

}  // namespace

ComposedSymbol compose_heisenberg_grid(const HeisenbergSymbolClass& p,
                                       const GridSymbol& q, int depth,
                                       const HFrame& frame, const HTable& table,
                                       const Grid3& grid, const StarOptions& opts) {
  const int d = frame.dim();
  StarOptions star_opts = opts;
  star_opts.check_convergence = false;
  ComposedSymbol out;
  out.order = p.symbol.order + q.degree;
  for (int j = 0; j <= depth; ++j) {
    ComposedTerm term;
    term.degree = out.order - static_cast<double>(j);
    GridSymbol acc;
    for (int k = 0; k <= j; ++k) {
      Expr pk = p.symbol.term(k);
      if (pk.is_zero()) continue;
      if (pk.depends_on(vx(0)) || pk.depends_on(vx(1)) || pk.depends_on(vx(2)))
        throw Error("grid composition expects x-independent symbols");
      int level = j - k;  // q is a single homogeneous term (l = 0)
      if (level == 0) {
        GridSymbol t = star_product_numeric(
            SampledSymbol(pk, p.symbol.order - static_cast<double>(k)),
            SampledSymbol(q), frame.fiber, grid, star_opts);
        grid_accumulate(acc, t);
        continue;
      }
      for (const auto& [T, h] : table.coefficients) {
        if (T.level() != level || h.is_zero()) continue;
        if (T.alpha.length() > 0) continue;  // x-independent right factor
        if (!h.is_const())
          throw Error("grid composition needs constant h coefficients");
        Expr dp = pk;
        for (int i = 0; i < d && !dp.is_zero(); ++i)
          if (T.delta[i] > 0) dp = dp.derivative_D(vxi(i), T.delta[i]);
        if (dp.is_zero()) continue;
        GridSymbol dq = q;
        bool dead = false;
        for (int i = 0; i < d; ++i)
          for (int k2 = 0; k2 < T.beta[i]; ++k2) {
            dq = grid_derivative(dq, i);
            if (dq.data.v.empty()) dead = true;
          }
        if (dead) continue;
        dq = grid_multiply_monomial(dq, T.gamma);
        GridSymbol t = star_product_numeric(
            SampledSymbol(dp, p.symbol.order - static_cast<double>(k) -
                                  Cx(weighted_length(T.delta), 0)),
            SampledSymbol(dq), frame.fiber, grid, star_opts);
        grid_accumulate(acc, grid_scale(t, h.as_const().to_complex()));
      }
    }
    if (!acc.data.v.empty()) {
      acc.degree = term.degree;
      term.grid.emplace_back(Expr::one(), std::move(acc));
    }
    out.terms.push_back(std::move(term));
  }
  return out;
}

HeisenbergParametrix heisenberg_parametrix(const HeisenbergSymbolClass& p,
                                           int depth, const HFrame& frame,
                                           const HTable& table, const Grid3& grid,
                                           const StarOptions& opts) {
  Expr sigma = p.symbol.term(0);
  if (sigma.is_zero())
    throw SingularOperatorError("zero principal symbol has no parametrix", 0.0);
  double m = p.symbol.order.real();
  StarOptions star_opts = opts;
  star_opts.check_convergence = false;
  GridSymbol q0 = invert_principal_symbol_numeric(
      SampledSymbol(sigma, p.symbol.order), frame.fiber, grid, opts);
  HeisenbergParametrix out;
  out.order = -p.symbol.order;
  out.terms.push_back(q0);
  const int d = frame.dim();
  for (int j = 1; j <= depth; ++j) {
    // defect at level j from all known terms: sum_{k+l<=j, l<j} h (D p_k) * (...q_l)
    GridSymbol defect;
    for (int k = 0; k <= j; ++k) {
      Expr pk = p.symbol.term(k);
      if (pk.is_zero()) continue;
      for (int l = 0; k + l <= j && l < j; ++l) {
        if (l >= static_cast<int>(out.terms.size())) continue;
        const GridSymbol& ql = out.terms[static_cast<std::size_t>(l)];
        int level = j - k - l;
        if (level == 0) {
          if (k == 0 && l == 0) continue;  // the j=0 identity itself
          GridSymbol t = star_product_numeric(
              SampledSymbol(pk, Cx(m - k, 0)), SampledSymbol(ql), frame.fiber,
              grid, star_opts);
          grid_accumulate(defect, t);
          continue;
        }
        for (const auto& [T, h] : table.coefficients) {
          if (T.level() != level || h.is_zero()) continue;
          if (T.alpha.length() > 0) continue;
          if (!h.is_const()) continue;
          Expr dp = pk;
          for (int i = 0; i < d && !dp.is_zero(); ++i)
            if (T.delta[i] > 0) dp = dp.derivative_D(vxi(i), T.delta[i]);
          if (dp.is_zero()) continue;
          GridSymbol dq = ql;
          for (int i = 0; i < d; ++i)
            for (int k2 = 0; k2 < T.beta[i]; ++k2) dq = grid_derivative(dq, i);
          dq = grid_multiply_monomial(dq, T.gamma);
          GridSymbol t = star_product_numeric(
              SampledSymbol(dp, Cx(m - k - weighted_length(T.delta), 0)),
              SampledSymbol(dq), frame.fiber, grid, star_opts);
          grid_accumulate(defect, grid_scale(t, h.as_const().to_complex()));
        }
      }
    }
    if (defect.data.v.empty()) {
      GridSymbol zero;
      zero.data = GridData3(grid);
      zero.degree = Cx(-m - j, 0);
      out.terms.push_back(std::move(zero));
      continue;
    }
    defect.degree = Cx(-j, 0);
    GridSymbol correction = star_product_numeric(
        SampledSymbol(q0), SampledSymbol(defect), frame.fiber, grid, star_opts);
    for (auto& v : correction.data.v) v = -v;
    correction.degree = Cx(-m - j, 0);
    out.terms.push_back(std::move(correction));
  }
  return out;
}

}  // namespace psicalc
