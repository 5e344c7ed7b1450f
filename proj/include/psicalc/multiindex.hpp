#pragma once

#include "psicalc/rational.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace psicalc {

/// Dilation regime: which weight vector acts on covectors and multi-indices.
/// Anisotropic means weight 2 on the distinguished index 0 and weight 1 on the
/// rest; isotropic means weight 1 everywhere.
enum class Regime { Isotropic, Anisotropic };

inline std::vector<int> dilation_weights(Regime regime, int dim) {
  std::vector<int> w(static_cast<std::size_t>(dim), 1);
  if (regime == Regime::Anisotropic && dim > 0) w[0] = 2;
  return w;
}

/// Multi-index of derivative (or monomial) orders, entries indexed 0..d where
/// index 0 is the distinguished direction.
struct MultiIndex {
  std::vector<int> entries;

  explicit MultiIndex(int dim = 0) : entries(static_cast<std::size_t>(dim), 0) {}
  MultiIndex(std::initializer_list<int> e) : entries(e) {}

  int dim() const { return static_cast<int>(entries.size()); }
  int operator[](int i) const { return entries[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return entries[static_cast<std::size_t>(i)]; }

  /// Plain length |beta|.
  int length() const { return std::accumulate(entries.begin(), entries.end(), 0); }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex r(a.dim());
    for (int i = 0; i < a.dim(); ++i) r[i] = a[i] + b[i];
    return r;
  }
  friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
    return a.entries == b.entries;
  }
  friend bool operator<(const MultiIndex& a, const MultiIndex& b) {
    return a.entries < b.entries;
  }
};

/// Weighted length <beta> = 2 beta_0 + beta_1 + ... + beta_d.
inline int weighted_length(const MultiIndex& beta,
                           Regime regime = Regime::Anisotropic) {
  int s = 0;
  for (int i = 0; i < beta.dim(); ++i)
    s += ((regime == Regime::Anisotropic && i == 0) ? 2 : 1) * beta[i];
  return s;
}

/// beta! = prod beta_i!, as an exact rational (used in 1/alpha! factors).
inline Rat factorial(const MultiIndex& beta) {
  Rat f = 1;
  for (int i = 0; i < beta.dim(); ++i)
    for (int k = 2; k <= beta[i]; ++k) f *= k;
  return f;
}

/// Enumerate all multi-indices of the given dimension with plain length <= n,
/// in lexicographic order.
inline std::vector<MultiIndex> multiindices_up_to(int dim, int n) {
  std::vector<MultiIndex> out;
  MultiIndex cur(dim);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == dim) {
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      cur[pos] = v;
      self(self, pos + 1, remaining - v);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, n);
  return out;
}

/// Covector with the weighted dilation action t.xi = (t^{w_0} xi_0, ...).
struct Covector {
  std::vector<double> c;
  Regime regime = Regime::Anisotropic;

  Covector() = default;
  Covector(std::vector<double> comps, Regime r)
      : c(std::move(comps)), regime(r) {}

  int dim() const { return static_cast<int>(c.size()); }
  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

inline Covector dilate(const Covector& xi, double t) {
  if (!(t > 0.0)) throw Error("dilate: scale must be positive");
  Covector out = xi;
  for (int i = 0; i < xi.dim(); ++i) {
    int w = (xi.regime == Regime::Anisotropic && i == 0) ? 2 : 1;
    out.c[static_cast<std::size_t>(i)] = std::pow(t, w) * xi[i];
  }
  return out;
}

/// Homogeneous pseudo-norm: (xi_0^2 + xi_1^4 + ... + xi_d^4)^{1/4} in the
/// anisotropic regime, the Euclidean norm in the isotropic one.
inline double pseudo_norm(const Covector& xi) {
  double s = 0.0;
  if (xi.regime == Regime::Anisotropic) {
    for (int i = 0; i < xi.dim(); ++i) {
      double v = xi[i];
      s += (i == 0) ? v * v : v * v * v * v;
    }
    return std::pow(s, 0.25);
  }
  for (int i = 0; i < xi.dim(); ++i) s += xi[i] * xi[i];
  return std::sqrt(s);
}

/// Squared-scale weight of a covector: pseudo_norm^2 anisotropic, |xi|^2
/// isotropic. This is the quantity rho multiplies in the conic domains.
inline double norm_sq_for_domain(const Covector& xi) {
  double n = pseudo_norm(xi);
  return n * n;
}

}  // namespace psicalc
