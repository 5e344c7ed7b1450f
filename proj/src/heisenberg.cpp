#include "psicalc/heisenberg.hpp"

namespace psicalc {

void LeviForm::validate() const {
  int n = h_dim();
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(mat[static_cast<std::size_t>(i)].size()) != n)
      throw Error("Levi form matrix is not square");
    for (int j = 0; j < n; ++j)
      if (mat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
          -mat[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
        throw Error("Levi form must be antisymmetric");
  }
  if (nondegenerate) {
    // rational Gaussian elimination rank check
    auto a = mat;
    int rank = 0;
    for (int col = 0; col < n && rank < n; ++col) {
      int piv = -1;
      for (int r = rank; r < n; ++r)
        if (a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) {
          piv = r;
          break;
        }
      if (piv < 0) continue;
      std::swap(a[static_cast<std::size_t>(piv)], a[static_cast<std::size_t>(rank)]);
      for (int r = 0; r < n; ++r) {
        if (r == rank) continue;
        Rat f = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
                a[static_cast<std::size_t>(rank)][static_cast<std::size_t>(col)];
        if (f == 0) continue;
        for (int c = 0; c < n; ++c)
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
              f * a[static_cast<std::size_t>(rank)][static_cast<std::size_t>(c)];
      }
      ++rank;
    }
    if (rank != n) throw Error("Levi form flagged nondegenerate but is singular");
  }
}

Rat LeviForm::apply(const std::vector<Rat>& a, const std::vector<Rat>& b) const {
  int n = h_dim();
  Rat s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s += a[static_cast<std::size_t>(i)] *
           mat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
           b[static_cast<std::size_t>(j)];
  return s;
}

double LeviForm::apply_d(const double* a, const double* b) const {
  int n = h_dim();
  double s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s += a[i] * static_cast<double>(mat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) * b[j];
  return s;
}

GroupFiber GroupFiber::h1() {
  GroupFiber g;
  g.m = 1;
  g.levi.mat = {{Rat(0), Rat(1)}, {Rat(-1), Rat(0)}};
  g.levi.nondegenerate = true;
  g.levi.validate();
  return g;
}

GroupFiber GroupFiber::abelian(int m) {
  GroupFiber g;
  g.m = m;
  g.levi.mat.assign(static_cast<std::size_t>(2 * m),
                    std::vector<Rat>(static_cast<std::size_t>(2 * m), Rat(0)));
  g.levi.nondegenerate = false;
  return g;
}

GroupPoint group_multiply(const GroupFiber& g, const GroupPoint& a, const GroupPoint& b) {
  if (static_cast<int>(a.size()) != g.dim() || static_cast<int>(b.size()) != g.dim())
    throw Error("group point dimension mismatch");
  std::vector<Rat> ah(a.begin() + 1, a.end()), bh(b.begin() + 1, b.end());
  GroupPoint out(static_cast<std::size_t>(g.dim()));
  out[0] = a[0] + b[0] + g.levi.apply(ah, bh) / Rat(2);
  for (int i = 1; i < g.dim(); ++i)
    out[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)];
  return out;
}

GroupPoint group_inverse(const GroupFiber& g, const GroupPoint& a) {
  GroupPoint out(a);
  for (auto& v : out) v = -v;
  (void)g;  // L(X', X') = 0 makes -a the exact inverse
  return out;
}

GroupPoint group_dilate(const GroupFiber& g, const GroupPoint& a, const Rat& t) {
  GroupPoint out(a);
  out[0] = a[0] * t * t;
  for (int i = 1; i < g.dim(); ++i) out[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] * t;
  return out;
}

}  // namespace psicalc
