#pragma once

#include "psicalc/frameop.hpp"

namespace psicalc {

/// Polynomial-coefficient section of the horizontal form bundle on the model
/// group: degree 0 and 2 have one component, degree 1 has two (the coframe
/// theta^1, theta^2 dual to X_1, X_2).
struct FormSection {
  int degree = 0;
  std::vector<Expr> comps;

  static int components(int degree) { return degree == 1 ? 2 : 1; }
  static FormSection zero(int degree) {
    return FormSection{degree, std::vector<Expr>(
                                   static_cast<std::size_t>(components(degree)),
                                   Expr::zero())};
  }
  bool is_zero() const {
    for (const auto& c : comps)
      if (!c.is_zero()) return false;
    return true;
  }
};

/// Matrix of differential operators between horizontal form bundles.
struct FormOperator {
  int deg_from = 0, deg_to = 0;
  std::vector<std::vector<FrameOp>> mat;  // [to][from]

  static FormOperator zero(int from, int to);
  static FormOperator identity(int deg);

  FormSection apply(const FormSection& s) const;
  FormOperator compose(const FormOperator& other) const;  // this after other
  friend FormOperator operator+(const FormOperator& a, const FormOperator& b);
  friend FormOperator operator-(const FormOperator& a, const FormOperator& b);
  FormOperator scaled(const Expr& f) const;
  FormOperator adjoint() const;
  bool is_zero() const;
};

/// Weighted-order census of a form operator's frame-monomial expansion.
struct OrderReport {
  int max_order = 0;
  std::vector<int> orders_present;
  bool homogeneous = true;  // a single weighted order across all monomials
};

/// Contact data of the model group: contact form, Reeb field, almost complex
/// structure and the associated metric, with the defining identities held
/// exactly.
class ContactModel {
 public:
  ContactModel();

  const HFrame& frame() const { return frame_; }
  /// theta as a coordinate 1-form (coefficients of dx_0, dx_1, dx_2).
  const std::vector<Expr>& theta() const { return theta_; }
  /// dtheta(X_i, X_j) as exact expressions (frame indices 0..2).
  Expr dtheta_frame(int i, int j) const;
  /// theta(X_j), exact.
  Expr theta_on_frame(int j) const;
  /// J on the horizontal frame: JX_1 = -X_2, JX_2 = X_1 (so dtheta(X, JX) > 0).
  /// Returns the matrix entries J[i][j] with JX_j = sum_i J[i][j] X_i.
  const std::vector<std::vector<int>>& J() const { return j_; }
  /// metric evaluated on frame pairs, g(X_i, X_j); exact.
  Expr metric_on_frame(int i, int j) const;

  // Operators of the contact complex. Degrees: 0, 1, 1, 2.
  FormOperator db(int degree) const;
  FormOperator lie_reeb(int degree) const;      // L_{X_0}, componentwise
  FormOperator eps_dtheta(int degree) const;    // wedge with dtheta
  FormOperator iota_dtheta(int degree) const;   // contraction
  FormOperator eps_dtheta_inv() const;          // (Lambda^0 <- Lambda^2)
  FormOperator pi1(int degree) const;           // projection onto ker iota
  FormOperator rumin_d(int degree) const;       // d_{R;0}, d_{R;1}
  FormOperator rumin_middle() const;            // D_{R;1} on 1-forms

  /// Contact Laplacian in degree 0 or 2 (order 2). The printed top-degree
  /// coefficient degenerates to zero in this dimension; the Hodge mirror of
  /// the degree-0 formula is used there (see the order report either way).
  FormOperator contact_laplacian(int degree) const;
  /// Middle-degree pair Delta_{R;1,j}, j = 1, 2. j = 2 is implemented as
  /// printed (D D* plus an unsquared d* d) and is order-inhomogeneous; the
  /// order report flags it.
  FormOperator contact_laplacian_middle(int j) const;

  OrderReport order_report(const FormOperator& op) const;
  /// Matrix principal symbol at the operator's maximal weighted order.
  std::vector<std::vector<Expr>> principal_symbol(const FormOperator& op) const;
  /// Human-readable frame-monomial form.
  std::string pretty(const FormOperator& op, const std::string& name) const;
  /// Machine-readable operator table entry (JSON text).
  std::string json_entry(const FormOperator& op, const std::string& name) const;

 private:
  HFrame frame_;
  std::vector<Expr> theta_;
  std::vector<std::vector<int>> j_;
};

}  // namespace psicalc
