#include "psicalc/rumin.hpp"

#include "json.hpp"

#include <sstream>

namespace psicalc {

FormOperator FormOperator::zero(int from, int to) {
  FormOperator op;
  op.deg_from = from;
  op.deg_to = to;
  op.mat.assign(static_cast<std::size_t>(FormSection::components(to)),
                std::vector<FrameOp>(
                    static_cast<std::size_t>(FormSection::components(from)),
                    FrameOp(3)));
  return op;
}

FormOperator FormOperator::identity(int deg) {
  FormOperator op = zero(deg, deg);
  for (std::size_t i = 0; i < op.mat.size(); ++i)
    op.mat[i][i] = FrameOp::identity(3);
  return op;
}

FormSection FormOperator::apply(const FormSection& s) const {
  if (s.degree != deg_from) throw Error("form degree mismatch in apply");
  FormSection out = FormSection::zero(deg_to);
  for (std::size_t i = 0; i < mat.size(); ++i) {
    std::vector<Expr> parts;
    for (std::size_t j = 0; j < mat[i].size(); ++j)
      parts.push_back(mat[i][j].apply_to(s.comps[j]));
    out.comps[i] = Expr::sum(std::move(parts));
  }
  return out;
}

FormOperator FormOperator::compose(const FormOperator& other) const {
  if (deg_from != other.deg_to) throw Error("form operator degree mismatch");
  FormOperator out = zero(other.deg_from, deg_to);
  for (std::size_t i = 0; i < mat.size(); ++i)
    for (std::size_t j = 0; j < out.mat[i].size(); ++j) {
      FrameOp acc(3);
      for (std::size_t k = 0; k < other.mat.size(); ++k)
        acc = acc + mat[i][k].compose(other.mat[k][j]);
      out.mat[i][j] = acc;
    }
  return out;
}

FormOperator operator+(const FormOperator& a, const FormOperator& b) {
  if (a.deg_from != b.deg_from || a.deg_to != b.deg_to)
    throw Error("form operator degree mismatch");
  FormOperator out = a;
  for (std::size_t i = 0; i < out.mat.size(); ++i)
    for (std::size_t j = 0; j < out.mat[i].size(); ++j)
      out.mat[i][j] = out.mat[i][j] + b.mat[i][j];
  return out;
}

FormOperator operator-(const FormOperator& a, const FormOperator& b) {
  return a + b.scaled(Expr::integer(-1));
}

FormOperator FormOperator::scaled(const Expr& f) const {
  FormOperator out = *this;
  for (auto& row : out.mat)
    for (auto& op : row) op = op.scaled(f);
  return out;
}

FormOperator FormOperator::adjoint() const {
  FormOperator out = zero(deg_to, deg_from);
  for (std::size_t i = 0; i < mat.size(); ++i)
    for (std::size_t j = 0; j < mat[i].size(); ++j)
      out.mat[j][i] = mat[i][j].formal_adjoint();
  return out;
}

bool FormOperator::is_zero() const {
  for (const auto& row : mat)
    for (const auto& op : row)
      if (!op.is_zero()) return false;
  return true;
}

ContactModel::ContactModel() : frame_(HFrame::model_h1()) {
  Expr half = Expr::constant(RatC(Rat(1, 2)));
  theta_ = {Expr::one(), half * Expr::variable(vx(2)),
            Expr::prod({Expr::integer(-1), half, Expr::variable(vx(1))})};
  // JX_1 = -X_2, JX_2 = X_1 makes dtheta(X, JX) > 0
  j_ = {{0, 0, 0}, {0, 0, 1}, {0, -1, 0}};
  // exact structural identities
  if (!theta_on_frame(0).same(Expr::one()))
    throw Error("contact model: theta(X0) != 1");
  for (int j : {1, 2})
    if (!theta_on_frame(j).is_zero())
      throw Error("contact model: theta does not annihilate H");
  for (int j = 0; j < 3; ++j)
    if (!dtheta_frame(0, j).is_zero())
      throw Error("contact model: Reeb contraction of dtheta nonzero");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Expr want = i == j ? Expr::one() : Expr::zero();
      if (!metric_on_frame(i, j).same(want))
        throw Error("contact model: frame is not orthonormal for g");
    }
}

Expr ContactModel::theta_on_frame(int j) const {
  std::vector<Expr> parts;
  for (int k = 0; k < 3; ++k)
    parts.push_back(theta_[static_cast<std::size_t>(k)] *
                    frame_.coef[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
  return Expr::sum(std::move(parts));
}

Expr ContactModel::dtheta_frame(int i, int j) const {
  // dtheta(X, Y) = X theta(Y) - Y theta(X) - theta([X, Y])
  FrameOp xi = FrameOp::frame_field(frame_, i);
  FrameOp xj = FrameOp::frame_field(frame_, j);
  Expr a = xi.apply_to(theta_on_frame(j));
  Expr b = xj.apply_to(theta_on_frame(i));
  FrameOp bracket = xi.compose(xj) - xj.compose(xi);
  // theta([X,Y]): expand the bracket in coordinate fields
  std::vector<Expr> parts{a, Expr::integer(-1) * b};
  for (const auto& [beta, coef] : bracket.terms()) {
    if (beta.length() != 1) continue;
    int axis = -1;
    for (int k = 0; k < 3; ++k)
      if (beta[k] == 1) axis = k;
    parts.push_back(Expr::integer(-1) * coef * theta_[static_cast<std::size_t>(axis)]);
  }
  return Expr::sum(std::move(parts));
}

Expr ContactModel::metric_on_frame(int i, int j) const {
  // g = theta^2 + dtheta(., J.)
  std::vector<Expr> parts{theta_on_frame(i) * theta_on_frame(j)};
  for (int k = 0; k < 3; ++k) {
    int jk = j_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    if (jk != 0) parts.push_back(Expr::integer(jk) * dtheta_frame(i, k));
  }
  return Expr::sum(std::move(parts));
}

FormOperator ContactModel::db(int degree) const {
  FrameOp x1 = FrameOp::frame_field(frame_, 1);
  FrameOp x2 = FrameOp::frame_field(frame_, 2);
  if (degree == 0) {
    FormOperator op = FormOperator::zero(0, 1);
    op.mat[0][0] = x1;
    op.mat[1][0] = x2;
    return op;
  }
  if (degree == 1) {
    FormOperator op = FormOperator::zero(1, 2);
    op.mat[0][0] = FrameOp::zero(3) - x2;  // coefficient of theta^1
    op.mat[0][1] = x1;                     // coefficient of theta^2
    return op;
  }
  // top horizontal degree: nothing above
  return FormOperator::zero(2, 2);
}

FormOperator ContactModel::lie_reeb(int degree) const {
  FrameOp x0 = FrameOp::frame_field(frame_, 0);
  FormOperator op = FormOperator::zero(degree, degree);
  for (std::size_t i = 0; i < op.mat.size(); ++i) op.mat[i][i] = x0;
  return op;
}

FormOperator ContactModel::eps_dtheta(int degree) const {
  // dtheta = -theta^1 ^ theta^2
  if (degree == 0) {
    FormOperator op = FormOperator::zero(0, 2);
    op.mat[0][0] = FrameOp::multiplication(Expr::integer(-1), 3);
    return op;
  }
  // degrees 1 and 2 land above the top horizontal degree
  return FormOperator::zero(degree, 2);
}

FormOperator ContactModel::iota_dtheta(int degree) const {
  if (degree == 2) {
    FormOperator op = FormOperator::zero(2, 0);
    op.mat[0][0] = FrameOp::multiplication(Expr::integer(-1), 3);
    return op;
  }
  return FormOperator::zero(degree, 0);
}

FormOperator ContactModel::eps_dtheta_inv() const {
  FormOperator op = FormOperator::zero(2, 0);
  op.mat[0][0] = FrameOp::multiplication(Expr::integer(-1), 3);
  return op;
}

FormOperator ContactModel::pi1(int degree) const {
  // Lambda_1 = ker iota(dtheta): all of Lambda^0 and Lambda^1, zero in top
  // degree (iota is injective there).
  if (degree == 2) return FormOperator::zero(2, 2);
  return FormOperator::identity(degree);
}

FormOperator ContactModel::rumin_d(int degree) const {
  if (degree == 0) return pi1(1).compose(db(0));
  if (degree == 1) return db(1);
  throw Error("rumin differential degrees are 0 and 1 on the model");
}

FormOperator ContactModel::rumin_middle() const {
  // D = L_{X0} + d_b eps(dtheta)^{-1} d_b on 1-forms
  return lie_reeb(1) + db(0).compose(eps_dtheta_inv()).compose(db(1));
}

FormOperator ContactModel::contact_laplacian(int degree) const {
  FormOperator d0 = rumin_d(0);
  if (degree == 0) {
    // (n - k) d* d with n = 2, k = 0
    return d0.adjoint().compose(d0).scaled(Expr::integer(2));
  }
  if (degree == 2) {
    FormOperator d1 = rumin_d(1);
    return d1.compose(d1.adjoint()).scaled(Expr::integer(2));
  }
  throw Error("contact laplacian by degree covers 0 and 2; use the middle pair");
}

FormOperator ContactModel::contact_laplacian_middle(int j) const {
  FormOperator d0 = rumin_d(0);
  FormOperator d1 = rumin_d(1);
  FormOperator D = rumin_middle();
  if (j == 1) {
    FormOperator dd = d0.compose(d0.adjoint());  // on 1-forms
    return dd.compose(dd) + D.adjoint().compose(D);
  }
  if (j == 2) {
    // as printed: D D* + (d* d), the second factor unsquared
    return D.compose(D.adjoint()) + d1.adjoint().compose(d1);
  }
  throw Error("middle laplacian index must be 1 or 2");
}

OrderReport ContactModel::order_report(const FormOperator& op) const {
  OrderReport rep;
  std::map<int, int> seen;
  for (const auto& row : op.mat)
    for (const auto& entry : row) {
      if (entry.is_zero()) continue;
      for (const auto& [alpha, coef] : entry.frame_normal_form(frame_)) {
        if (coef.is_zero()) continue;
        seen[weighted_length(alpha)] = 1;
      }
    }
  for (const auto& [o, dummy] : seen) rep.orders_present.push_back(o);
  rep.max_order = rep.orders_present.empty() ? 0 : rep.orders_present.back();
  rep.homogeneous = rep.orders_present.size() <= 1;
  return rep;
}

std::vector<std::vector<Expr>> ContactModel::principal_symbol(
    const FormOperator& op) const {
  OrderReport rep = order_report(op);
  int order = rep.max_order;
  std::vector<std::vector<Expr>> out(
      op.mat.size(),
      std::vector<Expr>(op.mat.empty() ? 0 : op.mat[0].size(), Expr::zero()));
  for (std::size_t i = 0; i < op.mat.size(); ++i)
    for (std::size_t j = 0; j < op.mat[i].size(); ++j) {
      if (op.mat[i][j].is_zero()) continue;
      Expr full = op.mat[i][j].heisenberg_symbol(frame_);
      auto parts = weighted_parts(full, 3);
      auto it = parts.find(order);
      if (it != parts.end()) out[i][j] = it->second;
    }
  return out;
}

namespace {

std::string frame_monomial_str(const MultiIndex& alpha) {
  std::string s;
  for (int i = 0; i < alpha.dim(); ++i) {
    if (alpha[i] == 0) continue;
    if (!s.empty()) s += "*";
    s += "X" + std::to_string(i);
    if (alpha[i] > 1) s += "^" + std::to_string(alpha[i]);
  }
  return s;
}

std::string frame_form_str(const FrameOp& op, const HFrame& frame) {
  auto nf = op.frame_normal_form(frame);
  if (nf.empty()) return "0";
  std::string s;
  for (const auto& [alpha, coef] : nf) {
    if (coef.is_zero()) continue;
    if (!s.empty()) s += " + ";
    std::string mono = frame_monomial_str(alpha);
    std::string c = coef.str();
    if (mono.empty()) {
      s += c;
    } else if (coef.is_one()) {
      s += mono;
    } else {
      s += "(" + c + ")*" + mono;
    }
  }
  return s.empty() ? "0" : s;
}

}  // namespace

std::string ContactModel::pretty(const FormOperator& op,
                                 const std::string& name) const {
  std::ostringstream os;
  os << name << ": Lambda^" << op.deg_from << " -> Lambda^" << op.deg_to << "\n";
  for (std::size_t i = 0; i < op.mat.size(); ++i)
    for (std::size_t j = 0; j < op.mat[i].size(); ++j)
      os << "  [" << i << "][" << j << "] = " << frame_form_str(op.mat[i][j], frame_)
         << "\n";
  return os.str();
}

std::string ContactModel::json_entry(const FormOperator& op,
                                     const std::string& name) const {
  nlohmann::json j;
  j["name"] = name;
  j["from_degree"] = op.deg_from;
  j["to_degree"] = op.deg_to;
  OrderReport rep = order_report(op);
  j["heisenberg_order"] = rep.max_order;
  j["order_homogeneous"] = rep.homogeneous;
  j["orders_present"] = rep.orders_present;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < op.mat.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t jj = 0; jj < op.mat[i].size(); ++jj)
      row.push_back(frame_form_str(op.mat[i][jj], frame_));
    rows.push_back(row);
  }
  j["matrix"] = rows;
  return j.dump();
}

}  // namespace psicalc
