#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace istn::conic {

struct LinearTerm {
  int var;
  double coef;
};

/// Real affine form sum_i coef_i * x[var_i] + constant.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(double constant) : constant_(constant) {}

  static AffineExpr variable(int var, double coef = 1.0) {
    AffineExpr e;
    e.add_term(var, coef);
    return e;
  }

  AffineExpr& add_term(int var, double coef) {
    if (coef != 0.0) terms_.push_back({var, coef});
    return *this;
  }
  AffineExpr& add_constant(double c) {
    constant_ += c;
    return *this;
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    constant_ += o.constant_;
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& o) {
    for (const auto& t : o.terms_) terms_.push_back({t.var, -t.coef});
    constant_ -= o.constant_;
    return *this;
  }
  AffineExpr& operator*=(double s) {
    for (auto& t : terms_) t.coef *= s;
    constant_ *= s;
    return *this;
  }
  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

  /// Merges duplicate variables and drops zero coefficients.
  AffineExpr& compress() {
    std::sort(terms_.begin(), terms_.end(),
              [](const LinearTerm& a, const LinearTerm& b) { return a.var < b.var; });
    std::vector<LinearTerm> out;
    for (const auto& t : terms_) {
      if (!out.empty() && out.back().var == t.var)
        out.back().coef += t.coef;
      else
        out.push_back(t);
    }
    std::erase_if(out, [](const LinearTerm& t) { return t.coef == 0.0; });
    terms_ = std::move(out);
    return *this;
  }

  double evaluate(std::span<const double> x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
  }

  const std::vector<LinearTerm>& terms() const { return terms_; }
  double constant() const { return constant_; }

 private:
  std::vector<LinearTerm> terms_;
  double constant_ = 0.0;
};

/// Complex-valued affine form of real variables: sum_i coef_i * x[var_i] + constant.
/// Complex decision variables are stored as interleaved (re, im) real pairs, so a
/// term like conj(h_i) * w_i contributes conj(h_i) on re(w_i) and j*conj(h_i) on im(w_i).
class ComplexAffine {
 public:
  using cplx = std::complex<double>;

  ComplexAffine& add_term(int var, cplx coef) {
    if (coef != cplx{}) terms_.emplace_back(var, coef);
    return *this;
  }
  ComplexAffine& add_constant(cplx c) {
    constant_ += c;
    return *this;
  }

  AffineExpr real_part() const {
    AffineExpr e(constant_.real());
    for (const auto& [v, c] : terms_) e.add_term(v, c.real());
    return e;
  }
  AffineExpr imag_part() const {
    AffineExpr e(constant_.imag());
    for (const auto& [v, c] : terms_) e.add_term(v, c.imag());
    return e;
  }

  cplx evaluate(std::span<const double> x) const {
    cplx v = constant_;
    for (const auto& [var, c] : terms_) v += c * x[static_cast<std::size_t>(var)];
    return v;
  }

  const std::vector<std::pair<int, cplx>>& terms() const { return terms_; }
  cplx constant() const { return constant_; }

 private:
  std::vector<std::pair<int, cplx>> terms_;
  cplx constant_{};
};

/// row . x <= rhs, stored as expr <= 0 with expr = row . x - rhs.
struct LinearInequality {
  AffineExpr expr;
};

/// || lhs(x) ||_2 <= rhs(x).
struct SecondOrderCone {
  std::vector<AffineExpr> lhs;
  AffineExpr rhs;
};

/// Maximization program over real variables with affine inequalities and
/// second-order-cone constraints.
class ConicProgram {
 public:
  int add_variable(std::string name) {
    names_.push_back(std::move(name));
    return static_cast<int>(names_.size()) - 1;
  }

  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::string& name(int var) const { return names_.at(static_cast<std::size_t>(var)); }
  int find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
  }

  void maximize(AffineExpr objective) {
    check(objective);
    objective_ = std::move(objective.compress());
  }

  /// expr <= rhs.
  void add_le(AffineExpr expr, double rhs = 0.0) {
    check(expr);
    expr.add_constant(-rhs);
    linear_.push_back({std::move(expr.compress())});
  }
  /// lhs <= rhs for two affine forms.
  void add_le(const AffineExpr& lhs, const AffineExpr& rhs) { add_le(lhs - rhs, 0.0); }

  void add_soc(std::vector<AffineExpr> lhs, AffineExpr rhs) {
    for (auto& e : lhs) {
      check(e);
      e.compress();
    }
    check(rhs);
    rhs.compress();
    socs_.push_back({std::move(lhs), std::move(rhs)});
  }

  /// Encodes sum_i |term_i(x)|^2 <= rhs(x) as the rotated-cone embedding
  /// || [2 re(t_1), 2 im(t_1), ..., rhs - 1] || <= rhs + 1.
  /// Returns the index of the emitted cone.
  std::size_t add_convex_quadratic_le_affine(std::span<const ComplexAffine> terms,
                                             const AffineExpr& rhs) {
    std::vector<AffineExpr> lhs;
    lhs.reserve(2 * terms.size() + 1);
    for (const auto& t : terms) {
      bool has_re = t.constant().real() != 0.0;
      bool has_im = t.constant().imag() != 0.0;
      for (const auto& term : t.terms()) {
        has_re = has_re || term.second.real() != 0.0;
        has_im = has_im || term.second.imag() != 0.0;
      }
      if (has_re) lhs.push_back(2.0 * t.real_part());
      if (has_im) lhs.push_back(2.0 * t.imag_part());
    }
    lhs.push_back(rhs - AffineExpr(1.0));
    add_soc(std::move(lhs), rhs + AffineExpr(1.0));
    return socs_.size() - 1;
  }

  const AffineExpr& objective() const { return objective_; }
  const std::vector<LinearInequality>& linear() const { return linear_; }
  const std::vector<SecondOrderCone>& socs() const { return socs_; }

  /// Largest violation over all stored constraints at x, each scaled by
  /// 1 + |constant part| of its right-hand side.
  double max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (const auto& li : linear_) {
      double v = li.expr.evaluate(x);
      worst = std::max(worst, v / (1.0 + std::abs(li.expr.constant())));
    }
    for (const auto& c : socs_) {
      double n2 = 0.0;
      for (const auto& e : c.lhs) {
        double v = e.evaluate(x);
        n2 += v * v;
      }
      double v = std::sqrt(n2) - c.rhs.evaluate(x);
      worst = std::max(worst, v / (1.0 + std::abs(c.rhs.constant())));
    }
    return worst;
  }

  /// Plain-text listing in a CBF-like layout: variables, objective, then one
  /// line per constraint row.
  void dump(std::ostream& os) const {
    os << "VER 1\nOBJSENSE MAX\nVAR " << names_.size() << "\n";
    for (std::size_t i = 0; i < names_.size(); ++i) os << i << " " << names_[i] << "\n";
    auto put = [&os](const AffineExpr& e) {
      for (const auto& t : e.terms()) os << " " << t.coef << "*x" << t.var;
      os << " + " << e.constant();
    };
    os << "OBJ";
    put(objective_);
    os << "\nLIN " << linear_.size() << "\n";
    for (const auto& li : linear_) {
      put(li.expr);
      os << " <= 0\n";
    }
    os << "SOC " << socs_.size() << "\n";
    for (const auto& c : socs_) {
      os << "dim " << c.lhs.size() + 1 << " rhs:";
      put(c.rhs);
      os << "\n";
      for (const auto& e : c.lhs) {
        os << "  ";
        put(e);
        os << "\n";
      }
    }
  }

 private:
  void check(const AffineExpr& e) const {
    for (const auto& t : e.terms()) {
      if (t.var < 0 || t.var >= num_variables())
        throw std::out_of_range("affine term references unknown variable " +
                                std::to_string(t.var));
      if (!std::isfinite(t.coef)) throw std::invalid_argument("non-finite coefficient");
    }
    if (!std::isfinite(e.constant())) throw std::invalid_argument("non-finite constant");
  }

  std::vector<std::string> names_;
  AffineExpr objective_;
  std::vector<LinearInequality> linear_;
  std::vector<SecondOrderCone> socs_;
};

}  // namespace istn::conic
