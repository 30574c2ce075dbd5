#pragma once

// Primal-dual interior-point method for
//
//   minimize  c'x   s.t.  G x + s = h,  s in K,
//
// K a product of nonnegative orthants and second-order cones, via the
// homogeneous self-dual embedding with Nesterov-Todd scaling and Mehrotra
// predictor-corrector steps. Newton systems are reduced to the normal
// equations G' W^-2 G, which stay small because every SCA subproblem has a
// few hundred variables.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "istn/conic/program.hpp"

namespace istn::conic {

// near_optimal: the solver stalled, but its best point meets the reduced
// tolerances below. Callers decide whether that is good enough.
enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, numerical_failure, iteration_limit };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
    case SolveStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct SolverOptions {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  // reduced tolerances for a stalled solve
  double feastol_inaccurate = 1e-4;
  double gaptol_inaccurate = 5e-5;
  int max_iters = 200;
  int equilibration_passes = 8;
  double step_fraction = 0.99;
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<double> x;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  int solver_iterations = 0;
  // Residual summary of the returned point (unscaled problem).
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  double relative_gap = std::numeric_limits<double>::infinity();

  bool ok() const { return status == SolveStatus::optimal; }
};

namespace detail {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ConeBlock {
  bool soc = false;
  int offset = 0;
  int dim = 0;
  std::vector<int> cols;
  Mat g;  // dim x cols.size()
};

// Nesterov-Todd scaling data for one cone.
struct Scaling {
  // orthant: w = sqrt(s/z); soc: eta, a, q (normalized scaling point).
  double w = 1.0;
  double eta = 1.0;
  double a = 1.0;
  Vec q;
};

class Standardized {
 public:
  Standardized(const ConicProgram& prog, int eq_passes) {
    n_ = prog.num_variables();
    c_ = Vec::Zero(n_);
    for (const auto& t : prog.objective().terms()) c_(t.var) -= t.coef;

    auto make_block = [&](bool soc, const std::vector<const AffineExpr*>& rows,
                          const std::vector<double>& sign) {
      ConeBlock b;
      b.soc = soc;
      b.offset = m_;
      b.dim = static_cast<int>(rows.size());
      for (const auto* r : rows)
        for (const auto& t : r->terms()) b.cols.push_back(t.var);
      std::sort(b.cols.begin(), b.cols.end());
      b.cols.erase(std::unique(b.cols.begin(), b.cols.end()), b.cols.end());
      b.g = Mat::Zero(b.dim, static_cast<Eigen::Index>(b.cols.size()));
      for (int i = 0; i < b.dim; ++i) {
        for (const auto& t : rows[static_cast<std::size_t>(i)]->terms()) {
          auto it = std::lower_bound(b.cols.begin(), b.cols.end(), t.var);
          b.g(i, it - b.cols.begin()) += sign[static_cast<std::size_t>(i)] * t.coef;
        }
        hvals_.push_back(-sign[static_cast<std::size_t>(i)] *
                         rows[static_cast<std::size_t>(i)]->constant());
      }
      m_ += b.dim;
      blocks_.push_back(std::move(b));
    };

    for (const auto& li : prog.linear()) {
      // expr <= 0  ->  s = -expr >= 0, G row = expr coefficients, h = -constant.
      make_block(false, {&li.expr}, {1.0});
      ++degree_;
    }
    for (const auto& c : prog.socs()) {
      // s = [rhs; lhs] in Q  ->  G = -[rhs; lhs] coefficients, h = constants.
      std::vector<const AffineExpr*> rows{&c.rhs};
      for (const auto& e : c.lhs) rows.push_back(&e);
      make_block(true, rows, std::vector<double>(rows.size(), -1.0));
      ++degree_;
    }
    h_ = Eigen::Map<Vec>(hvals_.data(), m_);
    col_scale_ = Vec::Ones(n_);
    row_scale_ = Vec::Ones(static_cast<Eigen::Index>(blocks_.size()));
    equilibrate(eq_passes);
  }

  int n() const { return n_; }
  int m() const { return m_; }
  int degree() const { return degree_; }
  const Vec& c() const { return c_; }
  const Vec& h() const { return h_; }
  const std::vector<ConeBlock>& blocks() const { return blocks_; }
  const Vec& col_scale() const { return col_scale_; }
  double row_scale(std::size_t b) const { return row_scale_(static_cast<Eigen::Index>(b)); }

  // y = G x
  void mul(const Vec& x, Vec& y) const {
    y.resize(m_);
    Vec xs;
    for (const auto& b : blocks_) {
      const auto kc = static_cast<Eigen::Index>(b.cols.size());
      xs.resize(kc);
      for (Eigen::Index j = 0; j < kc; ++j) xs(j) = x(b.cols[static_cast<std::size_t>(j)]);
      y.segment(b.offset, b.dim).noalias() = b.g * xs;
    }
  }
  // y = G' z
  void mul_t(const Vec& z, Vec& y) const {
    y = Vec::Zero(n_);
    Vec v;
    for (const auto& b : blocks_) {
      v.noalias() = b.g.transpose() * z.segment(b.offset, b.dim);
      for (std::size_t j = 0; j < b.cols.size(); ++j) y(b.cols[j]) += v(static_cast<Eigen::Index>(j));
    }
  }

 private:
  // Ruiz-style equilibration: columns scaled individually, cone blocks
  // scaled uniformly (a cone is only invariant under a common positive scale).
  void equilibrate(int passes) {
    for (int pass = 0; pass < passes; ++pass) {
      Vec cn = Vec::Zero(n_);
      for (const auto& b : blocks_)
        for (std::size_t j = 0; j < b.cols.size(); ++j)
          cn(b.cols[j]) = std::max(cn(b.cols[j]), b.g.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff());
      for (int j = 0; j < n_; ++j) cn(j) = cn(j) > 0.0 ? 1.0 / std::sqrt(cn(j)) : 1.0;
      for (std::size_t k = 0; k < blocks_.size(); ++k) {
        auto& b = blocks_[k];
        for (std::size_t j = 0; j < b.cols.size(); ++j) b.g.col(static_cast<Eigen::Index>(j)) *= cn(b.cols[j]);
        double rn = b.g.size() > 0 ? b.g.cwiseAbs().maxCoeff() : 0.0;
        double rs = rn > 0.0 ? 1.0 / std::sqrt(rn) : 1.0;
        b.g *= rs;
        h_.segment(b.offset, b.dim) *= rs;
        row_scale_(static_cast<Eigen::Index>(k)) *= rs;
      }
      c_ = c_.cwiseProduct(cn);
      col_scale_ = col_scale_.cwiseProduct(cn);
    }
  }

  int n_ = 0;
  int m_ = 0;
  int degree_ = 0;
  Vec c_;
  Vec h_;
  std::vector<double> hvals_;
  std::vector<ConeBlock> blocks_;
  Vec col_scale_;
  Vec row_scale_;
};

// Hyperbolic Householder form of the normalized NT scaling:
// W = eta * [[a, q'], [q, I + q q'/(1+a)]],  a^2 - |q|^2 = 1.
inline void apply_what(const Scaling& sc, const double* y, double* out, int dim) {
  double qy = 0.0;
  for (int i = 1; i < dim; ++i) qy += sc.q(i - 1) * y[i];
  double f = y[0] + qy / (1.0 + sc.a);
  out[0] = sc.a * y[0] + qy;
  for (int i = 1; i < dim; ++i) out[i] = y[i] + f * sc.q(i - 1);
}

class Kkt {
 public:
  explicit Kkt(const Standardized& p) : p_(p), sc_(p.blocks().size()) {}

  void identity_scaling() {
    for (std::size_t k = 0; k < sc_.size(); ++k) {
      sc_[k] = Scaling{};
      if (p_.blocks()[k].soc) sc_[k].q = Vec::Zero(p_.blocks()[k].dim - 1), sc_[k].a = 1.0;
    }
  }

  // Returns false when s or z leave the cone interior.
  bool update_scaling(const Vec& s, const Vec& z, Vec& lambda) {
    lambda.resize(p_.m());
    for (std::size_t k = 0; k < sc_.size(); ++k) {
      const auto& b = p_.blocks()[k];
      auto& sc = sc_[k];
      if (!b.soc) {
        double sv = s(b.offset), zv = z(b.offset);
        if (sv <= 0.0 || zv <= 0.0) return false;
        sc.w = std::sqrt(sv / zv);
        lambda(b.offset) = std::sqrt(sv * zv);
        continue;
      }
      auto sb = s.segment(b.offset, b.dim);
      auto zb = z.segment(b.offset, b.dim);
      double sres = sb(0) * sb(0) - sb.tail(b.dim - 1).squaredNorm();
      double zres = zb(0) * zb(0) - zb.tail(b.dim - 1).squaredNorm();
      if (sres <= 0.0 || zres <= 0.0 || sb(0) <= 0.0 || zb(0) <= 0.0) return false;
      double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
      Vec sbar = sb / snorm, zbar = zb / znorm;
      double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      sc.eta = std::sqrt(snorm / znorm);
      sc.a = 0.5 / gamma * (sbar(0) + zbar(0));
      sc.q = 0.5 / gamma * (sbar.tail(b.dim - 1) - zbar.tail(b.dim - 1));
      apply_what(sc, zb.data(), lambda.data() + b.offset, b.dim);
      lambda.segment(b.offset, b.dim) *= sc.eta;
    }
    return true;
  }

  // out = W y
  void scale(const Vec& y, Vec& out) const { apply(y, out, 1); }
  // out = W^-1 y
  void unscale(const Vec& y, Vec& out) const { apply(y, out, -1); }

  bool factor() {
    const int n = p_.n();
    m_.setZero(n, n);
    Mat v;
    for (std::size_t k = 0; k < sc_.size(); ++k) {
      const auto& b = p_.blocks()[k];
      const auto kc = static_cast<Eigen::Index>(b.cols.size());
      if (kc == 0) continue;
      v.resize(b.dim, kc);
      if (!b.soc) {
        v = b.g / sc_[k].w;
      } else {
        // W^-1 = (1/eta) J What J applied to all columns at once
        const auto& sc = sc_[k];
        const auto gb = b.g.bottomRows(b.dim - 1);
        const Eigen::RowVectorXd qg = sc.q.transpose() * gb;
        v.row(0) = (sc.a * b.g.row(0) - qg) / sc.eta;
        v.bottomRows(b.dim - 1) = (gb - sc.q * (b.g.row(0) - qg / (1.0 + sc.a))) / sc.eta;
      }
      Mat vtv = Mat::Zero(kc, kc);
      vtv.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose());
      for (Eigen::Index j = 0; j < kc; ++j)
        for (Eigen::Index i = j; i < kc; ++i) {
          int r = b.cols[static_cast<std::size_t>(i)], c = b.cols[static_cast<std::size_t>(j)];
          if (r >= c)
            m_(r, c) += vtv(i, j);
          else
            m_(c, r) += vtv(i, j);
        }
    }
    double diag_max = std::max(1.0, m_.diagonal().cwiseAbs().maxCoeff());
    for (double reg = 1e-13; reg < 1e-2; reg *= 100.0) {
      Mat mr = m_;
      mr.diagonal().array() += reg * diag_max;
      llt_.compute(mr.selfadjointView<Eigen::Lower>());
      if (llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  // Solves [0 G'; G -W^2] [dx; dz] = [bx; bz] with iterative refinement.
  void solve(const Vec& bx, const Vec& bz, Vec& dx, Vec& dz, int refine = 3) const {
    solve_once(bx, bz, dx, dz);
    Vec rx, rz, gx, w2dz, ex, ez;
    for (int it = 0; it < refine; ++it) {
      p_.mul_t(dz, rx);
      rx = bx - rx;
      p_.mul(dx, gx);
      w2(dz, w2dz);
      rz = bz - (gx - w2dz);
      double rn = std::max(rx.lpNorm<Eigen::Infinity>(), rz.lpNorm<Eigen::Infinity>());
      double bn = std::max({bx.lpNorm<Eigen::Infinity>(), bz.lpNorm<Eigen::Infinity>(), 1e-300});
      if (rn <= 1e-14 * bn) break;
      solve_once(rx, rz, ex, ez);
      dx += ex;
      dz += ez;
    }
  }

 private:
  void apply(const Vec& y, Vec& out, int dir) const {
    out.resize(p_.m());
    for (std::size_t k = 0; k < sc_.size(); ++k) {
      const auto& b = p_.blocks()[k];
      const auto& sc = sc_[k];
      if (!b.soc) {
        out(b.offset) = dir > 0 ? sc.w * y(b.offset) : y(b.offset) / sc.w;
        continue;
      }
      if (dir > 0) {
        apply_what(sc, y.data() + b.offset, out.data() + b.offset, b.dim);
        out.segment(b.offset, b.dim) *= sc.eta;
      } else {
        Vec tmp = y.segment(b.offset, b.dim);
        for (int i = 1; i < b.dim; ++i) tmp(i) = -tmp(i);
        apply_what(sc, tmp.data(), out.data() + b.offset, b.dim);
        for (int i = 1; i < b.dim; ++i) out(b.offset + i) = -out(b.offset + i);
        out.segment(b.offset, b.dim) /= sc.eta;
      }
    }
  }
  void w2(const Vec& y, Vec& out) const {
    Vec t;
    scale(y, t);
    scale(t, out);
  }
  void winv2(const Vec& y, Vec& out) const {
    Vec t;
    unscale(y, t);
    unscale(t, out);
  }
  void solve_once(const Vec& bx, const Vec& bz, Vec& dx, Vec& dz) const {
    Vec t, gt;
    winv2(bz, t);
    p_.mul_t(t, gt);
    dx = llt_.solve(bx + gt);
    Vec gx;
    p_.mul(dx, gx);
    winv2(gx - bz, dz);
  }

  const Standardized& p_;
  std::vector<Scaling> sc_;
  Mat m_;
  Eigen::LLT<Mat> llt_;
};

// Jordan product u o v.
inline void jordan_prod(const Standardized& p, const Vec& u, const Vec& v, Vec& out) {
  out.resize(p.m());
  for (const auto& b : p.blocks()) {
    if (!b.soc) {
      out(b.offset) = u(b.offset) * v(b.offset);
      continue;
    }
    auto ub = u.segment(b.offset, b.dim);
    auto vb = v.segment(b.offset, b.dim);
    out(b.offset) = ub.dot(vb);
    out.segment(b.offset + 1, b.dim - 1) = ub(0) * vb.tail(b.dim - 1) + vb(0) * ub.tail(b.dim - 1);
  }
}

// Solves lambda o u = r for u.
inline void jordan_div(const Standardized& p, const Vec& lambda, const Vec& r, Vec& out) {
  out.resize(p.m());
  for (const auto& b : p.blocks()) {
    if (!b.soc) {
      out(b.offset) = r(b.offset) / lambda(b.offset);
      continue;
    }
    auto l = lambda.segment(b.offset, b.dim);
    auto rb = r.segment(b.offset, b.dim);
    double rho = l(0) * l(0) - l.tail(b.dim - 1).squaredNorm();
    double nu = l.tail(b.dim - 1).dot(rb.tail(b.dim - 1));
    double u0 = (l(0) * rb(0) - nu) / rho;
    out(b.offset) = u0;
    out.segment(b.offset + 1, b.dim - 1) = (rb.tail(b.dim - 1) - u0 * l.tail(b.dim - 1)) / l(0);
  }
}

inline void add_identity(const Standardized& p, Vec& v, double alpha) {
  for (const auto& b : p.blocks()) v(b.offset) += alpha;
}

// Largest t with v + t e in K, i.e. -min "eigenvalue" of v over all cones.
inline double max_shift_needed(const Standardized& p, const Vec& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : p.blocks()) {
    if (!b.soc)
      worst = std::max(worst, -v(b.offset));
    else
      worst = std::max(worst, v.segment(b.offset + 1, b.dim - 1).norm() - v(b.offset));
  }
  return worst;
}

// Largest alpha in [0, cap] with v + alpha dv in K.
inline double max_step(const Standardized& p, const Vec& v, const Vec& dv, double cap) {
  double alpha = cap;
  for (const auto& b : p.blocks()) {
    if (!b.soc) {
      if (dv(b.offset) < 0.0) alpha = std::min(alpha, -v(b.offset) / dv(b.offset));
      continue;
    }
    auto x = v.segment(b.offset, b.dim);
    auto d = dv.segment(b.offset, b.dim);
    // q(t) = (x0 + t d0)^2 - |x1 + t d1|^2 = A t^2 + 2 B t + C, with C > 0.
    double A = d(0) * d(0) - d.tail(b.dim - 1).squaredNorm();
    double B = x(0) * d(0) - x.tail(b.dim - 1).dot(d.tail(b.dim - 1));
    double C = x(0) * x(0) - x.tail(b.dim - 1).squaredNorm();
    double t = std::numeric_limits<double>::infinity();
    if (d(0) < 0.0) t = -x(0) / d(0);
    const double disc = B * B - A * C;
    if (std::abs(A) < 1e-300) {
      if (B < 0.0) t = std::min(t, -C / (2.0 * B));
    } else if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      // roots of A t^2 + 2 B t + C, computed stably
      double qq = -(B + std::copysign(sq, B));
      double r1 = qq / A;
      double r2 = qq != 0.0 ? C / qq : std::numeric_limits<double>::infinity();
      for (double r : {r1, r2})
        if (r > 0.0) t = std::min(t, r);
    }
    alpha = std::min(alpha, t);
  }
  return std::max(alpha, 0.0);
}

}  // namespace detail

/// Solves max objective(x) subject to the program's constraints.
inline SolveResult solve(const ConicProgram& prog, const SolverOptions& opts = {}) {
  using detail::Vec;
  SolveResult res;
  const detail::Standardized p(prog, opts.equilibration_passes);
  const int n = p.n(), m = p.m();
  const Vec& c = p.c();
  const Vec& h = p.h();

  auto finish = [&](SolveStatus st, const Vec& x, double tau, int iters) {
    res.status = st;
    res.solver_iterations = iters;
    Vec xs = x.cwiseProduct(p.col_scale()) / tau;
    res.x.assign(xs.data(), xs.data() + n);
    res.objective_value = prog.objective().evaluate(res.x);
    return res;
  };

  if (m == 0) {
    if (c.cwiseAbs().maxCoeff() > 0.0) {
      res.status = SolveStatus::unbounded;
      return res;
    }
    res.status = SolveStatus::optimal;
    res.x.assign(static_cast<std::size_t>(n), 0.0);
    res.objective_value = prog.objective().constant();
    return res;
  }

  detail::Kkt kkt(p);
  kkt.identity_scaling();
  if (!kkt.factor()) {
    res.status = SolveStatus::numerical_failure;
    return res;
  }

  // Initial point: least-squares primal, minimum-norm dual, shifted into K.
  Vec x, z, s, tmp;
  kkt.solve(Vec::Zero(n), h, x, tmp);
  s = -tmp;
  {
    Vec xd;
    kkt.solve(-c, Vec::Zero(m), xd, z);
  }
  double shift = detail::max_shift_needed(p, s);
  if (shift >= -1e-8 * std::max(1.0, s.norm())) detail::add_identity(p, s, 1.0 + shift);
  shift = detail::max_shift_needed(p, z);
  if (shift >= -1e-8 * std::max(1.0, z.norm())) detail::add_identity(p, z, 1.0 + shift);
  double tau = 1.0, kappa = 1.0;

  const double hnorm = std::max(1.0, h.norm());
  const double cnorm = std::max(1.0, c.norm());
  const double dgr = static_cast<double>(p.degree()) + 1.0;

  Vec rx, rz, gx, gtz, lambda, ls;
  Vec x1, z1, x2, z2, dx, dz, ds, rs, wdz, winv_ds, tmp2, corr;
  Vec best_x = x;
  double best_tau = tau;
  double best_score = std::numeric_limits<double>::infinity();
  double best_metrics[4] = {res.primal_residual, res.dual_residual, res.gap, res.relative_gap};
  bool failed = false;

  for (int it = 0; it <= opts.max_iters; ++it) {
    p.mul(x, gx);
    p.mul_t(z, gtz);
    rx = gtz + c * tau;
    rz = gx + s - h * tau;
    const double cx = c.dot(x), hz = h.dot(z);
    const double rt = cx + hz + kappa;
    const double sz = s.dot(z);
    const double mu = (sz + tau * kappa) / dgr;

    const double pres = rz.norm() / tau / hnorm;
    const double dres = rx.norm() / tau / cnorm;
    const double pcost = cx / tau, dcost = -hz / tau;
    const double gap = sz / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0)
      relgap = gap / -pcost;
    else if (dcost > 0.0)
      relgap = gap / dcost;

    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best_score) {
      best_score = score;
      best_x = x, best_tau = tau;
      best_metrics[0] = pres, best_metrics[1] = dres, best_metrics[2] = gap, best_metrics[3] = relgap;
    }

    if (pres < opts.feastol && dres < opts.feastol && (gap < opts.abstol || relgap < opts.reltol)) {
      res.primal_residual = pres, res.dual_residual = dres, res.gap = gap, res.relative_gap = relgap;
      return finish(SolveStatus::optimal, x, tau, it);
    }

    // Infeasibility certificates.
    if (hz < 0.0) {
      const double pinf = gtz.norm() / cnorm / (-hz / hnorm);
      if (pinf < opts.feastol && tau < kappa) {
        res.status = SolveStatus::infeasible;
        res.solver_iterations = it;
        return res;
      }
    }
    if (cx < 0.0) {
      const double dinf = (gx + s).norm() / hnorm / (-cx / cnorm);
      if (dinf < opts.feastol && tau < kappa) {
        res.status = SolveStatus::unbounded;
        res.solver_iterations = it;
        return res;
      }
    }
    if (it == opts.max_iters) break;
    res.solver_iterations = it;

    if (!kkt.update_scaling(s, z, lambda) || !kkt.factor()) {
      failed = true;
      break;
    }
    kkt.solve(-c, h, x1, z1);
    const double denom_base = c.dot(x1) + h.dot(z1);

    detail::jordan_prod(p, lambda, lambda, ls);

    auto direction = [&](double f, const Vec& rs_in, double rk, double& dtau, double& dkappa) {
      detail::jordan_div(p, lambda, rs_in, tmp2);  // lambda \ rs
      Vec wt;
      kkt.scale(tmp2, wt);
      kkt.solve(-f * rx, -f * rz - wt, x2, z2);
      dtau = (-f * rt - c.dot(x2) - h.dot(z2) - rk / tau) / (denom_base - kappa / tau);
      dx = x2 + dtau * x1;
      dz = z2 + dtau * z1;
      dkappa = (rk - kappa * dtau) / tau;
      kkt.scale(dz, wdz);
      winv_ds = tmp2 - wdz;
      kkt.scale(winv_ds, ds);
    };

    auto step_len = [&](double dtau, double dkappa) {
      double a = detail::max_step(p, s, ds, 1.0e300);
      a = std::min(a, detail::max_step(p, z, dz, 1.0e300));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    double dtau_a, dkappa_a;
    rs = -ls;
    direction(1.0, rs, -tau * kappa, dtau_a, dkappa_a);
    const double alpha_aff = std::min(1.0, step_len(dtau_a, dkappa_a));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector.
    detail::jordan_prod(p, winv_ds, wdz, corr);
    rs = -ls - corr;
    detail::add_identity(p, rs, sigma * mu);
    const double rk = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
    double dtau, dkappa;
    direction(1.0 - sigma, rs, rk, dtau, dkappa);
    double alpha = std::min(1.0, opts.step_fraction * step_len(dtau, dkappa));
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
      failed = true;
      break;
    }

    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    res.solver_iterations = it + 1;
  }

  res.primal_residual = best_metrics[0], res.dual_residual = best_metrics[1];
  res.gap = best_metrics[2], res.relative_gap = best_metrics[3];
  const bool near = best_metrics[0] < opts.feastol_inaccurate && best_metrics[1] < opts.feastol_inaccurate &&
                    std::min(best_metrics[2], best_metrics[3]) < opts.gaptol_inaccurate;
  if (near) return finish(SolveStatus::near_optimal, best_x, best_tau, res.solver_iterations);
  return finish(failed ? SolveStatus::numerical_failure : SolveStatus::iteration_limit, best_x,
                best_tau, res.solver_iterations);
}

}  // namespace istn::conic
