#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "istn/channel.hpp"
#include "istn/conic/program.hpp"
#include "istn/conic/solver.hpp"
#include "istn/config.hpp"
#include "istn/rates.hpp"

namespace istn {

/// Auxiliary SINR and rate variables of the convexified problem.
///   b, b_spc, b_sc : SU private / super-common / satellite-common SINRs
///   a, a_spc, a_c  : CU private / super-common / cellular-common SINRs
///   r, alpha       : SU and CU private rates (bits/s/Hz)
struct AuxState {
  Eigen::VectorXd alpha, r, a, a_spc, a_c, b, b_spc, b_sc;
};

struct ScaIterate {
  PrecoderSet prec;
  RateAllocation alloc;
  double q = 0.0;
  AuxState aux;
  int iteration = 0;
};

enum class InitStrategy { matched_filter };
enum class InfeasibilityPolicy { average_and_retry, stop };

struct ScaOptions {
  double stop_tol = 1e-4;
  int max_iters = 100;
  InitStrategy init_strategy = InitStrategy::matched_filter;
  InfeasibilityPolicy infeasibility_policy = InfeasibilityPolicy::average_and_retry;
  double aux_floor = 1e-9;
  // initial power split; renormalized over the streams that exist
  double frac_private = 0.5;
  double frac_intra_common = 0.3;
  double frac_super_common = 0.2;
  // satellite power back-off searched at initialization, in decades
  int init_backoff_decades = 8;
  // largest row violation tolerated in a subproblem point the solver could
  // not certify as optimal; the final audit on the true rates still applies
  double accept_violation = 1e-6;
  conic::SolverOptions solver;

  void validate() const {
    if (!(stop_tol > 0.0)) throw std::invalid_argument("stop_tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(aux_floor > 0.0)) throw std::invalid_argument("aux_floor must be positive");
    if (!(frac_private > 0.0) || frac_intra_common < 0.0 || frac_super_common < 0.0)
      throw std::invalid_argument("bad initial power split");
    if (init_backoff_decades < 0) throw std::invalid_argument("init_backoff_decades must be >= 0");
    if (!(accept_violation >= 0.0)) throw std::invalid_argument("accept_violation must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Convexification pieces

/// First-order expansion of |z^H w|^2 / a around (w0, a0):
///   value(w, a) = Re(grad^H w) + a_coef * a
/// with grad = 2 (z^H w0) z / a0 and a_coef = -|z^H w0|^2 / a0^2.
struct Minorant {
  CVec grad;
  double a_coef = 0.0;

  double evaluate(const CVec& w, double a) const { return grad.dot(w).real() + a_coef * a; }
};

inline Minorant taylor_quadratic_over_linear(const CVec& w0, double a0, const CVec& z) {
  if (!(a0 > 0.0)) throw std::invalid_argument("expansion point needs a positive denominator");
  const cplx beta = z.dot(w0);
  Minorant m;
  m.grad = (2.0 / a0) * beta * z;
  m.a_coef = -std::norm(beta) / (a0 * a0);
  return m;
}

/// Conservative SOC form of rate_bits * ln 2 <= ln(1 + a) around a0:
///   rate_bits * ln 2 <= v - u / a,  v = a0/(a0+1) + ln(a0+1),  u = a0^2/(a0+1)
/// written as || [a + rate*ln2 - v, 2 sqrt(u)] || <= a - rate*ln2 + v.
/// The conic variable may hold a / aux_scale instead of a; u is rescaled
/// accordingly, which leaves the feasible set in terms of a unchanged.
inline conic::SecondOrderCone soc_log_row(double aux0, const conic::AffineExpr& rate_bits, int aux_var,
                                          double aux_scale = 1.0) {
  if (!(aux0 > 0.0)) throw std::invalid_argument("log-row expansion point must be positive");
  if (!(aux_scale > 0.0)) throw std::invalid_argument("aux scale must be positive");
  const double v = aux0 / (aux0 + 1.0) + std::log1p(aux0);
  const double u = aux0 * aux0 / (aux0 + 1.0) / aux_scale;
  // y = v - rate*ln2 must satisfy aux * y >= u
  conic::AffineExpr y = conic::AffineExpr(v) - std::numbers::ln2 * rate_bits;
  conic::AffineExpr av = conic::AffineExpr::variable(aux_var);
  return {{av - y, conic::AffineExpr(2.0 * std::sqrt(u))}, av + y};
}

// ---------------------------------------------------------------------------
// Variable layout

struct VariableLayout {
  // [column][feed or antenna]; empty vectors for streams that do not exist
  std::vector<std::vector<int>> w_re, w_im, p_re, p_im;
  std::vector<int> c_spc, c_sc, c_bs;
  int q = -1;
  std::vector<int> alpha, r, a, a_spc, a_c, b, b_spc, b_sc;
  AuxState aux_scale;  // conic aux variable = aux / aux_scale
};

struct Subproblem {
  conic::ConicProgram prog;
  VariableLayout vars;
};

namespace detail {

// scale * z^H w for the complex column whose real/imag parts live in re/im.
inline conic::ComplexAffine inner(const CVec& z, const std::vector<int>& re, const std::vector<int>& im,
                                  double scale = 1.0) {
  conic::ComplexAffine t;
  for (std::size_t n = 0; n < re.size(); ++n) {
    const cplx c = scale * std::conj(z(static_cast<Eigen::Index>(n)));
    t.add_term(re[n], c);
    t.add_term(im[n], cplx(0.0, 1.0) * c);
  }
  return t;
}

inline conic::AffineExpr minorant_expr(const Minorant& m, const std::vector<int>& re, const std::vector<int>& im,
                                       int aux_var, double aux_scale) {
  conic::AffineExpr e;
  for (std::size_t n = 0; n < re.size(); ++n) {
    const cplx g = m.grad(static_cast<Eigen::Index>(n));
    e.add_term(re[n], g.real());
    e.add_term(im[n], g.imag());
  }
  e.add_term(aux_var, m.a_coef * aux_scale);
  return e;
}

inline bool sat_col_active(int col, const StreamMask& m, const LinkModel& lm) {
  if (!lm.satellite) return false;
  if (col == 0) return m.super_common;
  if (col == 1) return m.sat_common;
  return true;
}

inline bool bs_col_active(int col, const StreamMask& m, const LinkModel& lm) {
  if (!lm.cellular) return false;
  return col != 0 || m.bs_common;
}

}  // namespace detail

/// Number of real decision variables for a stream mask and link model.
inline int count_variables(int n_feeds, int n_sus, int n_bs, int n_cus, const StreamMask& m, const LinkModel& lm) {
  int v = 1;  // q
  if (lm.satellite) {
    v += 2 * n_feeds * (n_feeds + (m.super_common ? 1 : 0) + (m.sat_common ? 1 : 0));
    v += 2 * n_sus;  // r, b
    if (m.super_common) v += n_feeds + n_sus;
    if (m.sat_common) v += n_feeds + n_sus;
  }
  if (lm.cellular) {
    v += 2 * n_bs * (n_cus + (m.bs_common ? 1 : 0));
    v += 2 * n_cus;  // alpha, a
    if (m.bs_common) v += 2 * n_cus;
    if (m.super_common) v += n_cus;
  }
  return v;
}

/// One convex subproblem around the given iterate.
inline Subproblem build_subproblem(const ScaIterate& it, const ChannelRealization& ch, const ScenarioConfig& cfg,
                                   const StreamMask& mask, const LinkModel& lm = {}) {
  using conic::AffineExpr;
  using conic::ComplexAffine;
  lm.validate(mask);
  Subproblem sp;
  auto& prog = sp.prog;
  auto& L = sp.vars;
  const int ns = ch.n_feeds(), ks = ch.n_sus(), nt = ch.n_bs_antennas(), kt = ch.n_cus();
  const bool sat = lm.satellite, cell = lm.cellular;
  const bool spc = mask.super_common, sc = mask.sat_common && sat, bc = mask.bs_common && cell;

  auto vec_of = [&](const std::string& base, int count) {
    std::vector<int> out;
    for (int i = 0; i < count; ++i) out.push_back(prog.add_variable(base + std::to_string(i)));
    return out;
  };

  // precoders
  L.w_re.resize(static_cast<std::size_t>(ns + 2));
  L.w_im.resize(static_cast<std::size_t>(ns + 2));
  for (int c = 0; c < ns + 2; ++c)
    if (detail::sat_col_active(c, mask, lm)) {
      const std::string tag = "w" + std::to_string(c) + "_";
      L.w_re[c] = vec_of(tag + "re", ns);
      L.w_im[c] = vec_of(tag + "im", ns);
    }
  L.p_re.resize(static_cast<std::size_t>(kt + 1));
  L.p_im.resize(static_cast<std::size_t>(kt + 1));
  for (int c = 0; c < kt + 1; ++c)
    if (detail::bs_col_active(c, mask, lm)) {
      const std::string tag = "p" + std::to_string(c) + "_";
      L.p_re[c] = vec_of(tag + "re", nt);
      L.p_im[c] = vec_of(tag + "im", nt);
    }

  if (spc) L.c_spc = vec_of("c_spc", ns);
  if (sc) L.c_sc = vec_of("c_sc", ns);
  if (bc) L.c_bs = vec_of("c_bs", kt);
  L.q = prog.add_variable("q");
  if (cell) {
    L.alpha = vec_of("alpha", kt);
    L.a = vec_of("a", kt);
    if (spc) L.a_spc = vec_of("a_spc", kt);
    if (bc) L.a_c = vec_of("a_c", kt);
  }
  if (sat) {
    L.r = vec_of("r", ks);
    L.b = vec_of("b", ks);
    if (spc) L.b_spc = vec_of("b_spc", ks);
    if (sc) L.b_sc = vec_of("b_sc", ks);
  }
  L.aux_scale = it.aux;
  prog.maximize(AffineExpr::variable(L.q));

  auto sum_of = [](const std::vector<int>& v) {
    AffineExpr e;
    for (int i : v) e.add_term(i, 1.0);
    return e;
  };

  // epigraph and non-negativity
  if (sat)
    for (int k = 0; k < ks; ++k) {
      const int n = ch.su_beam[static_cast<std::size_t>(k)];
      AffineExpr e = AffineExpr::variable(L.q) - AffineExpr::variable(L.r[k]);
      if (spc) e -= AffineExpr::variable(L.c_spc[n]);
      if (sc) e -= AffineExpr::variable(L.c_sc[n]);
      prog.add_le(e, 0.0);
    }
  if (cell)
    for (int k = 0; k < kt; ++k) {
      AffineExpr e = AffineExpr::variable(L.q) - AffineExpr::variable(L.alpha[k]);
      if (bc) e -= AffineExpr::variable(L.c_bs[k]);
      prog.add_le(e, 0.0);
    }
  for (const auto* v : {&L.c_spc, &L.c_sc, &L.c_bs})
    for (int i : *v) prog.add_le(AffineExpr::variable(i, -1.0), 0.0);

  // log rows
  auto log_row = [&](double aux0, const AffineExpr& rate, int var) {
    auto cone = soc_log_row(aux0, rate, var, aux0);
    prog.add_soc(std::move(cone.lhs), std::move(cone.rhs));
  };
  const double ss = lm.rate_scale_sat, scl = lm.rate_scale_cell;
  if (sat)
    for (int k = 0; k < ks; ++k) {
      log_row(it.aux.b(k), AffineExpr::variable(L.r[k], 1.0 / ss), L.b[k]);
      if (sc) log_row(it.aux.b_sc(k), sum_of(L.c_sc) * (1.0 / ss), L.b_sc[k]);
      if (spc) log_row(it.aux.b_spc(k), sum_of(L.c_spc) * (1.0 / ss), L.b_spc[k]);
    }
  if (cell)
    for (int k = 0; k < kt; ++k) {
      log_row(it.aux.a(k), AffineExpr::variable(L.alpha[k], 1.0 / scl), L.a[k]);
      if (bc) log_row(it.aux.a_c(k), sum_of(L.c_bs) * (1.0 / scl), L.a_c[k]);
      if (spc) log_row(it.aux.a_spc(k), sum_of(L.c_spc) * (1.0 / ss), L.a_spc[k]);
    }

  // SINR rows: noise + sum |terms|^2 <= minorant(signal / aux). Each row is
  // divided by its value at the expansion point to keep coefficients O(1).
  const double se = std::sqrt(ch.csit_error_var);
  auto error_terms = [&](const std::vector<int>& cols, std::vector<ComplexAffine>& out) {
    if (se == 0.0) return;
    for (int c : cols) {
      if (L.w_re[c].empty()) continue;
      for (int n = 0; n < ns; ++n) {
        ComplexAffine t;
        t.add_term(L.w_re[c][n], se);
        t.add_term(L.w_im[c][n], cplx(0.0, se));
        out.push_back(t);
      }
    }
  };
  auto sinr_row = [&](std::vector<ComplexAffine> terms, double noise, double value_at_iterate, const CVec& z,
                      const CVec& w0, const std::vector<int>& re, const std::vector<int>& im, double aux0,
                      int aux_var) {
    const double s = std::max(value_at_iterate, noise);
    const double rs = 1.0 / std::sqrt(s);
    for (auto& t : terms) {
      ComplexAffine scaled;
      for (const auto& [v, c] : t.terms()) scaled.add_term(v, rs * c);
      t = scaled;
    }
    const Minorant m = taylor_quadratic_over_linear(w0, aux0, z);
    AffineExpr rhs = (detail::minorant_expr(m, re, im, aux_var, aux0) - AffineExpr(noise)) * (1.0 / s);
    prog.add_convex_quadratic_le_affine(terms, rhs);
  };

  const PrecoderSet& P0 = it.prec;
  if (sat) {
    for (int k = 0; k < ks; ++k) {
      const int beam = ch.su_beam[static_cast<std::size_t>(k)];
      const CVec f = ch.f_hat.col(k);
      const double g0 = effective_noise_g(k, ch, P0, lm);
      std::vector<ComplexAffine> interf;
      for (int c : su_visible_private(lm, ns, beam))
        if (c != 2 + beam) interf.push_back(detail::inner(f, L.w_re[c], L.w_im[c]));
      error_terms(su_error_columns(lm, ns, beam), interf);
      const double own0 = std::norm(f.dot(P0.w.col(2 + beam)));

      // private: g - own <= |f^H w_mu|^2 / b
      sinr_row(interf, lm.noise_sat, g0 - own0, f, P0.w.col(2 + beam), L.w_re[2 + beam], L.w_im[2 + beam],
               it.aux.b(k), L.b[k]);
      std::vector<ComplexAffine> full = interf;
      full.push_back(detail::inner(f, L.w_re[2 + beam], L.w_im[2 + beam]));
      if (sc) sinr_row(full, lm.noise_sat, g0, f, P0.w.col(1), L.w_re[1], L.w_im[1], it.aux.b_sc(k), L.b_sc[k]);
      if (spc) {
        auto with_sc = full;
        if (sc) with_sc.push_back(detail::inner(f, L.w_re[1], L.w_im[1]));
        const double v0 = g0 + std::norm(f.dot(P0.w.col(1)));
        sinr_row(with_sc, lm.noise_sat, v0, f, P0.w.col(0), L.w_re[0], L.w_im[0], it.aux.b_spc(k), L.b_spc[k]);
      }
    }
  }
  if (cell) {
    for (int k = 0; k < kt; ++k) {
      const CVec h = ch.h.col(k);
      const CVec z = ch.z_hat.col(k);
      const double l0 = effective_noise_l(k, ch, P0, lm);
      std::vector<ComplexAffine> interf;
      for (int j = 0; j < kt; ++j)
        if (j != k) interf.push_back(detail::inner(h, L.p_re[1 + j], L.p_im[1 + j]));
      if (lm.inter_network && sat) {
        for (int c = 1; c < ns + 2; ++c)
          if (!L.w_re[c].empty()) interf.push_back(detail::inner(z, L.w_re[c], L.w_im[c]));
        error_terms(cu_error_columns(lm, ns), interf);
      }
      const double own0 = std::norm(h.dot(P0.p.col(1 + k)));
      sinr_row(interf, lm.noise_cell, l0 - own0, h, P0.p.col(1 + k), L.p_re[1 + k], L.p_im[1 + k], it.aux.a(k),
               L.a[k]);
      std::vector<ComplexAffine> full = interf;
      full.push_back(detail::inner(h, L.p_re[1 + k], L.p_im[1 + k]));
      if (bc) sinr_row(full, lm.noise_cell, l0, h, P0.p.col(0), L.p_re[0], L.p_im[0], it.aux.a_c(k), L.a_c[k]);
      if (spc) {
        auto with_c = full;
        if (bc) with_c.push_back(detail::inner(h, L.p_re[0], L.p_im[0]));
        const double v0 = l0 + std::norm(h.dot(P0.p.col(0)));
        sinr_row(with_c, lm.noise_cell, v0, z, P0.w.col(0), L.w_re[0], L.w_im[0], it.aux.a_spc(k), L.a_spc[k]);
      }
    }
  }

  // power budgets
  if (sat) {
    const double cap = std::sqrt(cfg.p_sat_watt / cfg.n_sat_feeds);
    for (int n = 0; n < ns; ++n) {
      std::vector<AffineExpr> lhs;
      for (int c = 0; c < ns + 2; ++c)
        if (!L.w_re[c].empty()) {
          lhs.push_back(AffineExpr::variable(L.w_re[c][n]));
          lhs.push_back(AffineExpr::variable(L.w_im[c][n]));
        }
      prog.add_soc(std::move(lhs), AffineExpr(cap));
    }
  }
  if (cell) {
    std::vector<AffineExpr> lhs;
    for (int c = 0; c < kt + 1; ++c)
      for (std::size_t i = 0; i < L.p_re[c].size(); ++i) {
        lhs.push_back(AffineExpr::variable(L.p_re[c][i]));
        lhs.push_back(AffineExpr::variable(L.p_im[c][i]));
      }
    prog.add_soc(std::move(lhs), AffineExpr(std::sqrt(cfg.p_bs_watt)));
  }
  return sp;
}

/// Conic variable vector representing an iterate in a subproblem's layout
/// (aux variables are stored relative to the subproblem's expansion point).
inline std::vector<double> to_vector(const Subproblem& sp, const ScaIterate& it) {
  const auto& L = sp.vars;
  std::vector<double> x(static_cast<std::size_t>(sp.prog.num_variables()), 0.0);
  auto put = [&x](int var, double v) {
    if (var >= 0) x[static_cast<std::size_t>(var)] = v;
  };
  for (std::size_t c = 0; c < L.w_re.size(); ++c)
    for (std::size_t n = 0; n < L.w_re[c].size(); ++n) {
      put(L.w_re[c][n], it.prec.w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)).real());
      put(L.w_im[c][n], it.prec.w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)).imag());
    }
  for (std::size_t c = 0; c < L.p_re.size(); ++c)
    for (std::size_t n = 0; n < L.p_re[c].size(); ++n) {
      put(L.p_re[c][n], it.prec.p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)).real());
      put(L.p_im[c][n], it.prec.p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)).imag());
    }
  for (std::size_t i = 0; i < L.c_spc.size(); ++i) put(L.c_spc[i], it.alloc.c_spc(static_cast<Eigen::Index>(i)));
  for (std::size_t i = 0; i < L.c_sc.size(); ++i) put(L.c_sc[i], it.alloc.c_sc(static_cast<Eigen::Index>(i)));
  for (std::size_t i = 0; i < L.c_bs.size(); ++i) put(L.c_bs[i], it.alloc.c_bs(static_cast<Eigen::Index>(i)));
  put(L.q, it.q);
  auto vals = [&](const std::vector<int>& vars, const Eigen::VectorXd& v, const Eigen::VectorXd* scale) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      put(vars[i], scale ? v(ii) / (*scale)(ii) : v(ii));
    }
  };
  vals(L.alpha, it.aux.alpha, nullptr);
  vals(L.r, it.aux.r, nullptr);
  vals(L.a, it.aux.a, &L.aux_scale.a);
  vals(L.a_spc, it.aux.a_spc, &L.aux_scale.a_spc);
  vals(L.a_c, it.aux.a_c, &L.aux_scale.a_c);
  vals(L.b, it.aux.b, &L.aux_scale.b);
  vals(L.b_spc, it.aux.b_spc, &L.aux_scale.b_spc);
  vals(L.b_sc, it.aux.b_sc, &L.aux_scale.b_sc);
  return x;
}

namespace detail {

inline AuxState empty_aux(int ks, int kt) {
  AuxState a;
  a.alpha = a.a = a.a_spc = a.a_c = Eigen::VectorXd::Zero(kt);
  a.r = a.b = a.b_spc = a.b_sc = Eigen::VectorXd::Zero(ks);
  return a;
}

}  // namespace detail

/// Reads a subproblem solution back into an iterate; aux values are floored.
inline ScaIterate extract(const Subproblem& sp, std::span<const double> x, const ChannelRealization& ch,
                          double aux_floor) {
  const auto& L = sp.vars;
  ScaIterate it;
  it.prec = PrecoderSet(ch.n_feeds(), ch.n_bs_antennas(), ch.n_cus());
  it.alloc = RateAllocation(ch.n_feeds(), ch.n_cus());
  it.aux = detail::empty_aux(ch.n_sus(), ch.n_cus());
  auto get = [&x](int var) { return x[static_cast<std::size_t>(var)]; };
  for (std::size_t c = 0; c < L.w_re.size(); ++c)
    for (std::size_t n = 0; n < L.w_re[c].size(); ++n)
      it.prec.w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = cplx(get(L.w_re[c][n]), get(L.w_im[c][n]));
  for (std::size_t c = 0; c < L.p_re.size(); ++c)
    for (std::size_t n = 0; n < L.p_re[c].size(); ++n)
      it.prec.p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = cplx(get(L.p_re[c][n]), get(L.p_im[c][n]));
  auto alloc = [&](const std::vector<int>& vars, Eigen::VectorXd& out) {
    for (std::size_t i = 0; i < vars.size(); ++i) out(static_cast<Eigen::Index>(i)) = std::max(0.0, get(vars[i]));
  };
  alloc(L.c_spc, it.alloc.c_spc);
  alloc(L.c_sc, it.alloc.c_sc);
  alloc(L.c_bs, it.alloc.c_bs);
  it.q = get(L.q);
  auto aux = [&](const std::vector<int>& vars, const Eigen::VectorXd* scale, Eigen::VectorXd& out) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out(ii) = scale ? std::max(aux_floor, get(vars[i]) * (*scale)(ii)) : get(vars[i]);
    }
  };
  aux(L.alpha, nullptr, it.aux.alpha);
  aux(L.r, nullptr, it.aux.r);
  aux(L.a, &L.aux_scale.a, it.aux.a);
  aux(L.a_spc, &L.aux_scale.a_spc, it.aux.a_spc);
  aux(L.a_c, &L.aux_scale.a_c, it.aux.a_c);
  aux(L.b, &L.aux_scale.b, it.aux.b);
  aux(L.b_spc, &L.aux_scale.b_spc, it.aux.b_spc);
  aux(L.b_sc, &L.aux_scale.b_sc, it.aux.b_sc);
  return it;
}

/// Builds a consistent iterate around given precoders: aux = achieved SINRs
/// (floored), private rates from aux, common rates split evenly, q = MMF.
inline ScaIterate iterate_from_precoders(const ChannelRealization& ch, PrecoderSet prec, const StreamMask& mask,
                                         const LinkModel& lm, double aux_floor) {
  prec.apply_mask(mask, lm);
  ScaIterate it;
  it.prec = prec;
  it.aux = detail::empty_aux(ch.n_sus(), ch.n_cus());
  it.alloc = RateAllocation(ch.n_feeds(), ch.n_cus());
  const auto t = sinr_all(ch, it.prec, lm);
  const double inf = std::numeric_limits<double>::infinity();
  double r_spc = inf, r_sc = inf, r_c = inf;
  const double ss = lm.rate_scale_sat, scl = lm.rate_scale_cell;
  auto fl = [aux_floor](double v) { return std::max(aux_floor, v); };
  for (int k = 0; k < static_cast<int>(t.su.size()); ++k) {
    it.aux.b(k) = fl(t.su[k].priv);
    it.aux.b_sc(k) = fl(t.su[k].sc);
    it.aux.b_spc(k) = fl(t.su[k].spc);
    it.aux.r(k) = ss * std::log2(1.0 + it.aux.b(k));
    r_sc = std::min(r_sc, ss * std::log2(1.0 + it.aux.b_sc(k)));
    r_spc = std::min(r_spc, ss * std::log2(1.0 + it.aux.b_spc(k)));
  }
  for (int k = 0; k < static_cast<int>(t.cu.size()); ++k) {
    it.aux.a(k) = fl(t.cu[k].priv);
    it.aux.a_c(k) = fl(t.cu[k].common);
    it.aux.a_spc(k) = fl(t.cu[k].spc);
    it.aux.alpha(k) = scl * std::log2(1.0 + it.aux.a(k));
    r_c = std::min(r_c, scl * std::log2(1.0 + it.aux.a_c(k)));
    r_spc = std::min(r_spc, ss * std::log2(1.0 + it.aux.a_spc(k)));
  }
  // Slightly under-allocate so the log rows hold strictly at the start.
  constexpr double kShare = 1.0 - 1e-9;
  if (mask.super_common && std::isfinite(r_spc)) it.alloc.c_spc.setConstant(kShare * r_spc / ch.n_feeds());
  if (mask.sat_common && lm.satellite && std::isfinite(r_sc)) it.alloc.c_sc.setConstant(kShare * r_sc / ch.n_feeds());
  if (mask.bs_common && lm.cellular && std::isfinite(r_c)) it.alloc.c_bs.setConstant(kShare * r_c / ch.n_cus());

  double q = inf;
  if (lm.satellite)
    for (int k = 0; k < ch.n_sus(); ++k) {
      const int n = ch.su_beam[static_cast<std::size_t>(k)];
      q = std::min(q, it.alloc.c_spc(n) + it.alloc.c_sc(n) + it.aux.r(k));
    }
  if (lm.cellular)
    for (int k = 0; k < ch.n_cus(); ++k) q = std::min(q, it.alloc.c_bs(k) + it.aux.alpha(k));
  it.q = q;
  return it;
}

namespace detail {

inline CVec unit_or_first(CVec v) {
  const double n = v.norm();
  if (n > 0.0) return v / n;
  CVec e = CVec::Zero(v.size());
  e(0) = 1.0;
  return e;
}

// Scale W so that the fullest feed sits exactly on its budget.
inline void fit_feed_budget(CMat& w, double feed_cap) {
  double worst = 0.0;
  for (Eigen::Index n = 0; n < w.rows(); ++n) worst = std::max(worst, w.row(n).squaredNorm());
  if (worst > 0.0) w *= std::sqrt(feed_cap / worst);
}

inline void fit_sum_budget(CMat& p, double cap) {
  const double e = p.squaredNorm();
  if (e > 0.0) p *= std::sqrt(cap / e);
}

}  // namespace detail

/// Matched-filter starting point with a fixed private/common power split.
inline ScaIterate initialize(const ChannelRealization& ch, const ScenarioConfig& cfg, const StreamMask& mask,
                             const LinkModel& lm = {}, const ScaOptions& opts = {}) {
  lm.validate(mask);
  opts.validate();
  const int ns = ch.n_feeds(), kt = ch.n_cus();
  PrecoderSet pr(ns, ch.n_bs_antennas(), kt);

  if (lm.satellite) {
    const double fp = opts.frac_private;
    const double fc = mask.sat_common ? opts.frac_intra_common : 0.0;
    const double fs = mask.super_common ? opts.frac_super_common : 0.0;
    const double tot = fp + fc + fs;
    const double ps = cfg.p_sat_watt;
    CVec sum_su = CVec::Zero(ns), sum_all = CVec::Zero(ns);
    for (int n = 0; n < ns; ++n) {
      CVec d = CVec::Zero(ns);
      for (int k = 0; k < ch.n_sus(); ++k)
        if (ch.su_beam[static_cast<std::size_t>(k)] == n) d += ch.f_hat.col(k);
      pr.w_private(n) = detail::unit_or_first(d) * std::sqrt(fp / tot * ps / ns);
    }
    for (int k = 0; k < ch.n_sus(); ++k) sum_su += detail::unit_or_first(ch.f_hat.col(k));
    sum_all = sum_su;
    for (int k = 0; k < kt; ++k) sum_all += detail::unit_or_first(ch.z_hat.col(k));
    if (fc > 0.0) pr.w_sc() = detail::unit_or_first(sum_su) * std::sqrt(fc / tot * ps);
    if (fs > 0.0) pr.w_spc() = detail::unit_or_first(sum_all) * std::sqrt(fs / tot * ps);
    detail::fit_feed_budget(pr.w, cfg.p_sat_watt / cfg.n_sat_feeds);
  }
  if (lm.cellular) {
    const double fp = opts.frac_private;
    const double fc = mask.bs_common ? opts.frac_intra_common : 0.0;
    const double tot = fp + fc;
    CVec sum = CVec::Zero(ch.n_bs_antennas());
    for (int k = 0; k < kt; ++k) {
      const CVec u = detail::unit_or_first(ch.h.col(k));
      pr.p_private(k) = u * std::sqrt(fp / tot * cfg.p_bs_watt / kt);
      sum += u;
    }
    if (fc > 0.0) pr.p_c() = detail::unit_or_first(sum) * std::sqrt(fc / tot * cfg.p_bs_watt);
    detail::fit_sum_budget(pr.p, cfg.p_bs_watt);
  }
  auto it = iterate_from_precoders(ch, pr, mask, lm, opts.aux_floor);
  // Under full reuse a LEO satellite at full power can drown the CUs, and
  // the SCA then starts from q ~ 0 where one step moves less than stop_tol.
  // Backing the whole satellite precoder off is always feasible, so keep
  // the best starting MMF over a coarse power grid.
  if (lm.satellite && lm.cellular && lm.inter_network) {
    const CMat w_full = pr.w;
    for (int j = 1; j <= 2 * opts.init_backoff_decades; ++j) {
      pr.w = w_full * std::pow(10.0, -0.25 * j);  // 5 dB steps
      auto cand = iterate_from_precoders(ch, pr, mask, lm, opts.aux_floor);
      if (cand.q > it.q) it = std::move(cand);
    }
  }
  it.iteration = 0;
  return it;
}

/// Starting point built from another scheme's precoders. Streams that the
/// source lacks get a faint matched-filter column whose leakage to any
/// receiver is ~1e-6 of the noise, then budgets are re-imposed.
inline ScaIterate warm_start(const PrecoderSet& from, const ChannelRealization& ch, const ScenarioConfig& cfg,
                             const StreamMask& mask, const LinkModel& lm = {}, const ScaOptions& opts = {}) {
  lm.validate(mask);
  PrecoderSet pr = from;
  auto faint = [](const CVec& dir, double max_gain2, double noise) {
    return CVec(detail::unit_or_first(dir) * std::sqrt(1e-6 * noise / std::max(max_gain2, 1.0)));
  };
  const double tiny = 1e-30;
  if (lm.satellite) {
    double g2 = 0.0;
    CVec sum_su = CVec::Zero(ch.n_feeds()), sum_all;
    for (int k = 0; k < ch.n_sus(); ++k) {
      g2 = std::max(g2, ch.f_hat.col(k).squaredNorm());
      sum_su += detail::unit_or_first(ch.f_hat.col(k));
    }
    sum_all = sum_su;
    for (int k = 0; k < ch.n_cus(); ++k) {
      g2 = std::max(g2, ch.z_hat.col(k).squaredNorm());
      sum_all += detail::unit_or_first(ch.z_hat.col(k));
    }
    const double nmin = std::min(lm.noise_sat, lm.noise_cell);
    if (mask.sat_common && pr.w_sc().squaredNorm() < tiny) pr.w_sc() = faint(sum_su, g2, nmin);
    if (mask.super_common && pr.w_spc().squaredNorm() < tiny) pr.w_spc() = faint(sum_all, g2, nmin);
    double worst = 0.0;
    for (Eigen::Index n = 0; n < pr.w.rows(); ++n) worst = std::max(worst, pr.w.row(n).squaredNorm());
    const double cap = cfg.p_sat_watt / cfg.n_sat_feeds;
    if (worst > cap) pr.w *= std::sqrt(cap / worst);
  }
  if (lm.cellular && mask.bs_common && pr.p_c().squaredNorm() < tiny) {
    double g2 = 0.0;
    CVec sum = CVec::Zero(ch.n_bs_antennas());
    for (int k = 0; k < ch.n_cus(); ++k) {
      g2 = std::max(g2, ch.h.col(k).squaredNorm());
      sum += detail::unit_or_first(ch.h.col(k));
    }
    pr.p_c() = faint(sum, g2, lm.noise_cell);
    const double e = pr.p.squaredNorm();
    if (e > cfg.p_bs_watt) pr.p *= std::sqrt(cfg.p_bs_watt / e);
  }
  return iterate_from_precoders(ch, pr, mask, lm, opts.aux_floor);
}

struct TraceEntry {
  int iteration = 0;
  double q = 0.0;
  double max_violation = 0.0;
  std::string status;
};

struct ScaResult {
  ScaIterate final_iterate;
  std::vector<double> q_trace;
  std::vector<TraceEntry> trace;
  RateReport report;  // audited rates of final_iterate
  bool converged = false;
  std::string status = "ok";
  int iterations = 0;
  double q_final = 0.0;

  double mmf() const { return report.mmf; }
  bool clean() const { return status == "ok" && report.audit_violation() <= 1e-5; }
};

inline void write_trace(const ScaResult& r, std::ostream& os) {
  os << "iteration,q,max_violation,status\n";
  os.precision(12);
  for (const auto& t : r.trace) os << t.iteration << "," << t.q << "," << t.max_violation << "," << t.status << "\n";
}

/// SCA loop: build around the current iterate, solve, move to the solution,
/// stop once q changes by less than stop_tol. The returned iterate is the
/// one with the best audited MMF (normally the last).
inline ScaResult sca_solve(const ChannelRealization& ch, const ScenarioConfig& cfg, const StreamMask& mask,
                           const LinkModel& lm = {}, const ScaOptions& opts = {},
                           const ScaIterate* start = nullptr) {
  opts.validate();
  lm.validate(mask);
  ScaResult res;
  ScaIterate cur = start ? *start : initialize(ch, cfg, mask, lm, opts);
  ScaIterate prev = cur;
  auto audit = [&](const ScaIterate& it) { return evaluate(ch, it.prec, it.alloc, cfg, mask, lm); };

  RateReport best_report = audit(cur);
  ScaIterate best = cur;
  double best_q = cur.q;
  res.q_trace.push_back(cur.q);
  res.trace.push_back({0, cur.q, 0.0, "initial"});

  bool retried = false;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    const Subproblem sp = build_subproblem(cur, ch, cfg, mask, lm);
    const auto sol = conic::solve(sp.prog, opts.solver);
    const double viol = sol.x.empty() ? std::numeric_limits<double>::infinity() : sp.prog.max_violation(sol.x);
    // A stalled solve whose point is still feasible and improving is usable.
    const bool usable = sol.ok() || (!sol.x.empty() && viol <= opts.accept_violation && sol.status != conic::SolveStatus::infeasible &&
                                     sol.status != conic::SolveStatus::unbounded &&
                                     sol.x[static_cast<std::size_t>(sp.vars.q)] >= cur.q - 1e-6);
    res.iterations = iter;
    if (!usable) {
      res.trace.push_back({iter, cur.q, viol, std::string(conic::to_string(sol.status))});
      if (opts.infeasibility_policy == InfeasibilityPolicy::average_and_retry && !retried) {
        retried = true;
        PrecoderSet mid = cur.prec;
        mid.w = 0.5 * (cur.prec.w + prev.prec.w);
        mid.p = 0.5 * (cur.prec.p + prev.prec.p);
        cur = iterate_from_precoders(ch, mid, mask, lm, opts.aux_floor);
        continue;
      }
      res.status = "subproblem_" + std::string(conic::to_string(sol.status));
      break;
    }
    ScaIterate next = extract(sp, sol.x, ch, opts.aux_floor);
    next.iteration = iter;
    res.q_trace.push_back(next.q);
    res.trace.push_back({iter, next.q, viol, std::string(conic::to_string(sol.status))});
    const double dq = next.q - cur.q;
    prev = cur;
    cur = next;
    RateReport rep = audit(cur);
    if (rep.audit_violation() <= 1e-5 && rep.mmf >= best_report.mmf) {
      best = cur;
      best_report = rep;
      best_q = cur.q;
    }
    if (std::abs(dq) < opts.stop_tol) {
      res.converged = true;
      break;
    }
  }
  res.final_iterate = best;
  res.report = best_report;
  res.q_final = best_q;
  return res;
}

}  // namespace istn
