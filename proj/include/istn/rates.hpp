#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "istn/channel.hpp"
#include "istn/config.hpp"

namespace istn {

/// Which optional streams exist. Private streams always exist.
struct StreamMask {
  bool super_common = true;
  bool sat_common = true;
  bool bs_common = true;
};

/// Spectrum/participation model shared by the rate evaluator and the SCA
/// builder, so both see exactly the same interference terms.
///
/// noise_* is the per-user noise variance in units of the full-band noise
/// (beta for a sub-band of fraction beta); rate_scale_* multiplies every
/// log2(1 + sinr) of that network.
struct LinkModel {
  bool satellite = true;      // SUs and W participate
  bool cellular = true;       // CUs and P participate
  bool inter_beam = true;     // false: beams on orthogonal colours
  bool inter_network = true;  // false: satellite and BS on disjoint bands
  double noise_sat = 1.0;
  double noise_cell = 1.0;
  double rate_scale_sat = 1.0;
  double rate_scale_cell = 1.0;

  void validate(const StreamMask& m) const {
    if (!satellite && !cellular) throw std::invalid_argument("link model with no network");
    if (!(noise_sat > 0.0 && noise_cell > 0.0)) throw std::invalid_argument("noise must be positive");
    if (!(rate_scale_sat > 0.0 && rate_scale_cell > 0.0)) throw std::invalid_argument("rate scale must be positive");
    if (m.super_common && !(satellite && cellular && inter_network))
      throw std::invalid_argument("super-common stream needs both networks on a shared band");
    if (!inter_beam && (m.sat_common || m.super_common))
      throw std::invalid_argument("orthogonal beam colours cannot carry satellite common streams");
  }
};

/// W = [w_spc, w_sc, w_1..w_Ns] and P = [p_c, p_1..p_Kt].
struct PrecoderSet {
  CMat w;
  CMat p;

  PrecoderSet() = default;
  PrecoderSet(int n_feeds, int n_bs_antennas, int n_cus)
      : w(CMat::Zero(n_feeds, n_feeds + 2)), p(CMat::Zero(n_bs_antennas, n_cus + 1)) {}

  int n_feeds() const { return static_cast<int>(w.rows()); }
  int n_cus() const { return static_cast<int>(p.cols()) - 1; }

  auto w_spc() { return w.col(0); }
  auto w_sc() { return w.col(1); }
  auto w_private(int beam) { return w.col(2 + beam); }
  auto p_c() { return p.col(0); }
  auto p_private(int cu) { return p.col(1 + cu); }
  auto w_spc() const { return w.col(0); }
  auto w_sc() const { return w.col(1); }
  auto w_private(int beam) const { return w.col(2 + beam); }
  auto p_c() const { return p.col(0); }
  auto p_private(int cu) const { return p.col(1 + cu); }

  void apply_mask(const StreamMask& m, const LinkModel& lm) {
    if (!m.super_common) w.col(0).setZero();
    if (!m.sat_common) w.col(1).setZero();
    if (!m.bs_common) p.col(0).setZero();
    if (!lm.satellite) w.setZero();
    if (!lm.cellular) p.setZero();
  }
};

/// Common-rate portions in bits/s/Hz.
struct RateAllocation {
  Eigen::VectorXd c_spc;  // N_s
  Eigen::VectorXd c_sc;   // N_s
  Eigen::VectorXd c_bs;   // K_t

  RateAllocation() = default;
  RateAllocation(int n_feeds, int n_cus)
      : c_spc(Eigen::VectorXd::Zero(n_feeds)), c_sc(Eigen::VectorXd::Zero(n_feeds)),
        c_bs(Eigen::VectorXd::Zero(n_cus)) {}
};

struct SuSinr {
  double g = 1.0;
  double spc = 0.0, sc = 0.0, priv = 0.0;
};

struct CuSinr {
  double l = 1.0;
  double spc = 0.0, common = 0.0, priv = 0.0;
};

struct SinrTable {
  std::vector<SuSinr> su;
  std::vector<CuSinr> cu;
};

/// Satellite precoder columns whose error leaks into SU k's effective noise
/// and whose private streams interfere with it. Column indices are into W.
inline std::vector<int> su_visible_private(const LinkModel& lm, int n_feeds, int own_beam) {
  std::vector<int> cols;
  if (!lm.inter_beam) return {2 + own_beam};
  for (int i = 0; i < n_feeds; ++i) cols.push_back(2 + i);
  return cols;
}

inline std::vector<int> su_error_columns(const LinkModel& lm, int n_feeds, int own_beam) {
  if (!lm.inter_beam) return {2 + own_beam};
  std::vector<int> cols;
  for (int i = 0; i < n_feeds + 2; ++i) cols.push_back(i);
  return cols;
}

inline std::vector<int> cu_error_columns(const LinkModel& lm, int n_feeds) {
  std::vector<int> cols;
  if (!lm.inter_network || !lm.satellite) return cols;
  for (int i = 0; i < n_feeds + 2; ++i) cols.push_back(i);
  return cols;
}

namespace detail {

inline double cols_energy(const CMat& w, const std::vector<int>& cols) {
  double e = 0.0;
  for (int c : cols) e += w.col(c).squaredNorm();
  return e;
}

}  // namespace detail

/// Effective noise-plus-interference g seen by SU k after removing the
/// common streams: sum of visible private powers, GMI error term and noise.
inline double effective_noise_g(int k, const ChannelRealization& ch, const PrecoderSet& pr,
                                const LinkModel& lm = {}, bool true_channel = false) {
  const CMat& f = true_channel ? ch.f_true : ch.f_hat;
  const int beam = ch.su_beam[static_cast<std::size_t>(k)];
  double g = lm.noise_sat;
  for (int c : su_visible_private(lm, ch.n_feeds(), beam)) g += std::norm(f.col(k).dot(pr.w.col(c)));
  if (!true_channel) g += ch.csit_error_var * detail::cols_energy(pr.w, su_error_columns(lm, ch.n_feeds(), beam));
  return g;
}

/// Effective noise-plus-interference l seen by CU k after removing its
/// common streams.
inline double effective_noise_l(int k, const ChannelRealization& ch, const PrecoderSet& pr,
                                const LinkModel& lm = {}, bool true_channel = false) {
  const CMat& z = true_channel ? ch.z_true : ch.z_hat;
  double l = lm.noise_cell;
  for (int j = 0; j < ch.n_cus(); ++j) l += std::norm(ch.h.col(k).dot(pr.p.col(1 + j)));
  if (lm.inter_network && lm.satellite) {
    l += std::norm(z.col(k).dot(pr.w.col(1)));
    for (int i = 0; i < ch.n_feeds(); ++i) l += std::norm(z.col(k).dot(pr.w.col(2 + i)));
    if (!true_channel) l += ch.csit_error_var * detail::cols_energy(pr.w, cu_error_columns(lm, ch.n_feeds()));
  }
  return l;
}

/// Every SINR each user needs. Eigen's dot() conjugates its left operand,
/// so f.dot(w) is f^H w.
inline SinrTable sinr_all(const ChannelRealization& ch, const PrecoderSet& pr, const LinkModel& lm = {},
                          bool true_channel = false) {
  SinrTable t;
  const CMat& f = true_channel ? ch.f_true : ch.f_hat;
  const CMat& z = true_channel ? ch.z_true : ch.z_hat;
  if (lm.satellite) {
    for (int k = 0; k < ch.n_sus(); ++k) {
      SuSinr s;
      const int beam = ch.su_beam[static_cast<std::size_t>(k)];
      s.g = effective_noise_g(k, ch, pr, lm, true_channel);
      const double sc = std::norm(f.col(k).dot(pr.w.col(1)));
      const double own = std::norm(f.col(k).dot(pr.w.col(2 + beam)));
      s.spc = std::norm(f.col(k).dot(pr.w.col(0))) / (sc + s.g);
      s.sc = sc / s.g;
      const double rest = s.g - own;
      if (!(rest > 0.0) || rest < lm.noise_sat * (1.0 - 1e-9) - 1e-12 * s.g)
        throw std::logic_error("inconsistent effective noise for SU " + std::to_string(k));
      s.priv = own / rest;
      t.su.push_back(s);
    }
  }
  if (lm.cellular) {
    for (int k = 0; k < ch.n_cus(); ++k) {
      CuSinr c;
      c.l = effective_noise_l(k, ch, pr, lm, true_channel);
      const double pc = std::norm(ch.h.col(k).dot(pr.p.col(0)));
      const double own = std::norm(ch.h.col(k).dot(pr.p.col(1 + k)));
      c.spc = (lm.inter_network && lm.satellite) ? std::norm(z.col(k).dot(pr.w.col(0))) / (pc + c.l) : 0.0;
      c.common = pc / c.l;
      const double rest = c.l - own;
      if (!(rest > 0.0) || rest < lm.noise_cell * (1.0 - 1e-9) - 1e-12 * c.l)
        throw std::logic_error("inconsistent effective noise for CU " + std::to_string(k));
      c.priv = own / rest;
      t.cu.push_back(c);
    }
  }
  return t;
}

struct RateReport {
  // per-user rates in bits/s/Hz (already multiplied by the rate scale)
  std::vector<SuSinr> su_sinr;
  std::vector<CuSinr> cu_sinr;
  Eigen::VectorXd su_rate_spc, su_rate_sc, su_rate_priv;
  Eigen::VectorXd cu_rate_spc, cu_rate_common, cu_rate_priv;
  double r_spc = 0.0;  // min over everyone that decodes it
  double r_sc = 0.0;
  double r_c = 0.0;
  Eigen::VectorXd beam_total;  // N_s (empty if no satellite)
  Eigen::VectorXd cu_total;    // K_t (empty if no cellular)
  double mmf = 0.0;

  // audit margins; positive numbers are violations
  double rate_violation = 0.0;
  double power_violation = 0.0;  // relative to the budget
  double audit_violation() const { return std::max(rate_violation, power_violation); }
};

inline double log2p1(double x) { return std::log2(1.0 + std::max(0.0, x)); }

/// Min-rate aggregation and per-beam / per-CU totals, plus the constraint
/// audit of the allocation against the achievable common rates.
inline RateReport aggregate(const SinrTable& t, const RateAllocation& alloc, const ChannelRealization& ch,
                            const StreamMask& mask, const LinkModel& lm = {}) {
  RateReport r;
  r.su_sinr = t.su;
  r.cu_sinr = t.cu;
  const auto nsu = static_cast<Eigen::Index>(t.su.size());
  const auto ncu = static_cast<Eigen::Index>(t.cu.size());
  r.su_rate_spc.resize(nsu);
  r.su_rate_sc.resize(nsu);
  r.su_rate_priv.resize(nsu);
  for (Eigen::Index k = 0; k < nsu; ++k) {
    const auto& s = t.su[static_cast<std::size_t>(k)];
    r.su_rate_spc(k) = mask.super_common ? lm.rate_scale_sat * log2p1(s.spc) : 0.0;
    r.su_rate_sc(k) = mask.sat_common ? lm.rate_scale_sat * log2p1(s.sc) : 0.0;
    r.su_rate_priv(k) = lm.rate_scale_sat * log2p1(s.priv);
  }
  r.cu_rate_spc.resize(ncu);
  r.cu_rate_common.resize(ncu);
  r.cu_rate_priv.resize(ncu);
  for (Eigen::Index k = 0; k < ncu; ++k) {
    const auto& c = t.cu[static_cast<std::size_t>(k)];
    // The super-common stream is sent in the satellite band, so CUs decode it
    // at the satellite rate scale (identical under full reuse).
    r.cu_rate_spc(k) = mask.super_common ? lm.rate_scale_sat * log2p1(c.spc) : 0.0;
    r.cu_rate_common(k) = mask.bs_common ? lm.rate_scale_cell * log2p1(c.common) : 0.0;
    r.cu_rate_priv(k) = lm.rate_scale_cell * log2p1(c.priv);
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto min_or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };
  double spc = inf, sc = inf, cc = inf;
  if (nsu) {
    spc = std::min(spc, r.su_rate_spc.minCoeff());
    sc = r.su_rate_sc.minCoeff();
  }
  if (ncu) {
    spc = std::min(spc, r.cu_rate_spc.minCoeff());
    cc = r.cu_rate_common.minCoeff();
  }
  r.r_spc = min_or_zero(spc);
  r.r_sc = min_or_zero(sc);
  r.r_c = min_or_zero(cc);

  double mmf = inf;
  if (lm.satellite) {
    r.beam_total.resize(ch.n_feeds());
    for (int n = 0; n < ch.n_feeds(); ++n) {
      double pmin = inf;
      for (int k = 0; k < ch.n_sus(); ++k)
        if (ch.su_beam[static_cast<std::size_t>(k)] == n) pmin = std::min(pmin, r.su_rate_priv(k));
      r.beam_total(n) = alloc.c_spc(n) + alloc.c_sc(n) + min_or_zero(pmin);
      mmf = std::min(mmf, r.beam_total(n));
    }
  }
  if (lm.cellular) {
    r.cu_total.resize(ncu);
    for (Eigen::Index k = 0; k < ncu; ++k) {
      r.cu_total(k) = alloc.c_bs(k) + r.cu_rate_priv(k);
      mmf = std::min(mmf, r.cu_total(k));
    }
  }
  r.mmf = min_or_zero(mmf);

  double v = 0.0;
  auto neg = [&v](const Eigen::VectorXd& x) {
    if (x.size()) v = std::max(v, -x.minCoeff());
  };
  neg(alloc.c_spc);
  neg(alloc.c_sc);
  neg(alloc.c_bs);
  v = std::max(v, alloc.c_spc.sum() - r.r_spc);
  v = std::max(v, alloc.c_sc.sum() - r.r_sc);
  v = std::max(v, alloc.c_bs.sum() - r.r_c);
  r.rate_violation = v;
  return r;
}

/// Largest relative excess over the per-feed satellite budget and the BS
/// sum-power budget (0 when both hold).
inline double power_violation(const PrecoderSet& pr, const ScenarioConfig& cfg) {
  double v = 0.0;
  const double feed_cap = cfg.p_sat_watt / cfg.n_sat_feeds;
  for (Eigen::Index n = 0; n < pr.w.rows(); ++n) {
    const double p = pr.w.row(n).squaredNorm();
    v = std::max(v, feed_cap > 0.0 ? (p - feed_cap) / feed_cap : p);
  }
  const double bs = pr.p.squaredNorm();
  v = std::max(v, cfg.p_bs_watt > 0.0 ? (bs - cfg.p_bs_watt) / cfg.p_bs_watt : bs);
  return std::max(v, 0.0);
}

/// Full evaluation: SINRs from the estimates, aggregation and audit.
inline RateReport evaluate(const ChannelRealization& ch, const PrecoderSet& pr, const RateAllocation& alloc,
                           const ScenarioConfig& cfg, const StreamMask& mask, const LinkModel& lm = {}) {
  auto r = aggregate(sinr_all(ch, pr, lm), alloc, ch, mask, lm);
  r.power_violation = power_violation(pr, cfg);
  return r;
}

/// Flat (name, value) record of a report for CSV output.
inline std::vector<std::pair<std::string, double>> flatten(const RateReport& r) {
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index k = 0; k < r.su_rate_priv.size(); ++k) {
    const std::string p = "su" + std::to_string(k) + "_";
    out.emplace_back(p + "spc", r.su_rate_spc(k));
    out.emplace_back(p + "sc", r.su_rate_sc(k));
    out.emplace_back(p + "private", r.su_rate_priv(k));
  }
  for (Eigen::Index k = 0; k < r.cu_rate_priv.size(); ++k) {
    const std::string p = "cu" + std::to_string(k) + "_";
    out.emplace_back(p + "spc", r.cu_rate_spc(k));
    out.emplace_back(p + "common", r.cu_rate_common(k));
    out.emplace_back(p + "private", r.cu_rate_priv(k));
  }
  for (Eigen::Index n = 0; n < r.beam_total.size(); ++n) out.emplace_back("beam" + std::to_string(n) + "_total", r.beam_total(n));
  for (Eigen::Index k = 0; k < r.cu_total.size(); ++k) out.emplace_back("cu" + std::to_string(k) + "_total", r.cu_total(k));
  out.emplace_back("r_spc", r.r_spc);
  out.emplace_back("r_sc", r.r_sc);
  out.emplace_back("r_c", r.r_c);
  out.emplace_back("mmf", r.mmf);
  out.emplace_back("audit_violation", r.audit_violation());
  return out;
}

}  // namespace istn
