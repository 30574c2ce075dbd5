#pragma once

// The seven transmission schemes, expressed as stream masks and spectrum
// models over the one SCA optimizer.
//
// Full-reuse (ISTN) schemes solve a single joint problem. The OMA schemes
// split the band, so the satellite and cellular problems decouple and are
// solved separately; their MMF is the smaller of the two sides.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "istn/sca.hpp"

namespace istn {

enum class SchemeId { srsma_istn, rsma_istn, sdma_istn, adaptive_rsma_oma, rsma_oma, sdma_oma, four_color_oma };

inline constexpr std::array<SchemeId, 7> kAllSchemes = {
    SchemeId::srsma_istn, SchemeId::rsma_istn, SchemeId::sdma_istn,     SchemeId::adaptive_rsma_oma,
    SchemeId::rsma_oma,   SchemeId::sdma_oma,  SchemeId::four_color_oma};

inline std::string_view label(SchemeId id) {
  switch (id) {
    case SchemeId::srsma_istn: return "sRSMA-ISTN";
    case SchemeId::rsma_istn: return "RSMA-ISTN";
    case SchemeId::sdma_istn: return "SDMA-ISTN";
    case SchemeId::adaptive_rsma_oma: return "Adaptive RSMA-OMA";
    case SchemeId::rsma_oma: return "RSMA-OMA";
    case SchemeId::sdma_oma: return "SDMA-OMA";
    case SchemeId::four_color_oma: return "4-Color-OMA";
  }
  return "?";
}

inline SchemeId parse_scheme(std::string_view s) {
  for (auto id : kAllSchemes)
    if (label(id) == s) return id;
  std::string msg = "unknown scheme '" + std::string(s) + "'; expected one of:";
  for (auto id : kAllSchemes) msg += " '" + std::string(label(id)) + "'";
  throw std::invalid_argument(msg);
}

enum class SpectrumModel { full_reuse, split, four_color };

inline constexpr double kFixedSplitBeta = 0.5;

// Recorded in result metadata: which color the cellular network occupies.
inline constexpr std::string_view kFourColorLayout = "beams 1-3 on colors 1-3, cellular network on color 4";

struct SchemeSpec {
  SchemeId id = SchemeId::srsma_istn;
  StreamMask mask;  // the cellular flag is reused for the cellular side of OMA
  SpectrumModel spectrum = SpectrumModel::full_reuse;
  bool adaptive_beta = false;
  double beta = kFixedSplitBeta;  // satellite share of the band (split only)
};

inline SchemeSpec scheme_spec(SchemeId id) {
  SchemeSpec s;
  s.id = id;
  switch (id) {
    case SchemeId::srsma_istn: break;
    case SchemeId::rsma_istn: s.mask = {false, true, true}; break;
    case SchemeId::sdma_istn: s.mask = {false, false, false}; break;
    case SchemeId::adaptive_rsma_oma:
      s.mask = {false, true, true};
      s.spectrum = SpectrumModel::split;
      s.adaptive_beta = true;
      break;
    case SchemeId::rsma_oma:
      s.mask = {false, true, true};
      s.spectrum = SpectrumModel::split;
      break;
    case SchemeId::sdma_oma:
      s.mask = {false, false, false};
      s.spectrum = SpectrumModel::split;
      break;
    case SchemeId::four_color_oma:
      s.mask = {false, false, false};
      s.spectrum = SpectrumModel::four_color;
      break;
  }
  return s;
}

inline bool is_istn(SchemeId id) {
  return id == SchemeId::srsma_istn || id == SchemeId::rsma_istn || id == SchemeId::sdma_istn;
}

/// One optimization problem of a scheme: which streams exist and what the
/// receivers see.
struct SubNetwork {
  StreamMask mask;
  LinkModel lm;
};

/// Rate law of a sub-band holding fraction beta of the band with the
/// transmit power unchanged: noise shrinks with the bandwidth.
inline double split_rate(double sinr_full_band, double beta) { return beta * std::log2(1.0 + sinr_full_band / beta); }

inline void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("band split beta must lie in (0, 1)");
}

/// Satellite-side and cellular-side problems of a band split with satellite
/// share beta.
inline std::array<SubNetwork, 2> split_networks(const StreamMask& mask, double beta) {
  check_beta(beta);
  SubNetwork sat, cell;
  sat.mask = {false, mask.sat_common, false};
  sat.lm.cellular = false;
  sat.lm.inter_network = false;
  sat.lm.noise_sat = beta;
  sat.lm.rate_scale_sat = beta;
  cell.mask = {false, false, mask.bs_common};
  cell.lm.satellite = false;
  cell.lm.inter_network = false;
  cell.lm.noise_cell = 1.0 - beta;
  cell.lm.rate_scale_cell = 1.0 - beta;
  return {sat, cell};
}

/// The optimization problem(s) a scheme solves. ISTN schemes yield one;
/// the OMA schemes yield the satellite side then the cellular side.
inline std::vector<SubNetwork> apply_scheme(const SchemeSpec& spec, double beta = std::numeric_limits<double>::quiet_NaN()) {
  switch (spec.spectrum) {
    case SpectrumModel::full_reuse: return {SubNetwork{spec.mask, LinkModel{}}};
    case SpectrumModel::split: {
      auto nets = split_networks(spec.mask, std::isnan(beta) ? spec.beta : beta);
      return {nets[0], nets[1]};
    }
    case SpectrumModel::four_color: {
      SubNetwork sat, cell;
      sat.mask = {false, false, false};
      sat.lm = {true, false, false, false, 0.25, 1.0, 0.25, 1.0};
      cell.mask = {false, false, false};
      cell.lm = {false, true, false, false, 1.0, 0.25, 1.0, 0.25};
      return {sat, cell};
    }
  }
  return {};
}

/// Outcome of one scheme on one channel realization.
struct SchemeResult {
  SchemeId id = SchemeId::srsma_istn;
  double mmf = 0.0;
  double q_final = 0.0;
  int iterations = 0;
  double audit_violation = 0.0;
  std::string status = "ok";
  bool clean = true;
  double beta = std::numeric_limits<double>::quiet_NaN();  // OMA split only
  double spc_fraction = 0.0;  // ||w_spc||^2 N_s / P_s, i.e. relative to one feed's budget
  PrecoderSet prec;           // for OMA the satellite W and cellular P are merged
  std::vector<ScaResult> parts;
};

namespace detail {

inline SchemeResult from_single(SchemeId id, ScaResult r, const ScenarioConfig& cfg) {
  SchemeResult s;
  s.id = id;
  s.mmf = r.mmf();
  s.q_final = r.q_final;
  s.iterations = r.iterations;
  s.audit_violation = r.report.audit_violation();
  s.status = r.status;
  s.clean = r.clean();
  s.prec = r.final_iterate.prec;
  s.spc_fraction = s.prec.w_spc().squaredNorm() * cfg.n_sat_feeds / cfg.p_sat_watt;
  s.parts.push_back(std::move(r));
  return s;
}

inline SchemeResult from_pair(SchemeId id, ScaResult sat, ScaResult cell) {
  SchemeResult s;
  s.id = id;
  s.mmf = std::min(sat.mmf(), cell.mmf());
  s.q_final = std::min(sat.q_final, cell.q_final);
  s.iterations = sat.iterations + cell.iterations;
  s.audit_violation = std::max(sat.report.audit_violation(), cell.report.audit_violation());
  s.status = sat.status != "ok" ? "satellite:" + sat.status : cell.status != "ok" ? "cellular:" + cell.status : "ok";
  s.clean = sat.clean() && cell.clean();
  s.prec = sat.final_iterate.prec;
  s.prec.p = cell.final_iterate.prec.p;
  s.parts.push_back(std::move(sat));
  s.parts.push_back(std::move(cell));
  return s;
}

// Start from a solution of a neighbouring problem when one is given.
inline ScaResult solve_from(const ChannelRealization& ch, const ScenarioConfig& cfg, const SubNetwork& net,
                            const ScaOptions& opts, const PrecoderSet* seed) {
  if (!seed) return sca_solve(ch, cfg, net.mask, net.lm, opts);
  const ScaIterate start = iterate_from_precoders(ch, *seed, net.mask, net.lm, opts.aux_floor);
  return sca_solve(ch, cfg, net.mask, net.lm, opts, &start);
}

}  // namespace detail

/// Band split at a given beta: two independent problems.
inline SchemeResult solve_split(SchemeId id, const StreamMask& mask, double beta, const ChannelRealization& ch,
                                const ScenarioConfig& cfg, const ScaOptions& opts = {}) {
  const auto nets = split_networks(mask, beta);
  auto r = detail::from_pair(id, sca_solve(ch, cfg, nets[0].mask, nets[0].lm, opts),
                             sca_solve(ch, cfg, nets[1].mask, nets[1].lm, opts));
  r.beta = beta;
  return r;
}

inline SchemeResult solve_four_color(const ChannelRealization& ch, const ScenarioConfig& cfg, const ScaOptions& opts = {}) {
  const auto nets = apply_scheme(scheme_spec(SchemeId::four_color_oma));
  return detail::from_pair(SchemeId::four_color_oma, sca_solve(ch, cfg, nets[0].mask, nets[0].lm, opts),
                           sca_solve(ch, cfg, nets[1].mask, nets[1].lm, opts));
}

/// Band-split search on integer keys (beta in hundredths). eval(key)
/// returns {satellite MMF at beta, cellular MMF at 1 - beta}. The
/// satellite side only gains from a larger share and the cellular side
/// only loses, so on each grid (0.05 steps over [0.05, 0.95], then 0.01
/// steps around the winner) the best split sits where the two curves cross
/// and is found by bisection. eval is called once per distinct key.
struct SplitEval {
  double sat = 0.0, cell = 0.0;
  double mmf() const { return std::min(sat, cell); }
};

template <class Eval>
int split_grid_search(Eval&& eval_raw) {
  std::map<int, SplitEval> seen;
  auto eval = [&](int key) {
    auto it = seen.find(key);
    if (it == seen.end()) it = seen.emplace(key, eval_raw(key)).first;
    return it->second;
  };
  auto search = [&](int lo, int hi, int step) {
    int a = lo, b = hi;
    SplitEval ea = eval(a), eb = eval(b);
    if (ea.sat >= ea.cell) return ea.mmf() >= eb.mmf() ? a : b;  // satellite never the bottleneck
    if (eb.sat <= eb.cell) return b;                             // satellite always the bottleneck
    while (b - a > step) {
      const int mid = a + ((b - a) / step / 2) * step;
      const SplitEval em = eval(mid);
      if (em.sat <= em.cell)
        a = mid, ea = em;
      else
        b = mid, eb = em;
    }
    return ea.mmf() >= eb.mmf() ? a : b;
  };
  int best = search(5, 95, 5);
  best = search(std::max(5, best - 4), std::min(95, best + 4), 1);
  // A local optimizer need not be exactly monotone in beta; keep the best
  // point seen anywhere (ties go to the bisection result).
  for (const auto& [k, e] : seen)
    if (e.mmf() > seen.at(best).mmf()) best = k;
  return best;
}

struct BetaSearch {
  double beta = 0.5;
  double mmf = 0.0;
  double sat_mmf = 0.0;   // satellite side at beta
  double cell_mmf = 0.0;  // cellular side at 1 - beta
  int evaluations = 0;
  SchemeResult result;
};

/// Best band split with RSMA in both sub-networks. Each side is solved once
/// per beta, warm-started from the nearest beta already solved.
inline BetaSearch adaptive_beta_search(const ChannelRealization& ch, const ScenarioConfig& cfg,
                                       const ScaOptions& opts = {}) {
  const StreamMask mask = scheme_spec(SchemeId::adaptive_rsma_oma).mask;
  std::map<int, ScaResult> sat_cache, cell_cache;

  auto nearest_seed = [](const std::map<int, ScaResult>& cache, int key) -> const PrecoderSet* {
    const PrecoderSet* best = nullptr;
    int dist = 1 << 30;
    for (const auto& [k, r] : cache)
      if (std::abs(k - key) < dist) dist = std::abs(k - key), best = &r.final_iterate.prec;
    return best;
  };
  auto side = [&](std::map<int, ScaResult>& cache, int key, const SubNetwork& net) -> const ScaResult& {
    auto r = detail::solve_from(ch, cfg, net, opts, nearest_seed(cache, key));
    return cache.emplace(key, std::move(r)).first->second;
  };
  const int best = split_grid_search([&](int key) {
    const auto nets = split_networks(mask, key / 100.0);
    const double s = side(sat_cache, key, nets[0]).mmf();
    const double c = side(cell_cache, key, nets[1]).mmf();
    return SplitEval{s, c};
  });

  BetaSearch out;
  out.beta = best / 100.0;
  out.sat_mmf = sat_cache.at(best).mmf();
  out.cell_mmf = cell_cache.at(best).mmf();
  out.mmf = std::min(out.sat_mmf, out.cell_mmf);
  out.evaluations = static_cast<int>(sat_cache.size());
  out.result = detail::from_pair(SchemeId::adaptive_rsma_oma, sat_cache.at(best), cell_cache.at(best));
  out.result.beta = out.beta;
  return out;
}

/// SDMA, RSMA and sRSMA under full reuse on one realization. RSMA and
/// sRSMA each keep the better of a cold start and a start from the
/// previous scheme's solution (plus a faint column for the new stream);
/// the latter makes MMF(sRSMA) >= MMF(RSMA) >= MMF(SDMA) hold per trial.
struct IstnChain {
  SchemeResult sdma, rsma, srsma;
  const SchemeResult& get(SchemeId id) const {
    return id == SchemeId::sdma_istn ? sdma : id == SchemeId::rsma_istn ? rsma : srsma;
  }
};

inline IstnChain solve_istn_chain(const ChannelRealization& ch, const ScenarioConfig& cfg, const ScaOptions& opts = {},
                                  SchemeId upto = SchemeId::srsma_istn) {
  IstnChain c;
  const auto step = [&](SchemeId id, const SchemeResult& prev) {
    const StreamMask mask = scheme_spec(id).mask;
    auto cold = sca_solve(ch, cfg, mask, {}, opts);
    const ScaIterate ws = warm_start(prev.prec, ch, cfg, mask, {}, opts);
    auto warm = sca_solve(ch, cfg, mask, {}, opts, &ws);
    // prefer clean results, then the higher audited MMF
    const bool take_warm = warm.clean() != cold.clean() ? warm.clean() : warm.mmf() >= cold.mmf();
    return detail::from_single(id, take_warm ? std::move(warm) : std::move(cold), cfg);
  };
  c.sdma = detail::from_single(SchemeId::sdma_istn, sca_solve(ch, cfg, scheme_spec(SchemeId::sdma_istn).mask, {}, opts), cfg);
  if (upto == SchemeId::sdma_istn) return c;
  c.rsma = step(SchemeId::rsma_istn, c.sdma);
  if (upto == SchemeId::rsma_istn) return c;
  c.srsma = step(SchemeId::srsma_istn, c.rsma);
  return c;
}

/// Any single scheme. ISTN schemes run the chain up to themselves so the
/// reported value matches what a sweep reports for the same realization.
inline SchemeResult solve_scheme(SchemeId id, const ChannelRealization& ch, const ScenarioConfig& cfg,
                                 const ScaOptions& opts = {}) {
  const SchemeSpec spec = scheme_spec(id);
  switch (spec.spectrum) {
    case SpectrumModel::full_reuse: return solve_istn_chain(ch, cfg, opts, id).get(id);
    case SpectrumModel::split:
      if (spec.adaptive_beta) return adaptive_beta_search(ch, cfg, opts).result;
      return solve_split(id, spec.mask, spec.beta, ch, cfg, opts);
    case SpectrumModel::four_color: return solve_four_color(ch, cfg, opts);
  }
  throw std::logic_error("unhandled spectrum model");
}

}  // namespace istn
