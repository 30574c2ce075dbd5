#pragma once

// Monte Carlo sweeps over altitude or BS power, with CSIT error levels.
//
// Every scheme at a sweep cell sees the same channel realization for a
// given trial index, and across cells too: geometry, fading and CSIT error
// draws come from per-trial streams that do not depend on the swept value.
// Work is spread over a pool of threads, but each (cell, trial) writes into
// its own slot, so the CSV is ordered by (cell, trial) regardless of timing.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "istn/schemes.hpp"
#include "istn/scenario.hpp"

namespace istn {

enum class SweepAxis { altitude_km, power_dbm };

inline std::string_view to_string(SweepAxis a) { return a == SweepAxis::altitude_km ? "altitude_km" : "power_dbm"; }

inline SweepAxis parse_axis(std::string_view s) {
  if (s == "altitude_km") return SweepAxis::altitude_km;
  if (s == "power_dbm") return SweepAxis::power_dbm;
  throw std::invalid_argument("sweep axis must be 'altitude_km' or 'power_dbm', got '" + std::string(s) + "'");
}

struct ExperimentPlan {
  ScenarioConfig base;
  SweepAxis axis = SweepAxis::altitude_km;
  std::vector<double> points{300, 500, 2000, 10000, 36000};
  std::vector<double> csit_error_levels{0.0};
  std::vector<SchemeId> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  int n_trials = 20;
  std::string output = "results.csv";
  int threads = 0;                // 0: one per hardware thread
  bool record_wall_time = false;  // wall time breaks byte-identical reruns
  ScaOptions sca;

  void validate() const {
    base.validate();
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    if (points.empty() || !std::is_sorted(points.begin(), points.end()))
      throw std::invalid_argument("sweep points must be nonempty and sorted");
    if (csit_error_levels.empty() || !std::is_sorted(csit_error_levels.begin(), csit_error_levels.end()))
      throw std::invalid_argument("CSIT error levels must be nonempty and sorted");
    for (double s : csit_error_levels)
      if (!(s >= 0.0)) throw std::invalid_argument("CSIT error variance must be >= 0");
    if (schemes.empty()) throw std::invalid_argument("plan has no schemes");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    sca.validate();
  }

  /// Scenario at one sweep point and CSIT error level.
  ScenarioConfig cell_config(double point, double sigma_e2) const {
    ScenarioConfig c = base;
    if (axis == SweepAxis::altitude_km)
      c.sat_altitude_m = point * 1e3;
    else
      c.p_bs_watt = dbm_to_watt(point);
    c.csit_error_var = sigma_e2;
    return c;
  }
};

// {
//   "scenario": { ...scenario keys... }   or   "scenario_file": "path",
//   "axis": "altitude_km" | "power_dbm",
//   "points": [...], "csit_error_levels": [...], "schemes": ["sRSMA-ISTN", ...],
//   "trials": 20, "output": "results.csv", "threads": 0, "record_wall_time": false
// }
inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  if (j.contains("scenario_file")) p.base = load_scenario(j.at("scenario_file").get<std::string>());
  if (j.contains("scenario")) p.base = scenario_from_json(j.at("scenario"), p.base);
  if (j.contains("axis")) p.axis = parse_axis(j.at("axis").get<std::string>());
  if (j.contains("points")) p.points = j.at("points").get<std::vector<double>>();
  if (j.contains("csit_error_levels")) p.csit_error_levels = j.at("csit_error_levels").get<std::vector<double>>();
  if (j.contains("schemes")) {
    p.schemes.clear();
    for (const auto& s : j.at("schemes")) p.schemes.push_back(parse_scheme(s.get<std::string>()));
  }
  if (j.contains("trials")) p.n_trials = j.at("trials").get<int>();
  if (j.contains("output")) p.output = j.at("output").get<std::string>();
  if (j.contains("threads")) p.threads = j.at("threads").get<int>();
  if (j.contains("record_wall_time")) p.record_wall_time = j.at("record_wall_time").get<bool>();
  p.validate();
  return p;
}

inline ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan file " + path);
  return plan_from_json(nlohmann::json::parse(in));
}

/// One CSV line: a trial of one scheme, or the mean over a cell's trials.
struct ResultRow {
  bool aggregate = false;
  std::string scheme;
  double h_sat_km = 0.0;
  double p_t_dbm = 0.0;
  double sigma_e2 = 0.0;
  int trial = -1;  // -1 on aggregate rows
  double mmf = 0.0;
  double q_final = 0.0;
  double iterations = 0.0;  // mean on aggregate rows
  double wall_time_s = std::numeric_limits<double>::quiet_NaN();
  double audit_violation_max = 0.0;
  double beta_star = std::numeric_limits<double>::quiet_NaN();
  double spc_fraction = 0.0;
  std::string status = "ok";
  bool clean = true;
};

struct ResultTable {
  SweepAxis axis = SweepAxis::altitude_km;
  std::vector<ResultRow> rows;

  bool any_unclean() const {
    return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.clean; });
  }
};

inline constexpr std::string_view kCsvVersion = "istn-results v1";
inline constexpr std::string_view kCsvColumns =
    "kind,scheme,h_sat_km,p_t_dbm,sigma_e2,trial,mmf,q_final,iterations,wall_time_s,audit_violation_max,beta_star,"
    "spc_fraction,status,clean";

namespace detail {

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline ResultRow row_from(const SchemeResult& r, const ScenarioConfig& cfg, int trial, double secs) {
  ResultRow row;
  row.scheme = std::string(label(r.id));
  row.h_sat_km = cfg.sat_altitude_m / 1e3;
  row.p_t_dbm = watt_to_dbm(cfg.p_bs_watt);
  row.sigma_e2 = cfg.csit_error_var;
  row.trial = trial;
  row.mmf = r.mmf;
  row.q_final = r.q_final;
  row.iterations = r.iterations;
  row.wall_time_s = secs;
  row.audit_violation_max = r.audit_violation;
  row.beta_star = r.beta;
  row.spc_fraction = r.spc_fraction;
  row.status = r.status;
  row.clean = r.clean && r.audit_violation <= 1e-5;
  return row;
}

inline ResultRow failed_row(SchemeId id, const ScenarioConfig& cfg, int trial, const std::string& what) {
  ResultRow row;
  row.scheme = std::string(label(id));
  row.h_sat_km = cfg.sat_altitude_m / 1e3;
  row.p_t_dbm = watt_to_dbm(cfg.p_bs_watt);
  row.sigma_e2 = cfg.csit_error_var;
  row.trial = trial;
  row.status = "error: " + what;
  row.clean = false;
  return row;
}

inline std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace detail

/// All schemes of a plan on one (cell, trial). Failures become unclean
/// rows rather than exceptions.
inline std::vector<ResultRow> run_trial(const ExperimentPlan& plan, const ScenarioConfig& cfg, int trial) {
  using clock = std::chrono::steady_clock;
  std::vector<ResultRow> rows;
  ChannelRealization ch;
  try {
    ch = build_channel(cfg, build_geometry(cfg, static_cast<std::uint64_t>(trial)), static_cast<std::uint64_t>(trial));
  } catch (const std::exception& e) {
    for (auto id : plan.schemes) rows.push_back(detail::failed_row(id, cfg, trial, e.what()));
    return rows;
  }

  // The full-reuse chain is computed once, as far as the plan needs it.
  std::optional<IstnChain> chain;
  double chain_secs = 0.0;
  // ISTN ids are declared sRSMA, RSMA, SDMA, so the deepest chain needed
  // is the smallest id present
  std::optional<SchemeId> upto;
  for (auto id : plan.schemes)
    if (is_istn(id) && (!upto || id < *upto)) upto = id;
  std::string chain_error;
  if (upto) {
    const auto t0 = clock::now();
    try {
      chain = solve_istn_chain(ch, cfg, plan.sca, *upto);
    } catch (const std::exception& e) {
      chain_error = e.what();
    }
    chain_secs = std::chrono::duration<double>(clock::now() - t0).count();
  }

  for (auto id : plan.schemes) {
    if (is_istn(id)) {
      if (!chain)
        rows.push_back(detail::failed_row(id, cfg, trial, chain_error));
      else
        rows.push_back(detail::row_from(chain->get(id), cfg, trial, chain_secs));
      continue;
    }
    const auto t0 = clock::now();
    try {
      auto r = solve_scheme(id, ch, cfg, plan.sca);
      rows.push_back(detail::row_from(r, cfg, trial, std::chrono::duration<double>(clock::now() - t0).count()));
    } catch (const std::exception& e) {
      rows.push_back(detail::failed_row(id, cfg, trial, e.what()));
    }
  }
  if (!plan.record_wall_time)
    for (auto& r : rows) r.wall_time_s = std::numeric_limits<double>::quiet_NaN();
  return rows;
}

/// Mean over the trial rows of one scheme in one cell.
inline ResultRow aggregate_rows(const std::vector<const ResultRow*>& trials) {
  ResultRow a;
  a.aggregate = true;
  if (trials.empty()) return a;
  const auto& f = *trials.front();
  a.scheme = f.scheme, a.h_sat_km = f.h_sat_km, a.p_t_dbm = f.p_t_dbm, a.sigma_e2 = f.sigma_e2;
  double wall = 0.0, beta = 0.0;
  int n_beta = 0;
  bool has_wall = true;
  for (const auto* r : trials) {
    a.mmf += r->mmf;
    a.q_final += r->q_final;
    a.iterations += r->iterations;
    a.audit_violation_max = std::max(a.audit_violation_max, r->audit_violation_max);
    a.spc_fraction += r->spc_fraction;
    if (std::isnan(r->wall_time_s))
      has_wall = false;
    else
      wall += r->wall_time_s;
    if (!std::isnan(r->beta_star)) beta += r->beta_star, ++n_beta;
    if (!r->clean) a.clean = false;
  }
  const double n = static_cast<double>(trials.size());
  a.mmf /= n, a.q_final /= n, a.iterations /= n, a.spc_fraction /= n;
  if (has_wall) a.wall_time_s = wall / n;
  if (n_beta) a.beta_star = beta / n_beta;
  a.status = a.clean ? "ok" : "unclean_trials";
  return a;
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline ResultTable run_plan(const ExperimentPlan& plan, const ProgressFn& progress = {}) {
  plan.validate();
  struct Job {
    std::size_t cell;
    ScenarioConfig cfg;
    int trial;
  };
  std::vector<Job> jobs;
  std::size_t n_cells = 0;
  for (double pt : plan.points)
    for (double s2 : plan.csit_error_levels) {
      const auto cfg = plan.cell_config(pt, s2);
      for (int t = 0; t < plan.n_trials; ++t) jobs.push_back({n_cells, cfg, t});
      ++n_cells;
    }

  std::vector<std::vector<ResultRow>> slots(jobs.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      slots[i] = run_trial(plan, jobs[i].cfg, jobs[i].trial);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(d, jobs.size());
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto n_threads = static_cast<std::size_t>(plan.threads > 0 ? static_cast<unsigned>(plan.threads) : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < std::min(n_threads, jobs.size()); ++k) pool.emplace_back(worker);
    worker();
  }

  ResultTable table;
  table.axis = plan.axis;
  for (std::size_t cell = 0, j = 0; cell < n_cells; ++cell) {
    const std::size_t begin = j;
    while (j < jobs.size() && jobs[j].cell == cell) {
      for (auto& r : slots[j]) table.rows.push_back(r);
      ++j;
    }
    for (auto id : plan.schemes) {
      std::vector<const ResultRow*> mine;
      for (std::size_t k = begin; k < j; ++k)
        for (const auto& r : slots[k])
          if (r.scheme == label(id)) mine.push_back(&r);
      table.rows.push_back(aggregate_rows(mine));
    }
  }
  return table;
}

inline void write_csv(const ResultTable& t, std::ostream& os) {
  os << "# " << kCsvVersion << "\n";
  os << "# axis: " << to_string(t.axis) << "\n";
  os << "# 4-Color-OMA layout: " << kFourColorLayout << "\n";
  os << kCsvColumns << "\n";
  for (const auto& r : t.rows) {
    os << (r.aggregate ? "mean" : "trial") << ',' << detail::csv_field(r.scheme) << ',' << detail::num(r.h_sat_km) << ','
       << detail::num(r.p_t_dbm) << ',' << detail::num(r.sigma_e2) << ',' << (r.aggregate ? "" : std::to_string(r.trial))
       << ',' << detail::num(r.mmf) << ',' << detail::num(r.q_final) << ',' << detail::num(r.iterations) << ','
       << detail::num(r.wall_time_s) << ',' << detail::num(r.audit_violation_max) << ',' << detail::num(r.beta_star)
       << ',' << detail::num(r.spc_fraction) << ',' << detail::csv_field(r.status) << ',' << (r.clean ? 1 : 0) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Reading results back

class CsvError : public std::runtime_error {
 public:
  explicit CsvError(const std::vector<std::string>& problems)
      : std::runtime_error(join(problems)), problems_(problems) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "malformed results file:";
    for (const auto& p : v) s += "\n  " + p;
    return s;
  }
  std::vector<std::string> problems_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"')
        cur += '"', ++i;
      else if (ch == '"')
        quoted = false;
      else
        cur += ch;
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline bool parse_num(const std::string& s, double& v, bool allow_empty) {
  if (s.empty()) {
    v = std::numeric_limits<double>::quiet_NaN();
    return allow_empty;
  }
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

/// Parses a results CSV. Every malformed line is collected and reported
/// together, with its 1-based line number.
inline ResultTable read_csv(std::istream& in) {
  ResultTable t;
  std::vector<std::string> problems;
  std::string line;
  int ln = 0;
  bool header = false, version = false;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == "# " + std::string(kCsvVersion)) version = true;
      if (line.rfind("# axis: ", 0) == 0) {
        try {
          t.axis = parse_axis(line.substr(8));
        } catch (const std::exception& e) {
          problems.push_back("line " + std::to_string(ln) + ": " + e.what());
        }
      }
      continue;
    }
    if (!header) {
      if (line != kCsvColumns) problems.push_back("line " + std::to_string(ln) + ": unexpected column header");
      header = true;
      continue;
    }
    const auto f = detail::split_csv_line(line);
    const std::string where = "line " + std::to_string(ln) + ": ";
    if (f.size() != 15) {
      problems.push_back(where + "expected 15 fields, found " + std::to_string(f.size()));
      continue;
    }
    ResultRow r;
    bool ok = true;
    std::string bad;
    auto need = [&](int idx, double& v, bool allow_empty, const char* name) {
      if (!detail::parse_num(f[static_cast<std::size_t>(idx)], v, allow_empty)) {
        ok = false;
        if (bad.empty()) bad = name;
      }
    };
    if (f[0] != "trial" && f[0] != "mean") ok = false, bad = "kind";
    r.aggregate = f[0] == "mean";
    r.scheme = f[1];
    double trial = 0.0;
    need(2, r.h_sat_km, false, "h_sat_km");
    need(3, r.p_t_dbm, false, "p_t_dbm");
    need(4, r.sigma_e2, false, "sigma_e2");
    need(5, trial, r.aggregate, "trial");
    need(6, r.mmf, false, "mmf");
    need(7, r.q_final, false, "q_final");
    need(8, r.iterations, false, "iterations");
    need(9, r.wall_time_s, true, "wall_time_s");
    need(10, r.audit_violation_max, false, "audit_violation_max");
    need(11, r.beta_star, true, "beta_star");
    need(12, r.spc_fraction, false, "spc_fraction");
    r.status = f[13];
    if (f[14] != "0" && f[14] != "1") ok = false, bad = bad.empty() ? "clean" : bad;
    r.clean = f[14] == "1";
    if (!ok) {
      problems.push_back(where + "bad value in column '" + bad + "'");
      continue;
    }
    r.trial = r.aggregate ? -1 : static_cast<int>(trial);
    t.rows.push_back(std::move(r));
  }
  if (header && !version) problems.insert(problems.begin(), "line 1: missing '# " + std::string(kCsvVersion) + "' line");
  if (!problems.empty()) throw CsvError(problems);
  return t;
}

/// Plot-ready summary line: one per (x, scheme, sigma_e2).
struct SummaryRow {
  double x = 0.0;
  std::string scheme;
  double sigma_e2 = 0.0;
  int n = 0;
  double mean_mmf = 0.0;
  double std_mmf = 0.0;
  double mean_spc_fraction = 0.0;
  int unclean = 0;
};

struct Summary {
  SweepAxis axis = SweepAxis::altitude_km;
  std::vector<SummaryRow> rows;
};

/// Mean and sample standard deviation of MMF over the trial rows, plus the
/// mean super-common power fraction. Aggregate rows in the input are
/// ignored; the statistics are recomputed from the trials.
inline Summary summarize(const ResultTable& t) {
  Summary s;
  s.axis = t.axis;
  using Key = std::tuple<double, double, std::string>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  std::map<std::string, int> scheme_rank;  // first-seen order
  for (const auto& r : t.rows) {
    if (r.aggregate) continue;
    scheme_rank.try_emplace(r.scheme, static_cast<int>(scheme_rank.size()));
    groups[Key{t.axis == SweepAxis::altitude_km ? r.h_sat_km : r.p_t_dbm, r.sigma_e2, r.scheme}].push_back(&r);
  }
  std::vector<Key> order;
  for (const auto& [k, v] : groups) order.push_back(k);
  std::sort(order.begin(), order.end(), [&](const Key& a, const Key& b) {
    return std::tuple(std::get<0>(a), std::get<1>(a), scheme_rank.at(std::get<2>(a))) <
           std::tuple(std::get<0>(b), std::get<1>(b), scheme_rank.at(std::get<2>(b)));
  });
  for (const auto& k : order) {
    const auto& rows = groups.at(k);
    SummaryRow out;
    out.x = std::get<0>(k);
    out.sigma_e2 = std::get<1>(k);
    out.scheme = std::get<2>(k);
    out.n = static_cast<int>(rows.size());
    for (const auto* r : rows) {
      out.mean_mmf += r->mmf;
      out.mean_spc_fraction += r->spc_fraction;
      if (!r->clean) ++out.unclean;
    }
    out.mean_mmf /= out.n;
    out.mean_spc_fraction /= out.n;
    if (out.n > 1) {
      double ss = 0.0;
      for (const auto* r : rows) ss += (r->mmf - out.mean_mmf) * (r->mmf - out.mean_mmf);
      out.std_mmf = std::sqrt(ss / (out.n - 1));
    }
    s.rows.push_back(std::move(out));
  }
  return s;
}

inline void write_summary(const Summary& s, std::ostream& os) {
  os << "# istn-summary v1\n";
  os << to_string(s.axis) << ",scheme,sigma_e2,n,mean_mmf,std_mmf,mean_spc_fraction,unclean\n";
  for (const auto& r : s.rows)
    os << detail::num(r.x) << ',' << detail::csv_field(r.scheme) << ',' << detail::num(r.sigma_e2) << ',' << r.n << ','
       << detail::num(r.mean_mmf) << ',' << detail::num(r.std_mmf) << ',' << detail::num(r.mean_spc_fraction) << ','
       << r.unclean << "\n";
}

}  // namespace istn
