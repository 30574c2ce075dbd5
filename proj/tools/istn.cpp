// Command-line front end: solve one instance, run a sweep, summarize results.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "istn/harness.hpp"

namespace {

using namespace istn;

std::string scheme_choices() {
  std::string s;
  for (auto id : kAllSchemes) s += (s.empty() ? "" : ", ") + std::string(label(id));
  return s;
}

struct SolveArgs {
  std::string config;
  std::string scheme = "sRSMA-ISTN";
  int trial = 0;
  std::optional<double> altitude_km, pt_dbm, sigma_e2;
  std::string trace, dump;
};

int run_solve(const SolveArgs& a) {
  ScenarioConfig cfg = a.config.empty() ? ScenarioConfig{} : load_scenario(a.config);
  if (a.altitude_km) cfg.sat_altitude_m = *a.altitude_km * 1e3;
  if (a.pt_dbm) cfg.p_bs_watt = dbm_to_watt(*a.pt_dbm);
  if (a.sigma_e2) cfg.csit_error_var = *a.sigma_e2;
  cfg.validate();
  const SchemeId id = parse_scheme(a.scheme);
  const auto trial = static_cast<std::uint64_t>(a.trial);
  const auto ch = build_channel(cfg, build_geometry(cfg, trial), trial);
  if (!a.dump.empty()) {
    std::ofstream os(a.dump);
    dump_channel(ch, os);
  }

  const SchemeResult r = solve_scheme(id, ch, cfg);
  std::printf("scheme %s\n", std::string(label(id)).c_str());
  std::printf("h_sat_km %g\np_t_dbm %g\nsigma_e2 %g\ntrial %d\n", cfg.sat_altitude_m / 1e3, watt_to_dbm(cfg.p_bs_watt),
              cfg.csit_error_var, a.trial);
  std::printf("mmf %.6f\nq_final %.6f\niterations %d\nstatus %s\nclean %d\n", r.mmf, r.q_final, r.iterations,
              r.status.c_str(), r.clean ? 1 : 0);
  if (!std::isnan(r.beta)) std::printf("beta %.2f\n", r.beta);
  std::printf("spc_fraction %.6f\n", r.spc_fraction);
  const char* prefixes[] = {"", "satellite.", "cellular."};
  for (std::size_t i = 0; i < r.parts.size(); ++i) {
    const char* pre = r.parts.size() == 1 ? prefixes[0] : prefixes[i + 1];
    for (const auto& [name, v] : flatten(r.parts[i].report)) std::printf("%s%s %.6f\n", pre, name.c_str(), v);
  }
  if (!a.trace.empty()) {
    std::ofstream os(a.trace);
    for (std::size_t i = 0; i < r.parts.size(); ++i) write_trace(r.parts[i], os);
  }
  return r.clean ? 0 : 1;
}

struct SweepArgs {
  std::string plan, out;
  std::optional<int> trials, threads;
  bool quiet = false;
};

int run_sweep(const SweepArgs& a) {
  ExperimentPlan plan = load_plan(a.plan);
  if (!a.out.empty()) plan.output = a.out;
  if (a.trials) plan.n_trials = *a.trials;
  if (a.threads) plan.threads = *a.threads;
  plan.validate();
  ProgressFn progress;
  if (!a.quiet)
    progress = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu trials", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    };
  const ResultTable t = run_plan(plan, progress);
  std::ofstream os(plan.output);
  if (!os) throw std::runtime_error("cannot write " + plan.output);
  write_csv(t, os);
  const auto bad = std::count_if(t.rows.begin(), t.rows.end(), [](const ResultRow& r) { return !r.clean && !r.aggregate; });
  if (bad) std::fprintf(stderr, "%ld unclean trial rows\n", static_cast<long>(bad));
  return t.any_unclean() ? 1 : 0;
}

struct ReportArgs {
  std::string in, out;
};

int run_report(const ReportArgs& a) {
  std::ifstream is(a.in);
  if (!is) throw std::runtime_error("cannot open " + a.in);
  ResultTable t;
  try {
    t = read_csv(is);
  } catch (const CsvError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  const Summary s = summarize(t);
  if (a.out.empty()) {
    write_summary(s, std::cout);
  } else {
    std::ofstream os(a.out);
    write_summary(s, os);
  }
  return t.any_unclean() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-min fair precoding for a satellite-terrestrial network sharing one band"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve one scenario with one scheme and print the rate report");
  solve->add_option("--config", sa.config, "scenario JSON file");
  solve->add_option("--scheme", sa.scheme, "one of: " + scheme_choices())->capture_default_str();
  solve->add_option("--trial", sa.trial, "trial index (selects the random draws)")->capture_default_str();
  solve->add_option("--altitude-km", sa.altitude_km, "override satellite altitude");
  solve->add_option("--pt-dbm", sa.pt_dbm, "override BS power budget");
  solve->add_option("--sigma-e2", sa.sigma_e2, "override CSIT error variance");
  solve->add_option("--trace", sa.trace, "write the SCA q trace as CSV");
  solve->add_option("--dump-channel", sa.dump, "write the channel realization");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "run an experiment plan and write a results CSV");
  sweep->add_option("--plan", wa.plan, "plan JSON file")->required();
  sweep->add_option("--out", wa.out, "output CSV (overrides the plan)");
  sweep->add_option("--trials", wa.trials, "override the trial count");
  sweep->add_option("--threads", wa.threads, "worker threads, 0 for all cores");
  sweep->add_flag("--quiet", wa.quiet, "no progress output");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "summarize a results CSV");
  report->add_option("--in", ra.in, "results CSV")->required();
  report->add_option("--out", ra.out, "summary file (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return run_solve(sa);
    if (*sweep) return run_sweep(wa);
    if (*report) return run_report(ra);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
