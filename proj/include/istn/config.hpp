#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace istn {

inline constexpr double kSpeedOfLight = 299792458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Physical and system constants of one scenario. Defaults follow the
/// reference simulation setup (Ka band, three-beam satellite, 16-antenna BS).
struct ScenarioConfig {
  // satellite link
  double carrier_frequency_hz = 28e9;
  double bandwidth_hz = 500e6;
  double theta_3db_rad = deg_to_rad(0.4);
  double g_max_db = 52.0;
  double g_rx_db = 42.7;
  double rain_mu_db = -3.125;
  double rain_sigma_db = 1.591;
  double boltzmann = 1.380649e-23;
  double system_noise_temp_k = 517.0;
  int n_sat_feeds = 3;
  int users_per_beam = 2;
  double p_sat_watt = 50.0;
  double sat_altitude_m = 500e3;
  double csit_error_var = 0.0;

  // terrestrial network
  int n_bs_antennas = 16;
  int n_cus = 3;
  double p_bs_watt = 1.0;  // 30 dBm

  // placement
  double bs_offset_m = 1000.0;
  double cu_radius_m = 500.0;
  double cu_gain_backoff_db = 0.0;

  std::uint64_t rng_seed = 1;

  int n_sus() const { return users_per_beam * n_sat_feeds; }
  double wavelength_m() const { return kSpeedOfLight / carrier_frequency_hz; }
  double noise_power_w() const { return boltzmann * system_noise_temp_k * bandwidth_hz; }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid scenario: ") + what);
    };
    require(n_sat_feeds >= 1 && users_per_beam >= 1 && n_bs_antennas >= 1 && n_cus >= 1,
            "all counts must be >= 1");
    require(n_cus <= n_bs_antennas, "K_t must not exceed N_t");
    require(theta_3db_rad > 0.0, "theta_3dB must be positive");
    require(carrier_frequency_hz > 0.0 && bandwidth_hz > 0.0, "frequency and bandwidth must be positive");
    require(p_sat_watt >= 0.0 && p_bs_watt >= 0.0, "powers must be nonnegative");
    require(csit_error_var >= 0.0, "CSIT error variance must be nonnegative");
    require(rain_sigma_db >= 0.0, "rain deviation must be nonnegative");
    require(sat_altitude_m > 0.0, "altitude must be positive");
    require(boltzmann > 0.0 && system_noise_temp_k > 0.0, "noise constants must be positive");
    require(cu_radius_m >= 0.0 && bs_offset_m >= 0.0, "placement distances must be nonnegative");
  }
};

// Structured configuration layout. Every key is optional; missing keys keep
// the defaults above.
//
// {
//   "satellite": { "f_c_hz", "B_w_hz", "theta_3dB_deg", "G_max_dBi", "G_R_dBi",
//                  "rain": { "mu_dB", "sigma_dB" }, "N_s", "rho", "P_s_W",
//                  "h_sat_km", "T_sys_K", "kappa", "sigma_e2" },
//   "terrestrial": { "N_t", "K_t", "P_t_dBm" },
//   "geometry": { "bs_offset_m", "cu_radius_m", "cu_gain_backoff_dB" },
//   "seed": 1
// }
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig cfg = {}) {
  auto get = [](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) out = obj.at(key).get<std::remove_reference_t<decltype(out)>>();
  };
  if (j.contains("satellite")) {
    const auto& s = j.at("satellite");
    get(s, "f_c_hz", cfg.carrier_frequency_hz);
    get(s, "B_w_hz", cfg.bandwidth_hz);
    if (s.contains("theta_3dB_deg")) cfg.theta_3db_rad = deg_to_rad(s.at("theta_3dB_deg").get<double>());
    get(s, "G_max_dBi", cfg.g_max_db);
    get(s, "G_R_dBi", cfg.g_rx_db);
    if (s.contains("rain")) {
      get(s.at("rain"), "mu_dB", cfg.rain_mu_db);
      get(s.at("rain"), "sigma_dB", cfg.rain_sigma_db);
    }
    get(s, "N_s", cfg.n_sat_feeds);
    get(s, "rho", cfg.users_per_beam);
    get(s, "P_s_W", cfg.p_sat_watt);
    if (s.contains("h_sat_km")) cfg.sat_altitude_m = 1e3 * s.at("h_sat_km").get<double>();
    get(s, "T_sys_K", cfg.system_noise_temp_k);
    get(s, "kappa", cfg.boltzmann);
    get(s, "sigma_e2", cfg.csit_error_var);
  }
  if (j.contains("terrestrial")) {
    const auto& t = j.at("terrestrial");
    get(t, "N_t", cfg.n_bs_antennas);
    get(t, "K_t", cfg.n_cus);
    if (t.contains("P_t_dBm")) cfg.p_bs_watt = dbm_to_watt(t.at("P_t_dBm").get<double>());
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    get(g, "bs_offset_m", cfg.bs_offset_m);
    get(g, "cu_radius_m", cfg.cu_radius_m);
    get(g, "cu_gain_backoff_dB", cfg.cu_gain_backoff_db);
  }
  get(j, "seed", cfg.rng_seed);
  cfg.validate();
  return cfg;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  return {
      {"satellite",
       {{"f_c_hz", cfg.carrier_frequency_hz},
        {"B_w_hz", cfg.bandwidth_hz},
        {"theta_3dB_deg", cfg.theta_3db_rad * 180.0 / std::numbers::pi},
        {"G_max_dBi", cfg.g_max_db},
        {"G_R_dBi", cfg.g_rx_db},
        {"rain", {{"mu_dB", cfg.rain_mu_db}, {"sigma_dB", cfg.rain_sigma_db}}},
        {"N_s", cfg.n_sat_feeds},
        {"rho", cfg.users_per_beam},
        {"P_s_W", cfg.p_sat_watt},
        {"h_sat_km", cfg.sat_altitude_m / 1e3},
        {"T_sys_K", cfg.system_noise_temp_k},
        {"kappa", cfg.boltzmann},
        {"sigma_e2", cfg.csit_error_var}}},
      {"terrestrial",
       {{"N_t", cfg.n_bs_antennas}, {"K_t", cfg.n_cus}, {"P_t_dBm", watt_to_dbm(cfg.p_bs_watt)}}},
      {"geometry",
       {{"bs_offset_m", cfg.bs_offset_m},
        {"cu_radius_m", cfg.cu_radius_m},
        {"cu_gain_backoff_dB", cfg.cu_gain_backoff_db}}},
      {"seed", cfg.rng_seed}};
}

inline ScenarioConfig load_scenario(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return scenario_from_json(nlohmann::json::parse(in), base);
}

}  // namespace istn
