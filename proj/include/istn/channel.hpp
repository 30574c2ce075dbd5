#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>
#include <string>

#include "istn/config.hpp"
#include "istn/rng.hpp"
#include "istn/scenario.hpp"

namespace istn {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Channel estimates seen by the gateway plus one drawn realization of the
/// true satellite channels.
struct ChannelRealization {
  CMat f_hat;  // N_s x K_s
  CMat z_hat;  // N_s x K_t
  CMat h;      // N_t x K_t, known perfectly
  CMat f_true;
  CMat z_true;
  double csit_error_var = 0.0;
  std::vector<int> su_beam;  // mu(k_s)

  int n_feeds() const { return static_cast<int>(f_hat.rows()); }
  int n_sus() const { return static_cast<int>(f_hat.cols()); }
  int n_cus() const { return static_cast<int>(h.cols()); }
  int n_bs_antennas() const { return static_cast<int>(h.rows()); }
};

namespace detail {

// J1(u)/(2u) and J3(u)/u^3 from the ascending series of J_n, summed in the
// ratio form so u = 0 needs no special case.
inline void bessel_ratios(double u, double& j1_over_2u, double& j3_over_u3) {
  if (u > 20.0) {
    j1_over_2u = std::cyl_bessel_j(1.0, u) / (2.0 * u);
    j3_over_u3 = std::cyl_bessel_j(3.0, u) / (u * u * u);
    return;
  }
  const double x = 0.25 * u * u;
  double t1 = 1.0;        // (-x)^m / (m! (m+1)!)
  double t3 = 1.0 / 6.0;  // (-x)^m / (m! (m+3)!)
  double s1 = 0.0, s3 = 0.0;
  for (int m = 0; m < 60; ++m) {
    s1 += t1;
    s3 += t3;
    t1 *= -x / ((m + 1.0) * (m + 2.0));
    t3 *= -x / ((m + 1.0) * (m + 4.0));
  }
  j1_over_2u = 0.25 * s1;
  j3_over_u3 = 0.125 * s3;
}

}  // namespace detail

/// Multibeam radiation pattern, linear scale.
inline double beam_gain(double theta_rad, const ScenarioConfig& cfg) {
  const double u = 2.07123 * std::sin(theta_rad) / std::sin(cfg.theta_3db_rad);
  double a, b;
  detail::bessel_ratios(std::abs(u), a, b);
  const double shape = a + 36.0 * b;
  return db_to_linear(cfg.g_max_db) * shape * shape;
}

/// Free-space amplitude of one feed-to-user link normalized by the receiver
/// noise amplitude.
inline double link_amplitude(double theta_rad, double distance_m, double rx_gain_db,
                             const ScenarioConfig& cfg) {
  const double g = db_to_linear(rx_gain_db) * beam_gain(theta_rad, cfg);
  return std::sqrt(g) /
         (4.0 * std::numbers::pi * distance_m / cfg.wavelength_m() * std::sqrt(cfg.noise_power_w()));
}

/// One satellite channel vector: element n is b_n * chi_n^{-1/2} e^{-j phi_n}
/// with chi_n log-normal rain attenuation and phi_n uniform phase.
inline CVec build_satellite_vector(const Eigen::Ref<const Eigen::VectorXd>& angles, double distance_m,
                                   double rx_gain_db, const ScenarioConfig& cfg, Rng& rng) {
  std::normal_distribution<double> rain(cfg.rain_mu_db, cfg.rain_sigma_db);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  CVec f(angles.size());
  for (Eigen::Index n = 0; n < angles.size(); ++n) {
    const double b = link_amplitude(angles(n), distance_m, rx_gain_db, cfg);
    const double chi = db_to_linear(rain(rng));
    const double phi = phase(rng);
    f(n) = b / std::sqrt(chi) * std::polar(1.0, -phi);
  }
  return f;
}

/// Rayleigh fading with unit-variance circularly-symmetric entries.
inline CMat build_terrestrial_matrix(int n_antennas, int n_users, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  CMat h(n_antennas, n_users);
  for (int k = 0; k < n_users; ++k)
    for (int i = 0; i < n_antennas; ++i) h(i, k) = cplx(nd(rng), nd(rng));
  return h;
}

/// i.i.d. CN(0, sigma_e2) vector.
inline CVec draw_csit_error(int dim, double sigma_e2, Rng& rng) {
  if (sigma_e2 < 0.0) throw std::invalid_argument("negative CSIT error variance");
  CVec e = CVec::Zero(dim);
  if (sigma_e2 == 0.0) return e;
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * sigma_e2));
  for (int i = 0; i < dim; ++i) e(i) = cplx(nd(rng), nd(rng));
  return e;
}

/// All channels of one trial. Every random family comes from its own
/// (seed, trial) sub-stream, so sweeps over altitude or power reuse the
/// same fading draws.
inline ChannelRealization build_channel(const ScenarioConfig& cfg, const Geometry& g,
                                        std::uint64_t trial = 0) {
  const auto sl = slant_angles_and_distances(g, cfg);
  ChannelRealization ch;
  ch.csit_error_var = cfg.csit_error_var;
  ch.su_beam = g.su_beam;
  const int ns = cfg.n_sat_feeds;
  ch.f_hat.resize(ns, static_cast<Eigen::Index>(g.su_positions.size()));
  ch.z_hat.resize(ns, static_cast<Eigen::Index>(g.cu_positions.size()));

  Rng sat = child_rng(cfg.rng_seed, trial, Stream::satellite);
  for (Eigen::Index k = 0; k < ch.f_hat.cols(); ++k)
    ch.f_hat.col(k) = build_satellite_vector(sl.su_angles.row(k).transpose(), sl.su_distance(k),
                                             cfg.g_rx_db, cfg, sat);
  Rng itf = child_rng(cfg.rng_seed, trial, Stream::interference);
  for (Eigen::Index k = 0; k < ch.z_hat.cols(); ++k)
    ch.z_hat.col(k) = build_satellite_vector(sl.cu_angles.row(k).transpose(), sl.cu_distance(k),
                                             cfg.g_rx_db - cfg.cu_gain_backoff_db, cfg, itf);

  Rng ter = child_rng(cfg.rng_seed, trial, Stream::terrestrial);
  ch.h = build_terrestrial_matrix(cfg.n_bs_antennas, cfg.n_cus, ter);

  Rng err = child_rng(cfg.rng_seed, trial, Stream::csit_error);
  ch.f_true = ch.f_hat;
  ch.z_true = ch.z_hat;
  for (Eigen::Index k = 0; k < ch.f_true.cols(); ++k) ch.f_true.col(k) += draw_csit_error(ns, cfg.csit_error_var, err);
  for (Eigen::Index k = 0; k < ch.z_true.cols(); ++k) ch.z_true.col(k) += draw_csit_error(ns, cfg.csit_error_var, err);
  return ch;
}

/// Text matrix dump: per matrix a header line "name rows cols" followed by
/// row-major "re im" pairs, one matrix row per line.
inline void dump_channel(const ChannelRealization& ch, std::ostream& os) {
  os.precision(17);
  os << "# istn channel v1 csit_error_var " << ch.csit_error_var << "\n";
  auto put = [&os](const char* name, const CMat& m) {
    os << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        os << (c ? " " : "") << m(r, c).real() << " " << m(r, c).imag();
      os << "\n";
    }
  };
  put("f_hat", ch.f_hat);
  put("z_hat", ch.z_hat);
  put("h", ch.h);
  put("f_true", ch.f_true);
  put("z_true", ch.z_true);
}

}  // namespace istn
