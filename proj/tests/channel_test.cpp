#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "istn/channel.hpp"

using namespace istn;

namespace {

// Bessel integral J_n(u) = (1/pi) int_0^pi cos(n t - u sin t) dt by composite
// Simpson; completely independent of the series used in the library.
double bessel_quadrature(int n, double u) {
  const int m = 4000;
  const double h = std::numbers::pi / m;
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    double t = i * h;
    double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::cos(n * t - u * std::sin(t));
  }
  return s * h / 3.0 / std::numbers::pi;
}

double gain_oracle(double theta, const ScenarioConfig& cfg) {
  double u = 2.07123 * std::sin(theta) / std::sin(cfg.theta_3db_rad);
  double shape = bessel_quadrature(1, u) / (2.0 * u) + 36.0 * bessel_quadrature(3, u) / (u * u * u);
  return db_to_linear(cfg.g_max_db) * shape * shape;
}

}  // namespace

TEST(BeamGain, CenterEqualsMaximum) {
  ScenarioConfig cfg;
  EXPECT_EQ(beam_gain(0.0, cfg), db_to_linear(cfg.g_max_db));
}

TEST(BeamGain, HalfPowerAtBeamwidth) {
  ScenarioConfig cfg;
  double g = beam_gain(cfg.theta_3db_rad, cfg);
  double ref = gain_oracle(cfg.theta_3db_rad, cfg);
  EXPECT_NEAR(g, ref, 1e-9 * ref);
  EXPECT_NEAR(linear_to_db(g / db_to_linear(cfg.g_max_db)), -3.0, 0.2);
}

TEST(BeamGain, SeriesMatchesQuadratureAcrossPattern) {
  ScenarioConfig cfg;
  for (double r : {0.05, 0.3, 0.9, 1.7, 2.5, 4.0, 6.0, 9.0}) {
    double th = r * cfg.theta_3db_rad;
    double ref = gain_oracle(th, cfg);
    EXPECT_NEAR(beam_gain(th, cfg), ref, 1e-9 * db_to_linear(cfg.g_max_db)) << r;
  }
}

TEST(BeamGain, DependsOnlyOnRatio) {
  ScenarioConfig a, b;
  b.theta_3db_rad = 2.0 * a.theta_3db_rad;
  EXPECT_NEAR(beam_gain(a.theta_3db_rad, a), beam_gain(b.theta_3db_rad, b), 1e-9 * beam_gain(0.0, a));
}

TEST(BeamGain, MainLobeNonincreasing) {
  ScenarioConfig cfg;
  double prev = beam_gain(0.0, cfg);
  for (int i = 1; i <= 200; ++i) {
    double g = beam_gain(cfg.theta_3db_rad * i / 200.0, cfg);
    EXPECT_LE(g, prev);
    prev = g;
  }
}

TEST(SatelliteVector, DegenerateFadingGivesFreeSpaceAmplitude) {
  ScenarioConfig cfg;
  cfg.rain_mu_db = 0.0;
  cfg.rain_sigma_db = 0.0;
  Eigen::VectorXd ang(3);
  ang << 0.0, 0.5 * cfg.theta_3db_rad, 2.0 * cfg.theta_3db_rad;
  Rng rng(5);
  auto f = build_satellite_vector(ang, 600e3, cfg.g_rx_db, cfg, rng);
  for (int n = 0; n < 3; ++n) EXPECT_NEAR(std::abs(f(n)), link_amplitude(ang(n), 600e3, cfg.g_rx_db, cfg), 1e-12 * std::abs(f(n)));
}

TEST(SatelliteVector, DoublingDistanceHalvesAmplitude) {
  ScenarioConfig cfg;
  Eigen::VectorXd ang = Eigen::VectorXd::Constant(3, 0.1 * cfg.theta_3db_rad);
  Rng r1(8), r2(8);
  auto f1 = build_satellite_vector(ang, 500e3, cfg.g_rx_db, cfg, r1);
  auto f2 = build_satellite_vector(ang, 1000e3, cfg.g_rx_db, cfg, r2);
  for (int n = 0; n < 3; ++n) EXPECT_NEAR(std::abs(f2(n)), 0.5 * std::abs(f1(n)), 1e-12 * std::abs(f1(n)));
}

TEST(SatelliteVector, RainStatisticsMatchConfiguration) {
  // Recover chi_dB from each element by dividing out the deterministic amplitude.
  ScenarioConfig cfg;
  Eigen::VectorXd ang = Eigen::VectorXd::Zero(1);
  const double b = link_amplitude(0.0, 500e3, cfg.g_rx_db, cfg);
  Rng rng(11);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = std::abs(build_satellite_vector(ang, 500e3, cfg.g_rx_db, cfg, rng)(0));
    double chi_db = -20.0 * std::log10(a / b);
    sum += chi_db;
    sq += chi_db * chi_db;
  }
  double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, cfg.rain_mu_db, 0.02 * std::abs(cfg.rain_mu_db));
  EXPECT_NEAR(sd, cfg.rain_sigma_db, 0.02 * cfg.rain_sigma_db);
}

TEST(Terrestrial, UnitPowerAndUncorrelatedColumns) {
  Rng rng(3);
  auto h = build_terrestrial_matrix(400, 250, rng);  // 1e5 entries
  double p = h.cwiseAbs2().mean();
  EXPECT_GE(p, 0.99);
  EXPECT_LE(p, 1.01);
  Rng big(4);
  auto h2 = build_terrestrial_matrix(100000, 2, big);
  cplx corr = h2.col(0).dot(h2.col(1)) / 100000.0;
  EXPECT_LT(std::abs(corr), 0.02);
  Rng again(3);
  EXPECT_EQ(build_terrestrial_matrix(400, 250, again), h);
}

TEST(CsitError, ZeroVarianceIsZeroVector) {
  Rng rng(1);
  EXPECT_EQ(draw_csit_error(4, 0.0, rng), CVec::Zero(4));
  EXPECT_THROW(draw_csit_error(4, -1.0, rng), std::invalid_argument);
}

TEST(CsitError, VarianceAndProjectionIdentity) {
  Rng rng(21);
  const double s2 = 0.05;
  CVec w(3);
  w << cplx(1.0, 0.5), cplx(-0.3, 2.0), cplx(0.0, -1.0);
  const int n = 100000;
  double per_elem = 0.0, proj = 0.0;
  for (int i = 0; i < n; ++i) {
    CVec e = draw_csit_error(3, s2, rng);
    per_elem += e.squaredNorm() / 3.0;
    proj += std::norm(e.dot(w));
  }
  EXPECT_NEAR(per_elem / n, s2, 0.02 * s2);
  EXPECT_NEAR(proj / n, s2 * w.squaredNorm(), 0.02 * s2 * w.squaredNorm());
}

TEST(Channel, DimensionsAndPerfectCsit) {
  ScenarioConfig cfg;
  auto g = build_geometry(cfg);
  auto ch = build_channel(cfg, g);
  EXPECT_EQ(ch.f_hat.rows(), 3);
  EXPECT_EQ(ch.f_hat.cols(), 6);
  EXPECT_EQ(ch.z_hat.cols(), 3);
  EXPECT_EQ(ch.h.rows(), 16);
  EXPECT_EQ(ch.f_true, ch.f_hat);
  EXPECT_EQ(ch.z_true, ch.z_hat);
  EXPECT_TRUE(ch.f_hat.allFinite());
  EXPECT_GT(ch.f_hat.cwiseAbs().minCoeff(), 0.0);
}

TEST(Channel, FadingSharedAcrossAltitudes) {
  // Common random numbers: the rain/phase draws do not depend on altitude,
  // so the phase of each element is identical at two altitudes.
  ScenarioConfig a, b;
  b.sat_altitude_m = 2000e3;
  auto ca = build_channel(a, build_geometry(a, 2), 2);
  auto cb = build_channel(b, build_geometry(b, 2), 2);
  for (Eigen::Index i = 0; i < ca.f_hat.size(); ++i)
    EXPECT_NEAR(std::arg(ca.f_hat(i)), std::arg(cb.f_hat(i)), 1e-12);
  EXPECT_EQ(ca.h, cb.h);
}

TEST(Channel, LinkBudgetMagnitudes) {
  // Beam-centre SNR per feed at 500 km sits in the tens of dB; at GEO it is
  // about 37 dB lower (free-space ratio of the two distances).
  ScenarioConfig cfg;
  double leo = link_amplitude(0.0, 500e3, cfg.g_rx_db, cfg);
  double geo = link_amplitude(0.0, 36000e3, cfg.g_rx_db, cfg);
  EXPECT_NEAR(20.0 * std::log10(leo / geo), 20.0 * std::log10(72.0), 1e-9);
  double snr_db = 10.0 * std::log10(leo * leo * cfg.p_sat_watt / cfg.n_sat_feeds);
  EXPECT_GT(snr_db, 30.0);
  EXPECT_LT(snr_db, 70.0);
}

TEST(Channel, DumpHasHeaders) {
  ScenarioConfig cfg;
  auto ch = build_channel(cfg, build_geometry(cfg));
  std::ostringstream os;
  dump_channel(ch, os);
  const auto s = os.str();
  EXPECT_NE(s.find("f_hat 3 6"), std::string::npos);
  EXPECT_NE(s.find("h 16 3"), std::string::npos);
}
