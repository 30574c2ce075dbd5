#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "istn/scenario.hpp"

using namespace istn;

TEST(Geometry, UserCountsFollowBeamLoad) {
  ScenarioConfig cfg;
  auto g = build_geometry(cfg);
  ASSERT_EQ(g.beam_centers.size(), 3u);
  ASSERT_EQ(g.su_positions.size(), 6u);
  ASSERT_EQ(g.cu_positions.size(), 3u);
  for (int n = 0; n < 3; ++n) EXPECT_EQ(g.beam_members(n).size(), 2u);
}

TEST(Geometry, BeamSetsAreDisjoint) {
  ScenarioConfig cfg;
  cfg.n_sat_feeds = 7;
  cfg.users_per_beam = 3;
  auto g = build_geometry(cfg);
  std::set<int> seen;
  for (int n = 0; n < cfg.n_sat_feeds; ++n)
    for (int k : g.beam_members(n)) EXPECT_TRUE(seen.insert(k).second) << k;
  EXPECT_EQ(seen.size(), 21u);
}

TEST(Geometry, SameSeedIsBitIdentical) {
  ScenarioConfig cfg;
  cfg.rng_seed = 42;
  auto a = build_geometry(cfg, 3);
  auto b = build_geometry(cfg, 3);
  for (std::size_t k = 0; k < a.su_positions.size(); ++k) {
    EXPECT_EQ(a.su_positions[k].x(), b.su_positions[k].x());
    EXPECT_EQ(a.su_positions[k].y(), b.su_positions[k].y());
  }
  for (std::size_t k = 0; k < a.cu_positions.size(); ++k) EXPECT_EQ(a.cu_positions[k], b.cu_positions[k]);
  auto c = build_geometry(cfg, 4);
  EXPECT_NE(a.su_positions[0], c.su_positions[0]);
}

TEST(Geometry, NeighbouringBeamsTwoBeamwidthsApart) {
  for (double h : {300e3, 500e3, 36000e3}) {
    ScenarioConfig cfg;
    cfg.sat_altitude_m = h;
    auto g = build_geometry(cfg);
    double m = 1e9;
    for (std::size_t i = 0; i < g.beam_centers.size(); ++i)
      for (std::size_t j = i + 1; j < g.beam_centers.size(); ++j)
        m = std::min(m, subtended_angle(cfg, g, g.beam_centers[i], g.beam_centers[j]));
    EXPECT_NEAR(m, 2.0 * cfg.theta_3db_rad, 1e-9) << h;
  }
}

TEST(Geometry, UsersInsideTheirFootprintAndOutsideBsDisc) {
  ScenarioConfig cfg;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto g = build_geometry(cfg, trial);
    for (std::size_t k = 0; k < g.su_positions.size(); ++k) {
      const auto& c = g.beam_centers[static_cast<std::size_t>(g.su_beam[k])];
      EXPECT_LE(subtended_angle(cfg, g, c, g.su_positions[k]), cfg.theta_3db_rad + 1e-12);
      EXPECT_GT((g.su_positions[k] - g.bs_position).norm(), cfg.cu_radius_m);
    }
    for (const auto& p : g.cu_positions) EXPECT_LE((p - g.bs_position).norm(), cfg.cu_radius_m + 1e-9);
  }
}

TEST(Geometry, ZeroRadiusPutsCusAtBs) {
  ScenarioConfig cfg;
  cfg.cu_radius_m = 0.0;
  auto g = build_geometry(cfg);
  for (const auto& p : g.cu_positions) EXPECT_NEAR((p - g.bs_position).norm(), 0.0, 1e-12);
}

TEST(Geometry, BsSitsAtConfiguredOffsetFromFirstBeam) {
  ScenarioConfig cfg;
  auto g = build_geometry(cfg);
  EXPECT_NEAR((g.bs_position - g.beam_centers[0]).norm(), cfg.bs_offset_m, 1e-6);
}

TEST(SlantGeometry, ClosedFormCases) {
  ScenarioConfig cfg;
  auto g = build_geometry(cfg);
  // SU 0 placed at beam-0 centre, SU 1 at nadir, SU 2 at a known ground offset.
  g.su_positions[0] = g.beam_centers[0];
  g.su_positions[1] = g.sat_nadir;
  g.su_positions[2] = g.sat_nadir + GroundPoint(3000.0, 4000.0);
  auto s = slant_angles_and_distances(g, cfg);
  EXPECT_EQ(s.su_angles(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.su_distance(1), 500e3);
  EXPECT_NEAR(s.su_distance(2), std::sqrt(500e3 * 500e3 + 5000.0 * 5000.0), 1e-6);
}

TEST(SlantGeometry, AnglesNonnegativeAndDistancesAtLeastAltitude) {
  ScenarioConfig cfg;
  cfg.sat_altitude_m = 300e3;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    auto g = build_geometry(cfg, trial);
    auto s = slant_angles_and_distances(g, cfg);
    EXPECT_GE(s.su_angles.minCoeff(), 0.0);
    EXPECT_GE(s.cu_angles.minCoeff(), 0.0);
    EXPECT_GE(s.su_distance.minCoeff(), cfg.sat_altitude_m);
    EXPECT_GE(s.cu_distance.minCoeff(), cfg.sat_altitude_m);
  }
}

TEST(ScenarioConfig, RejectsBadValues) {
  ScenarioConfig cfg;
  cfg.n_cus = 20;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.csit_error_var = -0.1;
  EXPECT_THROW(build_geometry(cfg), std::invalid_argument);
}

TEST(ScenarioConfig, JsonRoundTrip) {
  ScenarioConfig cfg;
  cfg.sat_altitude_m = 2000e3;
  cfg.p_bs_watt = dbm_to_watt(40.0);
  cfg.rng_seed = 9;
  auto back = scenario_from_json(scenario_to_json(cfg));
  EXPECT_DOUBLE_EQ(back.sat_altitude_m, cfg.sat_altitude_m);
  EXPECT_NEAR(back.p_bs_watt, cfg.p_bs_watt, 1e-12);
  EXPECT_EQ(back.rng_seed, 9u);
  EXPECT_NEAR(back.theta_3db_rad, cfg.theta_3db_rad, 1e-15);
}
