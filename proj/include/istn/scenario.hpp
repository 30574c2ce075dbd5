#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "istn/config.hpp"
#include "istn/rng.hpp"

namespace istn {

using GroundPoint = Eigen::Vector2d;  // local tangent plane, metres

struct Geometry {
  std::vector<GroundPoint> beam_centers;  // N_s
  std::vector<GroundPoint> su_positions;  // K_s, beam-major
  std::vector<GroundPoint> cu_positions;  // K_t
  std::vector<int> su_beam;               // mu(k_s)
  GroundPoint bs_position = GroundPoint::Zero();
  GroundPoint sat_nadir = GroundPoint::Zero();

  /// SU indices served by beam n.
  std::vector<int> beam_members(int n) const {
    std::vector<int> out;
    for (std::size_t k = 0; k < su_beam.size(); ++k)
      if (su_beam[k] == n) out.push_back(static_cast<int>(k));
    return out;
  }
};

struct SlantGeometry {
  Eigen::MatrixXd su_angles;  // K_s x N_s, rad
  Eigen::MatrixXd cu_angles;  // K_t x N_s, rad
  Eigen::VectorXd su_distance;
  Eigen::VectorXd cu_distance;
};

namespace detail {

inline Eigen::Vector3d ray(const GroundPoint& nadir, double altitude, const GroundPoint& p) {
  return {p.x() - nadir.x(), p.y() - nadir.y(), -altitude};
}

inline double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// First n points of a unit triangular lattice ordered by distance from the
// origin (ties by polar angle), re-centred on their centroid.
inline std::vector<Eigen::Vector2d> lattice_points(int n) {
  std::vector<Eigen::Vector2d> pts;
  const int r = 1 + static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) pts.emplace_back(i + 0.5 * j, 0.5 * std::sqrt(3.0) * j);
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    double na = a.squaredNorm(), nb = b.squaredNorm();
    if (std::abs(na - nb) > 1e-9) return na < nb;
    double pa = std::atan2(a.y(), a.x()), pb = std::atan2(b.y(), b.x());
    if (pa < 0.0) pa += 2.0 * std::numbers::pi;
    if (pb < 0.0) pb += 2.0 * std::numbers::pi;
    return pa < pb;
  });
  pts.resize(static_cast<std::size_t>(n));
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= n;
  for (auto& p : pts) p -= centroid;
  return pts;
}

}  // namespace detail

/// Angle at the satellite between the rays to ground points a and b.
inline double subtended_angle(const ScenarioConfig& cfg, const Geometry& g, const GroundPoint& a,
                              const GroundPoint& b) {
  return detail::angle_between(detail::ray(g.sat_nadir, cfg.sat_altitude_m, a),
                               detail::ray(g.sat_nadir, cfg.sat_altitude_m, b));
}

/// Beam lattice, user drops and BS placement for one seed. The lattice is
/// laid out in off-nadir angle space and scaled so that neighbouring beam
/// centres are exactly 2*theta_3dB apart as seen from the satellite.
inline Geometry build_geometry(const ScenarioConfig& cfg, std::uint64_t trial = 0) {
  cfg.validate();
  Geometry g;
  const double h = cfg.sat_altitude_m;
  const auto lattice = detail::lattice_points(cfg.n_sat_feeds);

  auto centers_at = [&](double scale) {
    std::vector<GroundPoint> c;
    for (const auto& p : lattice)
      c.emplace_back(h * std::tan(scale * p.x()), h * std::tan(scale * p.y()));
    return c;
  };
  const double spacing = 2.0 * cfg.theta_3db_rad;
  if (cfg.n_sat_feeds == 1) {
    g.beam_centers = centers_at(spacing);
  } else {
    auto min_sep = [&](double scale) {
      auto c = centers_at(scale);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) m = std::min(m, subtended_angle(cfg, g, c[i], c[j]));
      return m;
    };
    double lo = 0.5 * spacing, hi = 2.0 * spacing;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (min_sep(mid) < spacing ? lo : hi) = mid;
    }
    g.beam_centers = centers_at(0.5 * (lo + hi));
  }

  // BS pushed outward from the lattice centroid, away from beam 1's centre.
  GroundPoint outward = g.beam_centers[0] - g.sat_nadir;
  if (outward.norm() < 1e-9) outward = GroundPoint(1.0, 0.0);
  outward.normalize();
  g.bs_position = g.beam_centers[0] + cfg.bs_offset_m * outward;

  Rng rng = child_rng(cfg.rng_seed, trial, Stream::geometry);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in_disc = [&](const GroundPoint& center, double radius) {
    double r = radius * std::sqrt(unit(rng));
    double phi = 2.0 * std::numbers::pi * unit(rng);
    return GroundPoint(center + r * GroundPoint(std::cos(phi), std::sin(phi)));
  };

  constexpr int kMaxDraws = 10000;
  for (int n = 0; n < cfg.n_sat_feeds; ++n) {
    const auto& c = g.beam_centers[static_cast<std::size_t>(n)];
    const Eigen::Vector3d cray = detail::ray(g.sat_nadir, h, c);
    // Generous bounding disc of the 3 dB footprint.
    const double bound = 2.0 * cray.norm() * std::tan(cfg.theta_3db_rad) /
                         std::max(0.2, std::abs(cray.z()) / cray.norm());
    for (int i = 0; i < cfg.users_per_beam; ++i) {
      int draws = 0;
      for (;;) {
        if (++draws > kMaxDraws)
          throw std::runtime_error("build_geometry: cannot place SU outside the BS service area");
        GroundPoint p = in_disc(c, bound);
        if (subtended_angle(cfg, g, c, p) > cfg.theta_3db_rad) continue;
        if ((p - g.bs_position).norm() <= cfg.cu_radius_m) continue;
        g.su_positions.push_back(p);
        g.su_beam.push_back(n);
        break;
      }
    }
  }
  for (int k = 0; k < cfg.n_cus; ++k) g.cu_positions.push_back(in_disc(g.bs_position, cfg.cu_radius_m));
  return g;
}

inline SlantGeometry slant_angles_and_distances(const Geometry& g, const ScenarioConfig& cfg) {
  SlantGeometry out;
  const auto ns = static_cast<Eigen::Index>(g.beam_centers.size());
  auto fill = [&](const std::vector<GroundPoint>& users, Eigen::MatrixXd& ang, Eigen::VectorXd& dist) {
    const auto k = static_cast<Eigen::Index>(users.size());
    ang.resize(k, ns);
    dist.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto& u = users[static_cast<std::size_t>(i)];
      const Eigen::Vector3d ur = detail::ray(g.sat_nadir, cfg.sat_altitude_m, u);
      dist(i) = ur.norm();
      for (Eigen::Index n = 0; n < ns; ++n)
        ang(i, n) = detail::angle_between(
            detail::ray(g.sat_nadir, cfg.sat_altitude_m, g.beam_centers[static_cast<std::size_t>(n)]), ur);
    }
  };
  fill(g.su_positions, out.su_angles, out.su_distance);
  fill(g.cu_positions, out.cu_angles, out.cu_distance);
  return out;
}

}  // namespace istn
