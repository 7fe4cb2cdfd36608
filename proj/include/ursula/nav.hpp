// Navigation: simulated sensor suite and an EKF over the planar pose
// (x, y, psi), with dead-reckoning prediction, range-bearing updates against
// a known landmark map and surface GNSS fixes.
#pragma once

#include "ursula/core.hpp"
#include "ursula/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <vector>

namespace ursula::nav {

using dynamics::VehicleState;

struct Landmark {
    int id = 0;
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Landmark&) const = default;
};

struct LandmarkMap {
    std::vector<Landmark> landmarks;

    const Landmark* find(int id) const {
        for (const auto& l : landmarks) {
            if (l.id == id) return &l;
        }
        return nullptr;
    }
    bool operator==(const LandmarkMap&) const = default;
};

inline void validate(const LandmarkMap& map) {
    std::set<int> seen;
    for (const auto& l : map.landmarks) {
        require_finite({l.x, l.y}, "landmark");
        if (!seen.insert(l.id).second) {
            throw Error(ErrorCode::InvalidArgument, "landmark map: duplicate id " + std::to_string(l.id));
        }
    }
}

struct SensorNoise {
    double dvl = 0.02;      ///< [m/s]
    double gyro = 0.005;    ///< [rad/s]
    double depth = 0.02;    ///< [m]
    double gnss = 0.5;      ///< [m]
    double range = 0.05;    ///< [m]
    double bearing = 0.01;  ///< [rad]
    double sonar_max_range = 30.0;   ///< [m]
    double surface_threshold = 0.3;  ///< GNSS available above this depth [m]

    bool operator==(const SensorNoise&) const = default;
};

inline void validate(const SensorNoise& n) {
    require_finite({n.dvl, n.gyro, n.depth, n.gnss, n.range, n.bearing, n.sonar_max_range,
                    n.surface_threshold},
                   "sensor noise");
    if (n.dvl < 0 || n.gyro < 0 || n.depth < 0 || n.gnss < 0 || n.range < 0 || n.bearing < 0 ||
        n.sonar_max_range <= 0) {
        throw Error(ErrorCode::InvalidArgument, "sensor noise: sigmas must be >= 0, max range > 0");
    }
}

struct Detection {
    int id = 0;
    double range = 0.0;   ///< [m]
    double bearing = 0.0; ///< relative to the bow [rad]

    bool operator==(const Detection&) const = default;
};

struct SensorFrame {
    double t = 0.0;
    double dvl_u = 0.0;
    double dvl_v = 0.0;
    double yaw_rate = 0.0;
    double depth = 0.0;
    std::optional<Vec2> gnss;
    std::vector<Detection> sonar;

    bool operator==(const SensorFrame&) const = default;
};

/// Sample every sensor from the truth state. Deterministic in `seed`; a
/// zero sigma returns the geometric truth for that channel.
inline SensorFrame sense(const VehicleState& truth, const LandmarkMap& map, const SensorNoise& noise,
                         std::uint64_t seed) {
    validate(noise);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto noisy = [&](double value, double sigma) { return value + sigma * unit(rng); };

    SensorFrame f;
    f.t = truth.t;
    f.dvl_u = noisy(truth.u, noise.dvl);
    f.dvl_v = noisy(truth.v, noise.dvl);
    f.yaw_rate = noisy(truth.r, noise.gyro);
    f.depth = noisy(truth.z, noise.depth);
    if (truth.z < noise.surface_threshold) {
        const double gx = noisy(truth.x, noise.gnss);
        const double gy = noisy(truth.y, noise.gnss);
        f.gnss = Vec2(gx, gy);
    }
    for (const auto& l : map.landmarks) {
        const double dx = l.x - truth.x, dy = l.y - truth.y;
        const double range = std::hypot(dx, dy);
        if (range > noise.sonar_max_range) continue;
        const double r = noisy(range, noise.range);
        const double b = wrap_angle(noisy(std::atan2(dy, dx) - truth.psi, noise.bearing));
        f.sonar.push_back({l.id, r, b});
    }
    return f;
}

// -----------------------------------------------------------------------------
// Estimator
// -----------------------------------------------------------------------------

struct NavEstimate {
    Vec3 mean = Vec3::Zero(); ///< x, y, psi
    Mat3 cov = Mat3::Identity();
};

/// Dead-reckoning process noise density matched to the DVL/gyro noise at a
/// fixed sensor interval: diag(s_dvl^2, s_dvl^2, s_gyro^2) * interval.
inline Mat3 process_noise(const SensorNoise& n, double interval) {
    return Vec3(n.dvl * n.dvl, n.dvl * n.dvl, n.gyro * n.gyro).asDiagonal() * interval;
}

namespace detail {

inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

} // namespace detail

/// Propagate with the body velocities rotated by the midpoint heading.
/// Covariance: F P F^T + Q_dr dt.
inline NavEstimate predict(const NavEstimate& est, const SensorFrame& frame, const Mat3& q_dr, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "predict: dt must be > 0");
    require_finite({frame.dvl_u, frame.dvl_v, frame.yaw_rate}, "predict frame");
    const double u = frame.dvl_u, v = frame.dvl_v, r = frame.yaw_rate;
    const double psi_m = est.mean(2) + 0.5 * r * dt;
    const double c = std::cos(psi_m), s = std::sin(psi_m);

    NavEstimate out;
    out.mean = est.mean + Vec3((u * c - v * s) * dt, (u * s + v * c) * dt, r * dt);
    out.mean(2) = wrap_angle(out.mean(2));

    Mat3 f = Mat3::Identity();
    f(0, 2) = -(u * s + v * c) * dt;
    f(1, 2) = (u * c - v * s) * dt;
    out.cov = detail::symmetrize(f * est.cov * f.transpose() + q_dr * dt);
    return out;
}

struct UpdateStats {
    int accepted = 0;
    int gated = 0;   ///< rejected by the innovation gate
    int unknown = 0; ///< id not in the map

    UpdateStats& operator+=(const UpdateStats& o) {
        accepted += o.accepted;
        gated += o.gated;
        unknown += o.unknown;
        return *this;
    }
};

struct UpdateResult {
    NavEstimate estimate;
    UpdateStats stats;
};

/// Squared Mahalanobis innovation above which a detection is discarded (3 sigma).
inline constexpr double kGate = 9.0;

/// Sequential range-bearing EKF updates in Joseph form.
inline UpdateResult update(const NavEstimate& est, const std::vector<Detection>& detections,
                           const LandmarkMap& map, const SensorNoise& noise) {
    UpdateResult res{est, {}};
    Eigen::Matrix2d r_meas = Eigen::Vector2d(noise.range * noise.range, noise.bearing * noise.bearing)
                                 .asDiagonal();
    for (const auto& d : detections) {
        const Landmark* l = map.find(d.id);
        if (!l) {
            ++res.stats.unknown;
            continue;
        }
        NavEstimate& e = res.estimate;
        const double dx = l->x - e.mean(0), dy = l->y - e.mean(1);
        const double q = dx * dx + dy * dy;
        const double range = std::sqrt(q);
        if (range < 1e-9) {
            ++res.stats.gated;
            continue;
        }
        Eigen::Matrix<double, 2, 3> h;
        h << -dx / range, -dy / range, 0.0, dy / q, -dx / q, -1.0;
        const Eigen::Vector2d innov(d.range - range,
                                    wrap_angle(d.bearing - (std::atan2(dy, dx) - e.mean(2))));
        const Eigen::Matrix2d s = h * e.cov * h.transpose() + r_meas;
        const double m2 = innov.dot(s.ldlt().solve(innov));
        if (!(m2 <= kGate)) {
            ++res.stats.gated;
            continue;
        }
        const Eigen::Matrix<double, 3, 2> k = e.cov * h.transpose() * s.inverse();
        const Mat3 ikh = Mat3::Identity() - k * h;
        e.mean += k * innov;
        e.mean(2) = wrap_angle(e.mean(2));
        e.cov = detail::symmetrize(ikh * e.cov * ikh.transpose() + k * r_meas * k.transpose());
        ++res.stats.accepted;
    }
    return res;
}

/// Position fix update, H = [I2 0]. Rejected when the vehicle is submerged.
inline NavEstimate gnss_reset(const NavEstimate& est, const Vec2& fix, double sigma, double depth,
                              double surface_threshold = 0.3) {
    if (!(depth < surface_threshold)) {
        throw Error(ErrorCode::InvalidArgument, "gnss_reset: fix while submerged");
    }
    require_finite({fix.x(), fix.y(), sigma}, "gnss fix");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gnss_reset: sigma must be > 0");
    Eigen::Matrix<double, 2, 3> h = Eigen::Matrix<double, 2, 3>::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * sigma * sigma;
    const Eigen::Matrix2d s = h * est.cov * h.transpose() + r;
    const Eigen::Matrix<double, 3, 2> k = est.cov * h.transpose() * s.inverse();
    const Mat3 ikh = Mat3::Identity() - k * h;

    NavEstimate out;
    out.mean = est.mean + k * (fix - est.mean.head<2>());
    out.mean(2) = wrap_angle(out.mean(2));
    out.cov = detail::symmetrize(ikh * est.cov * ikh.transpose() + k * r * k.transpose());
    return out;
}

/// Normalized estimation error squared against the truth pose.
inline double nees(const NavEstimate& est, const VehicleState& truth) {
    Vec3 e(truth.x - est.mean(0), truth.y - est.mean(1), wrap_angle(truth.psi - est.mean(2)));
    return e.dot(est.cov.ldlt().solve(e));
}

} // namespace ursula::nav
