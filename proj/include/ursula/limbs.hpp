// Tapered, four-tendon continuum limb.
//
// The backbone is modelled with piecewise constant curvature (PCC): each of
// the n equal-length segments is a circular arc with curvature kappa bending
// in the plane at azimuth phi about the local z axis. The limb base frame has
// z along the unbent limb.
#pragma once

#include "ursula/contact.hpp"
#include "ursula/core.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ursula::limbs {

inline constexpr int kTendons = 4;

struct LimbGeometry {
    double length = 0.6;
    double base_radius = 0.03;
    double tip_radius = 0.01;
    int n_segments = 6;
    double tendon_offset_ratio = 0.75;
    /// Curvature bound; defaults to 2 pi / length when unset.
    std::optional<double> kappa_max;

    double max_curvature() const { return kappa_max.value_or(2.0 * kPi / length); }
    double segment_length() const { return length / n_segments; }
    /// Taper radius at arc length s from the base.
    double radius_at(double s) const {
        return base_radius + (tip_radius - base_radius) * (s / length);
    }
};

/// Half-scale preset (the deployed prototype limbs).
inline LimbGeometry half_scale_geometry() {
    LimbGeometry g;
    g.length = 0.3;
    g.base_radius = 0.015;
    g.tip_radius = 0.005;
    return g;
}

inline void validate(const LimbGeometry& g) {
    if (!(g.length > 0.0 && g.tip_radius > 0.0 && g.base_radius > g.tip_radius &&
          g.n_segments >= 1 && g.tendon_offset_ratio > 0.0 && g.tendon_offset_ratio < 1.0 &&
          g.max_curvature() > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid limb geometry");
    }
}

struct SegmentCurvature {
    double kappa = 0.0; ///< [1/m]
    double phi = 0.0;   ///< bending-plane azimuth [rad]

    bool operator==(const SegmentCurvature&) const = default;
};

struct LimbConfig {
    std::vector<SegmentCurvature> segments;

    static LimbConfig straight(int n) { return {std::vector<SegmentCurvature>(n)}; }
    bool operator==(const LimbConfig&) const = default;
};

struct TipPose {
    Vec3 position = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
};

struct TendonState {
    std::array<double, kTendons> length_change{}; ///< [m], negative = shortened
    std::array<double, kTendons> tension{};       ///< [N], >= 0
};

inline void validate(const LimbConfig& c, const LimbGeometry& g) {
    if (static_cast<int>(c.segments.size()) != g.n_segments) {
        throw Error(ErrorCode::InvalidArgument, "limb config: expected " +
                                                    std::to_string(g.n_segments) + " segments");
    }
    const double kmax = g.max_curvature();
    for (const auto& s : c.segments) {
        require_finite({s.kappa, s.phi}, "limb config");
        if (std::abs(s.kappa) > kmax * (1.0 + 1e-12)) {
            throw Error(ErrorCode::OutOfRange, "limb config: |kappa| exceeds kappa_max");
        }
    }
}

namespace detail {

inline double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

inline Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

struct Frame {
    Mat3 rotation = Mat3::Identity();
    Vec3 origin = Vec3::Zero();
};

/// Transform from the base of a constant-curvature arc to its end. The
/// straight case falls out of the sinc forms without a special branch.
inline Frame arc(double kappa, double phi, double s) {
    const double theta = kappa * s;
    const Mat3 rz = rot_z(phi);
    const Vec3 local(s * std::sin(0.5 * theta) * sinc(0.5 * theta), 0.0, s * sinc(theta));
    return {rz * rot_y(theta) * rz.transpose(), rz * local};
}

inline TipPose compose(const LimbConfig& config, double segment_length) {
    Frame f;
    for (const auto& seg : config.segments) {
        const Frame a = arc(seg.kappa, seg.phi, segment_length);
        f.origin += f.rotation * a.origin;
        f.rotation = f.rotation * a.rotation;
    }
    return {f.origin, f.rotation.col(2)};
}

} // namespace detail

/// Tip position and pointing direction in the limb base frame.
inline TipPose forward_kinematics(const LimbConfig& config, const LimbGeometry& geom) {
    validate(config, geom);
    return detail::compose(config, geom.segment_length());
}

/// Backbone points at every segment boundary, base first.
inline std::vector<Vec3> backbone(const LimbConfig& config, const LimbGeometry& geom) {
    validate(config, geom);
    std::vector<Vec3> pts{Vec3::Zero()};
    detail::Frame f;
    for (const auto& seg : config.segments) {
        const detail::Frame a = detail::arc(seg.kappa, seg.phi, geom.segment_length());
        f.origin += f.rotation * a.origin;
        f.rotation = f.rotation * a.rotation;
        pts.push_back(f.origin);
    }
    return pts;
}

/// Tendon length changes relative to the straight limb.
///
/// Tendon i sits at azimuth i * 90 deg and offset r_j = ratio * taper radius
/// at the segment midpoint:  dl_i = -sum_j r_j kappa_j cos(phi_j - beta_i) s_j.
/// Opposing tendons are computed as exact negatives of each other, which is
/// the identity cos(phi - beta - pi) = -cos(phi - beta).
inline TendonState tendon_lengths(const LimbConfig& config, const LimbGeometry& geom,
                                  double pretension = 0.0, double tendon_stiffness = 0.0) {
    validate(config, geom);
    const double s = geom.segment_length();
    double along_x = 0.0, along_y = 0.0;
    for (std::size_t j = 0; j < config.segments.size(); ++j) {
        const auto& seg = config.segments[j];
        const double r = geom.tendon_offset_ratio * geom.radius_at((j + 0.5) * s);
        along_x += r * seg.kappa * std::cos(seg.phi) * s;
        along_y += r * seg.kappa * std::sin(seg.phi) * s;
    }
    TendonState t;
    t.length_change = {-along_x, -along_y, along_x, along_y};
    for (int i = 0; i < kTendons; ++i) {
        t.tension[i] = pretension + tendon_stiffness * std::max(0.0, -t.length_change[i]);
    }
    return t;
}

/// Reflect the bending planes across the sagittal (x-z) plane.
inline LimbConfig mirror_config(const LimbConfig& camera) {
    LimbConfig out = camera;
    for (auto& seg : out.segments) {
        seg.phi = wrap_angle(-seg.phi);
    }
    return out;
}

/// Hooke contact at the tip against the nearest environment patch.
inline Vec3 tip_contact(const TipPose& tip, const contact::ProxyEnvironment& env, double k_c) {
    if (!(k_c > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "tip_contact: k_c must be > 0");
    }
    const auto idx = contact::nearest_patch(env.planes, tip.position);
    if (!idx) return Vec3::Zero();
    const auto& plane = env.planes[*idx];
    const double d = -contact::signed_distance(plane, tip.position);
    if (d <= 0.0) return Vec3::Zero();
    return k_c * d * plane.normal;
}

// ---------------------------------------------------------------------------
// Inverse kinematics
// ---------------------------------------------------------------------------

/// IK works on Cartesian curvature vectors (kappa cos phi, kappa sin phi) per
/// segment, which keeps the map smooth through the straight configuration.
using CurvatureVector = Eigen::VectorXd;

inline CurvatureVector to_curvature_vector(const LimbConfig& c) {
    CurvatureVector q(2 * c.segments.size());
    for (std::size_t j = 0; j < c.segments.size(); ++j) {
        q(2 * j) = c.segments[j].kappa * std::cos(c.segments[j].phi);
        q(2 * j + 1) = c.segments[j].kappa * std::sin(c.segments[j].phi);
    }
    return q;
}

inline LimbConfig from_curvature_vector(const CurvatureVector& q) {
    LimbConfig c;
    c.segments.resize(q.size() / 2);
    for (std::size_t j = 0; j < c.segments.size(); ++j) {
        const double kx = q(2 * j), ky = q(2 * j + 1);
        c.segments[j].kappa = std::hypot(kx, ky);
        c.segments[j].phi = c.segments[j].kappa > 0.0 ? std::atan2(ky, kx) : 0.0;
    }
    return c;
}

/// Tip position without the curvature bound check, so finite-difference
/// probes may step just past kappa_max.
inline Vec3 tip_position(const CurvatureVector& q, const LimbGeometry& geom) {
    return detail::compose(from_curvature_vector(q), geom.segment_length()).position;
}

/// Forward-difference Jacobian of the tip position w.r.t. the curvature vector.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> fk_jacobian(const CurvatureVector& q,
                                                            const LimbGeometry& geom,
                                                            double step = 1e-7) {
    const Vec3 p0 = tip_position(q, geom);
    Eigen::Matrix<double, 3, Eigen::Dynamic> j(3, q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k) {
        CurvatureVector qk = q;
        qk(k) += step;
        j.col(k) = (tip_position(qk, geom) - p0) / step;
    }
    return j;
}

struct IkOptions {
    double tolerance = 1e-4; ///< tip error [m]
    int max_iterations = 200;
    double damping = 1e-3;
};

struct IkResult {
    LimbConfig config;
    double residual = 0.0; ///< tip error [m]
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline void clamp_curvature(CurvatureVector& q, double kmax) {
    for (Eigen::Index j = 0; j < q.size() / 2; ++j) {
        const double k = std::hypot(q(2 * j), q(2 * j + 1));
        if (k > kmax) {
            q(2 * j) *= kmax / k;
            q(2 * j + 1) *= kmax / k;
        }
    }
}

} // namespace detail

/// Damped least-squares tip positioning from `seed`.
///
/// Each iteration solves (J J^T + lambda^2 I) y = e, steps by J^T y and keeps
/// the step only if the tip error shrinks; otherwise lambda grows tenfold and
/// the step is retried on the next iteration. Rejected targets beyond the
/// limb length throw Unreachable; targets that are inside the sphere but not
/// reached are returned with `converged == false` and the residual attached.
inline IkResult inverse_kinematics(const Vec3& target, const LimbGeometry& geom,
                                   const LimbConfig& seed, const IkOptions& opt = {}) {
    validate(geom);
    validate(seed, geom);
    require_finite({target.x(), target.y(), target.z()}, "inverse_kinematics target");
    if (target.norm() > geom.length * (1.0 + 1e-12)) {
        throw Error(ErrorCode::Unreachable, "inverse_kinematics: target beyond limb length");
    }
    const double kmax = geom.max_curvature();
    CurvatureVector q = to_curvature_vector(seed);
    double err = (target - tip_position(q, geom)).norm();
    double lambda = opt.damping;

    IkResult out;
    int it = 0;
    while (err >= opt.tolerance && it < opt.max_iterations) {
        ++it;
        const Vec3 e = target - tip_position(q, geom);
        const auto j = fk_jacobian(q, geom);
        const Mat3 jjt = j * j.transpose() + lambda * lambda * Mat3::Identity();
        CurvatureVector trial = q + j.transpose() * jjt.ldlt().solve(e);
        detail::clamp_curvature(trial, kmax);
        const double trial_err = (target - tip_position(trial, geom)).norm();
        if (trial_err < err) {
            q = std::move(trial);
            err = trial_err;
            lambda = std::max(opt.damping, lambda * 0.1);
        } else {
            lambda *= 10.0;
        }
    }
    out.config = from_curvature_vector(q);
    out.residual = err;
    out.iterations = it;
    out.converged = err < opt.tolerance;
    return out;
}

} // namespace ursula::limbs
