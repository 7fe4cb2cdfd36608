// Model-mediated teleoperation: a planar proxy of the remote scene is fitted
// to depth samples, contact forces are rendered against the proxy at the dry
// end, and the proxy is corrected from tactile measurements at the limb tip.
#pragma once

#include "ursula/contact.hpp"
#include "ursula/core.hpp"
#include "ursula/limbs.hpp"
#include "ursula/modes.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace ursula::teleop {

using contact::ContactPlane;
using contact::ProxyEnvironment;

inline void validate(const ProxyEnvironment& env) {
    if (!(env.stiffness > 0.0) || !(env.damping >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "proxy: stiffness must be > 0 and damping >= 0");
    }
    for (const auto& p : env.planes) {
        if (std::abs(p.normal.norm() - 1.0) > 1e-9 || !(p.stiffness > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "proxy: patch normals must be unit, stiffness > 0");
        }
    }
}

// -----------------------------------------------------------------------------
// Proxy construction
// -----------------------------------------------------------------------------

struct ProxyOptions {
    double cluster_radius = 1.0;      ///< single-linkage distance [m]
    double inflate = 1.1;             ///< patch half-extent factor
    double degenerate_ratio = 1e-10;  ///< lambda_mid / lambda_max below this = collinear
    double match_angle = 10.0 * kPi / 180.0;
    double match_offset = 0.05;       ///< [m]
};

struct ClusterRejection {
    std::size_t cluster = 0;
    std::size_t points = 0;
    std::string reason;
};

struct ProxyBuild {
    ProxyEnvironment env;
    std::vector<ClusterRejection> rejected;
};

namespace detail {

/// Single-linkage clusters as index lists, in order of first sample.
inline std::vector<std::vector<std::size_t>> cluster(const std::vector<Vec3>& pts, double radius) {
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if ((pts[i] - pts[j]).norm() <= radius) {
                const std::size_t a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }
        }
    }
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::ptrdiff_t> slot(pts.size(), -1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<std::ptrdiff_t>(out.size());
            out.emplace_back();
        }
        out[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return out;
}

} // namespace detail

/// Total-least-squares plane through `pts`: the normal is the eigenvector of
/// the sample covariance with the smallest eigenvalue. The normal is turned
/// toward `viewpoint` when given, otherwise so that the offset is >= 0.
/// Returns nullopt for fewer than three or collinear points.
inline std::optional<ContactPlane> fit_plane(const std::vector<Vec3>& pts, std::optional<Vec3> viewpoint,
                                             const ProxyOptions& opt = {}) {
    if (pts.size() < 3) return std::nullopt;
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) cov += (p - centroid) * (p - centroid).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 lambda = eig.eigenvalues();
    if (!(lambda(2) > 0.0) || lambda(1) <= opt.degenerate_ratio * lambda(2)) return std::nullopt;

    Vec3 n = eig.eigenvectors().col(0).normalized();
    if (viewpoint) {
        if (n.dot(*viewpoint - centroid) < 0.0) n = -n;
    } else {
        const double off = n.dot(centroid);
        if (off < 0.0 || (off == 0.0 && n.sum() < 0.0)) n = -n;
    }
    ContactPlane plane;
    plane.normal = n;
    plane.offset = n.dot(centroid);
    plane.axis_u = eig.eigenvectors().col(2).normalized();
    plane.axis_v = n.cross(plane.axis_u);

    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : pts) {
        const Vec3 q = p - centroid;
        umin = std::min(umin, q.dot(plane.axis_u));
        umax = std::max(umax, q.dot(plane.axis_u));
        vmin = std::min(vmin, q.dot(plane.axis_v));
        vmax = std::max(vmax, q.dot(plane.axis_v));
    }
    plane.center = centroid + 0.5 * (umin + umax) * plane.axis_u + 0.5 * (vmin + vmax) * plane.axis_v;
    plane.half_u = 0.5 * (umax - umin) * opt.inflate;
    plane.half_v = 0.5 * (vmax - vmin) * opt.inflate;
    return plane;
}

/// Fit one patch per spatial cluster of depth samples. Patches matching a
/// prior patch (normal within match_angle, offset within match_offset)
/// inherit its stiffness; prior patches not re-observed are kept.
inline ProxyBuild build_proxy(const std::vector<Vec3>& samples, const std::optional<ProxyEnvironment>& prior,
                              std::optional<Vec3> viewpoint = std::nullopt, const ProxyOptions& opt = {}) {
    for (const auto& p : samples) require_finite({p.x(), p.y(), p.z()}, "depth sample");
    ProxyBuild out;
    if (prior) {
        validate(*prior);
        out.env.stiffness = prior->stiffness;
        out.env.damping = prior->damping;
    }
    std::vector<bool> prior_used(prior ? prior->planes.size() : 0, false);

    const auto clusters = detail::cluster(samples, opt.cluster_radius);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        std::vector<Vec3> pts;
        for (std::size_t i : clusters[c]) pts.push_back(samples[i]);
        auto plane = fit_plane(pts, viewpoint, opt);
        if (!plane) {
            out.rejected.push_back({c, pts.size(), pts.size() < 3 ? "too_few_points" : "collinear"});
            continue;
        }
        plane->stiffness = out.env.stiffness;
        if (prior) {
            for (std::size_t k = 0; k < prior->planes.size(); ++k) {
                const auto& pp = prior->planes[k];
                const double angle = std::acos(std::clamp(pp.normal.dot(plane->normal), -1.0, 1.0));
                if (angle <= opt.match_angle && std::abs(pp.offset - plane->offset) <= opt.match_offset) {
                    plane->stiffness = pp.stiffness;
                    prior_used[k] = true;
                    break;
                }
            }
        }
        out.env.planes.push_back(*plane);
    }
    if (prior) {
        for (std::size_t k = 0; k < prior->planes.size(); ++k) {
            if (!prior_used[k]) out.env.planes.push_back(prior->planes[k]);
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// Force rendering
// -----------------------------------------------------------------------------

/// Penetration of `p` into a patch, limited by the in-plane distance to the
/// patch edge so the depth falls to zero continuously at the boundary.
inline double effective_depth(const ContactPlane& plane, const Vec3& p) {
    const double depth = -contact::signed_distance(plane, p);
    if (depth <= 0.0) return 0.0;
    const Vec3 q = p - plane.center;
    const double slack_u = plane.half_u - std::abs(q.dot(plane.axis_u));
    const double slack_v = plane.half_v - std::abs(q.dot(plane.axis_v));
    return std::max(0.0, std::min({depth, slack_u, slack_v}));
}

/// Spring-damper force, summed over penetrated patches:
/// (k d + b max(0, -v_n)) n. The damper only resists approach.
inline Vec3 estimate_force(const Vec3& tip, const Vec3& tip_velocity, const ProxyEnvironment& env) {
    Vec3 f = Vec3::Zero();
    for (const auto& plane : env.planes) {
        const double d = effective_depth(plane, tip);
        if (d <= 0.0) continue;
        const double vn = tip_velocity.dot(plane.normal);
        f += (plane.stiffness * d + env.damping * std::max(0.0, -vn)) * plane.normal;
    }
    return f;
}

// -----------------------------------------------------------------------------
// Reconciliation with tactile measurements
// -----------------------------------------------------------------------------

struct TactileMeasurement {
    Vec3 force = Vec3::Zero();    ///< [N]
    Vec3 position = Vec3::Zero(); ///< tip position [m]
    double t = 0.0;
};

struct ReconcileOptions {
    double force_threshold = 0.05; ///< below this a force counts as zero [N]
    double hysteresis = 1e-3;      ///< retreat margin [m]
    double new_patch_half = 0.05;  ///< half-extent of a patch created from contact [m]
};

enum class ReconcileAction { None, Translated, Created, Retreated, Restiffened };

inline std::string_view to_string(ReconcileAction a) {
    switch (a) {
    case ReconcileAction::None: return "none";
    case ReconcileAction::Translated: return "translated";
    case ReconcileAction::Created: return "created";
    case ReconcileAction::Retreated: return "retreated";
    case ReconcileAction::Restiffened: return "restiffened";
    }
    return "?";
}

struct ReconcileResult {
    ProxyEnvironment env;
    ReconcileAction action = ReconcileAction::None;
    std::optional<std::size_t> patch;
};

namespace detail {

inline void cover(ContactPlane& plane, const Vec3& p, double margin) {
    const Vec3 q = p - plane.center;
    plane.half_u = std::max(plane.half_u, std::abs(q.dot(plane.axis_u)) + margin);
    plane.half_v = std::max(plane.half_v, std::abs(q.dot(plane.axis_v)) + margin);
}

} // namespace detail

/// Correct the proxy so it agrees with a tactile reading at the tip:
///
///  - contact measured, proxy free: translate the patch under the tip along
///    its normal so that its penetration is |F| / k (the rendered force then
///    equals the measurement), or create a patch facing the force if none;
///  - proxy in contact, no measured force: retreat every penetrated patch to
///    leave the tip `hysteresis` outside;
///  - both in contact: re-estimate the patch stiffness as |F| / d, clamped
///    to [0.1 k, 10 k] of the nominal stiffness.
inline ReconcileResult reconcile(const ProxyEnvironment& proxy, const TactileMeasurement& tactile,
                                 const ReconcileOptions& opt = {}) {
    validate(proxy);
    require_finite({tactile.force.x(), tactile.force.y(), tactile.force.z(), tactile.position.x(),
                    tactile.position.y(), tactile.position.z(), tactile.t},
                   "tactile measurement");
    ReconcileResult res{proxy, ReconcileAction::None, std::nullopt};
    const Vec3& p = tactile.position;
    const double measured = tactile.force.norm();
    const bool touching = measured > opt.force_threshold;

    // deepest penetrated patch, if any
    std::optional<std::size_t> deepest;
    double deepest_d = 0.0;
    for (std::size_t i = 0; i < proxy.planes.size(); ++i) {
        const double d = effective_depth(proxy.planes[i], p);
        if (d > deepest_d) {
            deepest_d = d;
            deepest = i;
        }
    }
    const bool predicted = deepest && proxy.planes[*deepest].stiffness * deepest_d > opt.force_threshold;

    if (touching && !predicted) {
        std::optional<std::size_t> idx = contact::nearest_patch(proxy.planes, p);
        if (!idx) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < proxy.planes.size(); ++i) {
                const double d = std::abs(contact::signed_distance(proxy.planes[i], p));
                if (d < best) {
                    best = d;
                    idx = i;
                }
            }
        }
        if (!idx) {
            ContactPlane plane = contact::make_plane(tactile.force / measured, 0.0, proxy.stiffness);
            const double depth = measured / plane.stiffness;
            plane.offset = plane.normal.dot(p) + depth;
            plane.center = p + depth * plane.normal;
            plane.half_u = plane.half_v = opt.new_patch_half;
            res.env.planes.push_back(plane);
            res.action = ReconcileAction::Created;
            res.patch = res.env.planes.size() - 1;
            return res;
        }
        ContactPlane& plane = res.env.planes[*idx];
        const double depth = measured / plane.stiffness;
        const double shift = plane.normal.dot(p) + depth - plane.offset;
        plane.offset += shift;
        plane.center += shift * plane.normal;
        detail::cover(plane, p, depth + opt.hysteresis);
        res.action = ReconcileAction::Translated;
        res.patch = idx;
    } else if (!touching && predicted) {
        for (auto& plane : res.env.planes) {
            if (effective_depth(plane, p) <= 0.0) continue;
            const double shift = plane.normal.dot(p) - opt.hysteresis - plane.offset;
            plane.offset += shift;
            plane.center += shift * plane.normal;
        }
        res.action = ReconcileAction::Retreated;
        res.patch = deepest;
    } else if (touching && predicted) {
        ContactPlane& plane = res.env.planes[*deepest];
        plane.stiffness = std::clamp(measured / deepest_d, 0.1 * proxy.stiffness, 10.0 * proxy.stiffness);
        res.action = ReconcileAction::Restiffened;
        res.patch = deepest;
    }
    return res;
}

// -----------------------------------------------------------------------------
// Teleoperation tick
// -----------------------------------------------------------------------------

struct MasterCommand {
    Vec3 increment = Vec3::Zero(); ///< tip target increment [m]
    bool clutch = false;
    double scale = 1.0;            ///< workspace scale factor
};

inline constexpr double kMaxIncrement = 0.01; ///< per-tick |increment| limit [m]

inline void validate(const MasterCommand& m) {
    require_finite({m.increment.x(), m.increment.y(), m.increment.z(), m.scale}, "master command");
    if (m.increment.norm() > kMaxIncrement) {
        throw Error(ErrorCode::OutOfRange, "master command: |increment| exceeds per-tick limit");
    }
    if (!(m.scale > 0.0)) throw Error(ErrorCode::OutOfRange, "master command: scale must be > 0");
}

/// Limb-base-frame pose in the proxy frame: p_proxy = rotation p_limb + origin.
struct FrameMap {
    Mat3 rotation = Mat3::Identity();
    Vec3 origin = Vec3::Zero();
};

struct TeleopOutput {
    Vec3 tip_target;          ///< limb base frame
    limbs::IkResult ik;
    Vec3 haptic = Vec3::Zero(); ///< limb base frame [N]
};

/// One teleoperation tick: apply the clutched increment to the tip target,
/// keep it within reach, solve IK from the current configuration and render
/// the proxy force at the commanded tip.
inline TeleopOutput teleop_tick(const MasterCommand& master, const Vec3& current_target,
                                const limbs::LimbConfig& current_config, const limbs::LimbGeometry& geom,
                                const ProxyEnvironment& proxy, const modes::ModeState& mode,
                                const FrameMap& frame = {}) {
    if (!modes::command_allowed(mode, modes::CommandKind::LimbMaster)) {
        throw Error(ErrorCode::ModeViolation, "teleop requires INT with MANCON or SAUTPOS, mode is " +
                                                  modes::to_string(mode));
    }
    validate(master);
    TeleopOutput out;
    out.tip_target = current_target;
    if (master.clutch) out.tip_target += master.scale * master.increment;
    const double reach = geom.length * (1.0 - 1e-6);
    if (out.tip_target.norm() > reach) out.tip_target *= reach / out.tip_target.norm();

    out.ik = limbs::inverse_kinematics(out.tip_target, geom, current_config);
    const Vec3 tip_proxy = frame.rotation * out.tip_target + frame.origin;
    out.haptic = frame.rotation.transpose() * estimate_force(tip_proxy, Vec3::Zero(), proxy);
    return out;
}

} // namespace ursula::teleop
