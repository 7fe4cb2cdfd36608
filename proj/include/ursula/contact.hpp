// Bounded contact planes shared by the limb tip sensor (truth environment)
// and the dry-end proxy model.
#pragma once

#include "ursula/core.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

namespace ursula::contact {

/// A rectangular patch of the plane {p : normal . p = offset}. The normal
/// points out of the obstacle into free space.
struct ContactPlane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
    /// Patch centre projected onto the plane, in-plane axes and half-widths.
    Vec3 center = Vec3::Zero();
    Vec3 axis_u = Vec3::UnitX();
    Vec3 axis_v = Vec3::UnitY();
    double half_u = std::numeric_limits<double>::infinity();
    double half_v = std::numeric_limits<double>::infinity();
    double stiffness = 500.0; ///< [N/m]
};

struct ProxyEnvironment {
    std::vector<ContactPlane> planes;
    double stiffness = 500.0; ///< nominal k [N/m]
    double damping = 0.0;     ///< b [N s/m]
};

/// Positive on the free side.
inline double signed_distance(const ContactPlane& plane, const Vec3& p) {
    return plane.normal.dot(p) - plane.offset;
}

inline bool within_patch(const ContactPlane& plane, const Vec3& p) {
    const Vec3 q = p - plane.center;
    return std::abs(q.dot(plane.axis_u)) <= plane.half_u &&
           std::abs(q.dot(plane.axis_v)) <= plane.half_v;
}

/// Orthonormal in-plane axes for a unit normal.
inline std::pair<Vec3, Vec3> plane_axes(const Vec3& n) {
    const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 u = (helper - helper.dot(n) * n).normalized();
    return {u, n.cross(u)};
}

/// Unbounded plane through `normal . p = offset`.
inline ContactPlane make_plane(const Vec3& normal, double offset, double stiffness = 500.0) {
    ContactPlane pl;
    pl.normal = normal.normalized();
    pl.offset = offset / normal.norm();
    pl.center = pl.offset * pl.normal;
    std::tie(pl.axis_u, pl.axis_v) = plane_axes(pl.normal);
    pl.stiffness = stiffness;
    return pl;
}

/// Index of the patch closest to `p` (by |signed distance|) among the
/// patches whose extent contains the projection of `p`.
inline std::optional<std::size_t> nearest_patch(const std::vector<ContactPlane>& planes,
                                                const Vec3& p) {
    std::optional<std::size_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < planes.size(); ++i) {
        if (!within_patch(planes[i], p)) continue;
        const double d = std::abs(signed_distance(planes[i], p));
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

/// Penetration depth of `p` into its nearest patch, zero when free.
inline double penetration(const ProxyEnvironment& env, const Vec3& p) {
    const auto idx = nearest_patch(env.planes, p);
    if (!idx) return 0.0;
    return std::max(0.0, -signed_distance(env.planes[*idx], p));
}

} // namespace ursula::contact
