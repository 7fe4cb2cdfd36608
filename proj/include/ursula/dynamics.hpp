// Planar rigid-body vehicle dynamics.
//
// Surge, sway and yaw are integrated as a coupled 3-DOF model
//
//   M nu_dot + C_RB(nu) nu + D(nu) nu = tau,   nu = (u, v, r)
//
// and heave as an independent scalar channel. Roll and pitch are not modelled.
// The integrator is classical RK4 at a fixed step.
#pragma once

#include "ursula/core.hpp"

#include <array>
#include <cmath>
#include <string>

namespace ursula::dynamics {

/// Kinematic and kinetic truth of the vehicle. NED plane, z positive down.
struct VehicleState {
    double x = 0.0;   ///< north [m]
    double y = 0.0;   ///< east [m]
    double z = 0.0;   ///< depth [m], >= 0
    double psi = 0.0; ///< heading [rad], (-pi, pi]
    double u = 0.0;   ///< surge [m/s]
    double v = 0.0;   ///< sway [m/s]
    double r = 0.0;   ///< yaw rate [rad/s]
    double w = 0.0;   ///< heave [m/s]
    double t = 0.0;   ///< simulation time [s]

    bool operator==(const VehicleState&) const = default;
};

/// Body-frame generalized force.
struct Wrench {
    double X = 0.0; ///< surge force [N]
    double Y = 0.0; ///< sway force [N]
    double N = 0.0; ///< yaw moment [N m]
    double Z = 0.0; ///< heave force [N]

    Wrench& operator+=(const Wrench& o) {
        X += o.X;
        Y += o.Y;
        N += o.N;
        Z += o.Z;
        return *this;
    }
    friend Wrench operator+(Wrench a, const Wrench& b) { return a += b; }
    bool operator==(const Wrench&) const = default;
};

/// Hydrodynamic and inertial parameters.
///
/// Hull coefficients are not published for this vehicle. The defaults are
/// sized so the hull settles near 1 m/s under the full forward thrust of the
/// four primary fins (about 36 N).
struct VehicleParams {
    double mass = 30.0;     ///< [kg]
    double inertia_z = 3.6; ///< yaw inertia [kg m^2]
    double length = 1.2;    ///< hull length [m]
    double max_depth = 100.0;

    // Added mass, stored as positive magnitudes.
    double added_u = 3.0;
    double added_v = 25.0;
    double added_r = 2.0;
    double added_w = 25.0;

    // Linear drag.
    double drag_u = 10.0;
    double drag_v = 30.0;
    double drag_r = 5.0;
    double drag_w = 30.0;

    // Quadratic drag.
    double drag_uu = 30.0;
    double drag_vv = 80.0;
    double drag_rr = 10.0;
    double drag_ww = 80.0;

    /// Constant ambient current, north/east [m/s]. Kinematics only.
    double current_x = 0.0;
    double current_y = 0.0;

    double m_u() const { return mass + added_u; }
    double m_v() const { return mass + added_v; }
    double m_r() const { return inertia_z + added_r; }
    double m_w() const { return mass + added_w; }
};

inline constexpr double kMaxStep = 0.1;
inline constexpr double kDefaultStep = 0.01;

/// Throws Error(InvalidArgument) naming the first violated field.
inline void validate(const VehicleParams& p) {
    auto fail = [](const std::string& f) {
        throw Error(ErrorCode::InvalidArgument, "vehicle params: " + f);
    };
    require_finite({p.mass, p.inertia_z, p.length, p.max_depth, p.added_u, p.added_v,
                    p.added_r, p.added_w, p.drag_u, p.drag_v, p.drag_r, p.drag_w,
                    p.drag_uu, p.drag_vv, p.drag_rr, p.drag_ww, p.current_x, p.current_y},
                   "vehicle params");
    if (p.mass <= 0.0) fail("mass must be > 0");
    if (p.inertia_z <= 0.0) fail("inertia_z must be > 0");
    if (p.length <= 0.0) fail("length must be > 0");
    if (p.added_u < 0.0 || p.added_v < 0.0 || p.added_r < 0.0 || p.added_w < 0.0)
        fail("added mass entries must be >= 0");
    if (p.drag_u < 0.0 || p.drag_v < 0.0 || p.drag_r < 0.0 || p.drag_w < 0.0 ||
        p.drag_uu < 0.0 || p.drag_vv < 0.0 || p.drag_rr < 0.0 || p.drag_ww < 0.0)
        fail("drag coefficients must be >= 0");
}

/// 1/2 nu^T M nu including heave.
inline double kinetic_energy(const VehicleState& s, const VehicleParams& p) {
    return 0.5 * (p.m_u() * s.u * s.u + p.m_v() * s.v * s.v + p.m_r() * s.r * s.r +
                  p.m_w() * s.w * s.w);
}

namespace detail {

// x, y, z, psi, u, v, r, w
using Vec8 = std::array<double, 8>;

inline Vec8 derivative(const Vec8& q, const Wrench& tau, const VehicleParams& p) {
    const double psi = q[3];
    const double u = q[4], v = q[5], r = q[6], w = q[7];
    const double c = std::cos(psi), s = std::sin(psi);

    Vec8 d{};
    d[0] = u * c - v * s + p.current_x;
    d[1] = u * s + v * c + p.current_y;
    d[2] = w;
    d[3] = r;
    d[4] = (tau.X + p.mass * r * v - (p.drag_u + p.drag_uu * std::abs(u)) * u) / p.m_u();
    d[5] = (tau.Y - p.mass * r * u - (p.drag_v + p.drag_vv * std::abs(v)) * v) / p.m_v();
    d[6] = (tau.N - (p.drag_r + p.drag_rr * std::abs(r)) * r) / p.m_r();
    d[7] = (tau.Z - (p.drag_w + p.drag_ww * std::abs(w)) * w) / p.m_w();
    return d;
}

inline Vec8 axpy(const Vec8& q, double h, const Vec8& k) {
    Vec8 out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = q[i] + h * k[i];
    }
    return out;
}

} // namespace detail

/// Advance the vehicle by one RK4 step of length `dt` under a constant wrench.
///
/// Rejects non-finite inputs and dt outside (0, 0.1]. After the step the
/// heading is wrapped to (-pi, pi] and a state above the surface is projected
/// to z = 0 with w = max(w, 0).
inline VehicleState step_dynamics(const VehicleState& state, const Wrench& tau,
                                  const VehicleParams& params, double dt) {
    require_finite({state.x, state.y, state.z, state.psi, state.u, state.v, state.r,
                    state.w, state.t},
                   "step_dynamics state");
    require_finite({tau.X, tau.Y, tau.N, tau.Z}, "step_dynamics wrench");
    if (!(dt > 0.0 && dt <= kMaxStep)) {
        throw Error(ErrorCode::OutOfRange, "step_dynamics: dt must be in (0, 0.1]");
    }
    validate(params);

    using detail::axpy;
    const detail::Vec8 q0{state.x, state.y, state.z, state.psi,
                          state.u, state.v, state.r, state.w};
    const auto k1 = detail::derivative(q0, tau, params);
    const auto k2 = detail::derivative(axpy(q0, 0.5 * dt, k1), tau, params);
    const auto k3 = detail::derivative(axpy(q0, 0.5 * dt, k2), tau, params);
    const auto k4 = detail::derivative(axpy(q0, dt, k3), tau, params);

    detail::Vec8 q1;
    for (std::size_t i = 0; i < q1.size(); ++i) {
        q1[i] = q0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    VehicleState next;
    next.x = q1[0];
    next.y = q1[1];
    next.z = q1[2];
    next.psi = wrap_angle(q1[3]);
    next.u = q1[4];
    next.v = q1[5];
    next.r = q1[6];
    next.w = q1[7];
    next.t = state.t + dt;

    if (next.z < 0.0) {
        next.z = 0.0;
        next.w = std::max(next.w, 0.0);
    }
    return next;
}

/// Body velocities (u, v) rotated into the north/east plane, current excluded.
inline Vec2 world_velocity(const VehicleState& s) {
    const double c = std::cos(s.psi), sn = std::sin(s.psi);
    return {s.u * c - s.v * sn, s.u * sn + s.v * c};
}

} // namespace ursula::dynamics
