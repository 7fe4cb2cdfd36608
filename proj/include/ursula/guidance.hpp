// Planar guidance: adaptive lookahead line-of-sight for waypoint plans,
// Udwadia-Kalaba constraint forces for time-parameterized trajectories, and
// a heading/speed/depth autopilot.
#pragma once

#include "ursula/core.hpp"
#include "ursula/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace ursula::guidance {

using dynamics::VehicleParams;
using dynamics::VehicleState;
using dynamics::Wrench;

// =============================================================================
// Line-of-sight waypoint guidance
// =============================================================================

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> z; ///< depth setpoint for the leg ending here

    bool operator==(const Waypoint&) const = default;
};

struct WaypointPlan {
    std::vector<Waypoint> waypoints;
    double acceptance_radius = 1.0;
    double cruise_speed = 0.5;

    bool operator==(const WaypointPlan&) const = default;
};

inline void validate(const WaypointPlan& plan) {
    if (plan.waypoints.empty()) {
        throw Error(ErrorCode::InvalidArgument, "waypoint plan: needs at least one waypoint");
    }
    if (!(plan.acceptance_radius > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "waypoint plan: acceptance_radius must be > 0");
    }
    if (!(plan.cruise_speed >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "waypoint plan: cruise_speed must be >= 0");
    }
}

struct LosParams {
    double lookahead = 2.4;   ///< Delta [m], twice the hull length
    double gamma = 0.0;       ///< drift adaptation gain [rad/(m s)]
    double drift_hat = 0.0;   ///< drift compensation estimate [rad]
    double drift_limit = 0.6; ///< anti-windup clamp on |drift_hat| [rad]
};

struct LosCommand {
    double heading = 0.0; ///< desired heading [rad]
    double speed = 0.0;   ///< desired surge speed [m/s]
    std::size_t active = 0;
    double cross_track = 0.0; ///< e [m], positive to starboard of the leg
    std::optional<double> depth;
    bool complete = false;
    LosParams params;
};

/// One guidance update.
///
/// The first waypoint is approached directly; afterwards the vehicle tracks
/// the leg from waypoint k-1 to waypoint k with
///
///   psi_d = chi + atan(-e / Delta) + drift_hat,
///   drift_hat' = -gamma * e * Delta / sqrt(Delta^2 + e^2)   (clamped),
///
/// where chi is the leg azimuth and e the cross-track error. The drift term
/// acts as an integral on e, cancelling the crab angle a steady current
/// requires. Once the final waypoint is inside the acceptance radius the
/// commanded speed is zero.
inline LosCommand los_step(const VehicleState& state, const WaypointPlan& plan,
                           const LosParams& params, std::size_t active, double dt) {
    validate(plan);
    if (!(params.lookahead > 0.0) || params.gamma < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "los params: lookahead must be > 0, gamma >= 0");
    }
    const auto& wps = plan.waypoints;
    while (active < wps.size() &&
           std::hypot(wps[active].x - state.x, wps[active].y - state.y) < plan.acceptance_radius) {
        ++active;
    }

    LosCommand cmd;
    cmd.params = params;
    cmd.active = active;
    if (active >= wps.size()) {
        cmd.complete = true;
        cmd.heading = state.psi;
        cmd.speed = 0.0;
        cmd.depth = wps.back().z;
        return cmd;
    }
    cmd.depth = wps[active].z;
    cmd.speed = plan.cruise_speed;
    const Waypoint& to = wps[active];
    if (active == 0) {
        cmd.heading = std::atan2(to.y - state.y, to.x - state.x);
        return cmd;
    }
    const Waypoint& from = wps[active - 1];
    const double chi = std::atan2(to.y - from.y, to.x - from.x);
    const double e = -(state.x - from.x) * std::sin(chi) + (state.y - from.y) * std::cos(chi);
    const double delta = params.lookahead;

    double drift = params.drift_hat - params.gamma * e * delta / std::hypot(delta, e) * dt;
    drift = std::clamp(drift, -params.drift_limit, params.drift_limit);
    cmd.params.drift_hat = drift;
    cmd.cross_track = e;
    cmd.heading = wrap_angle(chi + std::atan(-e / delta) + drift);
    return cmd;
}

// =============================================================================
// Udwadia-Kalaba constraint forces
// =============================================================================

namespace detail {

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
    Eigen::VectorXd inv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) inv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace detail

/// Constraint force for M acc = tau_free + Q_c subject to A acc = b:
///
///   a   = M^-1 tau_free
///   Q_c = M^(1/2) pinv(A M^(-1/2)) (b - A a)
///
/// Q_c is the force of least M^-1-norm that makes the constrained
/// acceleration satisfy the constraints (least squares when inconsistent).
inline Vec3 uk_force(const Mat3& inertia, const Vec3& tau_free, const Eigen::MatrixXd& a_mat,
                     const Eigen::VectorXd& b) {
    if (a_mat.cols() != 3 || a_mat.rows() != b.size()) {
        throw Error(ErrorCode::InvalidArgument, "uk_force: A must be k x 3 with k = |b|");
    }
    if (!inertia.allFinite() || !a_mat.allFinite() || !b.allFinite() || !tau_free.allFinite()) {
        throw Error(ErrorCode::NonFinite, "uk_force: non-finite input");
    }
    if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * inertia.cwiseAbs().maxCoeff()) {
        throw Error(ErrorCode::NotPositiveDefinite, "uk_force: M is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
    const Vec3 ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "uk_force: M is not positive definite");
    }
    const Mat3& vecs = eig.eigenvectors();
    const Mat3 sqrt_m = vecs * ev.cwiseSqrt().asDiagonal() * vecs.transpose();
    const Mat3 inv_sqrt_m = vecs * ev.cwiseSqrt().cwiseInverse().asDiagonal() * vecs.transpose();

    const Vec3 accel_free = eig.eigenvectors() * (ev.cwiseInverse().asDiagonal() *
                                                  (vecs.transpose() * tau_free));
    const Eigen::VectorXd mismatch = b - a_mat * accel_free;
    return sqrt_m * (detail::pinv(a_mat * inv_sqrt_m) * mismatch);
}

/// Planar inertia diag(m + X_udot, m + Y_vdot, I_z + N_rdot).
inline Mat3 planar_inertia(const VehicleParams& p) {
    return Eigen::Vector3d(p.m_u(), p.m_v(), p.m_r()).asDiagonal();
}

/// -C_RB(nu) nu - D(nu) nu for the planar DOFs: the forces the hull exerts on
/// itself, i.e. tau_free when no actuation is applied.
inline Vec3 hull_forces(const VehicleState& s, const VehicleParams& p) {
    return {p.mass * s.r * s.v - (p.drag_u + p.drag_uu * std::abs(s.u)) * s.u,
            -p.mass * s.r * s.u - (p.drag_v + p.drag_vv * std::abs(s.v)) * s.v,
            -(p.drag_r + p.drag_rr * std::abs(s.r)) * s.r};
}

// =============================================================================
// Time-parameterized references
// =============================================================================

/// Pose (x, y, psi) with first and second time derivatives.
struct TrajectorySample {
    Vec3 pos = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
    Vec3 acc = Vec3::Zero();
};

class TrajectoryRef {
  public:
    using Fn = std::function<TrajectorySample(double)>;

    TrajectoryRef(Fn fn, double t_begin, double t_end) : fn_(std::move(fn)), t0_(t_begin), t1_(t_end) {
        if (!(t_end >= t_begin)) {
            throw Error(ErrorCode::InvalidArgument, "trajectory: empty time domain");
        }
    }

    /// Counter-clockwise (north -> east) circle with the heading tangent.
    static TrajectoryRef circle(double cx, double cy, double radius, double speed, double t_end,
                                double phase = 0.0) {
        const double w = speed / radius;
        return TrajectoryRef(
            [=](double t) {
                const double a = phase + w * t;
                TrajectorySample s;
                s.pos = {cx + radius * std::cos(a), cy + radius * std::sin(a), wrap_angle(a + kPi / 2)};
                s.vel = {-radius * w * std::sin(a), radius * w * std::cos(a), w};
                s.acc = {-radius * w * w * std::cos(a), -radius * w * w * std::sin(a), 0.0};
                return s;
            },
            0.0, t_end);
    }

    /// Straight line at constant velocity with fixed heading.
    static TrajectoryRef line(double x0, double y0, double heading, double speed, double t_end) {
        return TrajectoryRef(
            [=](double t) {
                TrajectorySample s;
                s.pos = {x0 + speed * t * std::cos(heading), y0 + speed * t * std::sin(heading), heading};
                s.vel = {speed * std::cos(heading), speed * std::sin(heading), 0.0};
                return s;
            },
            0.0, t_end);
    }

    /// Piecewise cubic Hermite reference through timed samples. Rejects
    /// samples whose velocities disagree with the central difference of
    /// neighbouring positions by more than `tolerance` (relative to the
    /// sample speed, floor 1e-3).
    static TrajectoryRef sampled(std::vector<double> times, std::vector<TrajectorySample> samples,
                                 double tolerance = 0.05) {
        if (times.size() < 2 || times.size() != samples.size()) {
            throw Error(ErrorCode::InvalidArgument, "trajectory: need >= 2 timed samples");
        }
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) {
                throw Error(ErrorCode::InvalidArgument, "trajectory: times must increase");
            }
        }
        for (std::size_t i = 1; i + 1 < times.size(); ++i) {
            Vec3 fd = (samples[i + 1].pos - samples[i - 1].pos) / (times[i + 1] - times[i - 1]);
            fd(2) = wrap_angle(samples[i + 1].pos(2) - samples[i - 1].pos(2)) / (times[i + 1] - times[i - 1]);
            const double scale = std::max(samples[i].vel.norm(), 1e-3);
            if ((fd - samples[i].vel).norm() > tolerance * scale + 1e-3) {
                throw Error(ErrorCode::InvalidArgument,
                            "trajectory: velocity inconsistent with samples at index " + std::to_string(i));
            }
        }
        const double t0 = times.front(), t1 = times.back();
        return TrajectoryRef(
            [times = std::move(times), samples = std::move(samples)](double t) {
                auto it = std::upper_bound(times.begin(), times.end(), t);
                std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
                k = std::min(k, times.size() - 2);
                const double h = times[k + 1] - times[k];
                const double u = (t - times[k]) / h;
                const auto& a = samples[k];
                const auto& b = samples[k + 1];
                Vec3 pb = b.pos;
                pb(2) = a.pos(2) + wrap_angle(b.pos(2) - a.pos(2));
                const double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u,
                             h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
                const double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1,
                             d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
                TrajectorySample s;
                s.pos = h00 * a.pos + h10 * h * a.vel + h01 * pb + h11 * h * b.vel;
                s.pos(2) = wrap_angle(s.pos(2));
                s.vel = (d00 * a.pos + d10 * h * a.vel + d01 * pb + d11 * h * b.vel) / h;
                s.acc = (1 - u) * a.acc + u * b.acc;
                return s;
            },
            t0, t1);
    }

    TrajectorySample at(double t) const {
        if (!(t >= t0_ && t <= t1_)) {
            throw Error(ErrorCode::OutOfRange, "trajectory: t outside reference domain");
        }
        return fn_(t);
    }

    double t_begin() const { return t0_; }
    double t_end() const { return t1_; }

  private:
    Fn fn_;
    double t0_;
    double t1_;
};

struct Constraint {
    Mat3 a = Mat3::Identity();
    Vec3 b = Vec3::Zero();
};

/// Servo constraint for reference tracking. With eta = (x, y, psi) and
/// eta_dot = R(psi) nu, the constraint asks for world-frame acceleration
///
///   eta_ddot = acc_d + kd (vel_d - eta_dot) + kp (pos_d - eta),
///
/// which, since eta_ddot = R nu_dot + R_dot nu, becomes A nu_dot = b with
/// A = R(psi) and b = eta_ddot - R_dot nu.
inline Constraint trajectory_constraints(const VehicleState& state, const TrajectoryRef& ref,
                                         double t, double kp, double kd) {
    const TrajectorySample d = ref.at(t);
    const Mat3 rot = rot_z(state.psi);
    const Vec3 nu(state.u, state.v, state.r);
    const Vec3 eta(state.x, state.y, state.psi);
    const Vec3 eta_dot = rot * nu;
    Vec3 pos_err = d.pos - eta;
    pos_err(2) = wrap_angle(pos_err(2));

    Mat3 skew = Mat3::Zero();
    skew(0, 1) = -1.0;
    skew(1, 0) = 1.0;
    const Vec3 rot_dot_nu = state.r * rot * skew * nu;

    Constraint c;
    c.a = rot;
    c.b = d.acc + kd * (d.vel - eta_dot) + kp * pos_err - rot_dot_nu;
    return c;
}

/// Body-frame actuation that makes the hull follow `ref` at time t.
inline Wrench uk_tracking_wrench(const VehicleState& state, const TrajectoryRef& ref, double t,
                                 const VehicleParams& params, double kp, double kd) {
    const Constraint c = trajectory_constraints(state, ref, t, kp, kd);
    const Vec3 q = uk_force(planar_inertia(params), hull_forces(state, params), c.a, c.b);
    return {q(0), q(1), q(2), 0.0};
}

// =============================================================================
// Autopilot
// =============================================================================

struct AutopilotGains {
    double heading_kp = 10.0; ///< [N m / rad]
    double heading_kd = 8.5;  ///< [N m s / rad]
    double speed_kp = 40.0;   ///< [N s / m]
    double speed_ki = 8.0;    ///< [N / m]
    double depth_kp = 20.0;   ///< [N / m]
    double depth_ki = 1.0;    ///< [N / (m s)]
    double depth_kd = 45.0;   ///< [N s / m]
    double integral_limit = 3.0;
};

struct AutopilotState {
    double speed_integral = 0.0;
    double depth_integral = 0.0;
};

struct AutopilotOutput {
    Wrench wrench;
    AutopilotState state;
};

/// PD heading and PI speed loops produce (X, N); Y stays zero in cruise.
/// An independent PID depth loop produces Z when a depth setpoint is given.
inline AutopilotOutput autopilot(double heading_d, double speed_d, std::optional<double> depth_d,
                                 const VehicleState& s, const AutopilotGains& g,
                                 const AutopilotState& ap, double dt) {
    AutopilotOutput out;
    const double speed_err = speed_d - s.u;
    out.state.speed_integral =
        std::clamp(ap.speed_integral + speed_err * dt, -g.integral_limit, g.integral_limit);
    out.wrench.X = g.speed_kp * speed_err + g.speed_ki * out.state.speed_integral;
    out.wrench.N = g.heading_kp * wrap_angle(heading_d - s.psi) - g.heading_kd * s.r;
    if (depth_d) {
        const double depth_err = *depth_d - s.z;
        out.state.depth_integral =
            std::clamp(ap.depth_integral + depth_err * dt, -g.integral_limit, g.integral_limit);
        out.wrench.Z = g.depth_kp * depth_err + g.depth_ki * out.state.depth_integral - g.depth_kd * s.w;
    }
    return out;
}

} // namespace ursula::guidance
