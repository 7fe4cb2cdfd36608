// Independent oracles shared by the unit tests and the acceptance binary.
#pragma once

#include "ursula/guidance.hpp"
#include "ursula/limbs.hpp"
#include "ursula/modes.hpp"
#include "ursula/propulsion.hpp"
#include "ursula/teleop.hpp"

#include <Eigen/LU>

#include <random>
#include <vector>

namespace ursula::oracle {

// --- dynamics ---------------------------------------------------------------------

inline dynamics::VehicleState run_dynamics(dynamics::VehicleState s, const dynamics::Wrench& tau,
                                           const dynamics::VehicleParams& p, double dt, double t_end) {
    const int steps = static_cast<int>(std::lround(t_end / dt));
    for (int i = 0; i < steps; ++i) s = dynamics::step_dynamics(s, tau, p, dt);
    return s;
}

inline double endpoint_error(const dynamics::VehicleState& a, const dynamics::VehicleState& b) {
    const double e[] = {a.x - b.x, a.y - b.y, a.z - b.z, wrap_angle(a.psi - b.psi),
                        a.u - b.u, a.v - b.v, a.r - b.r, a.w - b.w};
    double s = 0.0;
    for (double v : e) s += v * v;
    return std::sqrt(s);
}

/// Endpoint error ratio between dt and dt/2 runs against a dt/8 reference.
inline double rk4_error_ratio() {
    const dynamics::VehicleParams p;
    dynamics::VehicleState s0;
    s0.z = 30.0;
    s0.u = 0.6;
    s0.v = -0.3;
    s0.r = 0.4;
    s0.w = 0.2;
    const dynamics::Wrench tau{25.0, -8.0, 3.0, 6.0};
    const double dt = 0.1;
    const auto ref = run_dynamics(s0, tau, p, dt / 8, 10.0);
    const double e1 = endpoint_error(run_dynamics(s0, tau, p, dt, 10.0), ref);
    const double e2 = endpoint_error(run_dynamics(s0, tau, p, dt / 2, 10.0), ref);
    return e1 / e2;
}

// --- propulsion -------------------------------------------------------------------

inline std::vector<propulsion::FinState> four_fins(double swivel, double amplitude, double frequency) {
    using namespace propulsion;
    std::vector<FinState> fins;
    for (FinId id : {FinId::BowPort, FinId::BowStbd, FinId::SternPort, FinId::SternStbd}) {
        fins.push_back({id, swivel, FinMode::StandingWave, amplitude, frequency, 0.0});
    }
    return fins;
}

inline std::vector<propulsion::FinState> random_feasible(std::mt19937_64& rng, const propulsion::FinParams& p) {
    using namespace propulsion;
    std::uniform_real_distribution<double> sw(-kPi / 2, kPi / 2), amp(0.0, p.amplitude_max),
        freq(0.0, p.frequency_max), ph(-kPi, kPi);
    auto fins = four_fins(0, 0, 0);
    for (auto& f : fins) {
        f.swivel = sw(rng);
        f.amplitude = amp(rng);
        f.frequency = freq(rng);
        f.phase = ph(rng);
        f.mode = rng() % 2 ? FinMode::StandingWave : FinMode::TravelingWave;
    }
    return fins;
}

/// Impulse of a full discharge: RK4 on dV/dt = -c_d sqrt(k_p V) at 1e-4 s,
/// trapezoid on rho Q^2.
inline double jet_impulse_oracle(const propulsion::JetParams& p) {
    auto outflow = [&](double v) { return p.discharge_coeff * std::sqrt(p.elastic_constant * std::max(v, 0.0)); };
    double v = p.capacity, impulse = 0.0;
    const double h = 1e-4;
    for (int i = 0; i < 400000 && v > 0.0; ++i) {
        const double q0 = outflow(v);
        const double k1 = -outflow(v), k2 = -outflow(v + 0.5 * h * k1), k3 = -outflow(v + 0.5 * h * k2),
                     k4 = -outflow(v + h * k3);
        const double vn = std::max(0.0, v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
        impulse += 0.5 * h * p.thrust_factor * (q0 * q0 + outflow(vn) * outflow(vn));
        v = vn;
    }
    return impulse;
}

// --- limbs ------------------------------------------------------------------------

inline limbs::LimbConfig uniform_config(const limbs::LimbGeometry& g, double kappa, double phi) {
    limbs::LimbConfig c = limbs::LimbConfig::straight(g.n_segments);
    for (auto& s : c.segments) s = {kappa, phi};
    return c;
}

inline limbs::LimbConfig random_config(std::mt19937_64& rng, const limbs::LimbGeometry& g) {
    std::uniform_real_distribution<double> k(-g.max_curvature(), g.max_curvature()), ph(-kPi, kPi);
    limbs::LimbConfig c = limbs::LimbConfig::straight(g.n_segments);
    for (auto& s : c.segments) s = {k(rng), ph(rng)};
    return c;
}

// --- guidance ---------------------------------------------------------------------

inline Mat3 random_spd(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat3 b;
    for (int i = 0; i < 9; ++i) b(i) = n(rng);
    Mat3 m = b * b.transpose() + 0.1 * Mat3::Identity();
    return 0.5 * (m + m.transpose());
}

/// Minimise Q^T M^-1 Q subject to A M^-1 Q = r through the KKT system.
inline Vec3 kkt_oracle(const Mat3& m, const Eigen::MatrixXd& a, const Eigen::VectorXd& r) {
    const Mat3 minv = m.inverse();
    const Eigen::Index k = a.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(3 + k, 3 + k);
    kkt.topLeftCorner(3, 3) = 2.0 * minv;
    kkt.topRightCorner(3, k) = (a * minv).transpose();
    kkt.bottomLeftCorner(k, 3) = a * minv;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 + k);
    rhs.tail(k) = r;
    return kkt.fullPivLu().solve(rhs).head(3);
}

struct LosRun {
    dynamics::VehicleState state;
    std::vector<double> cross_track;
    std::vector<double> closest; ///< per waypoint, horizontal [m]
    std::size_t active = 0;
    bool complete = false;
};

/// LOS + autopilot + hull, wrench applied directly.
inline LosRun run_los(dynamics::VehicleState s, const guidance::WaypointPlan& plan, guidance::LosParams los,
                      const dynamics::VehicleParams& vp, double t_end, double dt = 0.05, std::size_t active = 1) {
    LosRun out;
    out.closest.assign(plan.waypoints.size(), std::numeric_limits<double>::infinity());
    guidance::AutopilotState ap;
    const int steps = static_cast<int>(std::lround(t_end / dt));
    for (int i = 0; i < steps; ++i) {
        for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
            out.closest[k] = std::min(out.closest[k], std::hypot(plan.waypoints[k].x - s.x, plan.waypoints[k].y - s.y));
        }
        const auto cmd = guidance::los_step(s, plan, los, active, dt);
        los = cmd.params;
        active = cmd.active;
        out.cross_track.push_back(cmd.cross_track);
        if (cmd.complete) {
            out.complete = true;
            break;
        }
        const auto a = guidance::autopilot(cmd.heading, cmd.speed, {}, s, {}, ap, dt);
        ap = a.state;
        s = dynamics::step_dynamics(s, a.wrench, vp, dt);
    }
    out.state = s;
    out.active = active;
    return out;
}

inline double mean_abs_tail(const std::vector<double>& v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) acc += std::abs(v[i]);
    return acc / static_cast<double>(n);
}

/// Five waypoints in a 60 m square, consecutive points at least 10 m apart.
inline guidance::WaypointPlan random_plan(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-30, 30);
    guidance::WaypointPlan plan;
    while (plan.waypoints.size() < 5) {
        guidance::Waypoint w{pos(rng), pos(rng), {}};
        const double px = plan.waypoints.empty() ? 0.0 : plan.waypoints.back().x;
        const double py = plan.waypoints.empty() ? 0.0 : plan.waypoints.back().y;
        if (std::hypot(w.x - px, w.y - py) >= 10.0) plan.waypoints.push_back(w);
    }
    return plan;
}

/// Steady cross-track under a constant 0.1 m/s cross current, last 50 s of 200 s.
inline double steady_cross_track(double gamma) {
    dynamics::VehicleParams vp;
    vp.current_y = 0.1;
    dynamics::VehicleState s;
    s.z = 5.0;
    guidance::WaypointPlan plan;
    plan.waypoints = {{-10, 0, {}}, {1000, 0, {}}};
    guidance::LosParams los;
    los.gamma = gamma;
    return mean_abs_tail(run_los(s, plan, los, vp, 200.0).cross_track, 1000);
}

/// Worst horizontal error after 30 s tracking a 5 m circle at 0.5 m/s.
inline double circle_tracking_error() {
    const dynamics::VehicleParams vp;
    const auto ref = guidance::TrajectoryRef::circle(0, 0, 5.0, 0.5, 400.0);
    dynamics::VehicleState s;
    s.x = 5.5;
    s.y = -0.5;
    s.z = 5.0;
    s.psi = 1.2;
    const double dt = 0.02;
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double t = i * dt;
        s = dynamics::step_dynamics(s, guidance::uk_tracking_wrench(s, ref, t, vp, 1.0, 2.0), vp, dt);
        const auto d = ref.at(t + dt);
        if (t + dt > 30.0) worst = std::max(worst, std::hypot(s.x - d.pos(0), s.y - d.pos(1)));
    }
    return worst;
}

// --- teleop -----------------------------------------------------------------------

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline double angle_between_lines(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

inline contact::ProxyEnvironment random_proxy(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> off(-0.3, 0.3), half(0.1, 0.5);
    std::uniform_int_distribution<int> count(1, 3);
    contact::ProxyEnvironment env;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        contact::ContactPlane p = contact::make_plane(random_unit(rng), off(rng));
        p.half_u = half(rng);
        p.half_v = half(rng);
        env.planes.push_back(p);
    }
    return env;
}

// --- modes ------------------------------------------------------------------------

inline constexpr modes::ModeState kValidModes[] = {
    {modes::OpMode::EXP, modes::NavMode::AUTNAV, modes::LinkMode::TET},
    {modes::OpMode::EXP, modes::NavMode::AUTNAV, modes::LinkMode::NOWIRE},
    {modes::OpMode::INT, modes::NavMode::AUTNAV, modes::LinkMode::TET},
    {modes::OpMode::INT, modes::NavMode::AUTNAV, modes::LinkMode::NOWIRE},
    {modes::OpMode::INT, modes::NavMode::MANCON, modes::LinkMode::TET},
    {modes::OpMode::INT, modes::NavMode::MANCON, modes::LinkMode::NOWIRE},
    {modes::OpMode::INT, modes::NavMode::SAUTPOS, modes::LinkMode::TET},
    {modes::OpMode::INT, modes::NavMode::SAUTPOS, modes::LinkMode::NOWIRE},
};

inline bool listed_valid(const modes::ModeState& m) {
    for (const auto& v : kValidModes) {
        if (v == m) return true;
    }
    return false;
}

/// Expected outcome written out case by case from the transition rules.
inline modes::TransitionOutcome transition_oracle(const modes::ModeState& cur, const modes::ModeState& req,
                                                  modes::EventSource src, bool wireless) {
    using namespace modes;
    if (src == EventSource::Fault) return {true, {cur.op, NavMode::AUTNAV, cur.link}, Reason::None, true};
    if (!listed_valid(req)) return {false, cur, Reason::RequiresInt, false};
    if (req.link == LinkMode::NOWIRE && !wireless) {
        const bool teleop = req.nav != NavMode::AUTNAV;
        const bool switching = cur.link == LinkMode::TET;
        if (teleop || switching) return {false, cur, Reason::LinkUnavailable, false};
    }
    return {true, req, Reason::None, false};
}

} // namespace ursula::oracle
