// Operational / navigation / link mode state machine, per-mode command
// legality, and the semi-autonomous posture (SAUTPOS) controller.
#pragma once

#include "ursula/core.hpp"
#include "ursula/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ursula::modes {

enum class OpMode { EXP, INT };
enum class NavMode { AUTNAV, MANCON, SAUTPOS };
enum class LinkMode { TET, NOWIRE };

inline std::string_view to_string(OpMode m) { return m == OpMode::EXP ? "EXP" : "INT"; }
inline std::string_view to_string(NavMode m) {
    switch (m) {
    case NavMode::AUTNAV: return "AUTNAV";
    case NavMode::MANCON: return "MANCON";
    case NavMode::SAUTPOS: return "SAUTPOS";
    }
    return "?";
}
inline std::string_view to_string(LinkMode m) { return m == LinkMode::TET ? "TET" : "NOWIRE"; }

inline std::optional<OpMode> op_from_string(std::string_view s) {
    if (s == "EXP") return OpMode::EXP;
    if (s == "INT") return OpMode::INT;
    return std::nullopt;
}
inline std::optional<NavMode> nav_from_string(std::string_view s) {
    if (s == "AUTNAV") return NavMode::AUTNAV;
    if (s == "MANCON") return NavMode::MANCON;
    if (s == "SAUTPOS") return NavMode::SAUTPOS;
    return std::nullopt;
}
inline std::optional<LinkMode> link_from_string(std::string_view s) {
    if (s == "TET") return LinkMode::TET;
    if (s == "NOWIRE") return LinkMode::NOWIRE;
    return std::nullopt;
}

struct ModeState {
    OpMode op = OpMode::EXP;
    NavMode nav = NavMode::AUTNAV;
    LinkMode link = LinkMode::TET;

    bool operator==(const ModeState&) const = default;
};

inline bool teleop_bearing(NavMode n) { return n == NavMode::MANCON || n == NavMode::SAUTPOS; }

/// MANCON/SAUTPOS only in INT (equivalently, EXP implies AUTNAV).
inline bool is_valid(const ModeState& m) { return !(teleop_bearing(m.nav) && m.op != OpMode::INT); }

/// All 12 combinations of the three mode axes.
inline std::vector<ModeState> all_mode_states() {
    std::vector<ModeState> out;
    for (OpMode o : {OpMode::EXP, OpMode::INT}) {
        for (NavMode n : {NavMode::AUTNAV, NavMode::MANCON, NavMode::SAUTPOS}) {
            for (LinkMode l : {LinkMode::TET, LinkMode::NOWIRE}) out.push_back({o, n, l});
        }
    }
    return out;
}

inline std::string to_string(const ModeState& m) {
    return "(" + std::string(to_string(m.op)) + ", " + std::string(to_string(m.nav)) + ", " +
           std::string(to_string(m.link)) + ")";
}

// -----------------------------------------------------------------------------
// Transitions
// -----------------------------------------------------------------------------

enum class EventSource { Operator, Autonomy, Fault };

inline std::string_view to_string(EventSource s) {
    switch (s) {
    case EventSource::Operator: return "operator";
    case EventSource::Autonomy: return "autonomy";
    case EventSource::Fault: return "fault";
    }
    return "?";
}

struct TransitionEvent {
    ModeState requested;
    EventSource source = EventSource::Operator;
    std::string detail{}; ///< free text, e.g. the fault that raised the event
};

/// Machine-readable rejection reasons. The string forms are part of the
/// wire protocol.
enum class Reason {
    None,
    RequiresInt,     ///< MANCON/SAUTPOS requested outside INT
    LinkUnavailable, ///< target link mode has no working command link
    ModeViolation,   ///< command not permitted in the current mode
    Schema,          ///< malformed message
    Validation,      ///< well-formed message with out-of-range values
    Unreachable,     ///< limb target beyond reach
    EStopActive,     ///< actuation command while the emergency stop is latched
};

inline std::string_view to_string(Reason r) {
    switch (r) {
    case Reason::None: return "none";
    case Reason::RequiresInt: return "requires_int";
    case Reason::LinkUnavailable: return "link_unavailable";
    case Reason::ModeViolation: return "mode_violation";
    case Reason::Schema: return "schema";
    case Reason::Validation: return "validation";
    case Reason::Unreachable: return "unreachable";
    case Reason::EStopActive: return "estop_active";
    }
    return "?";
}

/// Availability of the command links. The tether is always available.
struct LinkStatus {
    bool wireless = true;
};

struct TransitionOutcome {
    bool accepted = false;
    ModeState state;            ///< resulting state (unchanged on rejection)
    Reason reason = Reason::None;
    bool hold_position = false; ///< fault-forced AUTNAV: keep station
};

/// Evaluate a transition request.
///
/// Fault events are never rejected: they force (op, AUTNAV, link) with
/// hold-position set, whatever was requested. Other sources are accepted
/// iff the target satisfies the mode invariant and its link mode has a
/// working command link whenever the target is NOWIRE, whether that is
/// needed to carry teleoperation or to switch links mid-dive.
inline TransitionOutcome request_transition(const ModeState& current, const TransitionEvent& ev,
                                            const LinkStatus& link) {
    TransitionOutcome out;
    out.state = current;
    if (ev.source == EventSource::Fault) {
        out.accepted = true;
        out.state = {current.op, NavMode::AUTNAV, current.link};
        out.hold_position = true;
        return out;
    }
    const ModeState& target = ev.requested;
    if (!is_valid(target)) {
        out.reason = Reason::RequiresInt;
        return out;
    }
    const bool link_needed =
        target.link == LinkMode::NOWIRE && (teleop_bearing(target.nav) || target.link != current.link);
    if (link_needed && !link.wireless) {
        out.reason = Reason::LinkUnavailable;
        return out;
    }
    out.accepted = true;
    out.state = target;
    return out;
}

/// Fault event raised when a teleoperated NOWIRE mode loses its link.
inline std::optional<TransitionEvent> check_link(const ModeState& m, const LinkStatus& link) {
    if (m.link == LinkMode::NOWIRE && teleop_bearing(m.nav) && !link.wireless) {
        return TransitionEvent{{m.op, NavMode::AUTNAV, m.link}, EventSource::Fault, "link_lost"};
    }
    return std::nullopt;
}

// -----------------------------------------------------------------------------
// Command legality
// -----------------------------------------------------------------------------

enum class CommandKind { ModeTransition, WaypointUpload, FinOverride, LimbMaster, JetFire, EStop };

inline constexpr std::array<CommandKind, 6> kAllCommandKinds{
    CommandKind::ModeTransition, CommandKind::WaypointUpload, CommandKind::FinOverride,
    CommandKind::LimbMaster,     CommandKind::JetFire,        CommandKind::EStop};

inline std::string_view to_string(CommandKind k) {
    switch (k) {
    case CommandKind::ModeTransition: return "mode";
    case CommandKind::WaypointUpload: return "waypoints";
    case CommandKind::FinOverride: return "fin_override";
    case CommandKind::LimbMaster: return "limb_master";
    case CommandKind::JetFire: return "jet_fire";
    case CommandKind::EStop: return "estop";
    }
    return "?";
}

inline std::optional<CommandKind> command_from_string(std::string_view s) {
    for (CommandKind k : kAllCommandKinds) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

/// Limb master increments need INT with MANCON or SAUTPOS. Direct fin and
/// jet actuation needs MANCON. Waypoint uploads are accepted in any mode and
/// take effect in AUTNAV. Mode requests and e-stop are always deliverable.
inline bool command_allowed(const ModeState& m, CommandKind k) {
    switch (k) {
    case CommandKind::LimbMaster: return m.op == OpMode::INT && teleop_bearing(m.nav);
    case CommandKind::FinOverride:
    case CommandKind::JetFire: return m.op == OpMode::INT && m.nav == NavMode::MANCON;
    default: return true;
    }
}

// -----------------------------------------------------------------------------
// Semi-autonomous posture control
// -----------------------------------------------------------------------------

/// Limb base placement on the hull. `rotation` maps limb-frame vectors into
/// the body frame; the default points the limb z axis forward along the hull.
struct LimbMount {
    Vec3 position = Vec3(0.6, 0.0, 0.0);
    Mat3 rotation = (Mat3() << 0, 0, 1, 0, 1, 0, -1, 0, 0).finished();
};

inline std::array<LimbMount, 2> default_mounts() {
    std::array<LimbMount, 2> m;
    m[0].position = {0.6, -0.08, 0.05};
    m[1].position = {0.6, 0.08, 0.05};
    return m;
}

/// Body point to world, yaw only.
inline Vec3 body_to_world(const dynamics::VehicleState& s, const Vec3& p_body) {
    return Vec3(s.x, s.y, s.z) + rot_z(s.psi) * p_body;
}

inline Vec3 world_to_limb(const dynamics::VehicleState& s, const LimbMount& mount, const Vec3& p_world) {
    const Vec3 p_body = rot_z(s.psi).transpose() * (p_world - Vec3(s.x, s.y, s.z));
    return mount.rotation.transpose() * (p_body - mount.position);
}

struct StationGains {
    double kp_xy = 20.0;
    double kd_xy = 30.0;
    double kp_psi = 10.0;
    double kd_psi = 8.5;
    double kp_z = 20.0;
    double kd_z = 45.0;
};

/// Pose (x, y, z, psi) to hold.
struct StationSetpoint {
    double x = 0.0, y = 0.0, z = 0.0, psi = 0.0;
};

/// Body-frame PD wrench toward a station setpoint.
inline dynamics::Wrench station_keeping(const dynamics::VehicleState& s, const StationSetpoint& sp,
                                        const StationGains& g) {
    const Vec3 e_body = rot_z(s.psi).transpose() * Vec3(sp.x - s.x, sp.y - s.y, 0.0);
    dynamics::Wrench w;
    w.X = g.kp_xy * e_body.x() - g.kd_xy * s.u;
    w.Y = g.kp_xy * e_body.y() - g.kd_xy * s.v;
    w.N = g.kp_psi * wrap_angle(sp.psi - s.psi) - g.kd_psi * s.r;
    w.Z = g.kp_z * (sp.z - s.z) - g.kd_z * s.w;
    return w;
}

struct SautposOutput {
    dynamics::Wrench wrench;
    std::vector<Vec3> limb_targets; ///< per limb, in that limb's base frame
    StationSetpoint effective_setpoint;
};

/// Whole-body posture step: limb tip targets (world frame) are the primary
/// task and are re-expressed in each limb frame from the current pose; the
/// vehicle only station-keeps unless a target lies beyond `reach_margin` of
/// its limb length, in which case the station setpoint is shifted toward the
/// target by the excess (averaged over limbs that need it). Limb targets are
/// clipped just inside the reach sphere.
inline SautposOutput sautpos_step(const ModeState& mode, const dynamics::VehicleState& s,
                                  const std::vector<LimbMount>& mounts,
                                  const std::vector<Vec3>& world_targets, double limb_length,
                                  const StationSetpoint& station, const StationGains& gains = {},
                                  double reach_margin = 0.9) {
    if (!(mode.op == OpMode::INT && mode.nav == NavMode::SAUTPOS)) {
        throw Error(ErrorCode::ModeViolation, "sautpos_step requires (INT, SAUTPOS), mode is " + to_string(mode));
    }
    if (mounts.size() != world_targets.size()) {
        throw Error(ErrorCode::InvalidArgument, "sautpos_step: one target per limb");
    }
    SautposOutput out;
    Vec3 shift = Vec3::Zero();
    int shifting = 0;
    for (std::size_t i = 0; i < mounts.size(); ++i) {
        const Vec3 base = body_to_world(s, mounts[i].position);
        const Vec3 d = world_targets[i] - base;
        const double excess = d.norm() - reach_margin * limb_length;
        if (excess > 0.0) {
            shift += excess * d.normalized();
            ++shifting;
        }
        Vec3 local = world_to_limb(s, mounts[i], world_targets[i]);
        const double lim = limb_length * (1.0 - 1e-6);
        if (local.norm() > lim) local *= lim / local.norm();
        out.limb_targets.push_back(local);
    }
    out.effective_setpoint = station;
    if (shifting > 0) {
        shift /= shifting;
        out.effective_setpoint.x += shift.x();
        out.effective_setpoint.y += shift.y();
        out.effective_setpoint.z = std::max(0.0, out.effective_setpoint.z + shift.z());
    }
    out.wrench = station_keeping(s, out.effective_setpoint, gains);
    return out;
}

} // namespace ursula::modes
