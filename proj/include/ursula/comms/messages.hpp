// Wire messages and their canonical JSON encoding.
//
// Every message is an envelope {v, type, seq, t, body}. Keys are emitted in
// sorted order and numbers in shortest round-trip form, so encoding is a pure
// function of the value. Decoding is strict: unknown fields, missing fields
// and wrong types are schema errors naming the field path.
#pragma once

#include "ursula/comms/json_reader.hpp"
#include "ursula/comms/link.hpp"
#include "ursula/contact.hpp"
#include "ursula/dynamics.hpp"
#include "ursula/guidance.hpp"
#include "ursula/modes.hpp"
#include "ursula/power.hpp"
#include "ursula/propulsion.hpp"
#include "ursula/teleop.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ursula::comms {

inline constexpr std::uint64_t kProtocolVersion = 1;

// -----------------------------------------------------------------------------
// Message bodies
// -----------------------------------------------------------------------------

struct NavSummary {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;
    std::array<double, 9> cov{}; ///< row-major 3x3 over (x, y, psi)

    bool operator==(const NavSummary&) const = default;
};

struct GuidanceSummary {
    std::uint64_t active = 0; ///< index of the waypoint being approached
    bool complete = false;
    double cross_track = 0.0;
    double heading = 0.0; ///< commanded
    double speed = 0.0;   ///< commanded
    std::optional<double> depth;

    bool operator==(const GuidanceSummary&) const = default;
};

struct LimbTelemetry {
    Vec3 tip = Vec3::Zero();       ///< limb frame
    Vec3 direction = Vec3::UnitZ();
    Vec3 target = Vec3::Zero();    ///< commanded tip, limb frame
    std::array<double, 4> tendon_dl{};
    std::array<double, 4> tension{};

    bool operator==(const LimbTelemetry&) const = default;
};

struct PowerSummary {
    power::Source source = power::Source::Battery;
    double soc_wh = 0.0;
    double bus_v = 0.0;
    double mean_load_w = 0.0;
    std::optional<double> endurance_h; ///< null when unbounded
    power::Loads loads{};

    bool operator==(const PowerSummary&) const = default;
};

struct TelemetryFrame {
    dynamics::VehicleState state;
    NavSummary nav;
    modes::ModeState mode;
    GuidanceSummary guidance;
    std::vector<LimbTelemetry> limbs;
    PowerSummary power;
    LinkStatus link;
    std::vector<std::string> faults;
    std::vector<contact::ContactPlane> proxy;
    bool estop = false;
};

struct HapticFrame {
    std::uint64_t limb = 0;
    Vec3 force = Vec3::Zero(); ///< limb frame [N]
    Vec3 tip = Vec3::Zero();   ///< limb frame [m]

    bool operator==(const HapticFrame&) const = default;
};

struct ModeCommand {
    modes::ModeState target;
    bool operator==(const ModeCommand&) const = default;
};

struct WaypointCommand {
    guidance::WaypointPlan plan;
    bool operator==(const WaypointCommand&) const = default;
};

struct FinOverrideCommand {
    std::vector<propulsion::FinState> fins;
    double duration_s = 1.0;
    bool operator==(const FinOverrideCommand&) const = default;
};

struct LimbMasterCommand {
    std::uint64_t limb = 0;
    teleop::MasterCommand master;
    bool operator==(const LimbMasterCommand& o) const {
        return limb == o.limb && master.increment == o.master.increment && master.clutch == o.master.clutch &&
               master.scale == o.master.scale;
    }
};

struct JetFireCommand {
    double nozzle_angle = 0.0; ///< thrust direction in the body plane [rad]
    bool operator==(const JetFireCommand&) const = default;
};

struct EStopCommand {
    bool operator==(const EStopCommand&) const = default;
};

using CommandPayload = std::variant<ModeCommand, WaypointCommand, FinOverrideCommand, LimbMasterCommand,
                                    JetFireCommand, EStopCommand>;

struct Command {
    std::uint64_t id = 0;
    CommandPayload payload;

    modes::CommandKind kind() const { return static_cast<modes::CommandKind>(payload.index()); }
    bool operator==(const Command&) const = default;
};

struct Ack {
    std::uint64_t id = 0;
    modes::CommandKind kind = modes::CommandKind::EStop;
    bool operator==(const Ack&) const = default;
};

struct Reject {
    std::optional<std::uint64_t> id; ///< null when the command could not be parsed
    modes::Reason reason = modes::Reason::Schema;
    std::string detail;
    bool operator==(const Reject&) const = default;
};

using Body = std::variant<TelemetryFrame, HapticFrame, Command, Ack, Reject>;

inline std::string_view type_name(const Body& b) {
    static constexpr std::string_view names[] = {"telemetry", "haptic", "command", "ack", "reject"};
    return names[b.index()];
}

struct Envelope {
    std::uint64_t v = kProtocolVersion;
    std::uint64_t seq = 0;
    double t = 0.0;
    Body body;
};

// -----------------------------------------------------------------------------
// Enum string forms
// -----------------------------------------------------------------------------

inline std::string_view to_string(propulsion::FinMode m) {
    return m == propulsion::FinMode::StandingWave ? "standing_wave" : "traveling_wave";
}

inline std::optional<propulsion::FinMode> fin_mode_from_string(std::string_view s) {
    if (s == "standing_wave") return propulsion::FinMode::StandingWave;
    if (s == "traveling_wave") return propulsion::FinMode::TravelingWave;
    return std::nullopt;
}

inline std::optional<power::Source> source_from_string(std::string_view s) {
    if (s == "battery") return power::Source::Battery;
    if (s == "umbilical") return power::Source::Umbilical;
    return std::nullopt;
}

inline std::optional<modes::Reason> reason_from_string(std::string_view s) {
    for (auto r : {modes::Reason::None, modes::Reason::RequiresInt, modes::Reason::LinkUnavailable,
                   modes::Reason::ModeViolation, modes::Reason::Schema, modes::Reason::Validation,
                   modes::Reason::Unreachable, modes::Reason::EStopActive}) {
        if (modes::to_string(r) == s) return r;
    }
    return std::nullopt;
}

// -----------------------------------------------------------------------------
// Encoding
// -----------------------------------------------------------------------------

namespace detail {

inline Json str(std::string_view s) { return Json(std::string(s)); }

/// Unbounded patch extents travel as null.
inline Json extent(double h) { return std::isfinite(h) ? Json(h) : Json(nullptr); }

inline Json mode_json(const modes::ModeState& m) {
    return {{"link", str(to_string(m.link))}, {"nav", str(to_string(m.nav))}, {"op", str(to_string(m.op))}};
}

inline Json to_json(const TelemetryFrame& f) {
    const auto& s = f.state;
    Json limbs = Json::array();
    for (const auto& l : f.limbs) {
        limbs.push_back({{"direction", to_json_array(l.direction)},
                         {"target", to_json_array(l.target)},
                         {"tendon_dl", to_json_array(l.tendon_dl)},
                         {"tension", to_json_array(l.tension)},
                         {"tip", to_json_array(l.tip)}});
    }
    Json loads = Json::object();
    for (power::Subsystem sub : power::kShedOrder) loads[std::string(power::to_string(sub))] = power::at(f.power.loads, sub);
    Json proxy = Json::array();
    for (const auto& p : f.proxy) {
        proxy.push_back({{"axis_u", to_json_array(p.axis_u)},
                         {"center", to_json_array(p.center)},
                         {"half_u", extent(p.half_u)},
                         {"half_v", extent(p.half_v)},
                         {"normal", to_json_array(p.normal)},
                         {"offset", p.offset},
                         {"stiffness", p.stiffness}});
    }
    Json faults = Json::array();
    for (const auto& x : f.faults) faults.push_back(x);
    return {
        {"estop", f.estop},
        {"faults", faults},
        {"guidance",
         {{"active", f.guidance.active},
          {"complete", f.guidance.complete},
          {"cross_track", f.guidance.cross_track},
          {"depth", nullable(f.guidance.depth)},
          {"heading", f.guidance.heading},
          {"speed", f.guidance.speed}}},
        {"limbs", limbs},
        {"link",
         {{"available", f.link.available},
          {"bandwidth_kbps", f.link.bandwidth_kbps},
          {"kind", str(to_string(f.link.kind))},
          {"latency_ms", f.link.latency_ms}}},
        {"mode", mode_json(f.mode)},
        {"nav", {{"cov", to_json_array(f.nav.cov)}, {"psi", f.nav.psi}, {"x", f.nav.x}, {"y", f.nav.y}}},
        {"power",
         {{"bus_v", f.power.bus_v},
          {"endurance_h", nullable(f.power.endurance_h)},
          {"loads", loads},
          {"mean_load_w", f.power.mean_load_w},
          {"soc_wh", f.power.soc_wh},
          {"source", str(power::to_string(f.power.source))}}},
        {"proxy", proxy},
        {"state",
         {{"psi", s.psi}, {"r", s.r}, {"u", s.u}, {"v", s.v}, {"w", s.w}, {"x", s.x}, {"y", s.y}, {"z", s.z}}},
    };
}

inline Json to_json(const HapticFrame& h) {
    return {{"force", to_json_array(h.force)}, {"limb", h.limb}, {"tip", to_json_array(h.tip)}};
}

inline Json payload_json(const ModeCommand& c) { return mode_json(c.target); }

inline Json payload_json(const WaypointCommand& c) {
    Json wps = Json::array();
    for (const auto& w : c.plan.waypoints) {
        Json j = {{"x", w.x}, {"y", w.y}};
        if (w.z) j["z"] = *w.z;
        wps.push_back(j);
    }
    return {{"acceptance_radius", c.plan.acceptance_radius}, {"cruise_speed", c.plan.cruise_speed},
            {"waypoints", wps}};
}

inline Json payload_json(const FinOverrideCommand& c) {
    Json fins = Json::array();
    for (const auto& f : c.fins) {
        fins.push_back({{"amplitude", f.amplitude},
                        {"frequency", f.frequency},
                        {"id", propulsion::to_string(f.id)},
                        {"mode", str(to_string(f.mode))},
                        {"phase", f.phase},
                        {"swivel", f.swivel}});
    }
    return {{"duration_s", c.duration_s}, {"fins", fins}};
}

inline Json payload_json(const LimbMasterCommand& c) {
    return {{"clutch", c.master.clutch},
            {"increment", to_json_array(c.master.increment)},
            {"limb", c.limb},
            {"scale", c.master.scale}};
}

inline Json payload_json(const JetFireCommand& c) { return {{"nozzle_angle", c.nozzle_angle}}; }

inline Json payload_json(const EStopCommand&) { return Json::object(); }

inline Json to_json(const Command& c) {
    return {{"id", c.id},
            {"kind", str(modes::to_string(c.kind()))},
            {"payload", std::visit([](const auto& p) { return payload_json(p); }, c.payload)}};
}

inline Json to_json(const Ack& a) { return {{"id", a.id}, {"kind", str(modes::to_string(a.kind))}}; }

inline Json to_json(const Reject& r) {
    return {{"detail", r.detail},
            {"id", r.id ? Json(*r.id) : Json(nullptr)},
            {"reason", str(modes::to_string(r.reason))}};
}

/// Reject non-finite numbers before they reach the serializer, which would
/// silently turn them into null.
inline void require_all_finite(const Json& j, const std::string& path) {
    if (j.is_number_float() && !std::isfinite(j.get<double>())) {
        throw SchemaError(ErrorCode::NonFinite, {path, "non-finite number"});
    }
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) require_all_finite(v, join_path(path, k));
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) require_all_finite(j[i], path + "[" + std::to_string(i) + "]");
    }
}

} // namespace detail

inline Json to_json(const Envelope& e) {
    Json body = std::visit([](const auto& b) { return detail::to_json(b); }, e.body);
    return {{"body", body}, {"seq", e.seq}, {"t", e.t}, {"type", detail::str(type_name(e.body))}, {"v", e.v}};
}

/// Canonical text of an envelope. Throws SchemaError on non-finite values.
inline std::string encode(const Envelope& e) {
    const Json j = to_json(e);
    detail::require_all_finite(j, "");
    return j.dump();
}

// -----------------------------------------------------------------------------
// Decoding
// -----------------------------------------------------------------------------

namespace detail {

inline bool read_mode(const Node& n, modes::ModeState& m) {
    Object o(n);
    bool ok = o.req("op", [&](const Node& c) { return c.read_enum(m.op, modes::op_from_string); });
    ok = o.req("nav", [&](const Node& c) { return c.read_enum(m.nav, modes::nav_from_string); }) && ok;
    ok = o.req("link", [&](const Node& c) { return c.read_enum(m.link, modes::link_from_string); }) && ok;
    return o.close() && ok;
}

inline bool read_extent(const Node& n, double& out) {
    if (n.is_null()) {
        out = std::numeric_limits<double>::infinity();
        return true;
    }
    if (!n.read(out)) return false;
    if (out < 0.0) return n.fail("must be >= 0 or null"), false;
    return true;
}

inline bool read_plane(const Node& n, contact::ContactPlane& p) {
    Object o(n);
    bool ok = o.req_value("normal", p.normal);
    ok = o.req_value("offset", p.offset) && ok;
    ok = o.req_value("center", p.center) && ok;
    ok = o.req_value("axis_u", p.axis_u) && ok;
    ok = o.req("half_u", [&](const Node& c) { return read_extent(c, p.half_u); }) && ok;
    ok = o.req("half_v", [&](const Node& c) { return read_extent(c, p.half_v); }) && ok;
    ok = o.req_value("stiffness", p.stiffness) && ok;
    if (ok) {
        if (std::abs(p.normal.norm() - 1.0) > 1e-6) return o.node().fail("normal must be a unit vector"), false;
        p.axis_v = p.normal.cross(p.axis_u);
    }
    return o.close() && ok;
}

inline bool read_telemetry(Object& o, TelemetryFrame& f) {
    bool ok = o.req_value("estop", f.estop);
    ok = o.req("faults", [&](const Node& c) {
        return c.read_array(f.faults, [](const Node& e, std::string& s) { return e.read(s); });
    }) && ok;
    ok = o.req("guidance", [&](const Node& c) {
        Object g(c);
        bool k = g.req_value("active", f.guidance.active);
        k = g.req_value("complete", f.guidance.complete) && k;
        k = g.req_value("cross_track", f.guidance.cross_track) && k;
        k = g.req_value("depth", f.guidance.depth) && k;
        k = g.req_value("heading", f.guidance.heading) && k;
        k = g.req_value("speed", f.guidance.speed) && k;
        return g.close() && k;
    }) && ok;
    ok = o.req("limbs", [&](const Node& c) {
        return c.read_array(f.limbs, [](const Node& e, LimbTelemetry& l) {
            Object lo(e);
            bool k = lo.req_value("direction", l.direction);
            k = lo.req_value("target", l.target) && k;
            k = lo.req_value("tendon_dl", l.tendon_dl) && k;
            k = lo.req_value("tension", l.tension) && k;
            k = lo.req_value("tip", l.tip) && k;
            return lo.close() && k;
        });
    }) && ok;
    ok = o.req("link", [&](const Node& c) {
        Object l(c);
        bool k = l.req_value("available", f.link.available);
        k = l.req_value("bandwidth_kbps", f.link.bandwidth_kbps) && k;
        k = l.req("kind", [&](const Node& x) { return x.read_enum(f.link.kind, link_kind_from_string); }) && k;
        k = l.req_value("latency_ms", f.link.latency_ms) && k;
        return l.close() && k;
    }) && ok;
    ok = o.req("mode", [&](const Node& c) { return read_mode(c, f.mode); }) && ok;
    ok = o.req("nav", [&](const Node& c) {
        Object n(c);
        bool k = n.req_value("cov", f.nav.cov);
        k = n.req_value("psi", f.nav.psi) && k;
        k = n.req_value("x", f.nav.x) && k;
        k = n.req_value("y", f.nav.y) && k;
        return n.close() && k;
    }) && ok;
    ok = o.req("power", [&](const Node& c) {
        Object p(c);
        bool k = p.req_value("bus_v", f.power.bus_v);
        k = p.req_value("endurance_h", f.power.endurance_h) && k;
        k = p.req("loads", [&](const Node& ln) {
            Object lo(ln);
            bool kk = true;
            for (power::Subsystem sub : power::kShedOrder) {
                kk = lo.req_value(std::string(power::to_string(sub)), power::at(f.power.loads, sub)) && kk;
            }
            return lo.close() && kk;
        }) && k;
        k = p.req_value("mean_load_w", f.power.mean_load_w) && k;
        k = p.req_value("soc_wh", f.power.soc_wh) && k;
        k = p.req("source", [&](const Node& x) { return x.read_enum(f.power.source, source_from_string); }) && k;
        return p.close() && k;
    }) && ok;
    ok = o.req("proxy", [&](const Node& c) { return c.read_array(f.proxy, read_plane); }) && ok;
    ok = o.req("state", [&](const Node& c) {
        Object s(c);
        auto& st = f.state;
        bool k = true;
        for (auto [key, field] : {std::pair{"x", &st.x}, {"y", &st.y}, {"z", &st.z}, {"psi", &st.psi},
                                  {"u", &st.u}, {"v", &st.v}, {"r", &st.r}, {"w", &st.w}}) {
            k = s.req_value(key, *field) && k;
        }
        return s.close() && k;
    }) && ok;
    return ok;
}

inline bool read_haptic(Object& o, HapticFrame& h) {
    bool ok = o.req_value("force", h.force);
    ok = o.req_value("limb", h.limb) && ok;
    ok = o.req_value("tip", h.tip) && ok;
    return ok;
}

inline bool read_payload(const Node& n, modes::CommandKind kind, CommandPayload& out) {
    if (kind == modes::CommandKind::ModeTransition) {
        ModeCommand c;
        const bool ok = read_mode(n, c.target);
        out = c;
        return ok;
    }
    Object o(n);
    bool ok = true;
    switch (kind) {
    case modes::CommandKind::ModeTransition: break;
    case modes::CommandKind::WaypointUpload: {
        WaypointCommand c;
        ok = o.req_value("acceptance_radius", c.plan.acceptance_radius);
        ok = o.req_value("cruise_speed", c.plan.cruise_speed) && ok;
        ok = o.req("waypoints", [&](const Node& w) {
            return w.read_array(c.plan.waypoints, [](const Node& e, guidance::Waypoint& wp) {
                Object wo(e);
                bool k = wo.req_value("x", wp.x);
                k = wo.req_value("y", wp.y) && k;
                k = wo.opt("z", [&](const Node& z) {
                    double v = 0.0;
                    if (!z.read(v)) return false;
                    wp.z = v;
                    return true;
                }) && k;
                return wo.close() && k;
            });
        }) && ok;
        out = c;
        break;
    }
    case modes::CommandKind::FinOverride: {
        FinOverrideCommand c;
        ok = o.req_value("duration_s", c.duration_s);
        ok = o.req("fins", [&](const Node& w) {
            return w.read_array(c.fins, [](const Node& e, propulsion::FinState& f) {
                Object fo(e);
                bool k = fo.req_value("amplitude", f.amplitude);
                k = fo.req_value("frequency", f.frequency) && k;
                k = fo.req("id", [&](const Node& x) {
                    return x.read_enum(f.id, [](const std::string& s) { return propulsion::fin_from_string(s); });
                }) && k;
                k = fo.req("mode", [&](const Node& x) { return x.read_enum(f.mode, fin_mode_from_string); }) && k;
                k = fo.req_value("phase", f.phase) && k;
                k = fo.req_value("swivel", f.swivel) && k;
                return fo.close() && k;
            });
        }) && ok;
        out = c;
        break;
    }
    case modes::CommandKind::LimbMaster: {
        LimbMasterCommand c;
        ok = o.req_value("clutch", c.master.clutch);
        ok = o.req_value("increment", c.master.increment) && ok;
        ok = o.req_value("limb", c.limb) && ok;
        ok = o.req_value("scale", c.master.scale) && ok;
        out = c;
        break;
    }
    case modes::CommandKind::JetFire: {
        JetFireCommand c;
        ok = o.req_value("nozzle_angle", c.nozzle_angle);
        out = c;
        break;
    }
    case modes::CommandKind::EStop: out = EStopCommand{}; break;
    }
    return o.close() && ok;
}

inline bool read_command(Object& o, Command& c) {
    bool ok = o.req_value("id", c.id);
    modes::CommandKind kind{};
    const bool kind_ok = o.req("kind", [&](const Node& k) { return k.read_enum(kind, modes::command_from_string); });
    if (kind_ok) {
        ok = o.req("payload", [&](const Node& p) { return read_payload(p, kind, c.payload); }) && ok;
    } else {
        o.child("payload");
    }
    return ok && kind_ok;
}

inline bool read_ack(Object& o, Ack& a) {
    bool ok = o.req_value("id", a.id);
    ok = o.req("kind", [&](const Node& k) { return k.read_enum(a.kind, modes::command_from_string); }) && ok;
    return ok;
}

inline bool read_reject(Object& o, Reject& r) {
    bool ok = o.req_value("detail", r.detail);
    ok = o.req_value("id", r.id) && ok;
    ok = o.req("reason", [&](const Node& k) { return k.read_enum(r.reason, reason_from_string); }) && ok;
    return ok;
}

template <class T, class F>
bool read_body(const Node& n, Body& out, F&& reader) {
    Object o(n);
    T value{};
    bool ok = o.valid() && reader(o, value);
    ok = o.close() && ok;
    out = std::move(value);
    return ok;
}

} // namespace detail

/// Decode without throwing. On failure `issues` holds every problem found,
/// in document order of discovery.
inline std::optional<Envelope> try_decode(std::string_view text, std::vector<Issue>& issues) {
    const auto parsed = parse_json(text, issues);
    if (!parsed) return std::nullopt;
    Node root(*parsed, "", issues);
    Object o(root);
    if (!o.valid()) return std::nullopt;
    Envelope e;
    bool ok = o.req("v", [&](const Node& n) {
        if (!n.read(e.v)) return false;
        if (e.v != kProtocolVersion) return n.fail("unsupported version"), false;
        return true;
    });
    ok = o.req_value("seq", e.seq) && ok;
    ok = o.req_value("t", e.t) && ok;
    std::string type;
    const bool type_ok = o.req("type", [&](const Node& n) {
        if (!n.read(type)) return false;
        static const std::set<std::string> known{"telemetry", "haptic", "command", "ack", "reject"};
        if (!known.count(type)) return n.fail("unknown message type \"" + type + "\""), false;
        return true;
    });
    if (type_ok) {
        ok = o.req("body", [&](const Node& b) {
            if (type == "telemetry") return detail::read_body<TelemetryFrame>(b, e.body, detail::read_telemetry);
            if (type == "haptic") return detail::read_body<HapticFrame>(b, e.body, detail::read_haptic);
            if (type == "command") return detail::read_body<Command>(b, e.body, detail::read_command);
            if (type == "ack") return detail::read_body<Ack>(b, e.body, detail::read_ack);
            return detail::read_body<Reject>(b, e.body, detail::read_reject);
        }) && ok;
    } else {
        o.child("body");
        ok = false;
    }
    ok = o.close() && ok;
    if (!ok || !issues.empty()) return std::nullopt;
    return e;
}

/// Decode or throw SchemaError naming the first offending path.
inline Envelope decode(std::string_view text) {
    std::vector<Issue> issues;
    auto e = try_decode(text, issues);
    if (!e) throw SchemaError(ErrorCode::Schema, issues.empty() ? Issue{"", "invalid message"} : issues.front());
    return std::move(*e);
}

// -----------------------------------------------------------------------------
// Semantic checks on well-formed commands
// -----------------------------------------------------------------------------

inline constexpr std::uint64_t kLimbCount = 2;

/// Range checks a schema cannot express. Throws Error(Validation).
inline void validate_command(const Command& c) {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::Validation, what); };
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, WaypointCommand>) {
                try {
                    guidance::validate(p.plan);
                } catch (const Error& e) {
                    bad(e.what());
                }
            } else if constexpr (std::is_same_v<T, FinOverrideCommand>) {
                if (!(p.duration_s > 0.0 && p.duration_s <= 60.0)) bad("fin_override: duration_s must be in (0, 60]");
                if (p.fins.empty()) bad("fin_override: no fins");
                std::set<propulsion::FinId> ids;
                for (const auto& f : p.fins) {
                    if (!ids.insert(f.id).second) bad("fin_override: duplicate fin " + propulsion::to_string(f.id));
                    if (std::abs(f.swivel) > kPi / 2 || f.amplitude < 0.0 || f.frequency < 0.0) {
                        bad("fin_override: fin " + propulsion::to_string(f.id) + " out of range");
                    }
                }
            } else if constexpr (std::is_same_v<T, LimbMasterCommand>) {
                if (p.limb >= kLimbCount) bad("limb_master: limb index out of range");
                try {
                    teleop::validate(p.master);
                } catch (const Error& e) {
                    bad(e.what());
                }
            } else if constexpr (std::is_same_v<T, JetFireCommand>) {
                if (std::abs(p.nozzle_angle) > kPi) bad("jet_fire: nozzle_angle must be in [-pi, pi]");
            }
        },
        c.payload);
}

} // namespace ursula::comms
