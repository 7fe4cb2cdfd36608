// Scenario configuration: JSON <-> typed Scenario with full-path validation.
// Every section is optional and falls back to module defaults; every problem
// found is reported with its dotted path, not only the first.
#pragma once

#include "ursula/comms/json_reader.hpp"
#include "ursula/comms/link.hpp"
#include "ursula/comms/messages.hpp"
#include "ursula/contact.hpp"
#include "ursula/dynamics.hpp"
#include "ursula/guidance.hpp"
#include "ursula/limbs.hpp"
#include "ursula/modes.hpp"
#include "ursula/nav.hpp"
#include "ursula/power.hpp"
#include "ursula/propulsion.hpp"
#include "ursula/teleop.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ursula::sim {

using comms::Issue;
using comms::Json;

struct ScriptEntry {
    double t = 0.0;
    comms::Command command;
    std::uint64_t repeat = 1; ///< copies sent, ids counting up from command.id
    double interval = 0.0;    ///< spacing of the copies [s]
};

struct Environment {
    double current_x = 0.0;
    double current_y = 0.0;
    std::vector<contact::ContactPlane> contact_planes; ///< truth obstacles
    Vec3 vlc_station = Vec3::Zero();                   ///< optical base station
};

struct InitialConditions {
    dynamics::VehicleState state;
    modes::ModeState mode;
    power::Source power_source = power::Source::Battery;
    std::optional<double> soc_wh;
    std::array<Vec3, 2> limb_targets{Vec3(0.0, 0.0, 0.5), Vec3(0.0, 0.0, 0.5)}; ///< limb frame
    std::array<double, 3> nav_sigma{0.5, 0.5, 0.05}; ///< initial estimate std (x, y, psi)
};

struct PowerSettings {
    power::PowerConfig config;
    power::FaultThresholds thresholds;
    double payload_w = 15.0;
    double comms_w = 10.0;
    double computers_w = 40.0;
    double limb_idle_w = 5.0;     ///< per limb
    double propulsion_idle_w = 10.0;
    double propulsion_w_per_n = 4.0; ///< electrical power per newton of thrust
    double heave_w_per_n = 4.0;
};

struct Rates {
    double telemetry_hz = 10.0;
    double haptic_hz = 50.0;
};

struct Scenario {
    std::string name = "unnamed";
    double dt = dynamics::kDefaultStep;
    double duration = 0.0;
    std::uint64_t seed = 1;
    dynamics::VehicleParams vehicle;
    propulsion::FinParams fins;
    propulsion::JetParams jet;
    limbs::LimbGeometry limb;
    nav::LandmarkMap landmarks;
    nav::SensorNoise noise;
    std::optional<guidance::WaypointPlan> plan;
    guidance::LosParams los;
    guidance::AutopilotGains autopilot;
    modes::StationGains station;
    Environment environment;
    comms::LinkSet links;
    InitialConditions initial;
    PowerSettings power;
    contact::ProxyEnvironment proxy;
    teleop::ReconcileOptions reconcile;
    Rates rates;
    std::vector<ScriptEntry> script;
};

/// Raised by load/parse when a scenario fails validation; carries every issue.
class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<Issue> issues)
        : Error(ErrorCode::Validation, summary(issues)), issues_(std::move(issues)) {}
    const std::vector<Issue>& issues() const noexcept { return issues_; }

    static std::string summary(const std::vector<Issue>& issues) {
        std::string s = std::to_string(issues.size()) + " scenario error(s)";
        for (const auto& i : issues) s += "\n  " + (i.path.empty() ? std::string("<root>") : i.path) + ": " + i.message;
        return s;
    }

  private:
    std::vector<Issue> issues_;
};

namespace detail {

inline constexpr double kCenterTolerance = 1e-9; ///< patch centres closer than this to the plane are kept [m]

using comms::Node;
using comms::Object;

template <class T>
void fields(Object& o, std::initializer_list<std::pair<const char*, T*>> list) {
    for (auto [k, p] : list) o.opt_value(k, *p);
}

inline bool read_plane(const Node& n, contact::ContactPlane& out) {
    Object o(n);
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0, stiffness = 500.0;
    std::optional<Vec3> center;
    double half_u = std::numeric_limits<double>::infinity(), half_v = half_u;
    bool ok = o.req_value("normal", normal);
    ok = o.req_value("offset", offset) && ok;
    ok = o.opt_value("stiffness", stiffness) && ok;
    ok = o.opt("center", [&](const Node& c) {
        Vec3 v;
        if (!c.read(v)) return false;
        center = v;
        return true;
    }) && ok;
    ok = o.opt("half_u", [&](const Node& c) { return c.is_null() || c.read(half_u); }) && ok;
    ok = o.opt("half_v", [&](const Node& c) { return c.is_null() || c.read(half_v); }) && ok;
    ok = o.close() && ok;
    if (!ok) return false;
    if (!(normal.norm() > 1e-9)) return o.node().fail("normal must be nonzero"), false;
    out = contact::make_plane(normal, offset, stiffness);
    if (center) {
        const double d = contact::signed_distance(out, *center);
        out.center = std::abs(d) > kCenterTolerance ? Vec3(*center - d * out.normal) : *center;
    }
    out.half_u = half_u;
    out.half_v = half_v;
    return true;
}

inline Json plane_json(const contact::ContactPlane& p) {
    Json j = {{"normal", comms::to_json_array(p.normal)},
              {"offset", p.offset},
              {"stiffness", p.stiffness},
              {"center", comms::to_json_array(p.center)}};
    j["half_u"] = std::isfinite(p.half_u) ? Json(p.half_u) : Json(nullptr);
    j["half_v"] = std::isfinite(p.half_v) ? Json(p.half_v) : Json(nullptr);
    return j;
}

inline bool read_plan(const Node& n, guidance::WaypointPlan& plan) {
    Object o(n);
    bool ok = o.opt_value("acceptance_radius", plan.acceptance_radius);
    ok = o.opt_value("cruise_speed", plan.cruise_speed) && ok;
    ok = o.req("waypoints", [&](const Node& w) {
        return w.read_array(plan.waypoints, [](const Node& e, guidance::Waypoint& wp) {
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
    return o.close() && ok;
}

inline Json plan_json(const guidance::WaypointPlan& plan) {
    Json wps = Json::array();
    for (const auto& w : plan.waypoints) {
        Json j = {{"x", w.x}, {"y", w.y}};
        if (w.z) j["z"] = *w.z;
        wps.push_back(j);
    }
    return {{"acceptance_radius", plan.acceptance_radius}, {"cruise_speed", plan.cruise_speed}, {"waypoints", wps}};
}

inline bool read_link(const Node& n, comms::LinkModel& m) {
    Object o(n);
    fields<double>(o, {{"bandwidth_kbps", &m.bandwidth_kbps},
                       {"latency_ms", &m.latency_ms},
                       {"max_range_m", &m.max_range_m},
                       {"max_alignment_deg", &m.max_alignment_deg},
                       {"floor_fraction", &m.floor_fraction},
                       {"surface_depth_m", &m.surface_depth_m}});
    return o.close();
}

inline Json link_json(const comms::LinkModel& m) {
    return {{"bandwidth_kbps", m.bandwidth_kbps}, {"latency_ms", m.latency_ms},
            {"max_range_m", m.max_range_m},       {"max_alignment_deg", m.max_alignment_deg},
            {"floor_fraction", m.floor_fraction}, {"surface_depth_m", m.surface_depth_m}};
}

/// Structural pass: types, unknown keys, enum spellings.
inline void read_scenario(const Json& j, Scenario& s, std::vector<Issue>& issues) {
    Node root(j, "", issues);
    Object o(root);
    if (!o.valid()) return;
    o.opt_value("name", s.name);
    o.opt_value("dt", s.dt);
    o.opt_value("duration", s.duration);
    o.opt_value("seed", s.seed);
    o.opt("vehicle", [&](const Node& n) {
        Object v(n);
        auto& p = s.vehicle;
        fields<double>(v, {{"mass", &p.mass},       {"inertia_z", &p.inertia_z}, {"length", &p.length},
                           {"max_depth", &p.max_depth}, {"added_u", &p.added_u}, {"added_v", &p.added_v},
                           {"added_r", &p.added_r}, {"added_w", &p.added_w},     {"drag_u", &p.drag_u},
                           {"drag_v", &p.drag_v},   {"drag_r", &p.drag_r},       {"drag_w", &p.drag_w},
                           {"drag_uu", &p.drag_uu}, {"drag_vv", &p.drag_vv},     {"drag_rr", &p.drag_rr},
                           {"drag_ww", &p.drag_ww}});
        return v.close();
    });
    o.opt("fins", [&](const Node& n) {
        Object f(n);
        auto& p = s.fins;
        fields<double>(f, {{"thrust_coeff", &p.thrust_coeff},
                           {"tw_efficiency", &p.tw_efficiency},
                           {"amplitude_max", &p.amplitude_max},
                           {"frequency_max", &p.frequency_max}});
        return f.close();
    });
    o.opt("jet", [&](const Node& n) {
        Object f(n);
        auto& p = s.jet;
        fields<double>(f, {{"capacity", &p.capacity},
                           {"elastic_constant", &p.elastic_constant},
                           {"discharge_coeff", &p.discharge_coeff},
                           {"thrust_factor", &p.thrust_factor},
                           {"pump_max", &p.pump_max}});
        return f.close();
    });
    o.opt("limb", [&](const Node& n) {
        Object f(n);
        auto& g = s.limb;
        fields<double>(f, {{"length", &g.length},
                           {"base_radius", &g.base_radius},
                           {"tip_radius", &g.tip_radius},
                           {"tendon_offset_ratio", &g.tendon_offset_ratio}});
        f.opt_value("n_segments", g.n_segments);
        f.opt("kappa_max", [&](const Node& k) {
            double v = 0.0;
            if (!k.read(v)) return false;
            g.kappa_max = v;
            return true;
        });
        return f.close();
    });
    o.opt("landmarks", [&](const Node& n) {
        return n.read_array(s.landmarks.landmarks, [](const Node& e, nav::Landmark& l) {
            Object lo(e);
            bool k = lo.req_value("id", l.id);
            k = lo.req_value("x", l.x) && k;
            k = lo.req_value("y", l.y) && k;
            return lo.close() && k;
        });
    });
    o.opt("noise", [&](const Node& n) {
        Object f(n);
        auto& p = s.noise;
        fields<double>(f, {{"dvl", &p.dvl},
                           {"gyro", &p.gyro},
                           {"depth", &p.depth},
                           {"gnss", &p.gnss},
                           {"range", &p.range},
                           {"bearing", &p.bearing},
                           {"sonar_max_range", &p.sonar_max_range},
                           {"surface_threshold", &p.surface_threshold}});
        return f.close();
    });
    o.opt("plan", [&](const Node& n) {
        guidance::WaypointPlan plan;
        const bool ok = read_plan(n, plan);
        s.plan = plan;
        return ok;
    });
    o.opt("los", [&](const Node& n) {
        Object f(n);
        fields<double>(f, {{"lookahead", &s.los.lookahead}, {"gamma", &s.los.gamma}, {"drift_limit", &s.los.drift_limit}});
        return f.close();
    });
    o.opt("autopilot", [&](const Node& n) {
        Object f(n);
        auto& g = s.autopilot;
        fields<double>(f, {{"heading_kp", &g.heading_kp},
                           {"heading_kd", &g.heading_kd},
                           {"speed_kp", &g.speed_kp},
                           {"speed_ki", &g.speed_ki},
                           {"depth_kp", &g.depth_kp},
                           {"depth_ki", &g.depth_ki},
                           {"depth_kd", &g.depth_kd},
                           {"integral_limit", &g.integral_limit}});
        return f.close();
    });
    o.opt("station", [&](const Node& n) {
        Object f(n);
        auto& g = s.station;
        fields<double>(f, {{"kp_xy", &g.kp_xy}, {"kd_xy", &g.kd_xy}, {"kp_psi", &g.kp_psi},
                           {"kd_psi", &g.kd_psi}, {"kp_z", &g.kp_z}, {"kd_z", &g.kd_z}});
        return f.close();
    });
    o.opt("environment", [&](const Node& n) {
        Object f(n);
        f.opt("current", [&](const Node& c) {
            std::array<double, 2> cur{};
            if (!c.read(cur)) return false;
            s.environment.current_x = cur[0];
            s.environment.current_y = cur[1];
            return true;
        });
        f.opt("contact_planes", [&](const Node& c) { return c.read_array(s.environment.contact_planes, read_plane); });
        f.opt_value("vlc_station", s.environment.vlc_station);
        return f.close();
    });
    o.opt("links", [&](const Node& n) {
        Object f(n);
        f.opt("umbilical", [&](const Node& c) { return read_link(c, s.links.umbilical); });
        f.opt("vlc", [&](const Node& c) { return read_link(c, s.links.vlc); });
        f.opt("lte_wifi", [&](const Node& c) { return read_link(c, s.links.lte_wifi); });
        return f.close();
    });
    o.opt("initial", [&](const Node& n) {
        Object f(n);
        auto& ic = s.initial;
        f.opt("state", [&](const Node& c) {
            Object so(c);
            fields<double>(so, {{"x", &ic.state.x}, {"y", &ic.state.y}, {"z", &ic.state.z}, {"psi", &ic.state.psi},
                                {"u", &ic.state.u}, {"v", &ic.state.v}, {"r", &ic.state.r}, {"w", &ic.state.w}});
            return so.close();
        });
        f.opt("mode", [&](const Node& c) { return comms::detail::read_mode(c, ic.mode); });
        f.opt("power_source", [&](const Node& c) { return c.read_enum(ic.power_source, comms::source_from_string); });
        f.opt("soc_wh", [&](const Node& c) {
            double v = 0.0;
            if (!c.read(v)) return false;
            ic.soc_wh = v;
            return true;
        });
        f.opt("limb_targets", [&](const Node& c) {
            if (!c.json().is_array() || c.json().size() != 2) return c.fail("expected array of 2 vectors"), false;
            bool k = c.at(0).read(ic.limb_targets[0]);
            return c.at(1).read(ic.limb_targets[1]) && k;
        });
        f.opt_value("nav_sigma", ic.nav_sigma);
        return f.close();
    });
    o.opt("power", [&](const Node& n) {
        Object f(n);
        auto& p = s.power;
        fields<double>(f, {{"charger_w", &p.config.charger_w},
                           {"umbilical_limit_w", &p.config.umbilical_limit_w},
                           {"window_s", &p.config.window_s},
                           {"undervoltage_v", &p.thresholds.undervoltage_v},
                           {"debounce_s", &p.thresholds.debounce_s},
                           {"payload_w", &p.payload_w},
                           {"comms_w", &p.comms_w},
                           {"computers_w", &p.computers_w},
                           {"limb_idle_w", &p.limb_idle_w},
                           {"propulsion_idle_w", &p.propulsion_idle_w},
                           {"propulsion_w_per_n", &p.propulsion_w_per_n},
                           {"heave_w_per_n", &p.heave_w_per_n}});
        f.opt("overcurrent_a", [&](const Node& c) {
            Object oc(c);
            for (power::Subsystem sub : power::kShedOrder) {
                oc.opt_value(std::string(power::to_string(sub)), power::at(p.thresholds.overcurrent_a, sub));
            }
            return oc.close();
        });
        return f.close();
    });
    o.opt("proxy", [&](const Node& n) {
        Object f(n);
        f.opt_value("stiffness", s.proxy.stiffness);
        f.opt_value("damping", s.proxy.damping);
        f.opt("planes", [&](const Node& c) { return c.read_array(s.proxy.planes, read_plane); });
        return f.close();
    });
    o.opt("reconcile", [&](const Node& n) {
        Object f(n);
        fields<double>(f, {{"force_threshold", &s.reconcile.force_threshold},
                           {"hysteresis", &s.reconcile.hysteresis},
                           {"new_patch_half", &s.reconcile.new_patch_half}});
        return f.close();
    });
    o.opt("rates", [&](const Node& n) {
        Object f(n);
        fields<double>(f, {{"telemetry_hz", &s.rates.telemetry_hz}, {"haptic_hz", &s.rates.haptic_hz}});
        return f.close();
    });
    o.opt("script", [&](const Node& n) {
        return n.read_array(s.script, [](const Node& e, ScriptEntry& entry) {
            Object so(e);
            bool k = so.req_value("t", entry.t);
            k = so.opt_value("repeat", entry.repeat) && k;
            k = so.opt_value("interval", entry.interval) && k;
            k = so.req("command", [&](const Node& c) {
                Object co(c);
                const bool r = co.valid() && comms::detail::read_command(co, entry.command);
                return co.close() && r;
            }) && k;
            return so.close() && k;
        });
    });
    o.close();
}

/// Semantic pass: ranges and cross-field rules, one issue per violation.
inline void check_scenario(const Scenario& s, std::vector<Issue>& issues) {
    auto bad = [&](const std::string& path, const std::string& msg) { issues.push_back({path, msg}); };
    auto module = [&](const std::string& path, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            bad(path, e.what());
        }
    };
    if (!(s.dt > 0.0 && s.dt <= dynamics::kMaxStep)) bad("dt", "must be in (0, 0.1]");
    if (!(s.duration >= 0.0)) bad("duration", "must be >= 0");
    module("vehicle", [&] { dynamics::validate(s.vehicle); });
    module("fins", [&] { propulsion::validate(s.fins); });
    if (!(s.jet.capacity > 0 && s.jet.elastic_constant > 0 && s.jet.discharge_coeff > 0 && s.jet.thrust_factor >= 0 &&
          s.jet.pump_max >= 0)) {
        bad("jet", "coefficients must be positive");
    }
    module("limb", [&] { limbs::validate(s.limb); });
    std::set<int> ids;
    for (std::size_t i = 0; i < s.landmarks.landmarks.size(); ++i) {
        if (!ids.insert(s.landmarks.landmarks[i].id).second) {
            bad("landmarks[" + std::to_string(i) + "].id", "duplicate landmark id");
        }
    }
    module("noise", [&] { nav::validate(s.noise); });
    if (s.plan) module("plan", [&] { guidance::validate(*s.plan); });
    if (!(s.los.lookahead > 0.0)) bad("los.lookahead", "must be > 0");
    if (s.los.gamma < 0.0) bad("los.gamma", "must be >= 0");
    for (std::size_t i = 0; i < s.environment.contact_planes.size(); ++i) {
        if (!(s.environment.contact_planes[i].stiffness > 0.0)) {
            bad("environment.contact_planes[" + std::to_string(i) + "].stiffness", "must be > 0");
        }
    }
    module("links.umbilical", [&] { comms::validate(s.links.umbilical); });
    module("links.vlc", [&] { comms::validate(s.links.vlc); });
    module("links.lte_wifi", [&] { comms::validate(s.links.lte_wifi); });
    if (!modes::is_valid(s.initial.mode)) bad("initial.mode", modes::to_string(s.initial.mode) + " is not a valid mode");
    if (s.initial.soc_wh && !(*s.initial.soc_wh >= 0.0 && *s.initial.soc_wh <= s.power.config.capacity_wh)) {
        bad("initial.soc_wh", "must be in [0, capacity]");
    }
    if (s.initial.state.z < 0.0) bad("initial.state.z", "depth must be >= 0");
    for (std::size_t i = 0; i < 2; ++i) {
        if (s.initial.limb_targets[i].norm() > s.limb.length) {
            bad("initial.limb_targets[" + std::to_string(i) + "]", "beyond limb length");
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(s.initial.nav_sigma[i] > 0.0)) bad("initial.nav_sigma[" + std::to_string(i) + "]", "must be > 0");
    }
    if (s.power.config.charger_w < 0.0) bad("power.charger_w", "must be >= 0");
    if (!(s.power.config.umbilical_limit_w > 0.0)) bad("power.umbilical_limit_w", "must be > 0");
    if (!(s.power.config.window_s > 0.0)) bad("power.window_s", "must be > 0");
    for (auto [key, v] : {std::pair{"payload_w", s.power.payload_w}, {"comms_w", s.power.comms_w},
                          {"computers_w", s.power.computers_w}, {"limb_idle_w", s.power.limb_idle_w},
                          {"propulsion_idle_w", s.power.propulsion_idle_w},
                          {"propulsion_w_per_n", s.power.propulsion_w_per_n},
                          {"heave_w_per_n", s.power.heave_w_per_n}}) {
        if (v < 0.0) bad(std::string("power.") + key, "must be >= 0");
    }
    module("proxy", [&] { teleop::validate(s.proxy); });
    auto divides = [&](double hz, const std::string& path) {
        if (!(hz > 0.0)) return bad(path, "must be > 0");
        const double ticks = 1.0 / (hz * s.dt);
        if (std::abs(ticks - std::round(ticks)) > 1e-9 || std::round(ticks) < 1.0) {
            bad(path, "period must be a whole number of dt steps");
        }
    };
    if (s.dt > 0.0) {
        divides(s.rates.telemetry_hz, "rates.telemetry_hz");
        divides(s.rates.haptic_hz, "rates.haptic_hz");
    }
    for (std::size_t i = 0; i < s.script.size(); ++i) {
        const auto& e = s.script[i];
        const std::string p = "script[" + std::to_string(i) + "]";
        if (!(e.t >= 0.0)) bad(p + ".t", "must be >= 0");
        if (i > 0 && e.t < s.script[i - 1].t) bad(p + ".t", "entries must be in time order");
        if (e.repeat < 1) bad(p + ".repeat", "must be >= 1");
        if (e.repeat > 1 && !(e.interval > 0.0)) bad(p + ".interval", "must be > 0 when repeat > 1");
    }
}

} // namespace detail

/// Typed scenario from parsed JSON, or every issue found.
inline std::optional<Scenario> parse_scenario(const Json& j, std::vector<Issue>& issues) {
    Scenario s;
    detail::read_scenario(j, s, issues);
    if (j.is_object()) detail::check_scenario(s, issues);
    if (!issues.empty()) return std::nullopt;
    s.vehicle.current_x = s.environment.current_x;
    s.vehicle.current_y = s.environment.current_y;
    return s;
}

inline std::optional<Scenario> parse_scenario_text(std::string_view text, std::vector<Issue>& issues) {
    const auto j = comms::parse_json(text, issues);
    if (!j) return std::nullopt;
    return parse_scenario(*j, issues);
}

/// Load from a file; throws ValidationError listing every violated path.
inline Scenario load_scenario(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError({{"", "cannot open " + path}});
    std::stringstream ss;
    ss << f.rdbuf();
    std::vector<Issue> issues;
    auto s = parse_scenario_text(ss.str(), issues);
    if (!s) throw ValidationError(std::move(issues));
    return std::move(*s);
}

inline Json issues_json(const std::vector<Issue>& issues) {
    Json arr = Json::array();
    for (const auto& i : issues) arr.push_back({{"message", i.message}, {"path", i.path}});
    return {{"errors", arr}};
}

/// Full scenario as JSON; parse_scenario(to_json(s)) reproduces s.
inline Json to_json(const Scenario& s) {
    using comms::to_json_array;
    const auto& v = s.vehicle;
    Json landmarks = Json::array();
    for (const auto& l : s.landmarks.landmarks) landmarks.push_back({{"id", l.id}, {"x", l.x}, {"y", l.y}});
    Json truth = Json::array();
    for (const auto& p : s.environment.contact_planes) truth.push_back(detail::plane_json(p));
    Json proxy_planes = Json::array();
    for (const auto& p : s.proxy.planes) proxy_planes.push_back(detail::plane_json(p));
    Json overcurrent = Json::object();
    for (power::Subsystem sub : power::kShedOrder) {
        overcurrent[std::string(power::to_string(sub))] = power::at(s.power.thresholds.overcurrent_a, sub);
    }
    Json script = Json::array();
    for (const auto& e : s.script) {
        script.push_back({{"t", e.t}, {"repeat", e.repeat}, {"interval", e.interval},
                          {"command", comms::detail::to_json(e.command)}});
    }
    Json limb = {{"length", s.limb.length},
                 {"base_radius", s.limb.base_radius},
                 {"tip_radius", s.limb.tip_radius},
                 {"n_segments", s.limb.n_segments},
                 {"tendon_offset_ratio", s.limb.tendon_offset_ratio}};
    if (s.limb.kappa_max) limb["kappa_max"] = *s.limb.kappa_max;
    Json initial = {
        {"state",
         {{"x", s.initial.state.x}, {"y", s.initial.state.y}, {"z", s.initial.state.z}, {"psi", s.initial.state.psi},
          {"u", s.initial.state.u}, {"v", s.initial.state.v}, {"r", s.initial.state.r}, {"w", s.initial.state.w}}},
        {"mode", comms::detail::mode_json(s.initial.mode)},
        {"power_source", std::string(power::to_string(s.initial.power_source))},
        {"limb_targets", Json::array({to_json_array(s.initial.limb_targets[0]), to_json_array(s.initial.limb_targets[1])})},
        {"nav_sigma", to_json_array(s.initial.nav_sigma)}};
    if (s.initial.soc_wh) initial["soc_wh"] = *s.initial.soc_wh;
    Json j = {
        {"name", s.name},
        {"dt", s.dt},
        {"duration", s.duration},
        {"seed", s.seed},
        {"vehicle",
         {{"mass", v.mass},       {"inertia_z", v.inertia_z}, {"length", v.length},   {"max_depth", v.max_depth},
          {"added_u", v.added_u}, {"added_v", v.added_v},     {"added_r", v.added_r}, {"added_w", v.added_w},
          {"drag_u", v.drag_u},   {"drag_v", v.drag_v},       {"drag_r", v.drag_r},   {"drag_w", v.drag_w},
          {"drag_uu", v.drag_uu}, {"drag_vv", v.drag_vv},     {"drag_rr", v.drag_rr}, {"drag_ww", v.drag_ww}}},
        {"fins",
         {{"thrust_coeff", s.fins.thrust_coeff},
          {"tw_efficiency", s.fins.tw_efficiency},
          {"amplitude_max", s.fins.amplitude_max},
          {"frequency_max", s.fins.frequency_max}}},
        {"jet",
         {{"capacity", s.jet.capacity},
          {"elastic_constant", s.jet.elastic_constant},
          {"discharge_coeff", s.jet.discharge_coeff},
          {"thrust_factor", s.jet.thrust_factor},
          {"pump_max", s.jet.pump_max}}},
        {"limb", limb},
        {"landmarks", landmarks},
        {"noise",
         {{"dvl", s.noise.dvl},
          {"gyro", s.noise.gyro},
          {"depth", s.noise.depth},
          {"gnss", s.noise.gnss},
          {"range", s.noise.range},
          {"bearing", s.noise.bearing},
          {"sonar_max_range", s.noise.sonar_max_range},
          {"surface_threshold", s.noise.surface_threshold}}},
        {"los", {{"lookahead", s.los.lookahead}, {"gamma", s.los.gamma}, {"drift_limit", s.los.drift_limit}}},
        {"autopilot",
         {{"heading_kp", s.autopilot.heading_kp},
          {"heading_kd", s.autopilot.heading_kd},
          {"speed_kp", s.autopilot.speed_kp},
          {"speed_ki", s.autopilot.speed_ki},
          {"depth_kp", s.autopilot.depth_kp},
          {"depth_ki", s.autopilot.depth_ki},
          {"depth_kd", s.autopilot.depth_kd},
          {"integral_limit", s.autopilot.integral_limit}}},
        {"station",
         {{"kp_xy", s.station.kp_xy},
          {"kd_xy", s.station.kd_xy},
          {"kp_psi", s.station.kp_psi},
          {"kd_psi", s.station.kd_psi},
          {"kp_z", s.station.kp_z},
          {"kd_z", s.station.kd_z}}},
        {"environment",
         {{"current", Json::array({s.environment.current_x, s.environment.current_y})},
          {"contact_planes", truth},
          {"vlc_station", to_json_array(s.environment.vlc_station)}}},
        {"links",
         {{"umbilical", detail::link_json(s.links.umbilical)},
          {"vlc", detail::link_json(s.links.vlc)},
          {"lte_wifi", detail::link_json(s.links.lte_wifi)}}},
        {"initial", initial},
        {"power",
         {{"charger_w", s.power.config.charger_w},
          {"umbilical_limit_w", s.power.config.umbilical_limit_w},
          {"window_s", s.power.config.window_s},
          {"undervoltage_v", s.power.thresholds.undervoltage_v},
          {"debounce_s", s.power.thresholds.debounce_s},
          {"overcurrent_a", overcurrent},
          {"payload_w", s.power.payload_w},
          {"comms_w", s.power.comms_w},
          {"computers_w", s.power.computers_w},
          {"limb_idle_w", s.power.limb_idle_w},
          {"propulsion_idle_w", s.power.propulsion_idle_w},
          {"propulsion_w_per_n", s.power.propulsion_w_per_n},
          {"heave_w_per_n", s.power.heave_w_per_n}}},
        {"proxy", {{"stiffness", s.proxy.stiffness}, {"damping", s.proxy.damping}, {"planes", proxy_planes}}},
        {"reconcile",
         {{"force_threshold", s.reconcile.force_threshold},
          {"hysteresis", s.reconcile.hysteresis},
          {"new_patch_half", s.reconcile.new_patch_half}}},
        {"rates", {{"telemetry_hz", s.rates.telemetry_hz}, {"haptic_hz", s.rates.haptic_hz}}},
        {"script", script},
    };
    if (s.plan) j["plan"] = detail::plan_json(*s.plan);
    return j;
}

} // namespace ursula::sim
