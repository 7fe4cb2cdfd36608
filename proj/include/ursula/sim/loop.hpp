// Deterministic master loop. One call to step() advances truth, sensing,
// navigation, mode logic, control, actuation, limbs, power and comms by dt.
// Consoles are comms sessions: the scripted console is always present, live
// consoles come and go through a Hub.
#pragma once

#include "ursula/comms/hub.hpp"
#include "ursula/comms/session.hpp"
#include "ursula/sim/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

namespace ursula::sim {

inline constexpr double kMaxHeaveForce = 40.0;    ///< [N]
inline constexpr double kTendonPretension = 5.0;  ///< [N]
inline constexpr double kTendonStiffness = 2000.0; ///< [N/m]
inline constexpr double kSonarPeriod = 0.1;       ///< [s]
inline constexpr double kGnssPeriod = 1.0;        ///< [s]
inline constexpr double kControlPeriod = 0.1;     ///< [s]
inline constexpr double kSeedCurvature = 0.5;     ///< initial IK seed, off the straight singularity [1/m]

/// 64-bit FNV-1a.
class Fnv1a {
  public:
    void add(std::string_view bytes) {
        for (unsigned char c : bytes) {
            h_ ^= c;
            h_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return h_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

  private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct LimbRuntime {
    modes::LimbMount mount;
    Vec3 target = Vec3::Zero();       ///< limb frame
    Vec3 world_target = Vec3::Zero(); ///< posture-control target
    limbs::LimbConfig config;
    limbs::TipPose tip;
    limbs::TendonState tendons;
    Vec3 haptic = Vec3::Zero();  ///< limb frame [N]
    Vec3 tactile = Vec3::Zero(); ///< measured contact force, world [N]
};

struct RobotState {
    std::uint64_t tick = 0;
    double t = 0.0;
    dynamics::VehicleState truth;
    nav::NavEstimate nav;
    nav::SensorFrame frame;
    dynamics::VehicleState control; ///< state as the controllers see it
    modes::ModeState mode;
    bool estop = false;
    bool fault_hold = false;
    std::optional<modes::StationSetpoint> hold;

    std::optional<guidance::WaypointPlan> plan;
    guidance::LosParams los;
    guidance::LosCommand guidance;
    guidance::AutopilotState autopilot;

    std::vector<propulsion::FinState> fins;
    std::vector<propulsion::FinState> override_fins;
    double override_until = -1.0;
    dynamics::Wrench fin_wrench;
    double heave = 0.0;
    propulsion::JetState jet;
    bool jet_firing = false;

    std::array<LimbRuntime, 2> limbs;
    contact::ProxyEnvironment proxy;

    power::PowerState power;
    power::FaultMonitor fault_monitor;
    std::set<std::string> active_faults;
    std::set<std::string> pending_faults; ///< raised since the last telemetry frame

    comms::LinkStatus link;
    bool wireless = false;
};

struct SimStats {
    std::uint64_t ticks = 0;
    std::uint64_t records = 0;
    std::uint64_t commands_applied = 0;
    std::uint64_t commands_rejected = 0;
    std::uint64_t limb_updates = 0;
    std::uint64_t limb_updates_in_exp = 0; ///< must stay zero
    std::uint64_t allocations = 0;
    std::uint64_t saturated_allocations = 0;
    std::uint64_t sonar_accepted = 0;
    std::uint64_t sonar_gated = 0;
    std::uint64_t gnss_fixes = 0;
    std::uint64_t reconciles = 0;
    std::map<std::string, std::uint64_t> reconcile_actions;
    std::uint64_t waypoints_reached = 0;
    std::uint64_t haptic_frames = 0;
    std::uint64_t telemetry_frames = 0;
};

/// Id of the scripted console session; hub sessions keep their hub ids.
inline constexpr std::uint64_t kScriptSession = 0;

class Simulation {
  public:
    using LogSink = std::function<void(const std::string&)>;

    explicit Simulation(Scenario sc) : sc_(std::move(sc)) {
        dt_ = sc_.dt;
        total_ticks_ = static_cast<std::uint64_t>(std::llround(sc_.duration / dt_));
        sonar_ticks_ = every(kSonarPeriod);
        gnss_ticks_ = every(kGnssPeriod);
        control_ticks_ = every(kControlPeriod);
        telemetry_ticks_ = every(1.0 / sc_.rates.telemetry_hz);
        haptic_ticks_ = every(1.0 / sc_.rates.haptic_hz);
        q_ = nav::process_noise(sc_.noise, dt_);
        init_robot();
        expand_script();
    }

    const Scenario& scenario() const { return sc_; }
    const RobotState& robot() const { return r_; }
    const SimStats& stats() const { return stats_; }
    std::uint64_t total_ticks() const { return total_ticks_; }
    bool done() const { return r_.tick >= total_ticks_; }
    std::uint64_t digest() const { return digest_.value(); }
    std::string digest_hex() const { return digest_.hex(); }

    void set_log(LogSink sink) { log_ = std::move(sink); }
    void set_hub(comms::Hub* hub) { hub_ = hub; }

    const comms::SessionState& session(std::uint64_t id) const { return sessions_.at(id); }
    /// Messages that reached the scripted console so far.
    const std::vector<std::string>& script_received() const { return script_received_; }

    void run() {
        while (!done()) step();
    }

    void step() {
        const double dt = dt_;
        ++r_.tick;
        r_.t = static_cast<double>(r_.tick) * dt;
        r_.truth.t = r_.t;
        stats_.ticks = r_.tick;

        update_link();
        exchange(dt);
        sense_and_navigate();
        if (r_.tick % control_ticks_ == 0 || r_.tick == 1) control(control_ticks_ * dt);
        actuate(dt);
        update_limbs();
        update_power(dt);
        publish();
    }

  private:
    std::uint64_t every(double period) const {
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(period / dt_)));
    }

    void init_robot() {
        const auto& ic = sc_.initial;
        r_.truth = ic.state;
        r_.truth.t = 0.0;
        r_.nav.mean = Vec3(ic.state.x, ic.state.y, ic.state.psi);
        r_.nav.cov = Vec3(ic.nav_sigma[0] * ic.nav_sigma[0], ic.nav_sigma[1] * ic.nav_sigma[1],
                          ic.nav_sigma[2] * ic.nav_sigma[2])
                         .asDiagonal();
        r_.control = ic.state;
        r_.mode = ic.mode;
        r_.plan = sc_.plan;
        r_.los = sc_.los;
        for (auto id : propulsion::kAllFins) {
            propulsion::FinState f;
            f.id = id;
            r_.fins.push_back(f);
        }
        const auto mounts = modes::default_mounts();
        for (std::size_t i = 0; i < 2; ++i) {
            auto& l = r_.limbs[i];
            l.mount = mounts[i];
            l.config = limbs::LimbConfig::straight(sc_.limb.n_segments);
            for (auto& seg : l.config.segments) seg.kappa = kSeedCurvature;
            l.target = ic.limb_targets[i];
            const auto ik = limbs::inverse_kinematics(l.target, sc_.limb, l.config);
            l.config = ik.config;
            l.tip = limbs::forward_kinematics(l.config, sc_.limb);
            l.tendons = limbs::tendon_lengths(l.config, sc_.limb, kTendonPretension, kTendonStiffness);
            l.world_target = limb_frame(i).rotation * l.target + limb_frame(i).origin;
        }
        r_.proxy = sc_.proxy;
        r_.power = power::initial_state(ic.power_source, sc_.power.config);
        if (ic.soc_wh) r_.power.soc_wh = *ic.soc_wh;
        if (teleop_mode()) set_hold_here();
        sessions_[kScriptSession] = comms::SessionState{};
    }

    void expand_script() {
        for (const auto& e : sc_.script) {
            for (std::uint64_t k = 0; k < e.repeat; ++k) {
                comms::Command c = e.command;
                c.id = e.command.id + k;
                const double t = e.t + static_cast<double>(k) * e.interval;
                const auto tick = static_cast<std::uint64_t>(std::llround(t / dt_));
                script_.push_back({std::max<std::uint64_t>(1, tick), comms::encode(comms::Envelope{
                                                                         comms::kProtocolVersion, c.id, t, c})});
            }
        }
        std::stable_sort(script_.begin(), script_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
    }

    bool teleop_mode() const { return modes::teleop_bearing(r_.mode.nav); }

    /// Limb base frame in world coordinates from the estimated pose.
    teleop::FrameMap limb_frame(std::size_t i) const {
        return frame_for(r_.control, r_.limbs[i].mount);
    }
    static teleop::FrameMap frame_for(const dynamics::VehicleState& s, const modes::LimbMount& m) {
        return {rot_z(s.psi) * m.rotation, modes::body_to_world(s, m.position)};
    }

    void set_hold_here() {
        r_.hold = modes::StationSetpoint{r_.control.x, r_.control.y, r_.control.z, r_.control.psi};
    }

    void raise_fault(const std::string& f) { r_.pending_faults.insert(f); }

    // ---------------------------------------------------------------- link

    void update_link() {
        const Vec3 d(r_.truth.x - sc_.environment.vlc_station.x(), r_.truth.y - sc_.environment.vlc_station.y(),
                     r_.truth.z - sc_.environment.vlc_station.z());
        const double range = d.norm();
        const double alignment = range > 1e-9 ? std::acos(std::clamp(d.z() / range, -1.0, 1.0)) * 180.0 / kPi : 0.0;
        const comms::LinkGeometry g{std::max(0.0, r_.truth.z), range, alignment};
        r_.link = comms::select_link(r_.mode.link, sc_.links, g);
        r_.wireless = comms::select_link(modes::LinkMode::NOWIRE, sc_.links, g).available;
        if (const auto ev = modes::check_link(r_.mode, modes::LinkStatus{r_.wireless})) {
            apply_fault(*ev);
            raise_fault("link_lost");
        }
    }

    void apply_fault(const modes::TransitionEvent& ev) {
        const auto out = modes::request_transition(r_.mode, ev, modes::LinkStatus{r_.wireless});
        r_.mode = out.state;
        if (out.hold_position) {
            r_.fault_hold = true;
            set_hold_here();
        }
    }

    // ---------------------------------------------------------------- comms

    void exchange(double dt) {
        std::map<std::uint64_t, std::vector<std::string>> incoming;
        while (script_pos_ < script_.size() && script_[script_pos_].first <= r_.tick) {
            incoming[kScriptSession].push_back(script_[script_pos_].second);
            ++script_pos_;
        }
        if (hub_) {
            const auto ids = hub_->sessions();
            const std::set<std::uint64_t> open(ids.begin(), ids.end());
            for (auto it = sessions_.begin(); it != sessions_.end();) {
                it = (it->first != kScriptSession && !open.count(it->first)) ? sessions_.erase(it) : std::next(it);
            }
            for (auto id : ids) {
                sessions_.try_emplace(id);
                incoming[id] = hub_->take_incoming(id);
            }
        }
        const comms::RobotView view{r_.mode, r_.estop};
        for (auto& [id, s] : sessions_) {
            const auto rejected_before = s.stats.commands_rejected;
            auto result = comms::session_step(s, outbox_, incoming[id], r_.link, view, dt);
            for (const auto& c : result.delivered) apply(s, id, c);
            stats_.commands_rejected += s.stats.commands_rejected - rejected_before;
            if (id == kScriptSession) {
                for (auto& m : result.received) script_received_.push_back(std::move(m));
            } else if (hub_) {
                hub_->push_outgoing(id, std::move(result.received));
            }
        }
        outbox_.clear();
    }

    void ack(comms::SessionState& s, const comms::Command& c) {
        ++stats_.commands_applied;
        comms::send_reply(s, comms::Ack{c.id, c.kind()}, r_.link);
    }

    void refuse(comms::SessionState& s, const comms::Command& c, modes::Reason why, std::string detail) {
        comms::reject(s, c.id, why, std::move(detail), r_.link);
    }

    void apply(comms::SessionState& s, std::uint64_t session, const comms::Command& c) {
        applied_.push_back({{"id", c.id}, {"kind", std::string(modes::to_string(c.kind()))}, {"session", session}});
        std::visit([&](const auto& p) { apply_payload(s, c, p); }, c.payload);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::ModeCommand& p) {
        const bool was_teleop = teleop_mode();
        const auto out = modes::request_transition(
            r_.mode, modes::TransitionEvent{p.target, modes::EventSource::Operator}, modes::LinkStatus{r_.wireless});
        if (!out.accepted) return refuse(s, c, out.reason, "cannot enter " + modes::to_string(p.target));
        r_.mode = out.state;
        r_.estop = false;
        r_.fault_hold = false;
        if (teleop_mode()) {
            if (!was_teleop) set_hold_here();
            if (r_.mode.nav == modes::NavMode::SAUTPOS) {
                for (std::size_t i = 0; i < 2; ++i) {
                    const auto f = limb_frame(i);
                    r_.limbs[i].world_target = f.rotation * r_.limbs[i].target + f.origin;
                }
            }
        } else if (!r_.guidance.complete) {
            r_.hold.reset();
        }
        ack(s, c);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::WaypointCommand& p) {
        r_.plan = p.plan;
        r_.guidance = {};
        r_.los.drift_hat = 0.0;
        if (!teleop_mode()) r_.hold.reset();
        ack(s, c);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::FinOverrideCommand& p) {
        r_.override_fins = p.fins;
        r_.override_until = r_.t + p.duration_s;
        ack(s, c);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::LimbMasterCommand& p) {
        auto& limb = r_.limbs[p.limb];
        if (r_.mode.nav == modes::NavMode::SAUTPOS) {
            if (p.master.clutch) {
                limb.world_target += limb_frame(p.limb).rotation * (p.master.scale * p.master.increment);
            }
            return ack(s, c);
        }
        const Vec3 next = limb.target + (p.master.clutch ? Vec3(p.master.scale * p.master.increment) : Vec3::Zero());
        if (next.norm() > sc_.limb.length) return refuse(s, c, modes::Reason::Unreachable, "tip target beyond reach");
        const auto out =
            teleop::teleop_tick(p.master, limb.target, limb.config, sc_.limb, r_.proxy, r_.mode, limb_frame(p.limb));
        count_limb_update();
        limb.target = out.tip_target;
        limb.config = out.ik.config;
        ack(s, c);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::JetFireCommand& p) {
        r_.jet_firing = true;
        r_.jet.nozzle_angle = p.nozzle_angle;
        ack(s, c);
    }

    void apply_payload(comms::SessionState& s, const comms::Command& c, const comms::EStopCommand&) {
        r_.estop = true;
        r_.jet_firing = false;
        r_.override_until = -1.0;
        ack(s, c);
    }

    void count_limb_update() {
        ++stats_.limb_updates;
        if (r_.mode.op == modes::OpMode::EXP) ++stats_.limb_updates_in_exp;
    }

    // ---------------------------------------------------------------- navigation

    void sense_and_navigate() {
        r_.frame = nav::sense(r_.truth, sc_.landmarks, sc_.noise, sc_.seed * 1000003ULL + r_.tick);
        r_.nav = nav::predict(r_.nav, r_.frame, q_, dt_);
        if (r_.tick % sonar_ticks_ == 0 && !r_.frame.sonar.empty()) {
            const auto res = nav::update(r_.nav, r_.frame.sonar, sc_.landmarks, sc_.noise);
            r_.nav = res.estimate;
            stats_.sonar_accepted += res.stats.accepted;
            stats_.sonar_gated += res.stats.gated;
        }
        if (r_.tick % gnss_ticks_ == 0 && r_.frame.gnss && r_.frame.depth < sc_.noise.surface_threshold) {
            r_.nav = nav::gnss_reset(r_.nav, *r_.frame.gnss, std::max(sc_.noise.gnss, 1e-3), r_.frame.depth,
                                     sc_.noise.surface_threshold);
            ++stats_.gnss_fixes;
        }
        auto& c = r_.control;
        c.x = r_.nav.mean(0);
        c.y = r_.nav.mean(1);
        c.psi = r_.nav.mean(2);
        c.z = std::max(0.0, r_.frame.depth);
        c.u = r_.frame.dvl_u;
        c.v = r_.frame.dvl_v;
        c.r = r_.frame.yaw_rate;
        c.w = r_.truth.w;
        c.t = r_.t;
    }

    // ---------------------------------------------------------------- control

    dynamics::Wrench hold_station() {
        if (!r_.hold) set_hold_here();
        return modes::station_keeping(r_.control, *r_.hold, sc_.station);
    }

    void control(double period) {
        dynamics::Wrench tau;
        bool fins_from_override = false;
        if (r_.estop) {
            tau = {};
        } else if (r_.mode.nav == modes::NavMode::MANCON) {
            tau = hold_station();
            fins_from_override = r_.t < r_.override_until;
        } else if (r_.mode.nav == modes::NavMode::SAUTPOS) {
            if (!r_.hold) set_hold_here();
            std::vector<modes::LimbMount> mounts{r_.limbs[0].mount, r_.limbs[1].mount};
            std::vector<Vec3> targets{r_.limbs[0].world_target, r_.limbs[1].world_target};
            const auto out = modes::sautpos_step(r_.mode, r_.control, mounts, targets, sc_.limb.length, *r_.hold,
                                                 sc_.station);
            tau = out.wrench;
            for (std::size_t i = 0; i < 2; ++i) {
                auto& l = r_.limbs[i];
                if ((out.limb_targets[i] - l.target).norm() > 1e-6) {
                    l.config = limbs::inverse_kinematics(out.limb_targets[i], sc_.limb, l.config).config;
                    l.target = out.limb_targets[i];
                    count_limb_update();
                }
            }
        } else if (r_.fault_hold || !r_.plan) {
            tau = hold_station();
        } else {
            const auto before = r_.guidance.active;
            r_.guidance = guidance::los_step(r_.control, *r_.plan, r_.los, r_.guidance.active, period);
            r_.los = r_.guidance.params;
            stats_.waypoints_reached += r_.guidance.active - before;
            if (r_.guidance.complete) {
                if (!r_.hold) {
                    const auto& wps = r_.plan->waypoints;
                    const auto& last = wps.back();
                    const double psi = wps.size() > 1 ? std::atan2(last.y - wps[wps.size() - 2].y,
                                                                   last.x - wps[wps.size() - 2].x)
                                                      : r_.control.psi;
                    r_.hold = modes::StationSetpoint{last.x, last.y, last.z.value_or(r_.control.z), psi};
                }
                tau = hold_station();
            } else {
                const auto ap = guidance::autopilot(r_.guidance.heading, r_.guidance.speed, r_.guidance.depth,
                                                    r_.control, sc_.autopilot, r_.autopilot, period);
                r_.autopilot = ap.state;
                tau = ap.wrench;
            }
        }
        r_.heave = std::clamp(tau.Z, -kMaxHeaveForce, kMaxHeaveForce);
        if (fins_from_override) {
            for (auto& f : r_.fins) {
                f.amplitude = 0.0;
                f.frequency = 0.0;
                for (const auto& o : r_.override_fins) {
                    if (o.id == f.id) f = o;
                }
            }
        } else if (r_.estop) {
            for (auto& f : r_.fins) {
                f.amplitude = 0.0;
                f.frequency = 0.0;
            }
        } else {
            const auto alloc = propulsion::allocate(tau, r_.fins, sc_.fins);
            r_.fins = alloc.commands;
            ++stats_.allocations;
            if (alloc.saturated) ++stats_.saturated_allocations;
        }
        r_.fin_wrench = propulsion::fin_wrench(r_.fins, sc_.fins);
    }

    // ---------------------------------------------------------------- actuation

    void actuate(double dt) {
        const bool may_fire = r_.jet_firing && !r_.estop && r_.mode.nav == modes::NavMode::MANCON;
        const double pump = (r_.estop || may_fire) ? 0.0 : sc_.jet.pump_max;
        const auto jet = propulsion::jet_step(r_.jet, pump, may_fire, r_.jet.nozzle_angle, sc_.jet, dt);
        r_.jet = jet.state;
        if (r_.jet_firing && (!may_fire || r_.jet.stored_volume < 1e-6)) r_.jet_firing = false;
        if (r_.jet.valve_open && !r_.jet_firing) r_.jet.valve_open = false;
        dynamics::Wrench tau = r_.fin_wrench + jet.wrench;
        tau.Z = r_.heave;
        r_.truth = dynamics::step_dynamics(r_.truth, tau, sc_.vehicle, dt);
    }

    // ---------------------------------------------------------------- limbs

    Vec3 truth_contact_force(const Vec3& tip_world) const {
        Vec3 f = Vec3::Zero();
        for (const auto& p : sc_.environment.contact_planes) {
            const double d = -contact::signed_distance(p, tip_world);
            if (d > 0.0 && contact::within_patch(p, tip_world)) f += p.stiffness * d * p.normal;
        }
        return f;
    }

    void update_limbs() {
        const bool contact_tick = r_.tick % haptic_ticks_ == 0;
        for (std::size_t i = 0; i < 2; ++i) {
            auto& l = r_.limbs[i];
            l.tip = limbs::forward_kinematics(l.config, sc_.limb);
            l.tendons = limbs::tendon_lengths(l.config, sc_.limb, kTendonPretension, kTendonStiffness);
            if (!contact_tick) continue;
            const auto truth_frame = frame_for(r_.truth, l.mount);
            const auto belief = limb_frame(i);
            const Vec3 tip_truth = truth_frame.rotation * l.tip.position + truth_frame.origin;
            const Vec3 tip_belief = belief.rotation * l.tip.position + belief.origin;
            l.tactile = truth_contact_force(tip_truth);
            const auto rec = teleop::reconcile(r_.proxy, {l.tactile, tip_belief, r_.t}, sc_.reconcile);
            if (rec.action != teleop::ReconcileAction::None) {
                ++stats_.reconciles;
                ++stats_.reconcile_actions[std::string(teleop::to_string(rec.action))];
            }
            r_.proxy = rec.env;
            l.haptic = belief.rotation.transpose() * teleop::estimate_force(tip_belief, Vec3::Zero(), r_.proxy);
        }
    }

    // ---------------------------------------------------------------- power

    power::Loads requested_loads() const {
        const auto& ps = sc_.power;
        power::Loads l{};
        power::at(l, power::Subsystem::Payload) = ps.payload_w;
        power::at(l, power::Subsystem::Comms) = ps.comms_w;
        power::at(l, power::Subsystem::Computers) = ps.computers_w;
        power::at(l, power::Subsystem::Limbs) = 2.0 * ps.limb_idle_w;
        double thrust = 0.0;
        for (const auto& f : r_.fins) thrust += propulsion::fin_thrust(f, sc_.fins);
        power::at(l, power::Subsystem::Propulsion) =
            ps.propulsion_idle_w + ps.propulsion_w_per_n * thrust + ps.heave_w_per_n * std::abs(r_.heave);
        return l;
    }

    void update_power(double dt) {
        const auto res = power::step_power(r_.power, requested_loads(), dt, sc_.power.config);
        r_.power = res.state;
        for (auto e : res.events) raise_fault(std::string(power::to_string(e)));
        for (auto sub : res.shed) raise_fault("shed:" + std::string(power::to_string(sub)));
        const bool failed = std::find(res.events.begin(), res.events.end(), power::PowerEvent::PowerFail) !=
                            res.events.end();
        if (failed) r_.estop = true;

        const auto rep = power::detect_faults(r_.fault_monitor, r_.power, sc_.power.thresholds, dt);
        r_.fault_monitor = rep.monitor;
        std::set<std::string> now;
        for (const auto& f : rep.faults) {
            now.insert(f.subsystem ? std::string(power::to_string(f.kind)) + ":" + std::string(power::to_string(*f.subsystem))
                                   : std::string(power::to_string(f.kind)));
        }
        bool fresh = false;
        for (const auto& f : now) {
            if (!r_.active_faults.count(f)) fresh = true;
            raise_fault(f);
        }
        r_.active_faults = std::move(now);
        if (fresh && !failed) {
            apply_fault({{r_.mode.op, modes::NavMode::AUTNAV, r_.mode.link}, modes::EventSource::Fault, "power"});
        }
    }

    // ---------------------------------------------------------------- output

    comms::TelemetryFrame telemetry() const {
        comms::TelemetryFrame f;
        f.state = r_.truth;
        f.nav.x = r_.nav.mean(0);
        f.nav.y = r_.nav.mean(1);
        f.nav.psi = r_.nav.mean(2);
        for (int i = 0; i < 9; ++i) f.nav.cov[i] = r_.nav.cov(i / 3, i % 3);
        f.mode = r_.mode;
        f.guidance.active = r_.guidance.active;
        f.guidance.complete = r_.guidance.complete;
        f.guidance.cross_track = r_.guidance.cross_track;
        f.guidance.heading = r_.guidance.heading;
        f.guidance.speed = r_.guidance.speed;
        f.guidance.depth = r_.guidance.depth;
        for (const auto& l : r_.limbs) {
            comms::LimbTelemetry lt;
            lt.tip = l.tip.position;
            lt.direction = l.tip.direction;
            lt.target = l.target;
            lt.tendon_dl = l.tendons.length_change;
            lt.tension = l.tendons.tension;
            f.limbs.push_back(lt);
        }
        f.power.source = r_.power.source;
        f.power.soc_wh = r_.power.soc_wh;
        f.power.bus_v = r_.power.bus_voltage;
        f.power.mean_load_w = r_.power.mean_load_w;
        const auto end = power::endurance_estimate(r_.power);
        if (!end.unbounded) f.power.endurance_h = end.hours;
        f.power.loads = r_.power.loads;
        f.link = r_.link;
        f.faults.assign(r_.pending_faults.begin(), r_.pending_faults.end());
        f.proxy = r_.proxy.planes;
        f.estop = r_.estop;
        return f;
    }

    void publish() {
        if (teleop_mode() && r_.tick % haptic_ticks_ == 0) {
            for (std::size_t i = 0; i < 2; ++i) {
                outbox_.push_back(comms::HapticFrame{i, r_.limbs[i].haptic, r_.limbs[i].tip.position});
                ++stats_.haptic_frames;
            }
        }
        if (r_.tick % telemetry_ticks_ != 0) return;
        const auto frame = telemetry();
        r_.pending_faults.clear();
        outbox_.push_back(frame);
        ++stats_.telemetry_frames;

        Json replies = Json::array();
        for (; script_logged_ < script_received_.size(); ++script_logged_) {
            std::vector<Issue> issues;
            const auto e = comms::try_decode(script_received_[script_logged_], issues);
            if (e && !std::holds_alternative<comms::TelemetryFrame>(e->body) &&
                !std::holds_alternative<comms::HapticFrame>(e->body)) {
                replies.push_back(comms::to_json(*e)["body"]);
            }
        }
        Json record = {{"t", r_.t},
                       {"frame", comms::to_json(comms::Envelope{comms::kProtocolVersion, 0, r_.t, frame})["body"]},
                       {"commands", std::move(applied_)},
                       {"replies", std::move(replies)}};
        applied_ = Json::array();
        const std::string line = record.dump();
        digest_.add(line);
        digest_.add("\n");
        ++stats_.records;
        if (log_) log_(line);
    }

    Scenario sc_;
    double dt_ = 0.01;
    std::uint64_t total_ticks_ = 0;
    std::uint64_t sonar_ticks_ = 1, gnss_ticks_ = 1, control_ticks_ = 1, telemetry_ticks_ = 1, haptic_ticks_ = 1;
    Mat3 q_ = Mat3::Zero();
    RobotState r_;
    SimStats stats_;

    std::vector<std::pair<std::uint64_t, std::string>> script_;
    std::size_t script_pos_ = 0;
    std::map<std::uint64_t, comms::SessionState> sessions_;
    std::vector<comms::Body> outbox_;
    std::vector<std::string> script_received_;
    std::size_t script_logged_ = 0;
    Json applied_ = Json::array();

    comms::Hub* hub_ = nullptr;
    LogSink log_;
    Fnv1a digest_;
};

} // namespace ursula::sim
