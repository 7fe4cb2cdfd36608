// Battery / umbilical supply, per-subsystem load accounting, endurance
// estimation and fault detection. The battery is a constant-voltage store.
#pragma once

#include "ursula/core.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

namespace ursula::power {

inline constexpr double kBatteryVoltage = 25.2; ///< [V]
inline constexpr double kBatteryAmpHours = 14.0;
inline constexpr double kUmbilicalVoltage = 28.0; ///< [V]
inline constexpr double kCapacityWh = kBatteryVoltage * kBatteryAmpHours;

/// Declared in shedding order: payload is dropped first, computers last.
enum class Subsystem { Payload, Comms, Limbs, Propulsion, Computers };
inline constexpr std::size_t kSubsystems = 5;
inline constexpr std::array<Subsystem, kSubsystems> kShedOrder{
    Subsystem::Payload, Subsystem::Comms, Subsystem::Limbs, Subsystem::Propulsion, Subsystem::Computers};

inline std::string_view to_string(Subsystem s) {
    switch (s) {
    case Subsystem::Payload: return "payload";
    case Subsystem::Comms: return "comms";
    case Subsystem::Limbs: return "limbs";
    case Subsystem::Propulsion: return "propulsion";
    case Subsystem::Computers: return "computers";
    }
    return "?";
}

enum class Source { Battery, Umbilical };

inline std::string_view to_string(Source s) { return s == Source::Battery ? "battery" : "umbilical"; }

/// Per-subsystem power draw [W], indexed by Subsystem.
using Loads = std::array<double, kSubsystems>;

inline double& at(Loads& l, Subsystem s) { return l[static_cast<std::size_t>(s)]; }
inline double at(const Loads& l, Subsystem s) { return l[static_cast<std::size_t>(s)]; }

inline double total(const Loads& l) {
    double t = 0.0;
    for (double v : l) t += v;
    return t;
}

struct PowerConfig {
    double capacity_wh = kCapacityWh;
    double charger_w = 300.0;         ///< recharge rate on umbilical
    double umbilical_limit_w = 3000.0;
    double window_s = 60.0;           ///< rolling-mean window
};

struct PowerState {
    Source source = Source::Battery;
    double soc_wh = kCapacityWh;
    double bus_voltage = kBatteryVoltage;
    Loads loads{};          ///< served loads after shedding
    double mean_load_w = 0.0;

    /// (dt, energy J) samples inside the rolling window, oldest first.
    std::deque<std::pair<double, double>> window;
    double window_time = 0.0;
    double window_energy = 0.0;
};

inline PowerState initial_state(Source source, const PowerConfig& cfg = {}) {
    PowerState s;
    s.source = source;
    s.soc_wh = cfg.capacity_wh;
    s.bus_voltage = source == Source::Umbilical ? kUmbilicalVoltage : kBatteryVoltage;
    return s;
}

enum class PowerEvent { Overload, PowerFail };

inline std::string_view to_string(PowerEvent e) {
    return e == PowerEvent::Overload ? "overload" : "power_fail";
}

struct PowerStepResult {
    PowerState state;
    std::vector<PowerEvent> events;
    std::vector<Subsystem> shed; ///< subsystems switched off this step
};

/// Advance the supply by dt seconds under the requested loads.
///
/// Battery: soc decreases by total * dt / 3600; reaching zero raises
/// PowerFail and drops the bus. Umbilical: whole subsystems are shed in
/// kShedOrder until the total fits the umbilical limit (Overload raised), and
/// the battery recharges at the charger rate up to capacity.
inline PowerStepResult step_power(PowerState state, const Loads& requested, double dt,
                                  const PowerConfig& cfg = {}) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "step_power: dt must be > 0");
    for (std::size_t i = 0; i < kSubsystems; ++i) {
        require_finite({requested[i]}, "step_power load");
        if (requested[i] < 0.0) {
            throw Error(ErrorCode::InvalidArgument,
                        "step_power: negative load for " + std::string(to_string(static_cast<Subsystem>(i))));
        }
    }
    PowerStepResult res;
    Loads served = requested;
    if (state.source == Source::Umbilical) {
        if (total(served) > cfg.umbilical_limit_w) {
            res.events.push_back(PowerEvent::Overload);
            for (Subsystem s : kShedOrder) {
                if (total(served) <= cfg.umbilical_limit_w) break;
                if (at(served, s) > 0.0) {
                    at(served, s) = 0.0;
                    res.shed.push_back(s);
                }
            }
        }
        state.soc_wh = std::min(cfg.capacity_wh, state.soc_wh + cfg.charger_w * dt / 3600.0);
        state.bus_voltage = kUmbilicalVoltage;
    } else {
        state.soc_wh -= total(served) * dt / 3600.0;
        if (state.soc_wh <= 0.0) {
            state.soc_wh = 0.0;
            res.events.push_back(PowerEvent::PowerFail);
        }
        state.bus_voltage = state.soc_wh > 0.0 ? kBatteryVoltage : 0.0;
    }
    state.loads = served;

    const double energy = total(served) * dt;
    state.window.emplace_back(dt, energy);
    state.window_time += dt;
    state.window_energy += energy;
    while (state.window.size() > 1 && state.window_time - state.window.front().first >= cfg.window_s - 1e-9) {
        state.window_time -= state.window.front().first;
        state.window_energy -= state.window.front().second;
        state.window.pop_front();
    }
    state.mean_load_w = state.window_time > 0.0 ? state.window_energy / state.window_time : 0.0;
    res.state = std::move(state);
    return res;
}

struct Endurance {
    bool unbounded = false;
    double hours = 0.0;
};

/// Remaining battery time at the rolling-mean load. Unbounded on umbilical
/// or at zero load.
inline Endurance endurance_estimate(const PowerState& s) {
    if (s.source == Source::Umbilical || !(s.mean_load_w > 0.0)) return {true, 0.0};
    return {false, s.soc_wh / s.mean_load_w};
}

// -----------------------------------------------------------------------------
// Fault detection
// -----------------------------------------------------------------------------

struct FaultThresholds {
    Loads overcurrent_a{4.0, 2.0, 8.0, 20.0, 4.0}; ///< per subsystem [A]
    double undervoltage_v = 22.0;
    double debounce_s = 1.0;
};

enum class FaultKind { Overcurrent, Undervoltage };

inline std::string_view to_string(FaultKind k) {
    return k == FaultKind::Overcurrent ? "overcurrent" : "undervoltage";
}

struct Fault {
    FaultKind kind = FaultKind::Overcurrent;
    std::optional<Subsystem> subsystem;

    bool operator==(const Fault&) const = default;
};

/// Time each subsystem has spent continuously above its threshold.
struct FaultMonitor {
    std::array<double, kSubsystems> over_time{};
};

struct FaultReport {
    FaultMonitor monitor;
    std::vector<Fault> faults;
};

/// Overcurrent (I = P / V above threshold for longer than the debounce) per
/// subsystem, and bus undervoltage. A dead bus reports undervoltage only.
inline FaultReport detect_faults(const FaultMonitor& mon, const PowerState& s, const FaultThresholds& th,
                                 double dt) {
    FaultReport rep{mon, {}};
    for (std::size_t i = 0; i < kSubsystems; ++i) {
        const double current = s.bus_voltage > 0.0 ? s.loads[i] / s.bus_voltage : 0.0;
        rep.monitor.over_time[i] = current > th.overcurrent_a[i] ? mon.over_time[i] + dt : 0.0;
        if (rep.monitor.over_time[i] > th.debounce_s + 1e-9) {
            rep.faults.push_back({FaultKind::Overcurrent, static_cast<Subsystem>(i)});
        }
    }
    if (s.bus_voltage < th.undervoltage_v) rep.faults.push_back({FaultKind::Undervoltage, std::nullopt});
    return rep;
}

} // namespace ursula::power
