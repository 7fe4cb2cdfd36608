#include "ursula/power.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ursula;
using namespace ursula::power;

namespace {

Loads only(Subsystem s, double w) {
    Loads l{};
    at(l, s) = w;
    return l;
}

PowerState run(PowerState s, const Loads& l, double dt, int steps) {
    for (int i = 0; i < steps; ++i) s = step_power(std::move(s), l, dt).state;
    return s;
}

} // namespace

TEST(Power, CapacityIsVoltageTimesAmpHours) {
    EXPECT_EQ(kCapacityWh, 25.2 * 14.0);
    EXPECT_DOUBLE_EQ(kCapacityWh, 352.8);
    EXPECT_EQ(initial_state(Source::Battery).soc_wh, kCapacityWh);
    EXPECT_EQ(initial_state(Source::Battery).bus_voltage, 25.2);
    EXPECT_EQ(initial_state(Source::Umbilical).bus_voltage, 28.0);
}

TEST(Power, HundredWattsForOneHour) {
    const PowerState s = run(initial_state(Source::Battery), only(Subsystem::Computers, 100.0), 1.0, 3600);
    EXPECT_NEAR(s.soc_wh, kCapacityWh - 100.0, 1e-9);
}

TEST(Power, EnergyBookkeepingPerStep) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> load(0.0, 200.0), step(0.001, 0.1);
    PowerState s = initial_state(Source::Battery);
    for (int i = 0; i < 10000; ++i) {
        Loads l;
        for (double& v : l) v = load(rng);
        const double dt = step(rng);
        const double before = s.soc_wh;
        s = step_power(std::move(s), l, dt).state;
        ASSERT_NEAR(before - s.soc_wh, total(l) * dt / 3600.0, 1e-9);
    }
}

TEST(Power, EnduranceArithmetic) {
    const PowerState s = run(initial_state(Source::Battery), only(Subsystem::Propulsion, 100.0), 0.5, 120);
    const double soc = s.soc_wh;
    const Endurance e = endurance_estimate(s);
    EXPECT_FALSE(e.unbounded);
    EXPECT_DOUBLE_EQ(s.mean_load_w, 100.0);
    EXPECT_DOUBLE_EQ(e.hours, soc / 100.0);

    PowerState full = s;
    full.soc_wh = kCapacityWh;
    EXPECT_DOUBLE_EQ(endurance_estimate(full).hours, 3.528);

    const PowerState doubled = run(s, only(Subsystem::Propulsion, 200.0), 0.5, 120);
    PowerState d = doubled;
    d.soc_wh = soc;
    EXPECT_NEAR(endurance_estimate(d).hours, 0.5 * e.hours, 1e-12);
}

TEST(Power, RollingMeanForgetsAfterWindow) {
    PowerState s = run(initial_state(Source::Battery), only(Subsystem::Limbs, 300.0), 0.1, 600);
    s = run(std::move(s), only(Subsystem::Limbs, 50.0), 0.1, 600);
    EXPECT_NEAR(s.mean_load_w, 50.0, 1e-9);
    s = run(std::move(s), only(Subsystem::Limbs, 150.0), 0.1, 300);
    EXPECT_NEAR(s.mean_load_w, 100.0, 1e-9);
}

TEST(Power, UmbilicalEnduranceUnbounded) {
    const PowerState s = run(initial_state(Source::Umbilical), only(Subsystem::Computers, 100.0), 1.0, 10);
    EXPECT_TRUE(endurance_estimate(s).unbounded);
    EXPECT_TRUE(endurance_estimate(initial_state(Source::Battery)).unbounded);
}

TEST(Power, UmbilicalRecharges) {
    PowerState s = initial_state(Source::Umbilical);
    s.soc_wh = 100.0;
    s = run(std::move(s), only(Subsystem::Computers, 100.0), 1.0, 3600);
    EXPECT_NEAR(s.soc_wh, kCapacityWh, 1e-9);
    PowerState near_empty = initial_state(Source::Umbilical);
    near_empty.soc_wh = 0.0;
    near_empty = run(std::move(near_empty), Loads{}, 1.0, 1200);
    EXPECT_NEAR(near_empty.soc_wh, 100.0, 1e-9);
}

TEST(Power, UmbilicalOverloadShedsByPriority) {
    Loads l{};
    at(l, Subsystem::Payload) = 100.0;
    at(l, Subsystem::Comms) = 50.0;
    at(l, Subsystem::Limbs) = 460.0;
    at(l, Subsystem::Propulsion) = 2490.0;
    at(l, Subsystem::Computers) = 100.0;
    ASSERT_EQ(total(l), 3200.0);
    const auto res = step_power(initial_state(Source::Umbilical), l, 0.01);
    ASSERT_EQ(res.events.size(), 1u);
    EXPECT_EQ(res.events[0], PowerEvent::Overload);
    // 3200 -> 3100 (payload) -> 3050 (comms) -> 2590 (limbs)
    EXPECT_EQ(res.shed, (std::vector<Subsystem>{Subsystem::Payload, Subsystem::Comms, Subsystem::Limbs}));
    EXPECT_EQ(at(res.state.loads, Subsystem::Propulsion), 2490.0);
    EXPECT_EQ(at(res.state.loads, Subsystem::Computers), 100.0);
    EXPECT_LE(total(res.state.loads), 3000.0);

    at(l, Subsystem::Propulsion) = 2000.0;
    const auto ok = step_power(initial_state(Source::Umbilical), l, 0.01);
    EXPECT_TRUE(ok.events.empty());
    EXPECT_EQ(ok.state.loads, l);
}

TEST(Power, BatteryDepletionRaisesPowerFail) {
    PowerState s = initial_state(Source::Battery);
    s.soc_wh = 0.01;
    const auto res = step_power(std::move(s), only(Subsystem::Propulsion, 100.0), 1.0);
    EXPECT_EQ(res.state.soc_wh, 0.0);
    ASSERT_EQ(res.events.size(), 1u);
    EXPECT_EQ(res.events[0], PowerEvent::PowerFail);
    EXPECT_EQ(res.state.bus_voltage, 0.0);
}

TEST(Power, RejectsNegativeLoad) {
    EXPECT_THROW(step_power(initial_state(Source::Battery), only(Subsystem::Comms, -1.0), 0.1), Error);
    EXPECT_THROW(step_power(initial_state(Source::Battery), Loads{}, 0.0), Error);
}

TEST(Faults, NoneUnderThreshold) {
    const PowerState s = run(initial_state(Source::Battery), only(Subsystem::Propulsion, 100.0), 0.1, 10);
    EXPECT_TRUE(detect_faults({}, s, {}, 0.1).faults.empty());
}

TEST(Faults, OvercurrentIsDebounced) {
    const FaultThresholds th;
    const Loads spike = only(Subsystem::Propulsion, 25.2 * 25.0);
    PowerState s = initial_state(Source::Battery);
    FaultMonitor mon;
    for (int i = 0; i < 50; ++i) {
        s = step_power(std::move(s), spike, 0.01).state;
        const auto rep = detect_faults(mon, s, th, 0.01);
        mon = rep.monitor;
        ASSERT_TRUE(rep.faults.empty());
    }
    s = step_power(std::move(s), Loads{}, 0.01).state;
    mon = detect_faults(mon, s, th, 0.01).monitor;
    std::vector<Fault> last;
    for (int i = 0; i < 200; ++i) {
        s = step_power(std::move(s), spike, 0.01).state;
        const auto rep = detect_faults(mon, s, th, 0.01);
        mon = rep.monitor;
        if (i < 100) { ASSERT_TRUE(rep.faults.empty()) << i; }
        last = rep.faults;
    }
    ASSERT_EQ(last.size(), 1u);
    EXPECT_EQ(last[0], (Fault{FaultKind::Overcurrent, Subsystem::Propulsion}));
}

TEST(Faults, Undervoltage) {
    PowerState s = initial_state(Source::Battery);
    s.soc_wh = 1e-4;
    s = step_power(std::move(s), only(Subsystem::Computers, 100.0), 0.1).state;
    const auto rep = detect_faults({}, s, {}, 0.1);
    ASSERT_EQ(rep.faults.size(), 1u);
    EXPECT_EQ(rep.faults[0].kind, FaultKind::Undervoltage);
}
