#include "ursula/propulsion.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ursula;
using namespace ursula::propulsion;
using oracle::four_fins;
using oracle::random_feasible;

namespace {

Eigen::Vector3d vec(const Wrench& w) { return {w.X, w.Y, w.N}; }

// Largest s with s*tau attainable, by brute force: per-fin support functions
// from a swivel grid of clamped commands, minimised over a grid of directions.
double saturation_scale_oracle(const Wrench& tau, const std::vector<FinState>& fins,
                               const FinParams& p) {
    std::vector<std::vector<Eigen::Vector3d>> options(fins.size());
    for (std::size_t i = 0; i < fins.size(); ++i) {
        for (int k = 0; k <= 360; ++k) {
            FinState c = fins[i];
            c.swivel = -kPi / 2 + kPi * k / 360.0;
            c.amplitude = p.amplitude_max;
            c.frequency = p.frequency_max;
            options[i].push_back(vec(fin_wrench({c}, p)));
        }
    }
    const Eigen::Vector3d t = vec(tau);
    double best = std::numeric_limits<double>::infinity();
    const int n_el = 180, n_az = 360;
    for (int a = 1; a < n_el; ++a) {
        const double el = kPi * a / n_el;
        for (int b = 0; b < n_az; ++b) {
            const double az = 2 * kPi * b / n_az;
            const Eigen::Vector3d d(std::sin(el) * std::cos(az), std::sin(el) * std::sin(az),
                                    std::cos(el));
            const double proj = d.dot(t);
            if (proj <= 1e-9) continue;
            double support = 0.0;
            for (const auto& opts : options) {
                double h = 0.0;
                for (const auto& o : opts) h = std::max(h, d.dot(o));
                support += h;
            }
            best = std::min(best, support / proj);
        }
    }
    return best;
}

} // namespace

TEST(FinWrench, ZeroFrequencyZeroWrench) {
    FinParams p;
    const Wrench w = fin_wrench(four_fins(0.3, 0.4, 0.0), p);
    EXPECT_EQ(w, Wrench{});
}

TEST(FinWrench, SwivelRotatesForce) {
    FinParams p;
    FinState f{FinId::BowStbd, -kPi / 2, FinMode::StandingWave, 0.4, 2.0, 0.0};
    const Wrench a = fin_wrench({f}, p);
    f.swivel += kPi / 2;
    const Wrench b = fin_wrench({f}, p);
    // rotation by +90 degrees: (X, Y) -> (-Y, X)
    EXPECT_NEAR(b.X, -a.Y, 1e-12);
    EXPECT_NEAR(b.Y, a.X, 1e-12);
    EXPECT_NEAR(std::hypot(a.X, a.Y), std::hypot(b.X, b.Y), 1e-12);

    // port fins are mirrored: the same swivel change turns them the other way
    FinState q{FinId::SternPort, -kPi / 2, FinMode::StandingWave, 0.4, 2.0, 0.0};
    const Wrench c = fin_wrench({q}, p);
    q.swivel += kPi / 2;
    const Wrench d = fin_wrench({q}, p);
    EXPECT_NEAR(d.X, c.Y, 1e-12);
    EXPECT_NEAR(d.Y, -c.X, 1e-12);
}

TEST(FinWrench, SymmetricFinsGivePureSurge) {
    FinParams p;
    const Wrench w = fin_wrench(four_fins(-kPi / 4, 0.4, 2.0), p);
    // thrust per fin 4 * 0.16 * 4 = 2.56 N at 45 degrees outboard of forward
    EXPECT_NEAR(w.X, 4 * 2.56 * std::cos(kPi / 4), 1e-12);
    EXPECT_NEAR(w.Y, 0.0, 1e-12);
    EXPECT_NEAR(w.N, 0.0, 1e-12);
}

TEST(FinWrench, FrequencySquaredScalingAndPhaseInvariance) {
    FinParams p;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto fins = random_feasible(rng, p);
        for (auto& f : fins) f.frequency *= 0.5;
        for (const auto& f : fins) {
            FinState g = f;
            g.frequency *= 2.0;
            EXPECT_EQ(fin_thrust(g, p), 4.0 * fin_thrust(f, p));
            g = f;
            g.phase = -f.phase + 1.0;
            EXPECT_EQ(fin_wrench({g}, p), fin_wrench({f}, p));
        }
    }
}

TEST(FinWrench, RejectsUnknownIdAndInvalidState) {
    FinParams p;
    p.mounts.erase(FinId::CentralPort);
    EXPECT_THROW(fin_wrench({{FinId::CentralPort, 0, FinMode::StandingWave, 0.1, 1.0, 0}}, p), Error);
    FinParams q;
    EXPECT_THROW(fin_wrench({{FinId::BowPort, 2.0, FinMode::StandingWave, 0.1, 1.0, 0}}, q), Error);
    EXPECT_THROW(fin_wrench({{FinId::BowPort, 0.0, FinMode::StandingWave, 0.1, -1.0, 0}}, q), Error);
    EXPECT_THROW(fin_wrench({{FinId::BowPort, 0.0, FinMode::StandingWave, 0.9, 1.0, 0}}, q), Error);
}

TEST(Jet, ChargePhase) {
    JetParams p;
    const auto r = jet_step({}, 0.1, false, 0.0, p, 1.0);
    EXPECT_NEAR(r.state.stored_volume, 0.1, 1e-15);
    EXPECT_NEAR(r.state.pressure, p.elastic_constant * 0.1, 1e-12);
    EXPECT_EQ(r.wrench, Wrench{});
}

TEST(Jet, EmptyMantleVentsNothing) {
    JetParams p;
    const auto r = jet_step({}, 0.0, true, 0.0, p, 0.01);
    EXPECT_EQ(r.state.stored_volume, 0.0);
    EXPECT_EQ(r.wrench, Wrench{});
}

TEST(Jet, ChargeClampsAtCapacity) {
    JetParams p;
    JetState s;
    for (int i = 0; i < 100; ++i) s = jet_step(s, 10.0, false, 0.0, p, 1.0).state;
    EXPECT_EQ(s.stored_volume, p.capacity);
    EXPECT_NEAR(s.pumped_total, p.capacity, 1e-12);
}

TEST(Jet, ImpulseMatchesFineStepOracle) {
    JetParams p;
    JetState full;
    full.stored_volume = p.capacity;
    full.pressure = p.elastic_constant * p.capacity;

    const double impulse_ref = oracle::jet_impulse_oracle(p);

    double impulse = 0.0;
    JetState s = full;
    for (int i = 0; i < 10000; ++i) {
        const auto r = jet_step(s, 0.0, true, 0.0, p, 0.01);
        impulse += r.wrench.X * 0.01;
        s = r.state;
    }
    EXPECT_LT(std::abs(impulse - impulse_ref) / impulse_ref, 0.01);
    EXPECT_EQ(s.stored_volume, 0.0);
}

TEST(Jet, NozzleAngleSteersThrust) {
    JetParams p;
    JetState s;
    s.stored_volume = 2.0;
    const auto r = jet_step(s, 0.0, true, kPi / 2, p, 0.01);
    EXPECT_NEAR(r.wrench.X, 0.0, 1e-12);
    EXPECT_GT(r.wrench.Y, 0.0);
    EXPECT_NEAR(r.wrench.N, p.nozzle.x * r.wrench.Y, 1e-12);
}

TEST(Jet, VolumeConservedUnderRandomCommands) {
    JetParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pump(-0.2, 1.0), dt(0.001, 0.1);
    JetState s;
    for (int i = 0; i < 20000; ++i) {
        s = jet_step(s, pump(rng), rng() % 3 == 0, 0.0, p, dt(rng)).state;
        ASSERT_GE(s.stored_volume, 0.0);
        ASSERT_LE(s.stored_volume, p.capacity);
        ASSERT_LE(s.expelled_total, s.pumped_total + 1e-12);
        ASSERT_NEAR(s.pumped_total - s.expelled_total, s.stored_volume, 1e-9);
        ASSERT_EQ(s.pressure, p.elastic_constant * s.stored_volume);
    }
}

TEST(Allocate, ZeroRequest) {
    FinParams p;
    const auto r = allocate({}, four_fins(0, 0, 0), p);
    for (const auto& c : r.commands) EXPECT_EQ(fin_thrust(c, p), 0.0);
    EXPECT_EQ(r.achieved, Wrench{});
    EXPECT_FALSE(r.saturated);
}

TEST(Allocate, PureSurgeIsSymmetric) {
    FinParams p;
    const auto r = allocate({20.0, 0, 0, 0}, four_fins(0, 0, 0), p);
    ASSERT_EQ(r.commands.size(), 4u);
    EXPECT_FALSE(r.saturated);
    EXPECT_NEAR(r.achieved.X, 20.0, 1e-9);
    EXPECT_NEAR(r.achieved.Y, 0.0, 1e-9);
    EXPECT_NEAR(r.achieved.N, 0.0, 1e-9);
    // port/stbd pairs carry identical commands
    EXPECT_NEAR(r.commands[0].swivel, r.commands[1].swivel, 1e-12);
    EXPECT_NEAR(r.commands[0].frequency, r.commands[1].frequency, 1e-12);
    EXPECT_NEAR(r.commands[2].swivel, r.commands[3].swivel, 1e-12);
    EXPECT_NEAR(r.commands[2].frequency, r.commands[3].frequency, 1e-12);
}

TEST(Allocate, FixedPointOnFeasibleCommands) {
    FinParams p;
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = random_feasible(rng, p);
        const Wrench w = fin_wrench(c, p);
        const auto r = allocate(w, c, p);
        ASSERT_NEAR(r.achieved.X, w.X, 1e-6) << trial;
        ASSERT_NEAR(r.achieved.Y, w.Y, 1e-6) << trial;
        ASSERT_NEAR(r.achieved.N, w.N, 1e-6) << trial;
        ASSERT_FALSE(r.saturated);
    }
}

TEST(Allocate, SixFinsFixedPoint) {
    FinParams p;
    std::mt19937_64 rng(9);
    auto c = random_feasible(rng, p);
    c.push_back({FinId::CentralPort, 0.2, FinMode::StandingWave, 0.3, 2.0, 0});
    c.push_back({FinId::CentralStbd, -0.4, FinMode::TravelingWave, 0.45, 1.0, 0});
    const Wrench w = fin_wrench(c, p);
    const auto r = allocate(w, c, p);
    EXPECT_NEAR(r.achieved.X, w.X, 1e-6);
    EXPECT_NEAR(r.achieved.Y, w.Y, 1e-6);
    EXPECT_NEAR(r.achieved.N, w.N, 1e-6);
}

TEST(Allocate, SaturationScalesAlongRequestAgainstGridOracle) {
    FinParams p;
    const auto fins = four_fins(0, 0, 0);
    const std::vector<Wrench> requests{{200.0, 0, 0, 0}, {-80.0, 60.0, 0, 0}, {10.0, 5.0, 40.0, 0},
                                       {0.0, -90.0, -12.0, 0}, {50.0, 50.0, 50.0, 0}};
    for (const Wrench& tau : requests) {
        const auto r = allocate(tau, fins, p);
        EXPECT_TRUE(r.saturated);
        const double oracle = saturation_scale_oracle(tau, fins, p);
        EXPECT_NEAR(r.scale, oracle, 0.02 * oracle) << tau.X << " " << tau.Y << " " << tau.N;
        EXPECT_LE(std::abs(r.achieved.X), std::abs(tau.X) + 1e-6);
        EXPECT_LE(std::abs(r.achieved.Y), std::abs(tau.Y) + 1e-6);
        EXPECT_LE(std::abs(r.achieved.N), std::abs(tau.N) + 1e-6);
        EXPECT_NEAR(r.achieved.X, r.scale * tau.X, 1e-6);
        EXPECT_NEAR(r.achieved.Y, r.scale * tau.Y, 1e-6);
        EXPECT_NEAR(r.achieved.N, r.scale * tau.N, 1e-6);
    }
}

TEST(Allocate, RejectsTooFewFins) {
    FinParams p;
    auto fins = four_fins(0, 0, 0);
    fins.pop_back();
    EXPECT_THROW(allocate({1, 0, 0, 0}, fins, p), Error);
}
