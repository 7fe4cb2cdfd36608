// Live operation: the simulation loop behind the network server. The loop
// thread owns the Simulation; HTTP handlers read snapshots and hand over
// replacement scenarios under a mutex.
#pragma once

#include "ursula/comms/server.hpp"
#include "ursula/sim/loop.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <thread>

namespace ursula::sim {

struct LiveOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    double speed = 1.0; ///< simulated seconds per wall second; <= 0 runs unpaced
};

class LiveRunner {
  public:
    LiveRunner(Scenario sc, LiveOptions opt) : opt_(std::move(opt)), server_(hub_, handlers(), opt_.host, opt_.port) {
        pending_ = std::move(sc);
    }

    unsigned short start() {
        server_.start();
        return server_.port();
    }
    unsigned short port() const { return server_.port(); }
    comms::Hub& hub() { return hub_; }

    /// Run until stop() is called. Finished scenarios idle until a new one is posted.
    void run(const Simulation::LogSink& log = {}) {
        std::optional<Simulation> sim;
        auto wall0 = std::chrono::steady_clock::now();
        while (!stop_) {
            if (auto next = take_pending()) {
                sim.emplace(std::move(*next));
                sim->set_hub(&hub_);
                sim->set_log(log);
                wall0 = std::chrono::steady_clock::now();
                publish(*sim);
            }
            if (!sim || sim->done()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
                continue;
            }
            sim->step();
            if (sim->robot().tick % 10 == 0 || sim->done()) publish(*sim);
            if (opt_.speed > 0.0) {
                const auto due = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                             std::chrono::duration<double>(sim->robot().t / opt_.speed));
                std::this_thread::sleep_until(due);
            }
        }
        server_.stop();
    }

    void stop() { stop_ = true; }

  private:
    std::optional<Scenario> take_pending() {
        std::lock_guard lock(mutex_);
        std::optional<Scenario> out = std::move(pending_);
        pending_.reset();
        return out;
    }

    void publish(const Simulation& sim) {
        Json health = {{"status", "ok"},
                       {"scenario", sim.scenario().name},
                       {"t", sim.robot().t},
                       {"done", sim.done()},
                       {"sessions", hub_.sessions().size()}};
        std::string scenario = to_json(sim.scenario()).dump();
        std::lock_guard lock(mutex_);
        health_ = health.dump();
        scenario_ = std::move(scenario);
    }

    comms::ServerHandlers handlers() {
        comms::ServerHandlers h;
        h.health = [this] {
            std::lock_guard lock(mutex_);
            return health_;
        };
        h.get_scenario = [this] {
            std::lock_guard lock(mutex_);
            return scenario_;
        };
        h.post_scenario = [this](const std::string& body) {
            std::vector<Issue> issues;
            auto sc = parse_scenario_text(body, issues);
            if (!sc) return comms::HttpReply{400, issues_json(issues).dump()};
            const Json reply = {{"status", "loaded"}, {"scenario", sc->name}};
            std::lock_guard lock(mutex_);
            pending_ = std::move(*sc);
            return comms::HttpReply{200, reply.dump()};
        };
        return h;
    }

    LiveOptions opt_;
    comms::Hub hub_;
    comms::Server server_;
    std::mutex mutex_;
    std::optional<Scenario> pending_;
    std::string health_ = R"({"status":"starting"})";
    std::string scenario_ = "{}";
    std::atomic<bool> stop_{false};
};

} // namespace ursula::sim
