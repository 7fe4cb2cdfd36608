// sim: run, replay and validate scenarios.
//   sim run <scenario> [--serve host:port] [--seed N] [--duration S] [--log out.jsonl] [--speed X]
//   sim replay <log> --query f1,f2 [--csv out.csv]
//   sim validate <scenario>
// Exit codes: 0 success, 2 validation failure, 3 runtime fault.
#include "ursula/sim/live.hpp"
#include "ursula/sim/replay.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::atomic<ursula::sim::LiveRunner*> g_live{nullptr};

void on_signal(int) {
    if (auto* r = g_live.load()) r->stop();
}

void print_issues(const std::vector<ursula::comms::Issue>& issues) {
    for (const auto& i : issues) std::cerr << (i.path.empty() ? "<root>" : i.path) << ": " << i.message << "\n";
}

std::pair<std::string, unsigned short> split_endpoint(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--serve", "expected host:port");
    const int port = std::stoi(s.substr(colon + 1));
    if (port < 0 || port > 65535) throw CLI::ValidationError("--serve", "port out of range");
    return {s.substr(0, colon), static_cast<unsigned short>(port)};
}

} // namespace

int main(int argc, char** argv) {
    using namespace ursula;
    using comms::Json;
    CLI::App app{"URSULA digital twin"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a scenario");
    std::string scenario_path, serve, log_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    double speed = 1.0;
    run->add_option("scenario", scenario_path, "scenario JSON")->required();
    run->add_option("--serve", serve, "serve WebSocket/HTTP on host:port");
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--duration", duration, "override the scenario duration [s]");
    run->add_option("--log", log_path, "write the replay log (JSON lines)");
    run->add_option("--speed", speed, "live mode: simulated seconds per wall second, 0 = unpaced");

    auto* replay = app.add_subcommand("replay", "query a replay log");
    std::string replay_path, query, csv_path;
    replay->add_option("log", replay_path, "replay log")->required();
    replay->add_option("--query", query, "comma-separated fields, e.g. state.x,state.y")->required();
    replay->add_option("--csv", csv_path, "output CSV (stdout if omitted)");

    auto* validate = app.add_subcommand("validate", "check a scenario");
    std::string validate_path;
    validate->add_option("scenario", validate_path, "scenario JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*validate) {
            const auto sc = sim::load_scenario(validate_path);
            std::cout << Json{{"scenario", sc.name}, {"valid", true}}.dump() << "\n";
            return 0;
        }

        if (*replay) {
            const auto log = sim::load_log(replay_path);
            std::string csv;
            try {
                csv = sim::query_csv(log, sim::split_fields(query));
            } catch (const Error& e) {
                std::cerr << e.what() << "\n";
                return kExitValidation;
            }
            if (csv_path.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(csv_path, std::ios::binary);
                if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + csv_path);
                out << csv;
            }
            return 0;
        }

        sim::Scenario sc = sim::load_scenario(scenario_path);
        if (seed) sc.seed = *seed;
        if (duration) sc.duration = *duration;
        std::vector<comms::Issue> issues;
        if (!sim::parse_scenario(sim::to_json(sc), issues)) throw sim::ValidationError(issues);

        std::ofstream log_file;
        sim::Simulation::LogSink sink;
        if (!log_path.empty()) {
            log_file.open(log_path, std::ios::binary);
            if (!log_file) throw Error(ErrorCode::InvalidArgument, "cannot write " + log_path);
            sink = [&log_file](const std::string& line) { log_file << line << '\n'; };
        }

        if (!serve.empty()) {
            const auto [host, port] = split_endpoint(serve);
            sim::LiveRunner live(std::move(sc), {host, port, speed});
            std::cerr << "listening on " << host << ":" << live.start() << "\n";
            g_live = &live;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            live.run(sink);
            g_live = nullptr;
            return 0;
        }

        sim::Simulation s(std::move(sc));
        s.set_log(sink);
        s.run();
        const auto& st = s.stats();
        std::cout << Json{{"scenario", s.scenario().name},
                          {"t", s.robot().t},
                          {"ticks", st.ticks},
                          {"records", st.records},
                          {"commands_applied", st.commands_applied},
                          {"commands_rejected", st.commands_rejected},
                          {"digest", s.digest_hex()}}
                         .dump()
                  << "\n";
        return 0;
    } catch (const sim::ValidationError& e) {
        print_issues(e.issues());
        return kExitValidation;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return kExitRuntime;
    }
}
