#include "ursula/comms/server.hpp"
#include "ursula/comms/session.hpp"

#include "support/net_client.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <map>

using namespace ursula;
using namespace ursula::comms;
using oracle::http_request;
using oracle::WsClient;
namespace http = oracle::http;

namespace {

ServerHandlers stub_handlers(std::string& stored) {
    ServerHandlers h;
    h.health = [] { return std::string(R"({"status":"ok"})"); };
    h.get_scenario = [&stored] { return stored; };
    h.post_scenario = [&stored](const std::string& body) {
        const Json j = Json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            return HttpReply{400, R"({"errors":[{"message":"malformed JSON","path":""}]})"};
        }
        stored = j.dump();
        return HttpReply{200, R"({"status":"loaded"})"};
    };
    return h;
}

/// Stand-in for the simulation loop: one comms session per hub session.
void pump(Hub& hub, std::map<Hub::SessionId, SessionState>& sessions, const RobotView& robot, int ticks,
          bool telemetry) {
    const LinkStatus link{LinkKind::Umbilical, true, 100000.0, 0.0};
    for (int k = 0; k < ticks; ++k) {
        for (auto id : hub.sessions()) {
            auto& s = sessions[id];
            std::vector<Body> out;
            if (telemetry) out.push_back(TelemetryFrame{});
            const auto r = session_step(s, out, hub.take_incoming(id), link, robot, 0.01);
            std::vector<std::string> to_console = r.received;
            for (const auto& c : r.delivered) {
                to_console.push_back(encode(Envelope{1, s.reply_seq++, s.now, Ack{c.id, c.kind()}}));
            }
            hub.push_outgoing(id, std::move(to_console));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

std::string limb_command(std::uint64_t id) {
    LimbMasterCommand c;
    c.master.increment = {0.0, 0.0, 0.001};
    c.master.clutch = true;
    return encode(Envelope{1, id, 0.0, Command{id, c}});
}

const RobotView kMancon{{modes::OpMode::INT, modes::NavMode::MANCON, modes::LinkMode::TET}, false};

} // namespace

TEST(Server, HealthAndScenarioRoutes) {
    Hub hub;
    std::string stored = R"({"name":"initial"})";
    Server server(hub, stub_handlers(stored), "127.0.0.1", 0);
    server.start();
    ASSERT_NE(server.port(), 0);

    const auto health = http_request(server.port(), http::verb::get, "/health");
    EXPECT_EQ(health.status, 200u);
    EXPECT_EQ(health.body, R"({"status":"ok"})");
    EXPECT_EQ(health.content_type, "application/json");

    EXPECT_EQ(http_request(server.port(), http::verb::get, "/scenario").body, R"({"name":"initial"})");
    const auto bad = http_request(server.port(), http::verb::post, "/scenario", "{nope");
    EXPECT_EQ(bad.status, 400u);
    EXPECT_NE(bad.body.find("errors"), std::string::npos);
    const auto good = http_request(server.port(), http::verb::post, "/scenario", R"({"name":"next"})");
    EXPECT_EQ(good.status, 200u);
    EXPECT_EQ(http_request(server.port(), http::verb::get, "/scenario").body, R"({"name":"next"})");

    EXPECT_EQ(http_request(server.port(), http::verb::get, "/nothing").status, 404u);
    EXPECT_EQ(http_request(server.port(), http::verb::post, "/health").status, 405u);
    EXPECT_EQ(http_request(server.port(), http::verb::get, "/ws").status, 404u);
    server.stop();
}

TEST(Server, WebSocketCommandsAndTelemetry) {
    Hub hub;
    std::string stored = "{}";
    Server server(hub, stub_handlers(stored), "127.0.0.1", 0);
    server.start();
    WsClient client(server.port());
    for (int i = 0; i < 200 && hub.sessions().empty(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    ASSERT_EQ(hub.sessions().size(), 1u);

    client.send(limb_command(1));
    client.send("{\"v\":1}");
    std::map<Hub::SessionId, SessionState> sessions;
    pump(hub, sessions, kMancon, 20, false);

    std::optional<Reject> rejected;
    std::optional<Ack> acked;
    for (int i = 0; i < 2; ++i) {
        const auto e = decode(client.receive());
        if (const auto* r = std::get_if<Reject>(&e.body)) rejected = *r;
        if (const auto* a = std::get_if<Ack>(&e.body)) acked = *a;
    }
    ASSERT_TRUE(rejected);
    EXPECT_EQ(rejected->reason, modes::Reason::Schema);
    EXPECT_EQ(rejected->id, std::nullopt);
    ASSERT_TRUE(acked);
    EXPECT_EQ(acked->id, 1u);

    pump(hub, sessions, kMancon, 5, true);
    std::uint64_t prev = 0;
    for (int i = 0; i < 5; ++i) {
        const auto e = decode(client.receive());
        ASSERT_TRUE(std::holds_alternative<TelemetryFrame>(e.body));
        if (i > 0) {
            EXPECT_EQ(e.seq, prev + 1);
        }
        prev = e.seq;
    }
    client.close();
    for (int i = 0; i < 200 && !hub.sessions().empty(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    EXPECT_TRUE(hub.sessions().empty());
    server.stop();
}

TEST(Server, ConcurrentSessionsAreIndependent) {
    Hub hub;
    std::string stored = "{}";
    Server server(hub, stub_handlers(stored), "127.0.0.1", 0);
    server.start();
    std::vector<std::unique_ptr<WsClient>> clients;
    for (int i = 0; i < 3; ++i) clients.push_back(std::make_unique<WsClient>(server.port()));
    for (int i = 0; i < 200 && hub.sessions().size() < 3; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    ASSERT_EQ(hub.sessions().size(), 3u);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        for (std::uint64_t k = 1; k <= 5; ++k) clients[i]->send(limb_command(100 * (i + 1) + k));
    }
    std::map<Hub::SessionId, SessionState> sessions;
    pump(hub, sessions, kMancon, 20, false);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        for (std::uint64_t k = 1; k <= 5; ++k) {
            const auto e = decode(clients[i]->receive());
            ASSERT_TRUE(std::holds_alternative<Ack>(e.body));
            EXPECT_EQ(std::get<Ack>(e.body).id, 100 * (i + 1) + k);
            EXPECT_EQ(e.seq, k - 1);
        }
    }
    for (auto& c : clients) c->close();
    server.stop();
}
