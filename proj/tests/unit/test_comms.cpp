#include "support/golden_messages.hpp"
#include "ursula/comms/session.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace ursula;
using namespace ursula::comms;
using modes::LinkMode;
using modes::NavMode;
using modes::OpMode;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string first_issue_path(std::string_view text) {
    std::vector<Issue> issues;
    EXPECT_FALSE(try_decode(text, issues));
    return issues.empty() ? "<none>" : issues.front().path;
}

std::string command_text(std::uint64_t id, const CommandPayload& p, std::uint64_t seq = 0) {
    return encode(Envelope{kProtocolVersion, seq, 0.0, Command{id, p}});
}

LimbMasterCommand nudge(double dz) {
    LimbMasterCommand c;
    c.master.increment = {0.0, 0.0, dz};
    c.master.clutch = true;
    return c;
}

LinkStatus link_with(double kbps, double latency_ms, bool available = true) {
    return {LinkKind::Umbilical, available, kbps, latency_ms};
}

const RobotView kMancon{{OpMode::INT, NavMode::MANCON, LinkMode::TET}, false};
const RobotView kExplore{{OpMode::EXP, NavMode::AUTNAV, LinkMode::TET}, false};

} // namespace

// --- link models ------------------------------------------------------------------

TEST(Link, UmbilicalAlwaysAvailable) {
    for (double depth : {0.0, 10.0, 300.0}) {
        const auto s = link_available(LinkModel::umbilical(), {depth, 1000.0, 180.0});
        EXPECT_TRUE(s.available);
        EXPECT_EQ(s.bandwidth_kbps, 100000.0);
        EXPECT_EQ(s.latency_ms, 1.0);
    }
}

TEST(Link, LteSurfaceOnly) {
    EXPECT_FALSE(link_available(LinkModel::lte_wifi(), {10.0, 0.0, 0.0}).available);
    EXPECT_FALSE(link_available(LinkModel::lte_wifi(), {0.3, 0.0, 0.0}).available);
    const auto up = link_available(LinkModel::lte_wifi(), {0.1, 500.0, 90.0});
    EXPECT_TRUE(up.available);
    EXPECT_GT(up.bandwidth_kbps, 0.0);
}

TEST(Link, VlcRangeAlignmentAndDegradation) {
    const auto m = LinkModel::vlc();
    EXPECT_FALSE(link_available(m, {5.0, 25.0, 0.0}).available);
    EXPECT_FALSE(link_available(m, {5.0, 10.0, 61.0}).available);
    EXPECT_EQ(link_available(m, {5.0, 25.0, 0.0}).bandwidth_kbps, 0.0);
    EXPECT_DOUBLE_EQ(link_available(m, {5.0, 0.0, 0.0}).bandwidth_kbps, 10000.0);
    EXPECT_DOUBLE_EQ(link_available(m, {5.0, 10.0, 60.0}).bandwidth_kbps, 5500.0);
    EXPECT_DOUBLE_EQ(link_available(m, {5.0, 20.0, 0.0}).bandwidth_kbps, 1000.0);
    double prev = 1e300;
    for (int i = 0; i <= 200; ++i) {
        const auto s = link_available(m, {5.0, 0.1 * i, 30.0});
        ASSERT_TRUE(s.available);
        ASSERT_GT(s.bandwidth_kbps, 0.0);
        ASSERT_LT(s.bandwidth_kbps, prev + 1e-12);
        prev = s.bandwidth_kbps;
    }
    EXPECT_THROW(link_available(m, {-1.0, 0.0, 0.0}), Error);
}

TEST(Link, SelectionFollowsLinkMode) {
    const LinkSet links;
    EXPECT_EQ(select_link(LinkMode::TET, links, {50.0, 100.0, 90.0}).kind, LinkKind::Umbilical);
    EXPECT_EQ(select_link(LinkMode::NOWIRE, links, {5.0, 10.0, 0.0}).kind, LinkKind::Vlc);
    const auto surface = select_link(LinkMode::NOWIRE, links, {0.1, 50.0, 0.0});
    EXPECT_EQ(surface.kind, LinkKind::LteWifi);
    EXPECT_TRUE(surface.available);
    const auto lost = select_link(LinkMode::NOWIRE, links, {5.0, 50.0, 0.0});
    EXPECT_FALSE(lost.available);
    EXPECT_EQ(lost.kind, LinkKind::Vlc);
}

// --- encoding -------------------------------------------------------------------

TEST(Messages, RoundTripEveryGoldenMessage) {
    for (const auto& [name, env] : oracle::golden_messages()) {
        const std::string bytes = encode(env);
        const Envelope back = decode(bytes);
        EXPECT_EQ(encode(back), bytes) << name;
        EXPECT_EQ(back.body.index(), env.body.index()) << name;
        EXPECT_EQ(back.seq, env.seq);
        EXPECT_EQ(back.t, env.t);
        if (const auto* c = std::get_if<Command>(&env.body)) { EXPECT_EQ(std::get<Command>(back.body), *c) << name; }
        if (const auto* r = std::get_if<Reject>(&env.body)) { EXPECT_EQ(std::get<Reject>(back.body), *r) << name; }
    }
}

TEST(Messages, GoldenCorpusIsByteStable) {
    const std::filesystem::path dir = URSULA_GOLDEN_DIR;
    const auto messages = oracle::golden_messages();
    ASSERT_EQ(messages.size(), 20u);
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) files += entry.path().extension() == ".json";
    EXPECT_EQ(files, messages.size());
    for (const auto& [name, env] : messages) {
        const auto path = dir / (name + ".json");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        const std::string golden = read_file(path);
        EXPECT_EQ(encode(env), golden) << name;
        EXPECT_EQ(encode(decode(golden)), golden) << name;
    }
}

TEST(Messages, CanonicalFormSortsKeysAndHasNoWhitespace) {
    const std::string s = encode(Envelope{1, 9, 0.5, Ack{3, modes::CommandKind::EStop}});
    EXPECT_EQ(s, R"({"body":{"id":3,"kind":"estop"},"seq":9,"t":0.5,"type":"ack","v":1})");
    // key order of the input does not matter, output is canonical
    const Envelope e = decode(R"({"v":1,"type":"ack","t":0.5,"seq":9,"body":{"kind":"estop","id":3}})");
    EXPECT_EQ(encode(e), s);
}

TEST(Messages, MissingSeqNamesSeq) {
    EXPECT_EQ(first_issue_path(R"({"body":{"id":3,"kind":"estop"},"t":0.5,"type":"ack","v":1})"), "seq");
    try {
        decode(R"({"body":{"id":3,"kind":"estop"},"t":0.5,"type":"ack","v":1})");
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.code(), ErrorCode::Schema);
        EXPECT_EQ(e.path(), "seq");
        EXPECT_NE(std::string(e.what()).find("seq"), std::string::npos);
    }
}

TEST(Messages, ErrorsNameNestedPaths) {
    auto cmd = [](const std::string& payload, const std::string& kind = "limb_master") {
        return R"({"body":{"id":1,"kind":")" + kind + R"(","payload":)" + payload +
               R"(},"seq":0,"t":0.0,"type":"command","v":1})";
    };
    EXPECT_EQ(first_issue_path(cmd(R"({"clutch":true,"increment":[0,"x",0],"limb":0,"scale":1})")),
              "body.payload.increment[1]");
    EXPECT_EQ(first_issue_path(cmd(R"({"clutch":true,"increment":[0,0,0],"limb":0,"scale":1,"extra":2})")),
              "body.payload.extra");
    EXPECT_EQ(first_issue_path(cmd(R"({"increment":[0,0,0],"limb":0,"scale":1})")), "body.payload.clutch");
    EXPECT_EQ(first_issue_path(cmd(R"({"acceptance_radius":1,"cruise_speed":0.5,"waypoints":[{"x":1}]})", "waypoints")),
              "body.payload.waypoints[0].y");
    EXPECT_EQ(first_issue_path(cmd(R"({"op":"INT","nav":"autnav","link":"TET"})", "mode")), "body.payload.nav");
    EXPECT_EQ(first_issue_path(cmd("{}", "launch")), "body.kind");
    EXPECT_EQ(first_issue_path(R"({"body":{},"seq":0,"t":0,"type":"ack","v":2})"), "v");
    EXPECT_EQ(first_issue_path(R"({"body":{},"seq":-1,"t":0,"type":"ack","v":1})"), "seq");
    EXPECT_EQ(first_issue_path(R"({"body":{},"seq":0,"t":0,"type":"blob","v":1})"), "type");
    EXPECT_EQ(first_issue_path("[1,2,3]"), "");
    EXPECT_EQ(first_issue_path("{\"v\":1"), "");
}

TEST(Messages, EncodeRejectsNonFinite) {
    HapticFrame h;
    h.force.x() = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(encode(Envelope{1, 0, 0.0, h}), Error);
}

TEST(Messages, DeepNestingRefused) {
    std::string deep(10000, '[');
    EXPECT_EQ(first_issue_path(deep), "");
    EXPECT_EQ(first_issue_path(std::string(1000, '{')), "");
}

TEST(Messages, FuzzDecodeIsTotal) {
    std::mt19937_64 rng(7);
    std::vector<std::string> seeds;
    for (const auto& [name, env] : oracle::golden_messages()) seeds.push_back(encode(env));
    const std::string alphabet = "{}[]\":,0123456789.eE+-truefalsnl \\/uabcxyz";
    std::uniform_int_distribution<int> byte(0, 255), pick(0, 4);
    int decoded = 0;
    for (int i = 0; i < 100000; ++i) {
        std::string s;
        const auto& seed = seeds[static_cast<std::size_t>(i) % seeds.size()];
        switch (pick(rng)) {
        case 0: { // random bytes
            const int n = std::uniform_int_distribution<int>(0, 200)(rng);
            for (int k = 0; k < n; ++k) s.push_back(static_cast<char>(byte(rng)));
            break;
        }
        case 1: { // random JSON-ish tokens
            const int n = std::uniform_int_distribution<int>(0, 200)(rng);
            for (int k = 0; k < n; ++k) s.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]);
            break;
        }
        case 2: { // byte flips of a valid message
            s = seed;
            const int flips = std::uniform_int_distribution<int>(1, 4)(rng);
            for (int k = 0; k < flips; ++k) {
                s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)] = static_cast<char>(byte(rng));
            }
            break;
        }
        case 3: // truncation
            s = seed.substr(0, std::uniform_int_distribution<std::size_t>(0, seed.size())(rng));
            break;
        default: { // token splice from another message
            s = seed;
            const auto& other = seeds[std::uniform_int_distribution<std::size_t>(0, seeds.size() - 1)(rng)];
            const std::size_t at = std::uniform_int_distribution<std::size_t>(0, s.size())(rng);
            const std::size_t from = std::uniform_int_distribution<std::size_t>(0, other.size() - 1)(rng);
            s.insert(at, other.substr(from, std::uniform_int_distribution<std::size_t>(1, 40)(rng)));
            break;
        }
        }
        std::vector<Issue> issues;
        std::optional<Envelope> e;
        ASSERT_NO_THROW(e = try_decode(s, issues)) << i;
        if (e) {
            ++decoded;
            ASSERT_TRUE(issues.empty());
            std::string again;
            ASSERT_NO_THROW(again = encode(*e));
            ASSERT_EQ(encode(decode(again)), again);
        } else {
            ASSERT_FALSE(issues.empty());
        }
    }
    EXPECT_GT(decoded, 0);
}

// --- command validation ---------------------------------------------------------

TEST(Messages, ValidationRanges) {
    EXPECT_NO_THROW(validate_command({1, nudge(0.01)}));
    EXPECT_THROW(validate_command({1, nudge(0.011)}), Error);
    LimbMasterCommand bad_limb = nudge(0.0);
    bad_limb.limb = 2;
    EXPECT_THROW(validate_command({1, bad_limb}), Error);
    EXPECT_THROW(validate_command({1, WaypointCommand{}}), Error);
    FinOverrideCommand f;
    f.fins = {{propulsion::FinId::BowPort, 2.0}};
    EXPECT_THROW(validate_command({1, f}), Error);
    EXPECT_THROW(validate_command({1, JetFireCommand{4.0}}), Error);
    EXPECT_NO_THROW(validate_command({1, EStopCommand{}}));
}

// --- session ---------------------------------------------------------------------

TEST(Session, InfiniteBandwidthZeroLatencyPassesThrough) {
    SessionState s;
    const LinkStatus link = link_with(std::numeric_limits<double>::infinity(), 0.0);
    std::vector<Body> frames;
    for (int i = 0; i < 50; ++i) frames.push_back(HapticFrame{0, {0, 0, double(i)}, {}});
    const auto r = session_step(s, frames, {command_text(1, nudge(0.001))}, link, kMancon, 0.01);
    ASSERT_EQ(r.delivered.size(), 1u);
    EXPECT_EQ(r.delivered[0].id, 1u);
    ASSERT_EQ(r.received.size(), 50u);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(decode(r.received[i]).seq, i);
    EXPECT_EQ(s.stats.frames_dropped, 0u);
}

TEST(Session, LatencyDelaysExactly) {
    SessionState s;
    const LinkStatus link = link_with(1e6, 100.0);
    int delivered_at = -1, frame_at = -1;
    for (int k = 0; k < 30; ++k) {
        std::vector<std::string> in;
        std::vector<Body> out;
        if (k == 0) {
            in.push_back(command_text(1, nudge(0.001)));
            out.push_back(HapticFrame{});
        }
        const auto r = session_step(s, out, in, link, kMancon, 0.01);
        if (!r.delivered.empty()) delivered_at = k;
        if (!r.received.empty()) frame_at = k;
    }
    // sent in the step ending at t = 0.01, delivered in the step ending at 0.11
    EXPECT_EQ(delivered_at, 10);
    EXPECT_EQ(frame_at, 10);
}

TEST(Session, TelemetryOverBandwidthDropsHalfCommandsAllDelivered) {
    SessionState s;
    TelemetryFrame frame;
    frame.limbs.resize(2);
    const std::size_t frame_bytes = encode(Envelope{1, 100000, 123.45, frame}).size();
    // 10 Hz of frames against a link carrying 5 frames per second
    const double kbps = 5.0 * double(frame_bytes) * 8.0 / 1000.0;
    const LinkStatus link = link_with(kbps, 20.0);
    std::uint64_t next_id = 1;
    std::vector<std::uint64_t> sent_ids, got_ids;
    std::uint64_t last_seq = 0;
    bool any = false;
    for (int k = 0; k < 60000; ++k) { // 600 s at 100 Hz
        std::vector<Body> out;
        if (k % 10 == 0) {
            TelemetryFrame f = frame;
            f.state.x = 0.001 * k;
            out.push_back(f);
        }
        std::vector<std::string> in;
        if (k % 7 == 0) {
            in.push_back(command_text(next_id, nudge(0.001)));
            sent_ids.push_back(next_id++);
        }
        const auto r = session_step(s, out, in, link, kMancon, 0.01);
        for (const auto& c : r.delivered) got_ids.push_back(c.id);
        for (const auto& m : r.received) {
            const auto e = decode(m);
            if (!std::holds_alternative<TelemetryFrame>(e.body)) continue;
            if (any) { ASSERT_GT(e.seq, last_seq); }
            last_seq = e.seq;
            any = true;
        }
    }
    const double drop = double(s.stats.frames_dropped) / double(s.stats.frames_offered);
    EXPECT_NEAR(drop, 0.5, 0.05) << s.stats.frames_dropped << " / " << s.stats.frames_offered;
    // commands still queued at the end are in flight, not lost
    const std::size_t pending = s.up_queue.size() + s.up_line.size();
    ASSERT_EQ(got_ids.size() + pending, sent_ids.size());
    for (std::size_t i = 0; i < got_ids.size(); ++i) ASSERT_EQ(got_ids[i], sent_ids[i]);
    EXPECT_LE(pending, 2u);
}

TEST(Session, CommandsExactlyOnceInOrderUnderOverload) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        SessionState s;
        const LinkStatus link = link_with(std::uniform_real_distribution<double>(2.0, 20.0)(rng),
                                          std::uniform_real_distribution<double>(0.0, 300.0)(rng));
        std::vector<std::uint64_t> sent, got;
        std::uint64_t id = 1;
        for (int k = 0; k < 3000; ++k) {
            std::vector<std::string> in;
            const int burst = k % 10 == 0 ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
            for (int b = 0; b < burst; ++b) {
                in.push_back(command_text(id, nudge(0.001 * (id % 10)), id));
                sent.push_back(id++);
            }
            std::vector<Body> out{TelemetryFrame{}};
            const auto r = session_step(s, out, in, link, kMancon, 0.01);
            for (const auto& c : r.delivered) got.push_back(c.id);
        }
        for (int k = 0; k < 200000 && got.size() < sent.size(); ++k) {
            const auto r = session_step(s, {}, {}, link, kMancon, 0.01);
            for (const auto& c : r.delivered) got.push_back(c.id);
        }
        ASSERT_EQ(got.size(), sent.size()) << "trial " << trial;
        ASSERT_EQ(got, sent) << "trial " << trial;
        EXPECT_EQ(s.stats.commands_delivered, sent.size());
        EXPECT_EQ(s.stats.commands_rejected, 0u);
    }
}

TEST(Session, EmergencyStopWithinOneTick) {
    for (const LinkStatus& link : {link_with(0.1, 5000.0), link_with(100.0, 0.0, false), link_with(1e5, 1.0)}) {
        SessionState s;
        // saturate the uplink first
        std::vector<std::string> backlog;
        for (std::uint64_t i = 1; i <= 20; ++i) backlog.push_back(command_text(i, nudge(0.001)));
        session_step(s, {}, backlog, link, kMancon, 0.01);
        const auto r = session_step(s, {}, {command_text(99, EStopCommand{})}, link, kExplore, 0.01);
        ASSERT_FALSE(r.delivered.empty());
        EXPECT_EQ(r.delivered.front().id, 99u);
        EXPECT_EQ(r.delivered.front().kind(), modes::CommandKind::EStop);
    }
}

TEST(Session, RejectionsCarryReasonCodes) {
    SessionState s;
    const LinkStatus link = link_with(1e5, 0.0);
    const auto r = session_step(s, {},
                                {command_text(1, nudge(0.001)), command_text(2, nudge(0.5)), "{\"v\":1}",
                                 encode(Envelope{1, 0, 0.0, Ack{1, modes::CommandKind::EStop}})},
                                link, kExplore, 0.01);
    EXPECT_TRUE(r.delivered.empty());
    std::vector<Reject> rejects;
    for (const auto& m : r.received) rejects.push_back(std::get<Reject>(decode(m).body));
    ASSERT_EQ(rejects.size(), 4u);
    // replies generated on admission precede replies generated at delivery
    EXPECT_EQ(rejects[0].id, 2u);
    EXPECT_EQ(rejects[0].reason, modes::Reason::Validation);
    EXPECT_EQ(rejects[1].reason, modes::Reason::Schema);
    EXPECT_EQ(rejects[1].id, std::nullopt);
    EXPECT_EQ(rejects[2].reason, modes::Reason::Schema);
    EXPECT_EQ(rejects[3].id, 1u);
    EXPECT_EQ(rejects[3].reason, modes::Reason::ModeViolation);
    EXPECT_EQ(modes::to_string(rejects[3].reason), "mode_violation");
    for (std::size_t i = 0; i < r.received.size(); ++i) EXPECT_EQ(decode(r.received[i]).seq, i);

    SessionState latched;
    const RobotView stopped{kMancon.mode, true};
    const auto q = session_step(latched, {}, {command_text(5, nudge(0.001)), command_text(6, ModeCommand{kMancon.mode})},
                                link, stopped, 0.01);
    ASSERT_EQ(q.delivered.size(), 1u);
    EXPECT_EQ(q.delivered[0].id, 6u);
    ASSERT_EQ(q.received.size(), 1u);
    EXPECT_EQ(std::get<Reject>(decode(q.received[0]).body).reason, modes::Reason::EStopActive);
}

TEST(Session, UnavailableLinkHoldsCommandsAndDropsOldFrames) {
    SessionState s;
    const LinkStatus down = link_with(1e4, 1.0, false);
    for (int k = 0; k < 50; ++k) {
        const auto r = session_step(s, {HapticFrame{}}, {command_text(k + 1, nudge(0.001))}, down, kMancon, 0.01);
        ASSERT_TRUE(r.delivered.empty());
        ASSERT_TRUE(r.received.empty());
    }
    EXPECT_EQ(s.down_queue.size(), s.config.downlink_queue);
    EXPECT_EQ(s.stats.frames_dropped, 50u - s.config.downlink_queue);
    std::vector<std::uint64_t> ids, seqs;
    for (int k = 0; k < 100; ++k) {
        const auto r = session_step(s, {}, {}, link_with(1e4, 1.0), kMancon, 0.01);
        for (const auto& c : r.delivered) ids.push_back(c.id);
        for (const auto& m : r.received) seqs.push_back(decode(m).seq);
    }
    ASSERT_EQ(ids.size(), 50u);
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], i + 1);
    EXPECT_EQ(seqs, (std::vector<std::uint64_t>{46, 47, 48, 49}));
}
