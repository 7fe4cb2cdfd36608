// Per-console session: link latency and bandwidth applied to both
// directions, command admission, and telemetry sequencing.
//
// Downlink frames (telemetry, haptic) share one sequence counter and pass a
// token bucket; frames the bucket cannot carry wait in a bounded drop-oldest
// queue, so drops show up as sequence gaps. Replies (ack, reject) carry
// their own counter and are never dropped. Uplink commands wait for tokens in FIFO order and are never
// dropped; an emergency stop skips both the bucket and the latency line.
#pragma once

#include "ursula/comms/link.hpp"
#include "ursula/comms/messages.hpp"
#include "ursula/modes.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace ursula::comms {

struct SessionConfig {
    std::size_t downlink_queue = 4; ///< frames waiting for bandwidth
    double burst_s = 0.1;           ///< bucket depth as seconds of link rate
};

struct SessionStats {
    std::uint64_t frames_offered = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t commands_received = 0;
    std::uint64_t commands_delivered = 0;
    std::uint64_t commands_rejected = 0;

    bool operator==(const SessionStats&) const = default;
};

/// What the robot side reports for command admission.
struct RobotView {
    modes::ModeState mode;
    bool estop = false;
};

struct SessionState {
    SessionConfig config;
    double now = 0.0;
    std::uint64_t frame_seq = 0; ///< next frame sequence number
    std::uint64_t reply_seq = 0;
    double down_tokens = 0.0; ///< bytes
    double up_tokens = 0.0;   ///< bytes

    struct Queued {
        std::string bytes;
    };
    struct InFlight {
        double ready_at = 0.0;
        std::string bytes;
    };
    struct PendingCommand {
        std::size_t size = 0;
        Command command;
    };
    struct CommandInFlight {
        double ready_at = 0.0;
        Command command;
    };

    std::deque<Queued> down_queue;          ///< frames waiting for tokens
    std::deque<InFlight> down_line;         ///< frames in the latency line
    std::deque<InFlight> reply_line;        ///< replies in the latency line
    std::deque<PendingCommand> up_queue;    ///< commands waiting for tokens
    std::deque<CommandInFlight> up_line;    ///< commands in the latency line
    SessionStats stats;
};

struct SessionStepResult {
    std::vector<Command> delivered;    ///< admitted commands, in delivery order
    std::vector<std::string> received; ///< messages reaching the console this step
};

namespace detail {

inline double bytes_per_second(const LinkStatus& link) {
    if (!link.available) return 0.0;
    return link.bandwidth_kbps * 1000.0 / 8.0;
}

inline constexpr double kTimeEps = 1e-9;

} // namespace detail

/// Queue a reply to the console; it travels the latency line only.
inline void send_reply(SessionState& s, const Body& reply, const LinkStatus& link) {
    Envelope e{kProtocolVersion, s.reply_seq++, s.now, reply};
    s.reply_line.push_back({s.now + link.latency_ms / 1000.0, encode(e)});
}

/// Reject a command back to the console.
inline void reject(SessionState& s, std::optional<std::uint64_t> id, modes::Reason reason, std::string detail,
                   const LinkStatus& link) {
    ++s.stats.commands_rejected;
    send_reply(s, Reject{id, reason, std::move(detail)}, link);
}

/// Admission check run as a command reaches the robot.
inline std::optional<std::pair<modes::Reason, std::string>> admission(const Command& c, const RobotView& robot) {
    const auto kind = c.kind();
    if (!modes::command_allowed(robot.mode, kind)) {
        return std::pair{modes::Reason::ModeViolation, std::string(modes::to_string(kind)) + " not permitted in " +
                                                           modes::to_string(robot.mode)};
    }
    if (robot.estop && kind != modes::CommandKind::EStop && kind != modes::CommandKind::ModeTransition) {
        return std::pair{modes::Reason::EStopActive, std::string(modes::to_string(kind)) + " while e-stop latched"};
    }
    return std::nullopt;
}

/// Advance the session by dt.
///
/// Time moves to now + dt first; `incoming` messages and `outgoing` frames
/// are stamped with the new time. Bytes are metered by the link bandwidth
/// (infinite bandwidth passes everything) and delayed by the link latency.
inline SessionStepResult session_step(SessionState& s, const std::vector<Body>& outgoing,
                                      const std::vector<std::string>& incoming, const LinkStatus& link,
                                      const RobotView& robot, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "session_step: dt must be > 0");
    SessionStepResult out;
    s.now += dt;
    const double rate = detail::bytes_per_second(link);
    const double latency = link.latency_ms / 1000.0;
    const bool unlimited = std::isinf(rate);

    // uplink admission: parse, check schema and ranges, queue
    for (const auto& text : incoming) {
        ++s.stats.commands_received;
        std::vector<Issue> issues;
        const auto env = try_decode(text, issues);
        if (!env) {
            const Issue first = issues.empty() ? Issue{"", "invalid message"} : issues.front();
            reject(s, std::nullopt, modes::Reason::Schema, (first.path.empty() ? "<root>" : first.path) + ": " +
                                                               first.message, link);
            continue;
        }
        const Command* cmd = std::get_if<Command>(&env->body);
        if (!cmd) {
            reject(s, std::nullopt, modes::Reason::Schema, "type: consoles may only send commands", link);
            continue;
        }
        try {
            validate_command(*cmd);
        } catch (const Error& e) {
            reject(s, cmd->id, modes::Reason::Validation, e.what(), link);
            continue;
        }
        if (cmd->kind() == modes::CommandKind::EStop) {
            ++s.stats.commands_delivered;
            out.delivered.push_back(*cmd);
            continue;
        }
        s.up_queue.push_back({text.size(), *cmd});
    }

    // uplink bucket
    if (unlimited) {
        s.up_tokens = 0.0;
        for (auto& p : s.up_queue) s.up_line.push_back({s.now + latency, std::move(p.command)});
        s.up_queue.clear();
    } else {
        const double cap = std::max(rate * s.config.burst_s, s.up_queue.empty() ? 0.0 : double(s.up_queue.front().size));
        s.up_tokens = std::min(cap, s.up_tokens + rate * dt);
        while (!s.up_queue.empty() && s.up_tokens + detail::kTimeEps >= double(s.up_queue.front().size)) {
            s.up_tokens -= double(s.up_queue.front().size);
            s.up_line.push_back({s.now + latency, std::move(s.up_queue.front().command)});
            s.up_queue.pop_front();
        }
    }
    while (!s.up_line.empty() && s.up_line.front().ready_at <= s.now + detail::kTimeEps) {
        Command c = std::move(s.up_line.front().command);
        s.up_line.pop_front();
        if (const auto why = admission(c, robot)) {
            reject(s, c.id, why->first, why->second, link);
            continue;
        }
        ++s.stats.commands_delivered;
        out.delivered.push_back(std::move(c));
    }

    // downlink: sequence, bucket, drop-oldest backlog, latency line
    for (const auto& body : outgoing) {
        ++s.stats.frames_offered;
        Envelope e{kProtocolVersion, s.frame_seq++, s.now, body};
        s.down_queue.push_back({encode(e)});
    }
    if (unlimited) {
        s.down_tokens = 0.0;
        for (auto& q : s.down_queue) {
            s.down_line.push_back({s.now + latency, std::move(q.bytes)});
            ++s.stats.frames_sent;
        }
        s.down_queue.clear();
    } else {
        const double cap =
            std::max(rate * s.config.burst_s, s.down_queue.empty() ? 0.0 : double(s.down_queue.front().bytes.size()));
        s.down_tokens = std::min(cap, s.down_tokens + rate * dt);
        while (!s.down_queue.empty() && s.down_tokens + detail::kTimeEps >= double(s.down_queue.front().bytes.size())) {
            s.down_tokens -= double(s.down_queue.front().bytes.size());
            s.down_line.push_back({s.now + latency, std::move(s.down_queue.front().bytes)});
            s.down_queue.pop_front();
            ++s.stats.frames_sent;
        }
    }
    while (s.down_queue.size() > s.config.downlink_queue) {
        s.down_queue.pop_front();
        ++s.stats.frames_dropped;
    }

    auto drain = [&](std::deque<SessionState::InFlight>& line) {
        while (!line.empty() && line.front().ready_at <= s.now + detail::kTimeEps) {
            out.received.push_back(std::move(line.front().bytes));
            line.pop_front();
        }
    };
    drain(s.reply_line);
    drain(s.down_line);
    return out;
}

} // namespace ursula::comms
