// Thread-safe mailboxes between network connections and the simulation loop.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace ursula::comms {

/// Mailboxes between network connections and the simulation loop. All
/// members are safe to call from any thread.
class Hub {
  public:
    using SessionId = std::uint64_t;

    SessionId open(std::function<void()> notify) {
        std::lock_guard lock(mutex_);
        const SessionId id = next_id_++;
        boxes_[id].notify = std::move(notify);
        return id;
    }

    void close(SessionId id) {
        std::lock_guard lock(mutex_);
        boxes_.erase(id);
    }

    /// Network side: a message arrived from a console.
    void push_incoming(SessionId id, std::string text) {
        std::lock_guard lock(mutex_);
        if (auto it = boxes_.find(id); it != boxes_.end()) it->second.incoming.push_back(std::move(text));
    }

    /// Network side: messages ready to be written to a console.
    std::vector<std::string> take_outgoing(SessionId id) {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        if (auto it = boxes_.find(id); it != boxes_.end()) {
            out.assign(std::make_move_iterator(it->second.outgoing.begin()),
                       std::make_move_iterator(it->second.outgoing.end()));
            it->second.outgoing.clear();
        }
        return out;
    }

    /// Loop side: open sessions in id order.
    std::vector<SessionId> sessions() const {
        std::lock_guard lock(mutex_);
        std::vector<SessionId> ids;
        for (const auto& [id, box] : boxes_) ids.push_back(id);
        return ids;
    }

    std::vector<std::string> take_incoming(SessionId id) {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        if (auto it = boxes_.find(id); it != boxes_.end()) {
            out.assign(std::make_move_iterator(it->second.incoming.begin()),
                       std::make_move_iterator(it->second.incoming.end()));
            it->second.incoming.clear();
        }
        return out;
    }

    void push_outgoing(SessionId id, std::vector<std::string> messages) {
        if (messages.empty()) return;
        std::function<void()> notify;
        {
            std::lock_guard lock(mutex_);
            auto it = boxes_.find(id);
            if (it == boxes_.end()) return;
            for (auto& m : messages) it->second.outgoing.push_back(std::move(m));
            notify = it->second.notify;
        }
        if (notify) notify();
    }

  private:
    struct Box {
        std::deque<std::string> incoming;
        std::deque<std::string> outgoing;
        std::function<void()> notify;
    };
    mutable std::mutex mutex_;
    std::map<SessionId, Box> boxes_;
    SessionId next_id_ = 1;
};

} // namespace ursula::comms
