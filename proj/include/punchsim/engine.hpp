#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "punchsim/core.hpp"

namespace punchsim {

// Deterministic discrete-event loop. Events with equal timestamps run in
// insertion order; the clock never decreases.
class Engine {
public:
    SimTime now() const { return now_; }

    void at(SimTime t, std::function<void()> fn) {
        if (t < now_) t = now_;
        queue_.push(Event{t, next_seq_++, std::move(fn)});
    }

    void after(Duration d, std::function<void()> fn) { at(now_ + d, std::move(fn)); }

    // Processes every event with timestamp <= t and advances the clock to t.
    std::size_t run_until(SimTime t) {
        std::size_t processed = 0;
        while (!queue_.empty() && queue_.top().t <= t) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.t;
            ev.fn();
            ++processed;
        }
        if (t > now_) now_ = t;
        return processed;
    }

    std::size_t run_all() {
        std::size_t processed = 0;
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.t;
            ev.fn();
            ++processed;
        }
        return processed;
    }

    bool empty() const { return queue_.empty(); }

private:
    struct Event {
        SimTime t;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.t != b.t) return a.t > b.t;
            return a.seq > b.seq;
        }
    };

    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

} // namespace punchsim
