// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace avmp {

enum class Phase : std::uint8_t { Service, OomRetry, Migration, Idle };

inline const char* to_string(Phase p) noexcept {
    switch (p) {
    case Phase::Service:
        return "service";
    case Phase::OomRetry:
        return "oom_retry";
    case Phase::Migration:
        return "migration";
    case Phase::Idle:
        return "idle";
    }
    return "?";
}

struct PhaseTotals {
    double service_s = 0.0;
    double oom_retry_s = 0.0;
    double migration_s = 0.0;
    double idle_s = 0.0;

    double sum() const noexcept { return service_s + oom_retry_s + migration_s + idle_s; }
};

/// Four-bucket wall-clock split of one cell. Scopes of the same phase may
/// nest (only the outermost is timed); a scope of a different phase opened
/// inside another is a logic error. Idle is whatever the measured wall time
/// leaves over, so the buckets always partition it.
class PhaseClock {
public:
    using clock = std::chrono::steady_clock;

    class Scope {
    public:
        Scope(PhaseClock& owner, Phase phase) : m_owner(&owner), m_phase(phase) { owner.enter(phase); }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;
        ~Scope() {
            if (m_owner != nullptr) {
                m_owner->leave(m_phase);
            }
        }

        /// Charge the region to a different bucket when it closes, e.g. an
        /// allocation that turned out to fail.
        void reassign(Phase phase) noexcept { m_owner->m_open_phase = phase; m_phase = phase; }

    private:
        PhaseClock* m_owner;
        Phase m_phase;
    };

    void begin() {
        m_buckets.fill(0.0);
        m_wall_start = clock::now();
        m_running = true;
    }

    void end() {
        if (m_depth != 0) {
            throw std::logic_error("phase clock stopped inside an open scope");
        }
        m_wall_s = seconds_since(m_wall_start);
        m_running = false;
    }

    Scope scope(Phase phase) { return Scope(*this, phase); }

    /// Move already-accrued time between buckets (clamped to what is there).
    void transfer(Phase from, Phase to, double seconds) noexcept {
        auto& src = m_buckets[index(from)];
        const double moved = seconds < src ? seconds : src;
        src -= moved;
        m_buckets[index(to)] += moved;
    }

    double elapsed() const noexcept { return m_running ? seconds_since(m_wall_start) : m_wall_s; }
    double wall_seconds() const noexcept { return m_wall_s; }

    PhaseTotals totals() const noexcept {
        PhaseTotals t;
        t.service_s = m_buckets[index(Phase::Service)];
        t.oom_retry_s = m_buckets[index(Phase::OomRetry)];
        t.migration_s = m_buckets[index(Phase::Migration)];
        const double busy = t.service_s + t.oom_retry_s + t.migration_s;
        t.idle_s = m_wall_s > busy ? m_wall_s - busy : 0.0;
        return t;
    }

private:
    static std::size_t index(Phase p) noexcept { return static_cast<std::size_t>(p); }
    static double seconds_since(clock::time_point t) noexcept {
        return std::chrono::duration<double>(clock::now() - t).count();
    }

    void enter(Phase phase) {
        if (phase == Phase::Idle) {
            throw std::logic_error("idle is the remainder and cannot be scoped");
        }
        if (m_depth > 0) {
            if (phase != m_open_phase) {
                throw std::logic_error(std::string("cannot open a ") + to_string(phase) + " scope inside " +
                                       to_string(m_open_phase));
            }
            ++m_depth;
            return;
        }
        m_open_phase = phase;
        m_depth = 1;
        m_scope_start = clock::now();
    }

    void leave(Phase) noexcept {
        if (--m_depth == 0) {
            m_buckets[index(m_open_phase)] += seconds_since(m_scope_start);
        }
    }

    std::array<double, 4> m_buckets{};
    clock::time_point m_wall_start{};
    clock::time_point m_scope_start{};
    double m_wall_s = 0.0;
    bool m_running = false;
    Phase m_open_phase = Phase::Service;
    int m_depth = 0;
};

} // namespace avmp
