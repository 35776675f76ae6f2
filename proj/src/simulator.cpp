// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/simulator.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace avmp {

std::uint64_t effective_batch_p50(std::vector<std::uint64_t> samples) {
    if (samples.empty()) {
        throw std::invalid_argument("effective_batch_p50 of an empty sample list");
    }
    const auto mid = samples.begin() + static_cast<std::ptrdiff_t>((samples.size() - 1) / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    return *mid;
}

std::uint64_t histogram_lower_median(const std::vector<std::uint64_t>& hist) {
    std::uint64_t n = 0;
    for (const auto c : hist) {
        n += c;
    }
    if (n == 0) {
        throw std::invalid_argument("median of an empty histogram");
    }
    const std::uint64_t rank = (n - 1) / 2; // zero-based
    std::uint64_t seen = 0;
    for (std::size_t k = 0; k < hist.size(); ++k) {
        seen += hist[k];
        if (seen > rank) {
            return k;
        }
    }
    return hist.size() - 1;
}

namespace {

struct Active {
    std::uint32_t idx = 0;
    std::uint32_t generated = 0;
    std::uint64_t stall_until = 0; // decode retry is allowed at this tick
    std::uint64_t failed_at_epoch = 0;
};

class CellRun {
public:
    CellRun(const CellConfig& cfg, const std::vector<Request>& requests)
        : m_cfg(cfg), m_req(requests), m_eligible(requests.size(), 0) {
        for (std::size_t i = 1; i < m_req.size(); ++i) {
            if (m_req[i].arrival_tick < m_req[i - 1].arrival_tick) {
                throw std::invalid_argument("request stream must be ordered by arrival tick");
            }
        }
        if (cfg.retry_backoff_ticks == 0) {
            throw std::invalid_argument("retry_backoff_ticks must be >= 1");
        }
    }

    CellResult run() {
        m_clock.begin();
        HybridAllocator alloc(m_cfg.allocator, m_cfg.budget_bytes, m_cfg.model);
        m_alloc = &alloc;
        m_hist.assign(m_req.size() + 1, 0);

        std::uint64_t t = 0;
        while (m_next_arrival < m_req.size() || !m_waiting.empty() || !m_active.empty()) {
            if (t >= m_cfg.horizon_ticks) {
                m_result.horizon_hit = true;
                break;
            }
            if (m_active.empty()) {
                const auto next = next_event_tick(t);
                if (next > t) {
                    const auto skip = std::min(next, m_cfg.horizon_ticks) - t;
                    m_hist[0] += skip;
                    t += skip;
                    continue;
                }
            }
            step(t);
            ++t;
        }
        m_result.ticks = t;

        for (const auto& a : m_active) {
            release(a.idx);
        }
        m_active.clear();
        m_clock.end();
        finish(alloc);
        m_alloc = nullptr;
        return std::move(m_result);
    }

private:
    std::uint64_t next_event_tick(std::uint64_t t) const {
        std::uint64_t next = UINT64_MAX;
        if (m_next_arrival < m_req.size()) {
            next = std::max(t, m_req[m_next_arrival].arrival_tick);
        }
        if (!m_waiting.empty()) {
            next = std::min(next, std::max(t, m_eligible[m_waiting.front()]));
        }
        return next;
    }

    void step(std::uint64_t t) {
        while (m_next_arrival < m_req.size() && m_req[m_next_arrival].arrival_tick <= t) {
            m_waiting.push_back(static_cast<std::uint32_t>(m_next_arrival++));
        }

        // strict FCFS: a blocked head holds back everything behind it
        while (!m_waiting.empty() && m_eligible[m_waiting.front()] <= t) {
            const auto idx = m_waiting.front();
            const auto& r = m_req[idx];
            if (!timed([&] { m_alloc->admit(r.req_id, r.prompt_tokens); })) {
                record_oom(t, idx, OomSite::Admit);
                m_eligible[idx] = t + m_cfg.retry_backoff_ticks;
                break;
            }
            m_waiting.pop_front();
            m_active.push_back(Active{idx, 0, 0, 0});
        }

        m_hist[m_active.size()] += 1;

        bool any_done = false;
        for (auto& a : m_active) {
            if (a.stall_until > t) {
                continue;
            }
            const auto& r = m_req[a.idx];
            const std::uint64_t tokens = std::uint64_t{r.prompt_tokens} + a.generated + 1;
            if (!timed([&] { m_alloc->extend_decode(r.req_id, tokens); })) {
                record_oom(t, a.idx, OomSite::Decode);
                a.stall_until = t + m_cfg.retry_backoff_ticks;
                a.failed_at_epoch = m_release_epoch;
                continue;
            }
            if (++a.generated == r.gen_tokens) {
                release(a.idx);
                ++m_result.completed_requests;
                a.generated = UINT32_MAX;
                any_done = true;
            }
        }
        if (any_done) {
            std::erase_if(m_active, [](const Active& a) { return a.generated == UINT32_MAX; });
        }

        // Every active sequence is stalled and nothing has been freed since
        // their failures, so only they could free memory: recompute the latest
        // arrival so the oldest one keeps its progress.
        if (!m_active.empty() && std::all_of(m_active.begin(), m_active.end(), [&](const Active& a) {
                return a.stall_until > t && a.failed_at_epoch == m_release_epoch;
            })) {
            const auto it = std::max_element(m_active.begin(), m_active.end(),
                                             [](const Active& a, const Active& b) { return a.idx < b.idx; });
            const auto victim = *it;
            m_active.erase(it);
            release(victim.idx);
            ++m_result.preemptions;
            m_eligible[victim.idx] = t + m_cfg.retry_backoff_ticks + 1;
            m_waiting.insert(std::lower_bound(m_waiting.begin(), m_waiting.end(), victim.idx), victim.idx);
        }
    }

    template <typename F>
    bool timed(F&& call) {
        const double mig_before = m_alloc->migration_seconds();
        bool ok = true;
        Phase bucket = Phase::Service;
        {
            auto scope = m_clock.scope(Phase::Service);
            try {
                call();
            } catch (const CapacityError&) {
                ok = false;
                bucket = Phase::OomRetry;
                scope.reassign(bucket);
            }
        }
        const double mig = m_alloc->migration_seconds() - mig_before;
        if (mig > 0.0) {
            m_clock.transfer(bucket, Phase::Migration, mig);
        }
        return ok;
    }

    void release(std::uint32_t idx) {
        auto scope = m_clock.scope(Phase::Service);
        m_alloc->release(m_req[idx].req_id);
        ++m_release_epoch;
    }

    void record_oom(std::uint64_t t, std::uint32_t idx, OomSite site) {
        if (!m_result.time_to_first_oom_s) {
            m_result.time_to_first_oom_s = m_clock.elapsed();
        }
        ++m_result.oom_count;
        ++(site == OomSite::Admit ? m_result.oom_admit : m_result.oom_decode);
        if (m_cfg.record_events) {
            m_ooms.push_back(OomEvent{t, m_req[idx].req_id, m_alloc->capacity_errors().back().op, site});
        }
    }

    void finish(const HybridAllocator& alloc) {
        auto& res = m_result;
        for (const auto& ev : alloc.rebalance_events()) {
            if (ev.rolled_back) {
                ++res.rolled_back_count;
                continue;
            }
            ++res.rebalance_count;
            res.migrated_bytes += ev.bytes_migrated;
            res.waste_bytes += ev.waste_bytes;
        }
        res.effective_batch_size_p50 = histogram_lower_median(m_hist);
        res.logical_ops = alloc.throttle().op_counter;
        res.peak_reserved_bytes = alloc.reserved_bytes().total();
        res.final_live_pages = alloc.store(PoolId::KV).live_count();
        if (!alloc.unified()) {
            res.final_live_pages += alloc.store(PoolId::SSM).live_count();
        }

        res.phase = m_clock.totals();
        res.wall_s = m_clock.wall_seconds();
        res.goodput = res.wall_s > 0.0 ? static_cast<double>(res.completed_requests) / res.wall_s : 0.0;

        if (m_cfg.record_events) {
            CellEvents ev;
            ev.ooms = std::move(m_ooms);
            ev.capacity_errors = alloc.capacity_errors();
            ev.rebalances = alloc.rebalance_events();
            ev.arrival_ticks.reserve(m_req.size());
            for (const auto& r : m_req) {
                ev.arrival_ticks.push_back(r.arrival_tick);
            }
            res.events = std::move(ev);
        }
    }

    const CellConfig& m_cfg;
    const std::vector<Request>& m_req;
    HybridAllocator* m_alloc = nullptr;
    PhaseClock m_clock;
    CellResult m_result;

    std::vector<std::uint64_t> m_eligible;
    std::deque<std::uint32_t> m_waiting;
    std::vector<Active> m_active;
    std::size_t m_next_arrival = 0;
    std::uint64_t m_release_epoch = 0;
    std::vector<std::uint64_t> m_hist;
    std::vector<OomEvent> m_ooms;
};

} // namespace

CellResult run_cell(const CellConfig& cfg, const std::vector<Request>& requests) {
    return CellRun(cfg, requests).run();
}

CellResult run_cell(const CellConfig& cfg) {
    const auto requests = generate(cfg.workload);
    return run_cell(cfg, requests);
}

} // namespace avmp
