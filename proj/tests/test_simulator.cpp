// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "avmp/simulator.hpp"

using namespace avmp;

namespace {

CellConfig cell(AllocatorVariant v, WorkloadKind kind, std::uint64_t budget_mib, std::uint64_t seed = 1,
                std::uint32_t n = 256) {
    CellConfig c;
    c.allocator.variant = v;
    c.allocator.name = to_string(v);
    c.workload.kind = kind;
    c.workload.name = to_string(kind);
    c.workload.params = default_params(kind);
    c.workload.n_requests = n;
    c.workload.seed = seed;
    c.model = ModelSpec{"jamba", 4, 28, 4096, 10240, 16};
    c.budget_bytes = budget_mib << 20;
    c.record_events = true;
    return c;
}

void expect_same_events(const CellResult& a, const CellResult& b) {
    EXPECT_EQ(a.oom_count, b.oom_count);
    EXPECT_EQ(a.oom_admit, b.oom_admit);
    EXPECT_EQ(a.rebalance_count, b.rebalance_count);
    EXPECT_EQ(a.migrated_bytes, b.migrated_bytes);
    EXPECT_EQ(a.waste_bytes, b.waste_bytes);
    EXPECT_EQ(a.effective_batch_size_p50, b.effective_batch_size_p50);
    EXPECT_EQ(a.completed_requests, b.completed_requests);
    EXPECT_EQ(a.ticks, b.ticks);
    EXPECT_EQ(a.logical_ops, b.logical_ops);
    EXPECT_EQ(a.preemptions, b.preemptions);
}

} // namespace

TEST(BatchP50, LowerMedian) {
    EXPECT_EQ(effective_batch_p50({5, 5, 5}), 5u);
    EXPECT_EQ(effective_batch_p50({1, 2, 3, 4}), 2u);
    EXPECT_EQ(effective_batch_p50({3, 1, 2}), 2u);
    EXPECT_THROW(effective_batch_p50({}), std::invalid_argument);
}

TEST(BatchP50, HistogramMatchesSampleList) {
    // hist[k] = ticks with k active
    const std::vector<std::uint64_t> hist{2, 0, 3, 1};
    const std::vector<std::uint64_t> samples{0, 0, 2, 2, 2, 3};
    EXPECT_EQ(histogram_lower_median(hist), effective_batch_p50(samples));
    EXPECT_EQ(histogram_lower_median({0, 1, 1}), 1u);
    EXPECT_THROW(histogram_lower_median({0, 0}), std::invalid_argument);
}

TEST(PhaseClock, NestingRules) {
    PhaseClock c;
    c.begin();
    {
        auto outer = c.scope(Phase::Service);
        auto inner = c.scope(Phase::Service); // same phase nests
        EXPECT_THROW(c.scope(Phase::Migration), std::logic_error);
    }
    EXPECT_THROW(c.scope(Phase::Idle), std::logic_error);
    c.end();
    const auto t = c.totals();
    EXPECT_NEAR(t.sum(), c.wall_seconds(), 1e-9);
}

TEST(PhaseClock, PartitionAndTransfer) {
    PhaseClock c;
    c.begin();
    {
        auto s = c.scope(Phase::Service);
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        s.reassign(Phase::OomRetry);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    c.transfer(Phase::OomRetry, Phase::Migration, 0.005);
    c.end();
    const auto t = c.totals();
    EXPECT_EQ(t.service_s, 0.0);
    EXPECT_GT(t.oom_retry_s, 0.01);
    EXPECT_DOUBLE_EQ(t.migration_s, 0.005);
    EXPECT_GT(t.idle_s, 0.0);
    EXPECT_NEAR(t.sum(), c.wall_seconds(), 0.01 * c.wall_seconds());
}

TEST(Simulator, TinyBudgetCompletesNothing) {
    auto c = cell(AllocatorVariant::FixedDual, WorkloadKind::UniformShort, 1);
    c.horizon_ticks = 5000;
    const auto r = run_cell(c);
    EXPECT_GE(r.oom_count, 1u);
    EXPECT_EQ(r.completed_requests, 0u);
    EXPECT_TRUE(r.horizon_hit);
    EXPECT_EQ(r.final_live_pages, 0u);
    EXPECT_EQ(r.oom_decode, 0u);
}

TEST(Simulator, AmpleBudgetHasNoOoms) {
    const auto r = run_cell(cell(AllocatorVariant::FixedDual, WorkloadKind::UniformShort, 4096));
    EXPECT_EQ(r.oom_count, 0u);
    EXPECT_EQ(r.completed_requests, 256u);
    EXPECT_FALSE(r.time_to_first_oom_s.has_value());
    EXPECT_EQ(r.phase.oom_retry_s, 0.0);
    EXPECT_GT(r.effective_batch_size_p50, 0u);
    EXPECT_NEAR(r.goodput, r.completed_requests / r.wall_s, 1e-9 * r.goodput);
}

TEST(Simulator, SingleRequestTimeline) {
    auto c = cell(AllocatorVariant::FixedDual, WorkloadKind::UniformShort, 1024);
    const std::vector<Request> reqs{{0, 3, 20, 4}};
    const auto r = run_cell(c, reqs);
    EXPECT_EQ(r.completed_requests, 1u);
    // ticks 0..2 idle, 3..6 decode; samples {0,0,0,1,1,1,1}
    EXPECT_EQ(r.ticks, 7u);
    EXPECT_EQ(r.effective_batch_size_p50, 1u);
    // 20 -> 24 tokens stays within two KV pages: admit (KV, SSM) + release (KV, SSM)
    EXPECT_EQ(r.logical_ops, 4u);
}

TEST(Simulator, RejectsUnorderedStream) {
    const auto c = cell(AllocatorVariant::FixedDual, WorkloadKind::UniformShort, 1024);
    const std::vector<Request> reqs{{0, 5, 20, 4}, {1, 2, 20, 4}};
    EXPECT_THROW(run_cell(c, reqs), std::invalid_argument);
}

TEST(Simulator, Deterministic) {
    for (auto v : {AllocatorVariant::PaddedUnified, AllocatorVariant::AvmpDynamic}) {
        const auto c = cell(v, WorkloadKind::AgenticBurst, 512, 3);
        expect_same_events(run_cell(c), run_cell(c));
    }
}

TEST(Simulator, StaticEquivalence) {
    for (auto kind : {WorkloadKind::UniformShort, WorkloadKind::MixedLong, WorkloadKind::AgenticBurst}) {
        const auto a = run_cell(cell(AllocatorVariant::FixedDual, kind, 512, 2));
        const auto b = run_cell(cell(AllocatorVariant::AvmpStatic, kind, 512, 2));
        expect_same_events(a, b);
        EXPECT_EQ(a.rebalance_count, 0u);
        EXPECT_EQ(b.rebalance_count, 0u);
    }
}

// Event-log audits on pressured dynamic cells.
TEST(Simulator, EventLogInvariants) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (auto kind : {WorkloadKind::MixedLong, WorkloadKind::AgenticBurst}) {
            auto c = cell(AllocatorVariant::AvmpDynamic, kind, 512, seed, 512);
            const auto r = run_cell(c);
            ASSERT_TRUE(r.events.has_value());
            const auto& ev = *r.events;
            EXPECT_EQ(r.final_live_pages, 0u);
            EXPECT_FALSE(r.horizon_hit);
            EXPECT_EQ(r.completed_requests, 512u);

            // every OOM corresponds to an unrecovered capacity error at the same op
            std::size_t unrecovered = 0;
            for (const auto& e : ev.capacity_errors) unrecovered += !e.recovered;
            EXPECT_EQ(unrecovered, r.oom_count);
            EXPECT_EQ(ev.ooms.size(), r.oom_count);

            std::optional<std::uint64_t> last;
            for (const auto& reb : ev.rebalances) {
                const auto hit = std::find_if(ev.capacity_errors.begin(), ev.capacity_errors.end(),
                                              [&](const CapacityErrorRecord& e) { return e.op == reb.at_op; });
                EXPECT_NE(hit, ev.capacity_errors.end());
                EXPECT_LT(reb.waste_bytes, 65536u);
                if (reb.rolled_back) continue;
                if (last) {
                    EXPECT_GE(reb.at_op - *last, 1000u);
                }
                last = reb.at_op;
            }
            for (const auto& o : ev.ooms) {
                EXPECT_GE(o.tick, ev.arrival_ticks.at(o.req_id));
            }
        }
    }
}

TEST(Simulator, PhasePartition) {
    const auto r = run_cell(cell(AllocatorVariant::AvmpDynamic, WorkloadKind::MixedLong, 512));
    EXPECT_NEAR(r.phase.sum(), r.wall_s, 0.01 * r.wall_s);
    EXPECT_GE(r.phase.idle_s, 0.0);
}
