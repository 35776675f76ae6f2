// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avmp/allocator.hpp"
#include "avmp/phase_clock.hpp"
#include "avmp/workload.hpp"

namespace avmp {

inline constexpr const char* kSchemaVersion = "1.3.0";

struct CellConfig {
    AllocatorConfig allocator;
    WorkloadSpec workload; // workload.seed is the cell seed
    ModelSpec model;
    std::uint64_t budget_bytes = 0;
    std::uint32_t retry_backoff_ticks = 5;
    std::uint64_t horizon_ticks = 1'000'000;
    bool record_events = false;

    std::uint64_t seed() const noexcept { return workload.seed; }
};

enum class OomSite : std::uint8_t { Admit, Decode };

struct OomEvent {
    std::uint64_t tick = 0;
    std::uint64_t req_id = 0;
    std::uint64_t op = 0; // logical op of the surfaced CapacityError
    OomSite site = OomSite::Admit;
};

struct CellEvents {
    std::vector<OomEvent> ooms;
    std::vector<CapacityErrorRecord> capacity_errors;
    std::vector<RebalanceEvent> rebalances;
    std::vector<std::uint64_t> arrival_ticks; // by req_id, for the monotone-tick audit
};

struct CellResult {
    // event-deterministic
    std::uint64_t oom_count = 0;
    std::uint64_t oom_admit = 0;
    std::uint64_t oom_decode = 0;
    std::uint64_t rebalance_count = 0; // migrations that took effect
    std::uint64_t rolled_back_count = 0;
    std::uint64_t migrated_bytes = 0;
    std::uint64_t waste_bytes = 0;
    std::uint64_t effective_batch_size_p50 = 0;
    std::uint64_t completed_requests = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t ticks = 0;
    std::uint64_t logical_ops = 0;
    std::uint64_t peak_reserved_bytes = 0;
    bool horizon_hit = false;
    std::uint64_t final_live_pages = 0;

    // timing-dependent
    double goodput = 0.0;
    std::optional<double> time_to_first_oom_s;
    PhaseTotals phase;
    double wall_s = 0.0;

    std::optional<CellEvents> events;
};

/// Lower median of the samples; throws std::invalid_argument when empty.
std::uint64_t effective_batch_p50(std::vector<std::uint64_t> samples);

/// Lower median of a histogram where hist[k] counts ticks with k active.
std::uint64_t histogram_lower_median(const std::vector<std::uint64_t>& hist);

/// Runs one cell to completion (or to the horizon, after which remaining
/// sequences are released). Single-threaded and deterministic in everything
/// except the timing fields.
CellResult run_cell(const CellConfig& cfg);

/// Same as run_cell but on a caller-supplied stream (e.g. a replayed trace).
CellResult run_cell(const CellConfig& cfg, const std::vector<Request>& requests);

} // namespace avmp
