// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "avmp/backing_store.hpp"
#include "avmp/handle.hpp"

namespace avmp {

enum class PressureState : std::uint8_t { Balanced, KvPressured, SsmPressured, Rebalancing };

const char* to_string(PressureState s) noexcept;

struct RebalancePolicy {
    double threshold_low = 0.05;
    double threshold_high = 0.30;
    std::uint32_t migration_batch_size = 128;
    std::uint64_t min_rebalance_interval_ops = 1000;

    /// Rejects threshold_low >= threshold_high, thresholds outside [0, 1]
    /// and a zero batch size.
    void validate() const;
};

/// Logical operation clock used for throttling. Advances once per allocate
/// or free call, whether it succeeds or not and however many pages it moves.
struct ThrottleState {
    std::uint64_t op_counter = 0;
    std::optional<std::uint64_t> last_rebalance_op;

    void note_op() noexcept { ++op_counter; }
    bool interval_elapsed(std::uint64_t min_interval) const noexcept {
        return !last_rebalance_op || op_counter - *last_rebalance_op >= min_interval;
    }
};

/// Next pressure label given per-pool free fractions. Entry uses a strict
/// `< threshold_low`; a pressured pool recovers at `>= threshold_low`.
/// REBALANCING resolves to BALANCED once the migration completes.
PressureState update_pressure(PressureState current, double kv_free, double ssm_free, const RebalancePolicy& policy);

struct MigrationDecision {
    enum class Action : std::uint8_t { Migrate, Propagate };

    Action action = Action::Propagate;
    PoolId donor = PoolId::SSM;
    PoolId recipient = PoolId::KV;
    std::uint32_t batch = 0;

    bool migrate() const noexcept { return action == Action::Migrate; }
};

/// Gate evaluated inside the CapacityError handler: migrate only if the other
/// pool's free fraction is strictly above threshold_high and the throttle
/// interval has elapsed.
MigrationDecision on_capacity_error(const CapacityError& err, double donor_free_fraction,
                                    const ThrottleState& throttle, const RebalancePolicy& policy);

struct RebalanceEvent {
    std::uint64_t at_op = 0;
    PoolId donor = PoolId::SSM;
    PoolId recipient = PoolId::KV;
    std::uint32_t donor_pages_freed = 0;
    std::uint32_t recipient_pages_gained = 0;
    std::uint64_t bytes_migrated = 0; // donor bytes released
    std::uint64_t waste_bytes = 0;
    bool rolled_back = false;
};

/// Pre-migration state of both stores plus the page-table remaps the donor
/// shrink performed.
struct MigrationSnapshot {
    PoolId donor = PoolId::SSM;
    BackingStore::Snapshot donor_state;
    BackingStore::Snapshot recipient_state;
    std::vector<PageRemap> donor_remaps;
};

/// Moves min(batch, donor free pages) of donor capacity into the recipient.
/// A refused shrink or grow is rolled back and reported with rolled_back set.
/// `table` may be null for stores without virtual handles.
RebalanceEvent migrate(BackingStore& donor, BackingStore& recipient, VirtualPageTable* table, std::uint32_t batch,
                       std::uint64_t at_op);

/// Restores both stores and reverts page-table remaps. Never throws for a
/// snapshot taken from the same stores.
void rollback(const MigrationSnapshot& snapshot, BackingStore& donor, BackingStore& recipient,
              VirtualPageTable* table);

/// Pressure machine plus migration bookkeeping owned by one dynamic allocator.
class Rebalancer {
public:
    explicit Rebalancer(const RebalancePolicy& policy);

    const RebalancePolicy& policy() const noexcept { return m_policy; }
    PressureState state() const noexcept { return m_state; }
    std::uint64_t transitions() const noexcept { return m_transitions; }

    void observe(const BackingStore& kv, const BackingStore& ssm);

    /// Runs the CapacityError handler. Returns true when capacity moved and the
    /// failing allocation should be retried once.
    bool handle(const CapacityError& err, BackingStore& kv, BackingStore& ssm, VirtualPageTable* table,
                ThrottleState& throttle);

    const std::vector<RebalanceEvent>& events() const noexcept { return m_events; }
    double migration_seconds() const noexcept { return m_migration_seconds; }

private:
    void set_state(PressureState s) noexcept;

    RebalancePolicy m_policy;
    PressureState m_state = PressureState::Balanced;
    std::uint64_t m_transitions = 0;
    std::vector<RebalanceEvent> m_events;
    double m_migration_seconds = 0.0;
};

} // namespace avmp
