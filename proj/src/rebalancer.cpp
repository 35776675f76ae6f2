// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/rebalancer.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

namespace avmp {

const char* to_string(PressureState s) noexcept {
    switch (s) {
    case PressureState::Balanced:
        return "BALANCED";
    case PressureState::KvPressured:
        return "KV_PRESSURED";
    case PressureState::SsmPressured:
        return "SSM_PRESSURED";
    case PressureState::Rebalancing:
        return "REBALANCING";
    }
    return "?";
}

void RebalancePolicy::validate() const {
    if (!(threshold_low >= 0.0 && threshold_high <= 1.0)) {
        throw std::invalid_argument("thresholds must lie in [0, 1]");
    }
    if (!(threshold_low < threshold_high)) {
        throw std::invalid_argument("threshold_low (" + std::to_string(threshold_low) +
                                    ") must be below threshold_high (" + std::to_string(threshold_high) + ")");
    }
    if (migration_batch_size == 0) {
        throw std::invalid_argument("migration_batch_size must be >= 1");
    }
}

PressureState update_pressure(PressureState current, double kv_free, double ssm_free, const RebalancePolicy& policy) {
    switch (current) {
    case PressureState::Rebalancing:
        return PressureState::Balanced;
    case PressureState::KvPressured:
        return kv_free >= policy.threshold_low ? PressureState::Balanced : current;
    case PressureState::SsmPressured:
        return ssm_free >= policy.threshold_low ? PressureState::Balanced : current;
    case PressureState::Balanced:
        if (kv_free < policy.threshold_low) {
            return PressureState::KvPressured;
        }
        if (ssm_free < policy.threshold_low) {
            return PressureState::SsmPressured;
        }
        return current;
    }
    return current;
}

MigrationDecision on_capacity_error(const CapacityError& err, double donor_free_fraction,
                                    const ThrottleState& throttle, const RebalancePolicy& policy) {
    MigrationDecision d;
    d.recipient = err.pool();
    d.donor = other_pool(err.pool());
    if (donor_free_fraction > policy.threshold_high && throttle.interval_elapsed(policy.min_rebalance_interval_ops)) {
        d.action = MigrationDecision::Action::Migrate;
        d.batch = policy.migration_batch_size;
    }
    return d;
}

void rollback(const MigrationSnapshot& snapshot, BackingStore& donor, BackingStore& recipient,
              VirtualPageTable* table) {
    if (table != nullptr && !snapshot.donor_remaps.empty()) {
        table->revert(snapshot.donor, snapshot.donor_remaps);
    }
    donor.restore(snapshot.donor_state);
    recipient.restore(snapshot.recipient_state);
}

RebalanceEvent migrate(BackingStore& donor, BackingStore& recipient, VirtualPageTable* table, std::uint32_t batch,
                       std::uint64_t at_op) {
    RebalanceEvent ev;
    ev.at_op = at_op;
    ev.donor = donor.pool();
    ev.recipient = recipient.pool();
    ev.donor_pages_freed = std::min(batch, donor.free_count());
    ev.bytes_migrated = static_cast<std::uint64_t>(ev.donor_pages_freed) * donor.page_stride();
    ev.recipient_pages_gained = static_cast<std::uint32_t>(ev.bytes_migrated / recipient.page_stride());
    ev.waste_bytes = ev.bytes_migrated % recipient.page_stride();

    MigrationSnapshot snap;
    snap.donor = donor.pool();
    snap.donor_state = donor.snapshot();
    snap.recipient_state = recipient.snapshot();
    try {
        if (ev.donor_pages_freed == 0) {
            throw ResizeRefused("donor has no free pages");
        }
        snap.donor_remaps = donor.resize_capacity(-static_cast<std::int64_t>(ev.donor_pages_freed));
        if (table != nullptr) {
            table->apply(donor.pool(), snap.donor_remaps);
        }
        recipient.resize_capacity(static_cast<std::int64_t>(ev.recipient_pages_gained));
    } catch (const ResizeRefused&) {
        rollback(snap, donor, recipient, table);
        ev.rolled_back = true;
    }
    return ev;
}

Rebalancer::Rebalancer(const RebalancePolicy& policy) : m_policy(policy) {
    m_policy.validate();
}

void Rebalancer::set_state(PressureState s) noexcept {
    if (s != m_state) {
        ++m_transitions;
        m_state = s;
    }
}

void Rebalancer::observe(const BackingStore& kv, const BackingStore& ssm) {
    set_state(update_pressure(m_state, kv.free_fraction(), ssm.free_fraction(), m_policy));
}

bool Rebalancer::handle(const CapacityError& err, BackingStore& kv, BackingStore& ssm, VirtualPageTable* table,
                        ThrottleState& throttle) {
    observe(kv, ssm);
    BackingStore& recipient = err.pool() == PoolId::KV ? kv : ssm;
    BackingStore& donor = err.pool() == PoolId::KV ? ssm : kv;
    const auto decision = on_capacity_error(err, donor.free_fraction(), throttle, m_policy);
    if (!decision.migrate()) {
        return false;
    }

    const auto start = std::chrono::steady_clock::now();
    set_state(PressureState::Rebalancing);
    auto ev = migrate(donor, recipient, table, decision.batch, throttle.op_counter);
    if (!ev.rolled_back) {
        throttle.last_rebalance_op = throttle.op_counter;
    }
    m_events.push_back(ev);
    set_state(update_pressure(m_state, kv.free_fraction(), ssm.free_fraction(), m_policy));
    m_migration_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return !ev.rolled_back;
}

} // namespace avmp
