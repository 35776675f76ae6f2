// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "avmp/backing_store.hpp"
#include "avmp/handle.hpp"
#include "avmp/rebalancer.hpp"

namespace avmp {

using SeqId = std::uint64_t;

struct ModelSpec {
    std::string name;
    std::uint32_t attention_layers = 1;
    std::uint32_t ssm_layers = 1;
    std::uint64_t per_token_bytes = 0; // KV bytes per token, summed over attention layers
    std::uint64_t ssm_block_bytes = 0; // state_dim * bytes_per_element, one layer
    std::uint32_t attention_page_tokens = 16;

    std::uint64_t kv_page_bytes() const noexcept { return per_token_bytes * attention_page_tokens; }
    std::uint32_t kv_pages_for(std::uint64_t tokens) const noexcept {
        return static_cast<std::uint32_t>((tokens + attention_page_tokens - 1) / attention_page_tokens);
    }
    void validate() const;
};

enum class AllocatorVariant : std::uint8_t { PaddedUnified, FixedDual, AvmpStatic, AvmpDynamic };

const char* to_string(AllocatorVariant v) noexcept;
AllocatorVariant parse_variant(const std::string& s);

/// How the unified pool charges SSM state. PerLayer pads each layer's block
/// up to whole KV pages once per sequence; PerKvPage repeats that charge for
/// every KV page the sequence holds, the way a token-scaled capacity
/// estimator sizes O(1) state.
enum class SsmPadding : std::uint8_t { PerLayer, PerKvPage };

const char* to_string(SsmPadding p) noexcept;
SsmPadding parse_ssm_padding(const std::string& s);

struct AllocatorConfig {
    std::string name;
    AllocatorVariant variant = AllocatorVariant::FixedDual;
    /// SSM pool share of the budget for the dual-pool variants.
    double mamba_full_memory_ratio = 0.5;
    RebalancePolicy rebalance;
    SsmPadding ssm_padding = SsmPadding::PerKvPage;

    bool dual_pool() const noexcept { return variant != AllocatorVariant::PaddedUnified; }
    bool virtual_handles() const noexcept {
        return variant == AllocatorVariant::AvmpStatic || variant == AllocatorVariant::AvmpDynamic;
    }
    void validate() const;
};

struct SequenceAllocation {
    SeqId seq_id = 0;
    std::uint64_t tokens = 0;
    std::vector<VirtualHandle> kv_handles;
    std::vector<VirtualHandle> ssm_handles;
};

struct ReservedBytes {
    std::uint64_t kv = 0;
    std::uint64_t ssm = 0;
    std::uint64_t total() const noexcept { return kv + ssm; }
};

struct CapacityErrorRecord {
    std::uint64_t op = 0;
    PoolId pool = PoolId::KV;
    std::uint32_t requested = 0;
    std::uint32_t free_pages = 0;
    double other_free_fraction = 0.0; // free fraction of the other pool at failure
    bool recovered = false; // a migration made the retried allocation succeed
};

/// Paged two-pool allocator covering all evaluated variants. The unified
/// variant keeps one KV-granular store and serves SSM state from it; the
/// dual variants keep a KV page store and an SSM block store. AVMP variants
/// route handles through a VirtualPageTable and reserve each store at the
/// full budget so capacity can migrate; only AvmpDynamic migrates.
///
/// Not thread-safe: one allocator per simulated cell.
class HybridAllocator {
public:
    HybridAllocator(const AllocatorConfig& config, std::uint64_t budget_bytes, const ModelSpec& model);

    /// All-or-nothing: a CapacityError leaves no pages of this sequence live.
    const SequenceAllocation& admit(SeqId seq, std::uint64_t prompt_tokens);
    /// Append-only; on CapacityError the sequence keeps its previous size.
    const SequenceAllocation& extend_decode(SeqId seq, std::uint64_t new_total_tokens);
    void release(SeqId seq);

    PhysicalLocation resolve(VirtualHandle h) const;
    ReservedBytes reserved_bytes() const noexcept;

    const AllocatorConfig& config() const noexcept { return m_config; }
    const ModelSpec& model() const noexcept { return m_model; }
    const BackingStore& store(PoolId pool) const noexcept;
    bool unified() const noexcept { return m_stores.size() == 1; }
    std::size_t live_sequences() const noexcept { return m_sequences.size(); }
    const SequenceAllocation* find(SeqId seq) const;

    /// Bytes held by live pages across stores (page stride granularity).
    std::uint64_t consumed_bytes() const noexcept;

    const ThrottleState& throttle() const noexcept { return m_throttle; }
    const std::vector<CapacityErrorRecord>& capacity_errors() const noexcept { return m_capacity_errors; }
    const std::vector<RebalanceEvent>& rebalance_events() const noexcept;
    const Rebalancer* rebalancer() const noexcept { return m_rebalancer ? &*m_rebalancer : nullptr; }
    double migration_seconds() const noexcept { return m_rebalancer ? m_rebalancer->migration_seconds() : 0.0; }

private:
    BackingStore& store_mut(PoolId pool) noexcept;
    std::vector<VirtualHandle> allocate(PoolId pool, std::uint32_t n);
    void free_handles(const std::vector<VirtualHandle>& handles);
    std::uint32_t ssm_pages_for(std::uint32_t kv_pages) const noexcept;
    std::uint32_t padded_pages_per_layer() const noexcept;
    void observe();

    AllocatorConfig m_config;
    ModelSpec m_model;
    std::uint64_t m_budget;
    std::vector<BackingStore> m_stores;
    std::optional<VirtualPageTable> m_table;
    std::optional<Rebalancer> m_rebalancer;
    ThrottleState m_throttle;
    std::unordered_map<SeqId, SequenceAllocation> m_sequences;
    std::vector<CapacityErrorRecord> m_capacity_errors;
};

} // namespace avmp
