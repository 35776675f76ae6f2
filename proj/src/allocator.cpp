// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/allocator.hpp"

#include <cmath>
#include <stdexcept>

namespace avmp {

void ModelSpec::validate() const {
    if (attention_layers < 1 || ssm_layers < 1) {
        throw std::invalid_argument("model '" + name + "' needs at least one attention and one SSM layer");
    }
    if (per_token_bytes == 0 || ssm_block_bytes == 0 || attention_page_tokens == 0) {
        throw std::invalid_argument("model '" + name + "' has a zero byte size");
    }
}

const char* to_string(AllocatorVariant v) noexcept {
    switch (v) {
    case AllocatorVariant::PaddedUnified:
        return "padded_unified";
    case AllocatorVariant::FixedDual:
        return "fixed_dual";
    case AllocatorVariant::AvmpStatic:
        return "avmp_static";
    case AllocatorVariant::AvmpDynamic:
        return "avmp_dynamic";
    }
    return "?";
}

AllocatorVariant parse_variant(const std::string& s) {
    if (s == "padded_unified") return AllocatorVariant::PaddedUnified;
    if (s == "fixed_dual") return AllocatorVariant::FixedDual;
    if (s == "avmp_static") return AllocatorVariant::AvmpStatic;
    if (s == "avmp_dynamic") return AllocatorVariant::AvmpDynamic;
    throw std::invalid_argument("unknown allocator variant '" + s + "'");
}

const char* to_string(SsmPadding p) noexcept {
    return p == SsmPadding::PerLayer ? "per_layer" : "per_kv_page";
}

SsmPadding parse_ssm_padding(const std::string& s) {
    if (s == "per_layer") return SsmPadding::PerLayer;
    if (s == "per_kv_page") return SsmPadding::PerKvPage;
    throw std::invalid_argument("unknown ssm padding mode '" + s + "'");
}

void AllocatorConfig::validate() const {
    if (dual_pool() && !(mamba_full_memory_ratio > 0.0 && mamba_full_memory_ratio < 1.0)) {
        throw std::invalid_argument("mamba_full_memory_ratio must lie in (0, 1)");
    }
    rebalance.validate();
}

namespace {

std::uint32_t pages_in(double bytes, std::uint64_t stride) {
    const auto pages = std::floor(bytes / static_cast<double>(stride));
    if (pages > static_cast<double>(kMaxPageId)) {
        throw std::invalid_argument("budget exceeds the 31-bit page index space");
    }
    return static_cast<std::uint32_t>(pages);
}

} // namespace

HybridAllocator::HybridAllocator(const AllocatorConfig& config, std::uint64_t budget_bytes, const ModelSpec& model)
    : m_config(config), m_model(model), m_budget(budget_bytes) {
    m_config.validate();
    m_model.validate();

    const auto kv_stride = page_stride(model.kv_page_bytes());
    const auto ssm_stride = page_stride(model.ssm_block_bytes);
    const auto budget = static_cast<double>(budget_bytes);

    if (!m_config.dual_pool()) {
        const auto pages = pages_in(budget, kv_stride);
        m_stores.emplace_back(PoolGeometry{PoolId::KV, model.kv_page_bytes(), pages, pages});
        return;
    }

    const double ratio = m_config.mamba_full_memory_ratio;
    const auto ssm_initial = pages_in(ratio * budget, ssm_stride);
    const auto kv_initial = pages_in((1.0 - ratio) * budget, kv_stride);
    std::uint32_t kv_max = kv_initial;
    std::uint32_t ssm_max = ssm_initial;
    if (m_config.virtual_handles()) {
        kv_max = pages_in(budget, kv_stride);
        ssm_max = pages_in(budget, ssm_stride);
    }
    m_stores.emplace_back(PoolGeometry{PoolId::KV, model.kv_page_bytes(), kv_initial, kv_max});
    const auto ssm_base = align_up(m_stores.front().reserved_bytes(), kSlabAlignment);
    m_stores.emplace_back(PoolGeometry{PoolId::SSM, model.ssm_block_bytes, ssm_initial, ssm_max}, ssm_base);

    if (m_config.virtual_handles()) {
        m_table.emplace();
    }
    if (m_config.variant == AllocatorVariant::AvmpDynamic) {
        m_rebalancer.emplace(m_config.rebalance);
    }
}

const BackingStore& HybridAllocator::store(PoolId pool) const noexcept {
    return m_stores.size() == 1 ? m_stores.front() : m_stores[pool_index(pool)];
}

BackingStore& HybridAllocator::store_mut(PoolId pool) noexcept {
    return m_stores.size() == 1 ? m_stores.front() : m_stores[pool_index(pool)];
}

const std::vector<RebalanceEvent>& HybridAllocator::rebalance_events() const noexcept {
    static const std::vector<RebalanceEvent> kNoEvents;
    return m_rebalancer ? m_rebalancer->events() : kNoEvents;
}

const SequenceAllocation* HybridAllocator::find(SeqId seq) const {
    const auto it = m_sequences.find(seq);
    return it == m_sequences.end() ? nullptr : &it->second;
}

std::uint32_t HybridAllocator::padded_pages_per_layer() const noexcept {
    const auto page = store(PoolId::KV).page_stride();
    return static_cast<std::uint32_t>((m_model.ssm_block_bytes + page - 1) / page);
}

std::uint32_t HybridAllocator::ssm_pages_for(std::uint32_t kv_pages) const noexcept {
    if (!unified()) {
        return m_model.ssm_layers;
    }
    const auto per_layer = m_model.ssm_layers * padded_pages_per_layer();
    return m_config.ssm_padding == SsmPadding::PerLayer ? per_layer : per_layer * kv_pages;
}

void HybridAllocator::observe() {
    if (m_rebalancer) {
        m_rebalancer->observe(m_stores[0], m_stores[1]);
    }
}

std::vector<VirtualHandle> HybridAllocator::allocate(PoolId pool, std::uint32_t n) {
    auto& st = store_mut(pool);
    m_throttle.note_op();
    std::vector<std::uint32_t> pages;
    try {
        pages = st.alloc_pages(n);
    } catch (const CapacityError& err) {
        const double other_free = unified() ? 0.0 : store(other_pool(pool)).free_fraction();
        m_capacity_errors.push_back(CapacityErrorRecord{m_throttle.op_counter, err.pool(), err.requested_pages(),
                                                        err.free_pages_at_failure(), other_free});
        VirtualPageTable* table = m_table ? &*m_table : nullptr;
        if (!m_rebalancer || !m_rebalancer->handle(err, m_stores[0], m_stores[1], table, m_throttle)) {
            observe();
            throw;
        }
        // exactly one retry after a completed migration
        pages = st.alloc_pages(n);
        m_capacity_errors.back().recovered = true;
    }
    observe();

    std::vector<VirtualHandle> handles;
    handles.reserve(pages.size());
    for (const auto p : pages) {
        handles.push_back(m_table ? m_table->insert(pool, p) : encode_handle(pool, p));
    }
    return handles;
}

void HybridAllocator::free_handles(const std::vector<VirtualHandle>& handles) {
    if (handles.empty()) {
        return;
    }
    std::vector<std::uint32_t> pages;
    pages.reserve(handles.size());
    const PoolId pool = handles.front().pool();
    for (const auto h : handles) {
        pages.push_back(m_table ? m_table->erase(h) : h.page_id());
    }
    store_mut(pool).free_pages(pages);
    m_throttle.note_op();
    observe();
}

const SequenceAllocation& HybridAllocator::admit(SeqId seq, std::uint64_t prompt_tokens) {
    if (m_sequences.contains(seq)) {
        throw std::logic_error("sequence " + std::to_string(seq) + " already admitted");
    }
    if (prompt_tokens == 0) {
        throw std::invalid_argument("prompt must hold at least one token");
    }
    SequenceAllocation sa;
    sa.seq_id = seq;
    sa.tokens = prompt_tokens;
    const auto kv_pages = m_model.kv_pages_for(prompt_tokens);
    sa.kv_handles = allocate(PoolId::KV, kv_pages);
    try {
        sa.ssm_handles = allocate(PoolId::SSM, ssm_pages_for(kv_pages));
    } catch (const CapacityError&) {
        free_handles(sa.kv_handles);
        throw;
    }
    return m_sequences.emplace(seq, std::move(sa)).first->second;
}

const SequenceAllocation& HybridAllocator::extend_decode(SeqId seq, std::uint64_t new_total_tokens) {
    const auto it = m_sequences.find(seq);
    if (it == m_sequences.end()) {
        throw std::logic_error("extend of unknown sequence " + std::to_string(seq));
    }
    auto& sa = it->second;
    if (new_total_tokens < sa.tokens) {
        throw std::logic_error("decode extension cannot shrink a sequence");
    }
    const auto have = static_cast<std::uint32_t>(sa.kv_handles.size());
    const auto need = m_model.kv_pages_for(new_total_tokens);
    if (need > have) {
        auto kv = allocate(PoolId::KV, need - have);
        if (unified() && m_config.ssm_padding == SsmPadding::PerKvPage) {
            std::vector<VirtualHandle> ssm;
            try {
                ssm = allocate(PoolId::SSM, ssm_pages_for(need - have));
            } catch (const CapacityError&) {
                free_handles(kv);
                throw;
            }
            sa.ssm_handles.insert(sa.ssm_handles.end(), ssm.begin(), ssm.end());
        }
        sa.kv_handles.insert(sa.kv_handles.end(), kv.begin(), kv.end());
    }
    sa.tokens = new_total_tokens;
    return sa;
}

void HybridAllocator::release(SeqId seq) {
    const auto it = m_sequences.find(seq);
    if (it == m_sequences.end()) {
        throw std::logic_error("release of unknown sequence " + std::to_string(seq));
    }
    free_handles(it->second.kv_handles);
    free_handles(it->second.ssm_handles);
    m_sequences.erase(it);
}

PhysicalLocation HybridAllocator::resolve(VirtualHandle h) const {
    std::uint32_t phys = 0;
    if (m_table) {
        phys = m_table->lookup(h);
    } else {
        phys = h.page_id();
        if (!store(h.pool()).is_live(phys)) {
            throw StaleHandleError(h);
        }
    }
    const auto& st = store(h.pool());
    return PhysicalLocation{st.pool(), st.slab_base(), static_cast<std::uint64_t>(phys) * st.page_stride()};
}

ReservedBytes HybridAllocator::reserved_bytes() const noexcept {
    if (unified()) {
        return ReservedBytes{m_stores.front().reserved_bytes(), 0};
    }
    return ReservedBytes{m_stores[0].reserved_bytes(), m_stores[1].reserved_bytes()};
}

std::uint64_t HybridAllocator::consumed_bytes() const noexcept {
    std::uint64_t total = 0;
    for (const auto& st : m_stores) {
        total += static_cast<std::uint64_t>(st.live_count()) * st.page_stride();
    }
    return total;
}

} // namespace avmp
