// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/backing_store.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace avmp {

CapacityError::CapacityError(PoolId pool, std::uint32_t requested, std::uint32_t free_pages)
    : std::runtime_error(std::string("capacity exhausted in ") + to_string(pool) + " pool: requested " +
                         std::to_string(requested) + ", free " + std::to_string(free_pages)),
      m_pool(pool),
      m_requested(requested),
      m_free(free_pages) {}

BackingStore::BackingStore(const PoolGeometry& geometry, std::uint64_t slab_base)
    : m_geometry(geometry),
      m_stride(avmp::page_stride(geometry.page_bytes)),
      m_slab_base(slab_base),
      m_reserved_bytes(static_cast<std::uint64_t>(geometry.max_capacity_pages) * m_stride),
      m_capacity(geometry.initial_capacity_pages),
      m_free_count(geometry.initial_capacity_pages) {
    if (geometry.page_bytes == 0) {
        throw std::invalid_argument("page_bytes must be positive");
    }
    if (geometry.initial_capacity_pages > geometry.max_capacity_pages) {
        throw std::invalid_argument("initial capacity exceeds max capacity");
    }
    if (slab_base % kSlabAlignment != 0) {
        throw std::invalid_argument("slab base must be 128-byte aligned");
    }
    m_free_bits.assign((static_cast<std::size_t>(geometry.max_capacity_pages) + 63) / 64, 0);
    for (std::uint32_t i = 0; i < m_capacity; ++i) {
        set_free(i);
    }
}

double BackingStore::free_fraction() const noexcept {
    return m_capacity == 0 ? 0.0 : static_cast<double>(m_free_count) / static_cast<double>(m_capacity);
}

bool BackingStore::is_free(std::uint32_t index) const noexcept {
    if (index >= m_geometry.max_capacity_pages) {
        return false;
    }
    return (m_free_bits[index >> 6] >> (index & 63)) & 1u;
}

void BackingStore::set_free(std::uint32_t index) noexcept {
    m_free_bits[index >> 6] |= (std::uint64_t{1} << (index & 63));
}

void BackingStore::set_used(std::uint32_t index) noexcept {
    m_free_bits[index >> 6] &= ~(std::uint64_t{1} << (index & 63));
}

std::uint32_t BackingStore::lowest_free_from(std::uint32_t start) const noexcept {
    std::size_t word = start >> 6;
    if (word >= m_free_bits.size()) {
        return m_capacity;
    }
    std::uint64_t bits = m_free_bits[word] & (~std::uint64_t{0} << (start & 63));
    while (bits == 0) {
        if (++word == m_free_bits.size()) {
            return m_capacity;
        }
        bits = m_free_bits[word];
    }
    const auto idx = static_cast<std::uint32_t>(word * 64 + static_cast<unsigned>(std::countr_zero(bits)));
    return idx < m_capacity ? idx : m_capacity;
}

std::vector<std::uint32_t> BackingStore::alloc_pages(std::uint32_t n) {
    if (n == 0) {
        throw std::invalid_argument("alloc_pages requires n >= 1");
    }
    if (m_free_count < n) {
        throw CapacityError(pool(), n, m_free_count);
    }
    std::vector<std::uint32_t> out;
    out.reserve(n);
    std::uint32_t cursor = m_first_free_hint;
    while (out.size() < n) {
        const auto idx = lowest_free_from(cursor);
        set_used(idx);
        out.push_back(idx);
        cursor = idx + 1;
    }
    m_free_count -= n;
    m_first_free_hint = cursor;
    return out;
}

void BackingStore::free_pages(std::span<const std::uint32_t> indices) {
    for (const auto idx : indices) {
        if (idx >= m_capacity) {
            throw std::logic_error("free of out-of-range page " + std::to_string(idx));
        }
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto idx = indices[i];
        if (is_free(idx)) {
            // undo what this call already freed so the store stays consistent
            for (std::size_t j = 0; j < i; ++j) {
                set_used(indices[j]);
            }
            m_free_count -= static_cast<std::uint32_t>(i);
            throw std::logic_error("double free of page " + std::to_string(idx));
        }
        set_free(idx);
        ++m_free_count;
        if (idx < m_first_free_hint) {
            m_first_free_hint = idx;
        }
    }
}

std::vector<PageRemap> BackingStore::resize_capacity(std::int64_t delta_pages) {
    std::vector<PageRemap> remaps;
    if (delta_pages == 0) {
        return remaps;
    }
    if (delta_pages > 0) {
        const auto grow = static_cast<std::uint64_t>(delta_pages);
        if (m_capacity + grow > m_geometry.max_capacity_pages) {
            throw ResizeRefused("grow by " + std::to_string(grow) + " exceeds max capacity of " +
                                to_string(pool()) + " pool");
        }
        const auto new_capacity = static_cast<std::uint32_t>(m_capacity + grow);
        for (std::uint32_t i = m_capacity; i < new_capacity; ++i) {
            set_free(i);
        }
        m_capacity = new_capacity;
        m_free_count += static_cast<std::uint32_t>(grow);
        return remaps;
    }

    const auto shrink = static_cast<std::uint64_t>(-delta_pages);
    if (shrink > m_free_count) {
        throw ResizeRefused("shrink by " + std::to_string(shrink) + " exceeds " + std::to_string(m_free_count) +
                            " free pages of " + to_string(pool()) + " pool");
    }
    const auto new_capacity = static_cast<std::uint32_t>(m_capacity - shrink);
    std::uint32_t cursor = m_first_free_hint;
    for (std::uint32_t i = m_capacity; i-- > new_capacity;) {
        if (is_free(i)) {
            continue;
        }
        const auto target = lowest_free_from(cursor);
        // free + live == capacity and shrink <= free guarantee a slot below new_capacity
        set_used(target);
        set_free(i);
        remaps.push_back(PageRemap{i, target});
        cursor = target + 1;
    }
    for (std::uint32_t i = new_capacity; i < m_capacity; ++i) {
        set_used(i);
    }
    m_capacity = new_capacity;
    m_free_count -= static_cast<std::uint32_t>(shrink);
    m_first_free_hint = std::min(m_first_free_hint, new_capacity);
    return remaps;
}

BackingStore::Snapshot BackingStore::snapshot() const {
    return Snapshot{m_capacity, m_free_count, m_first_free_hint, m_free_bits};
}

void BackingStore::restore(const Snapshot& s) {
    m_capacity = s.capacity;
    m_free_count = s.free_count;
    m_first_free_hint = s.first_free_hint;
    m_free_bits = s.free_bits;
}

std::vector<std::uint32_t> BackingStore::free_indices() const {
    std::vector<std::uint32_t> out;
    out.reserve(m_free_count);
    for (std::uint32_t i = lowest_free_from(0); i < m_capacity; i = lowest_free_from(i + 1)) {
        out.push_back(i);
    }
    return out;
}

} // namespace avmp
