// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "avmp/handle.hpp"

namespace avmp {

struct PoolGeometry {
    PoolId pool = PoolId::KV;
    std::uint64_t page_bytes = 0;
    std::uint32_t initial_capacity_pages = 0;
    std::uint32_t max_capacity_pages = 0;
};

/// Allocation failure in one pool. Raised only when the pool holds fewer
/// free pages than requested; the store is left unchanged.
class CapacityError : public std::runtime_error {
public:
    CapacityError(PoolId pool, std::uint32_t requested, std::uint32_t free_pages);

    PoolId pool() const noexcept { return m_pool; }
    std::uint32_t requested_pages() const noexcept { return m_requested; }
    std::uint32_t free_pages_at_failure() const noexcept { return m_free; }

private:
    PoolId m_pool;
    std::uint32_t m_requested;
    std::uint32_t m_free;
};

class ResizeRefused : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One physically contiguous region of fixed-stride pages. The reservation
/// covers max_capacity_pages for the store's lifetime; capacity_pages moves
/// inside it when capacity migrates between pools.
///
/// Free pages are handed out lowest index first, so identical call
/// sequences always produce identical indices.
class BackingStore {
public:
    explicit BackingStore(const PoolGeometry& geometry, std::uint64_t slab_base = 0);

    /// Returns the n lowest free indices, or throws CapacityError.
    std::vector<std::uint32_t> alloc_pages(std::uint32_t n);
    void free_pages(std::span<const std::uint32_t> indices);

    /// Shrinks from the high end (live pages above the new capacity are moved
    /// into the lowest free slots, highest first) or grows by appending free
    /// pages. Returns the remaps performed by a shrink.
    std::vector<PageRemap> resize_capacity(std::int64_t delta_pages);

    struct Snapshot {
        std::uint32_t capacity = 0;
        std::uint32_t free_count = 0;
        std::uint32_t first_free_hint = 0;
        std::vector<std::uint64_t> free_bits;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& s);

    const PoolGeometry& geometry() const noexcept { return m_geometry; }
    PoolId pool() const noexcept { return m_geometry.pool; }
    std::uint64_t page_stride() const noexcept { return m_stride; }
    std::uint64_t slab_base() const noexcept { return m_slab_base; }
    std::uint64_t reserved_bytes() const noexcept { return m_reserved_bytes; }
    std::uint32_t capacity_pages() const noexcept { return m_capacity; }
    std::uint32_t max_capacity_pages() const noexcept { return m_geometry.max_capacity_pages; }
    std::uint32_t free_count() const noexcept { return m_free_count; }
    std::uint32_t live_count() const noexcept { return m_capacity - m_free_count; }
    double free_fraction() const noexcept;
    bool is_free(std::uint32_t index) const noexcept;
    bool is_live(std::uint32_t index) const noexcept { return index < m_capacity && !is_free(index); }

    std::vector<std::uint32_t> free_indices() const;

private:
    void set_free(std::uint32_t index) noexcept;
    void set_used(std::uint32_t index) noexcept;
    std::uint32_t lowest_free_from(std::uint32_t start) const noexcept;

    PoolGeometry m_geometry;
    std::uint64_t m_stride;
    std::uint64_t m_slab_base;
    std::uint64_t m_reserved_bytes;
    std::uint32_t m_capacity;
    std::uint32_t m_free_count;
    std::uint32_t m_first_free_hint = 0;
    std::vector<std::uint64_t> m_free_bits; // bit set = free, sized to max capacity
};

} // namespace avmp
