// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace avmp {

enum class PoolId : std::uint8_t { KV = 0, SSM = 1 };

constexpr PoolId other_pool(PoolId p) noexcept {
    return p == PoolId::KV ? PoolId::SSM : PoolId::KV;
}

constexpr std::size_t pool_index(PoolId p) noexcept {
    return static_cast<std::size_t>(p);
}

const char* to_string(PoolId p) noexcept;

constexpr std::uint32_t kMaxPageId = (1u << 31) - 1;
constexpr std::uint64_t kSlabAlignment = 128;
constexpr std::uint64_t kPageAlignment = 16;

/// Opaque 32-bit page identifier. Bit 31 carries the pool tag (0 = KV,
/// 1 = SSM); bits 0..30 carry the page id.
class VirtualHandle {
public:
    constexpr VirtualHandle() = default;
    constexpr explicit VirtualHandle(std::uint32_t raw) : m_raw(raw) {}

    constexpr std::uint32_t raw() const noexcept { return m_raw; }
    constexpr PoolId pool() const noexcept {
        return (m_raw >> 31) != 0 ? PoolId::SSM : PoolId::KV;
    }
    constexpr std::uint32_t page_id() const noexcept { return m_raw & kMaxPageId; }

    friend constexpr bool operator==(VirtualHandle, VirtualHandle) = default;

private:
    std::uint32_t m_raw = 0;
};

/// Throws std::invalid_argument when page_id does not fit in 31 bits.
VirtualHandle encode_handle(PoolId pool, std::uint64_t page_id);

constexpr std::pair<PoolId, std::uint32_t> decode_handle(VirtualHandle h) noexcept {
    return {h.pool(), h.page_id()};
}

struct PhysicalLocation {
    PoolId pool = PoolId::KV;
    std::uint64_t slab_base = 0;
    std::uint64_t page_offset = 0;

    friend bool operator==(const PhysicalLocation&, const PhysicalLocation&) = default;
};

/// Raised when a handle is unknown or has already been freed.
class StaleHandleError : public std::runtime_error {
public:
    explicit StaleHandleError(VirtualHandle h);
    VirtualHandle handle() const noexcept { return m_handle; }

private:
    VirtualHandle m_handle;
};

constexpr std::uint64_t align_up(std::uint64_t value, std::uint64_t alignment) noexcept {
    return (value + alignment - 1) / alignment * alignment;
}

/// Page byte size rounded up to the in-slab alignment.
constexpr std::uint64_t page_stride(std::uint64_t page_bytes) noexcept {
    return align_up(page_bytes, kPageAlignment);
}

struct PageRemap {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
};

/// Maps per-pool virtual page ids to physical page indices. Page ids come
/// from a monotone counter and are never recycled, so a freed handle stays
/// stale for the lifetime of the table.
class VirtualPageTable {
public:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    VirtualHandle insert(PoolId pool, std::uint32_t physical_page);
    std::uint32_t lookup(VirtualHandle h) const;
    /// Removes the entry and returns the physical page it referenced.
    std::uint32_t erase(VirtualHandle h);
    bool contains(VirtualHandle h) const noexcept;

    /// Points the live entry that owns `from` at `to` instead.
    void remap(PoolId pool, PageRemap r);
    void apply(PoolId pool, const std::vector<PageRemap>& remaps);
    /// Undoes `apply` for the same list.
    void revert(PoolId pool, const std::vector<PageRemap>& remaps);

    std::size_t live_count(PoolId pool) const noexcept { return m_pools[pool_index(pool)].live; }
    std::uint32_t next_id(PoolId pool) const noexcept {
        return static_cast<std::uint32_t>(m_pools[pool_index(pool)].phys_of_id.size());
    }

private:
    struct PoolTable {
        std::vector<std::uint32_t> phys_of_id;
        std::vector<std::uint32_t> id_of_phys;
        std::size_t live = 0;
    };

    PoolTable& table(PoolId p) noexcept { return m_pools[pool_index(p)]; }
    const PoolTable& table(PoolId p) const noexcept { return m_pools[pool_index(p)]; }

    PoolTable m_pools[2];
};

} // namespace avmp
