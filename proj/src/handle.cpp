// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/handle.hpp"

#include <sstream>

namespace avmp {

const char* to_string(PoolId p) noexcept {
    return p == PoolId::KV ? "kv" : "ssm";
}

VirtualHandle encode_handle(PoolId pool, std::uint64_t page_id) {
    if (page_id > kMaxPageId) {
        throw std::invalid_argument("page_id " + std::to_string(page_id) + " does not fit in 31 bits");
    }
    const std::uint32_t tag = pool == PoolId::SSM ? (1u << 31) : 0u;
    return VirtualHandle(tag | static_cast<std::uint32_t>(page_id));
}

namespace {

std::string stale_message(VirtualHandle h) {
    std::ostringstream os;
    os << "stale or unknown handle 0x" << std::hex << h.raw() << " (" << to_string(h.pool())
       << " page " << std::dec << h.page_id() << ")";
    return os.str();
}

} // namespace

StaleHandleError::StaleHandleError(VirtualHandle h) : std::runtime_error(stale_message(h)), m_handle(h) {}

VirtualHandle VirtualPageTable::insert(PoolId pool, std::uint32_t physical_page) {
    auto& t = table(pool);
    const auto id = t.phys_of_id.size();
    const VirtualHandle h = encode_handle(pool, id);
    if (physical_page >= t.id_of_phys.size()) {
        t.id_of_phys.resize(static_cast<std::size_t>(physical_page) + 1, kNone);
    }
    if (t.id_of_phys[physical_page] != kNone) {
        throw std::logic_error("physical page already mapped");
    }
    t.phys_of_id.push_back(physical_page);
    t.id_of_phys[physical_page] = static_cast<std::uint32_t>(id);
    ++t.live;
    return h;
}

bool VirtualPageTable::contains(VirtualHandle h) const noexcept {
    const auto& t = table(h.pool());
    return h.page_id() < t.phys_of_id.size() && t.phys_of_id[h.page_id()] != kNone;
}

std::uint32_t VirtualPageTable::lookup(VirtualHandle h) const {
    if (!contains(h)) {
        throw StaleHandleError(h);
    }
    return table(h.pool()).phys_of_id[h.page_id()];
}

std::uint32_t VirtualPageTable::erase(VirtualHandle h) {
    if (!contains(h)) {
        throw StaleHandleError(h);
    }
    auto& t = table(h.pool());
    const auto phys = t.phys_of_id[h.page_id()];
    t.phys_of_id[h.page_id()] = kNone;
    t.id_of_phys[phys] = kNone;
    --t.live;
    return phys;
}

void VirtualPageTable::remap(PoolId pool, PageRemap r) {
    auto& t = table(pool);
    if (r.from >= t.id_of_phys.size() || t.id_of_phys[r.from] == kNone) {
        throw std::logic_error("remap source page is not mapped");
    }
    if (r.to >= t.id_of_phys.size()) {
        t.id_of_phys.resize(static_cast<std::size_t>(r.to) + 1, kNone);
    }
    if (t.id_of_phys[r.to] != kNone) {
        throw std::logic_error("remap target page is already mapped");
    }
    const auto id = t.id_of_phys[r.from];
    t.id_of_phys[r.from] = kNone;
    t.id_of_phys[r.to] = id;
    t.phys_of_id[id] = r.to;
}

void VirtualPageTable::apply(PoolId pool, const std::vector<PageRemap>& remaps) {
    for (const auto& r : remaps) {
        remap(pool, r);
    }
}

void VirtualPageTable::revert(PoolId pool, const std::vector<PageRemap>& remaps) {
    for (auto it = remaps.rbegin(); it != remaps.rend(); ++it) {
        remap(pool, PageRemap{it->to, it->from});
    }
}

} // namespace avmp
