// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "avmp/random.hpp"

namespace avmp {

const char* to_string(WorkloadKind k) noexcept {
    switch (k) {
    case WorkloadKind::UniformShort:
        return "uniform_short";
    case WorkloadKind::MixedLong:
        return "mixed_long";
    case WorkloadKind::AgenticBurst:
        return "agentic_burst";
    case WorkloadKind::SharegptReplay:
        return "sharegpt_replay";
    }
    return "?";
}

WorkloadKind parse_workload_kind(const std::string& s) {
    if (s == "uniform_short") return WorkloadKind::UniformShort;
    if (s == "mixed_long") return WorkloadKind::MixedLong;
    if (s == "agentic_burst") return WorkloadKind::AgenticBurst;
    if (s == "sharegpt_replay" || s == "sharegpt") return WorkloadKind::SharegptReplay;
    throw std::invalid_argument("unknown workload kind '" + s + "'");
}

WorkloadParams default_params(WorkloadKind kind) {
    WorkloadParams p;
    switch (kind) {
    case WorkloadKind::UniformShort:
        p.short_prompt = {128, 1024};
        p.gen = {32, 128};
        p.arrivals_per_tick = 1;
        break;
    case WorkloadKind::MixedLong:
        p.short_prompt = {128, 512};
        p.long_prompt = {2048, 8192};
        p.long_fraction = 0.7;
        p.gen = {32, 128};
        p.wave_size = 32;
        p.wave_gap = 40;
        break;
    case WorkloadKind::AgenticBurst:
        p.short_prompt = {64, 256};
        p.long_prompt = {1024, 4096};
        p.long_fraction = 0.4;
        p.gen = {32, 256};
        p.burst_size = {16, 48};
        p.burst_gap = {20, 60};
        break;
    case WorkloadKind::SharegptReplay:
        p.gen = {32, 2048};
        p.arrivals_per_tick = 2;
        break;
    }
    return p;
}

namespace {

void check_range(const TokenRange& r, const char* what) {
    if (r.lo < 1 || r.lo > r.hi) {
        throw std::invalid_argument(std::string("bad ") + what + " range [" + std::to_string(r.lo) + ", " +
                                    std::to_string(r.hi) + "]");
    }
}

Pcg32 workload_rng(const WorkloadSpec& spec) {
    return Pcg32(spec.seed, stream_tag(std::string("workload/") + to_string(spec.kind)));
}

std::uint32_t draw(Pcg32& rng, const TokenRange& r) {
    return rng.uniform_int(r.lo, r.hi);
}

} // namespace

void WorkloadSpec::validate() const {
    if (n_requests == 0) {
        throw std::invalid_argument("workload '" + name + "' has n_requests == 0");
    }
    const auto& p = params;
    check_range(p.gen, "gen");
    switch (kind) {
    case WorkloadKind::UniformShort:
        check_range(p.short_prompt, "prompt");
        if (p.arrivals_per_tick == 0) throw std::invalid_argument("arrivals_per_tick must be >= 1");
        break;
    case WorkloadKind::MixedLong:
    case WorkloadKind::AgenticBurst:
        check_range(p.short_prompt, "short prompt");
        check_range(p.long_prompt, "long prompt");
        if (!(p.long_fraction >= 0.0 && p.long_fraction <= 1.0)) {
            throw std::invalid_argument("long_fraction must lie in [0, 1]");
        }
        if (kind == WorkloadKind::MixedLong && (p.wave_size == 0 || p.wave_gap == 0)) {
            throw std::invalid_argument("wave_size and wave_gap must be >= 1");
        }
        if (kind == WorkloadKind::AgenticBurst) {
            check_range(p.burst_size, "burst size");
            if (p.burst_gap.lo > p.burst_gap.hi) throw std::invalid_argument("bad burst gap range");
        }
        break;
    case WorkloadKind::SharegptReplay:
        if (p.prompt_counts.empty()) {
            throw std::invalid_argument("sharegpt replay needs a non-empty prompt count list");
        }
        if (p.arrivals_per_tick == 0) throw std::invalid_argument("arrivals_per_tick must be >= 1");
        break;
    }
}

std::vector<Request> gen_uniform_short(const WorkloadSpec& spec) {
    auto rng = workload_rng(spec);
    std::vector<Request> out(spec.n_requests);
    for (std::uint32_t i = 0; i < spec.n_requests; ++i) {
        auto& r = out[i];
        r.req_id = i;
        r.arrival_tick = i / spec.params.arrivals_per_tick;
        r.prompt_tokens = draw(rng, spec.params.short_prompt);
        r.gen_tokens = draw(rng, spec.params.gen);
    }
    return out;
}

std::vector<Request> gen_mixed_long(const WorkloadSpec& spec) {
    const auto& p = spec.params;
    auto rng = workload_rng(spec);
    std::vector<Request> out(spec.n_requests);
    for (std::uint32_t i = 0; i < spec.n_requests; ++i) {
        auto& r = out[i];
        r.req_id = i;
        r.arrival_tick = static_cast<std::uint64_t>(i / p.wave_size) * p.wave_gap;
        const bool is_long = rng.uniform() < p.long_fraction;
        r.prompt_tokens = draw(rng, is_long ? p.long_prompt : p.short_prompt);
        r.gen_tokens = draw(rng, p.gen);
    }
    return out;
}

std::vector<Request> gen_agentic_burst(const WorkloadSpec& spec) {
    const auto& p = spec.params;
    auto rng = workload_rng(spec);
    std::vector<Request> out;
    out.reserve(spec.n_requests);
    std::uint64_t tick = 0;
    while (out.size() < spec.n_requests) {
        const auto burst = draw(rng, p.burst_size);
        for (std::uint32_t j = 0; j < burst && out.size() < spec.n_requests; ++j) {
            Request r;
            r.req_id = out.size();
            r.arrival_tick = tick;
            const bool is_long = rng.uniform() < p.long_fraction;
            r.prompt_tokens = draw(rng, is_long ? p.long_prompt : p.short_prompt);
            r.gen_tokens = draw(rng, p.gen);
            out.push_back(r);
        }
        tick += 1 + rng.uniform_int(p.burst_gap.lo, p.burst_gap.hi);
    }
    return out;
}

std::vector<Request> gen_sharegpt_replay(const WorkloadSpec& spec) {
    const auto& p = spec.params;
    auto rng = workload_rng(spec);
    const auto n_counts = static_cast<std::uint32_t>(p.prompt_counts.size());
    std::vector<Request> out(spec.n_requests);
    for (std::uint32_t i = 0; i < spec.n_requests; ++i) {
        auto& r = out[i];
        r.req_id = i;
        r.arrival_tick = i / p.arrivals_per_tick;
        r.prompt_tokens = std::max<std::uint32_t>(1, p.prompt_counts[rng.below(n_counts)]);
        const double g = std::round(std::exp(rng.normal(p.gen_log_mu, p.gen_log_sigma)));
        r.gen_tokens = static_cast<std::uint32_t>(
            std::clamp(g, static_cast<double>(p.gen.lo), static_cast<double>(p.gen.hi)));
    }
    return out;
}

std::vector<Request> generate(const WorkloadSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case WorkloadKind::UniformShort:
        return gen_uniform_short(spec);
    case WorkloadKind::MixedLong:
        return gen_mixed_long(spec);
    case WorkloadKind::AgenticBurst:
        return gen_agentic_burst(spec);
    case WorkloadKind::SharegptReplay:
        return gen_sharegpt_replay(spec);
    }
    return {};
}

std::size_t count_words(const std::string& text) {
    std::istringstream in(text);
    std::size_t n = 0;
    std::string word;
    while (in >> word) {
        ++n;
    }
    return n;
}

std::uint32_t words_to_tokens(std::size_t words) {
    // integer form of round(1.3 * w) with halves rounding up
    const std::uint64_t tokens = (13 * static_cast<std::uint64_t>(words) + 5) / 10;
    return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(tokens, kTraceMinTokens, kTraceMaxTokens));
}

namespace {

using nlohmann::json;

const json* turn_list(const json& conv) {
    if (conv.is_array()) {
        return &conv;
    }
    if (!conv.is_object()) {
        return nullptr;
    }
    for (const char* key : {"conversations", "conversation", "messages"}) {
        const auto it = conv.find(key);
        if (it != conv.end() && it->is_array()) {
            return &*it;
        }
    }
    return nullptr;
}

bool is_human(const json& turn) {
    for (const char* key : {"from", "role"}) {
        const auto it = turn.find(key);
        if (it != turn.end() && it->is_string()) {
            const auto& who = it->get_ref<const std::string&>();
            return who == "human" || who == "user";
        }
    }
    return false;
}

const std::string* turn_text(const json& turn) {
    for (const char* key : {"value", "content", "text"}) {
        const auto it = turn.find(key);
        if (it != turn.end() && it->is_string()) {
            return &it->get_ref<const std::string&>();
        }
    }
    return nullptr;
}

} // namespace

TraceIngest parse_sharegpt(const std::string& json_text, std::size_t limit) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("trace is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw std::runtime_error("trace must be a JSON array of conversations");
    }
    TraceIngest out;
    for (const auto& conv : doc) {
        if (out.prompt_tokens.size() >= limit) {
            break;
        }
        ++out.records_seen;
        const json* turns = turn_list(conv);
        const std::string* text = nullptr;
        if (turns != nullptr) {
            for (const auto& turn : *turns) {
                if (turn.is_object() && is_human(turn)) {
                    text = turn_text(turn);
                    break;
                }
            }
        }
        if (text == nullptr) {
            ++out.skipped;
            continue;
        }
        out.prompt_tokens.push_back(words_to_tokens(count_words(*text)));
    }
    if (out.prompt_tokens.empty()) {
        throw std::runtime_error("trace has no human turns (" + std::to_string(out.skipped) + " records skipped)");
    }
    return out;
}

TraceIngest load_sharegpt(const std::filesystem::path& path, std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read trace file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sharegpt(buf.str(), limit);
}

TraceSummary summarize_prompts(const std::vector<std::uint32_t>& tokens) {
    TraceSummary s;
    s.n = tokens.size();
    if (tokens.empty()) {
        return s;
    }
    auto sorted = tokens;
    std::sort(sorted.begin(), sorted.end());
    const auto floor_hits = std::count(sorted.begin(), sorted.end(), kTraceMinTokens);
    s.clamp_floor_rate = static_cast<double>(floor_hits) / static_cast<double>(s.n);
    s.median = sorted[(s.n - 1) / 2];
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.n)));
    s.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

} // namespace avmp
