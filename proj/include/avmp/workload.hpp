// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace avmp {

struct Request {
    std::uint64_t req_id = 0;
    std::uint64_t arrival_tick = 0;
    std::uint32_t prompt_tokens = 1;
    std::uint32_t gen_tokens = 1;

    bool operator==(const Request&) const = default;
};

enum class WorkloadKind : std::uint8_t { UniformShort, MixedLong, AgenticBurst, SharegptReplay };

const char* to_string(WorkloadKind k) noexcept;
WorkloadKind parse_workload_kind(const std::string& s);

struct TokenRange {
    std::uint32_t lo = 1;
    std::uint32_t hi = 1;
};

/// Generator knobs. Each kind reads the subset it needs; the rest are ignored.
struct WorkloadParams {
    TokenRange short_prompt{128, 1024};
    TokenRange long_prompt{2048, 8192};
    double long_fraction = 0.0;
    TokenRange gen{32, 128};

    // uniform_short, sharegpt_replay: constant stagger
    std::uint32_t arrivals_per_tick = 1;
    // mixed_long: waves of wave_size requests every wave_gap ticks
    std::uint32_t wave_size = 1;
    std::uint32_t wave_gap = 1;
    // agentic_burst: bursts of size burst_size separated by burst_gap quiet ticks
    TokenRange burst_size{16, 48};
    TokenRange burst_gap{20, 60};
    // sharegpt_replay: log-normal decode length
    double gen_log_mu = 4.5;
    double gen_log_sigma = 1.0;
    std::vector<std::uint32_t> prompt_counts;
};

WorkloadParams default_params(WorkloadKind kind);

struct WorkloadSpec {
    std::string name; // label used in reports; defaults to the kind
    WorkloadKind kind = WorkloadKind::UniformShort;
    std::uint32_t n_requests = 512;
    std::uint64_t seed = 1;
    WorkloadParams params = default_params(WorkloadKind::UniformShort);

    void validate() const;
};

std::vector<Request> gen_uniform_short(const WorkloadSpec& spec);
std::vector<Request> gen_mixed_long(const WorkloadSpec& spec);
std::vector<Request> gen_agentic_burst(const WorkloadSpec& spec);
std::vector<Request> gen_sharegpt_replay(const WorkloadSpec& spec);

/// Dispatches on spec.kind after validation.
std::vector<Request> generate(const WorkloadSpec& spec);

// ---- ShareGPT-style trace ingestion -----------------------------------------

inline constexpr std::uint32_t kTraceMinTokens = 16;
inline constexpr std::uint32_t kTraceMaxTokens = 4096;
inline constexpr std::size_t kTracePromptLimit = 5000;

std::size_t count_words(const std::string& text);
/// round(1.3 * words), halves up, clamped to [16, 4096].
std::uint32_t words_to_tokens(std::size_t words);

struct TraceIngest {
    std::vector<std::uint32_t> prompt_tokens;
    std::size_t records_seen = 0;
    std::size_t skipped = 0; // conversations without a usable human turn
};

/// Accepts a JSON array of conversations. Each conversation is either an
/// object with a "conversations" or "messages" list, or a bare list of turns;
/// turns carry {"from","value"} or {"role","content"}.
TraceIngest load_sharegpt(const std::filesystem::path& path, std::size_t limit = kTracePromptLimit);
TraceIngest parse_sharegpt(const std::string& json_text, std::size_t limit = kTracePromptLimit);

struct TraceSummary {
    std::size_t n = 0;
    double clamp_floor_rate = 0.0;
    std::uint32_t median = 0; // lower median
    std::uint32_t p95 = 0;    // nearest rank
};

TraceSummary summarize_prompts(const std::vector<std::uint32_t>& tokens);

} // namespace avmp
