// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "avmp/simulator.hpp"

namespace avmp {

using ordered_json = nlohmann::ordered_json;

/// Bad or inconsistent sweep configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A cell threw while running (CLI exit code 2). what() carries the cell echo.
class CellFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable result file or a schema_version other than ours (exit code 3).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- presets ----------------------------------------------------------------

std::vector<std::string> builtin_model_names();
ModelSpec builtin_model(const std::string& name);

/// Variant preset by name:
///   padded_unified
///   fixed_dual_mrNN, avmp_static_mrNN      NN = SSM share in tenths (05 -> 0.5)
///   avmp_dynamic_bN[_tlLLL_thHHH]          thresholds in hundredths (005 -> 0.05, 030 -> 0.30)
AllocatorConfig variant_preset(const std::string& name);

/// The five variants of the main comparison.
std::vector<std::string> default_variant_names();

// ---- JSON round trip ----------------------------------------------------------

ordered_json to_json(const ModelSpec& m);
ordered_json to_json(const AllocatorConfig& a);
ordered_json to_json(const WorkloadSpec& w);
ordered_json to_json(const CellConfig& c);

ModelSpec model_from_json(const nlohmann::json& j);
AllocatorConfig allocator_from_json(const nlohmann::json& j);
WorkloadSpec workload_from_json(const nlohmann::json& j);
CellConfig cell_from_json(const nlohmann::json& j);

// ---- grid -------------------------------------------------------------------

struct SweepConfig {
    std::string name = "sweep";
    std::vector<AllocatorConfig> variants;
    std::vector<WorkloadSpec> workloads; // seed is filled per cell
    std::vector<ModelSpec> models;
    std::vector<std::uint64_t> budgets_bytes;
    std::vector<std::uint64_t> seeds;
    std::uint32_t parallelism = 1;
    std::filesystem::path output_dir = "results";
    std::uint32_t retry_backoff_ticks = 5;
    std::uint64_t horizon_ticks = 1'000'000;
    bool record_events = false;

    std::size_t grid_size() const noexcept {
        return variants.size() * workloads.size() * models.size() * budgets_bytes.size() * seeds.size();
    }
};

/// Parses a sweep config. Variants and models may be preset names or
/// objects; workloads may be kind names or objects. Relative paths (model
/// files, traces) resolve against base_dir. Throws ConfigError.
SweepConfig parse_sweep_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SweepConfig load_sweep_config(const std::filesystem::path& path);

/// Fills every sharegpt_replay workload without prompt counts from the trace.
void attach_trace(SweepConfig& cfg, const std::vector<std::uint32_t>& prompt_counts);

/// Cross product in (variant, workload, model, budget, seed) order.
std::vector<CellConfig> expand_grid(const SweepConfig& cfg);

// ---- records ----------------------------------------------------------------

/// One result line: schema_version, cell echo, event-deterministic fields,
/// then timing fields.
ordered_json result_record(const CellConfig& cell, const CellResult& r);
ordered_json events_record(const CellConfig& cell, const CellEvents& ev);

/// Record with the timing-dependent fields removed, for rerun comparisons.
ordered_json deterministic_view(const ordered_json& record);

struct SweepSummary {
    std::size_t cells = 0;
    std::filesystem::path results_path;
    std::optional<std::filesystem::path> events_path;
    double wall_s = 0.0;
};

/// Runs all cells on `parallelism` workers and appends one line per cell to
/// <output_dir>/<name>.jsonl in grid order. Each line is written with a
/// single flushed write, so an interrupted run leaves a valid prefix.
SweepSummary run_sweep(const SweepConfig& cfg);

/// Runs the cells in memory (grid order) without touching the filesystem.
std::vector<CellResult> run_cells(const std::vector<CellConfig>& cells, std::uint32_t parallelism);

/// Reads a results file, rejecting lines whose schema_version differs.
std::vector<ordered_json> read_results(const std::filesystem::path& path);

} // namespace avmp
