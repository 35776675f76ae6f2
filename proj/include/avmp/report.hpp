// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "avmp/stats.hpp"
#include "avmp/sweep.hpp"

namespace avmp {

enum class ReportMode : std::uint8_t { Tables, Bootstrap, Figures };

ReportMode parse_report_mode(const std::string& s);

/// Numeric field of a result record; timing fields are looked up under
/// "timing". Throws SchemaError if absent.
double record_metric(const ordered_json& record, const std::string& metric);

CellKey record_key(const ordered_json& record);

/// Metric per cell key for one variant. An empty workload set keeps all
/// workloads. Duplicate keys are a SchemaError.
MetricByKey metric_by_key(const std::vector<ordered_json>& records, const std::string& variant,
                          const std::string& metric, const std::set<std::string>& workloads = {});

/// Variant and workload names in first-seen order.
std::vector<std::string> variants_of(const std::vector<ordered_json>& records);
std::vector<std::string> workloads_of(const std::vector<ordered_json>& records);

/// Per-workload aggregate for one variant: seeds collapse into mean and
/// sigma per (model, budget); the workload value sums those means and
/// propagates sigma as sqrt(sum sigma^2).
Aggregate workload_aggregate(const std::vector<ordered_json>& records, const std::string& variant,
                             const std::string& workload, const std::string& metric);

struct Comparison {
    std::string a;
    std::string b;
};

/// Default pairs, filtered to the variants present.
std::vector<Comparison> default_comparisons(const std::vector<ordered_json>& records);

struct BootstrapOptions {
    std::uint32_t resamples = kBootstrapResamples;
    std::uint64_t seed = kBootstrapSeed;
    std::vector<Comparison> comparisons; // empty = defaults
};

/// Writes the CSV files for one mode into out_dir and returns their paths.
std::vector<std::filesystem::path> write_report(const std::vector<ordered_json>& records, ReportMode mode,
                                                const std::filesystem::path& out_dir,
                                                const BootstrapOptions& options = {});

/// One CSV row for a bootstrap report.
std::string bootstrap_csv_header();
std::string to_csv(const BootstrapReport& r, const std::string& metric, const std::string& scope);

} // namespace avmp
