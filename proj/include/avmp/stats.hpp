// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace avmp {

inline constexpr std::uint64_t kBootstrapSeed = 20260520;
inline constexpr std::uint32_t kBootstrapResamples = 10000;

/// Identifies one cell inside a variant's result set. Ordered so that
/// pairing and resampling walk the keys in a fixed order.
struct CellKey {
    std::string workload;
    std::string model;
    std::uint64_t budget_bytes = 0;
    std::uint64_t seed = 0;

    auto operator<=>(const CellKey&) const = default;
    std::string to_string() const;
};

using MetricByKey = std::map<CellKey, double>;

class PairingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BootstrapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MeanSigma {
    double mean = 0.0;
    double sigma = 0.0; // sample standard deviation, 0 for a single value
    std::size_t n = 0;
};

/// Throws std::invalid_argument on an empty list.
MeanSigma mean_sigma(const std::vector<double>& values);

/// sqrt(sum sigma_i^2).
double total_sigma(const std::vector<double>& sigmas);

struct Aggregate {
    std::map<std::string, MeanSigma> groups;
    double total_mean = 0.0; // sum of group means
    double total_sigma = 0.0;
};

/// Mean and sigma per group (values are typically one per seed), plus the
/// cross-group total. Throws std::invalid_argument if any group is empty.
Aggregate aggregate_mean_sigma(const std::map<std::string, std::vector<double>>& groups);

struct BootstrapReport {
    std::string label;
    std::size_t n = 0;
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool significant = false; // CI excludes 0 (delta) or 1 (ratio)
    std::uint32_t resamples = 0;
    std::uint32_t skipped = 0; // ratio resamples with a zero denominator
};

/// Nearest-rank percentile of an ascending-sorted sample, p in (0, 1].
double nearest_rank(const std::vector<double>& sorted, double p);

/// Bootstrap of the mean of per-key deltas a - b.
BootstrapReport paired_bootstrap_delta(const MetricByKey& a, const MetricByKey& b,
                                       std::uint32_t resamples = kBootstrapResamples,
                                       std::uint64_t rng_seed = kBootstrapSeed, std::string label = {});

/// Bootstrap of mean(a) / mean(b) over resampled key tuples. Point is the
/// full-sample ratio. Resamples whose b-mean is zero are skipped; more than
/// 1% skipped is a BootstrapError.
BootstrapReport paired_bootstrap_ratio(const MetricByKey& a, const MetricByKey& b,
                                       std::uint32_t resamples = kBootstrapResamples,
                                       std::uint64_t rng_seed = kBootstrapSeed, std::string label = {});

} // namespace avmp
