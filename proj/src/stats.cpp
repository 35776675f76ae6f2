// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/stats.hpp"

#include <algorithm>
#include <cmath>

#include "avmp/random.hpp"

namespace avmp {

std::string CellKey::to_string() const {
    return workload + "/" + model + "/" + std::to_string(budget_bytes) + "/" + std::to_string(seed);
}

MeanSigma mean_sigma(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("mean of an empty group");
    }
    MeanSigma out;
    out.n = values.size();
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(out.n);
    if (out.n > 1) {
        double ss = 0.0;
        for (const double v : values) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.sigma = std::sqrt(ss / static_cast<double>(out.n - 1));
    }
    return out;
}

double total_sigma(const std::vector<double>& sigmas) {
    double ss = 0.0;
    for (const double s : sigmas) {
        ss += s * s;
    }
    return std::sqrt(ss);
}

Aggregate aggregate_mean_sigma(const std::map<std::string, std::vector<double>>& groups) {
    Aggregate out;
    std::vector<double> sigmas;
    for (const auto& [name, values] : groups) {
        if (values.empty()) {
            throw std::invalid_argument("group '" + name + "' is empty");
        }
        const auto ms = mean_sigma(values);
        out.groups.emplace(name, ms);
        out.total_mean += ms.mean;
        sigmas.push_back(ms.sigma);
    }
    out.total_sigma = total_sigma(sigmas);
    return out;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw std::invalid_argument("percentile of an empty sample");
    }
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

namespace {

struct Paired {
    std::vector<double> a;
    std::vector<double> b;
};

Paired pair_up(const MetricByKey& a, const MetricByKey& b) {
    std::string missing;
    for (const auto& [k, v] : a) {
        if (!b.contains(k)) missing += " -" + k.to_string();
    }
    for (const auto& [k, v] : b) {
        if (!a.contains(k)) missing += " +" + k.to_string();
    }
    if (!missing.empty()) {
        throw PairingError("unmatched cell keys:" + missing);
    }
    if (a.empty()) {
        throw PairingError("no cells to pair");
    }
    Paired p;
    for (const auto& [k, v] : a) {
        p.a.push_back(v);
        p.b.push_back(b.at(k));
    }
    return p;
}

Pcg32 bootstrap_rng(std::uint64_t seed) {
    return Pcg32(seed, stream_tag("bootstrap"));
}

void finish(BootstrapReport& r, std::vector<double>& stats, double null_value) {
    std::sort(stats.begin(), stats.end());
    r.ci_low = nearest_rank(stats, 0.025);
    r.ci_high = nearest_rank(stats, 0.975);
    r.significant = r.ci_low > null_value || r.ci_high < null_value;
}

} // namespace

BootstrapReport paired_bootstrap_delta(const MetricByKey& a, const MetricByKey& b, std::uint32_t resamples,
                                       std::uint64_t rng_seed, std::string label) {
    if (resamples == 0) {
        throw std::invalid_argument("bootstrap needs at least one resample");
    }
    const auto p = pair_up(a, b);
    const auto n = static_cast<std::uint32_t>(p.a.size());
    std::vector<double> d(n);
    double sum = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
        d[i] = p.a[i] - p.b[i];
        sum += d[i];
    }

    BootstrapReport r;
    r.label = std::move(label);
    r.n = n;
    r.resamples = resamples;
    r.point = sum / n;

    auto rng = bootstrap_rng(rng_seed);
    std::vector<double> stats(resamples);
    for (auto& s : stats) {
        double acc = 0.0;
        for (std::uint32_t i = 0; i < n; ++i) {
            acc += d[rng.below(n)];
        }
        s = acc / n;
    }
    finish(r, stats, 0.0);
    return r;
}

BootstrapReport paired_bootstrap_ratio(const MetricByKey& a, const MetricByKey& b, std::uint32_t resamples,
                                       std::uint64_t rng_seed, std::string label) {
    if (resamples == 0) {
        throw std::invalid_argument("bootstrap needs at least one resample");
    }
    const auto p = pair_up(a, b);
    const auto n = static_cast<std::uint32_t>(p.a.size());
    double sa = 0.0;
    double sb = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
        sa += p.a[i];
        sb += p.b[i];
    }
    if (sb == 0.0) {
        throw BootstrapError("ratio denominator has zero mean over the full sample");
    }

    BootstrapReport r;
    r.label = std::move(label);
    r.n = n;
    r.resamples = resamples;
    r.point = sa / sb;

    auto rng = bootstrap_rng(rng_seed);
    std::vector<double> stats;
    stats.reserve(resamples);
    for (std::uint32_t k = 0; k < resamples; ++k) {
        double ra = 0.0;
        double rb = 0.0;
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto j = rng.below(n);
            ra += p.a[j];
            rb += p.b[j];
        }
        if (rb == 0.0) {
            ++r.skipped;
            continue;
        }
        stats.push_back(ra / rb);
    }
    if (static_cast<double>(r.skipped) > 0.01 * resamples) {
        throw BootstrapError(std::to_string(r.skipped) + " of " + std::to_string(resamples) +
                             " resamples had a zero denominator");
    }
    finish(r, stats, 1.0);
    return r;
}

} // namespace avmp
