// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "avmp/stats.hpp"

using namespace avmp;

namespace {

MetricByKey series(const std::vector<double>& values) {
    MetricByKey m;
    for (std::size_t i = 0; i < values.size(); ++i) {
        m[CellKey{"w", "m", 1024, i + 1}] = values[i];
    }
    return m;
}

// All n^n index tuples, each equally likely.
void for_each_resample(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& f) {
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
        f(idx);
        std::size_t k = 0;
        while (k < n && ++idx[k] == n) idx[k++] = 0;
        if (k == n) return;
    }
}

std::vector<double> enumerate_delta(const std::vector<double>& d) {
    std::vector<double> out;
    for_each_resample(d.size(), [&](const std::vector<std::size_t>& idx) {
        double s = 0;
        for (auto i : idx) s += d[i];
        out.push_back(s / d.size());
    });
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> enumerate_ratio(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out;
    for_each_resample(a.size(), [&](const std::vector<std::size_t>& idx) {
        double sa = 0, sb = 0;
        for (auto i : idx) {
            sa += a[i];
            sb += b[i];
        }
        if (sb != 0) out.push_back(sa / sb);
    });
    std::sort(out.begin(), out.end());
    return out;
}

bool in_support(const std::vector<double>& support, double x) {
    return std::any_of(support.begin(), support.end(), [&](double s) { return std::abs(s - x) < 1e-12; });
}

} // namespace

TEST(Aggregate, TotalSigma) {
    EXPECT_DOUBLE_EQ(total_sigma({3, 4}), 5.0);
    EXPECT_DOUBLE_EQ(total_sigma({0, 0, 0}), 0.0);
    const auto agg = aggregate_mean_sigma({{"a", {1, 2, 3}}});
    EXPECT_DOUBLE_EQ(agg.total_sigma, agg.groups.at("a").sigma);
    EXPECT_DOUBLE_EQ(agg.groups.at("a").mean, 2.0);
    EXPECT_DOUBLE_EQ(agg.groups.at("a").sigma, 1.0);
    EXPECT_THROW(aggregate_mean_sigma({{"a", {}}}), std::invalid_argument);
}

TEST(Aggregate, TotalsSumMeans) {
    const auto agg = aggregate_mean_sigma({{"x", {2, 4}}, {"y", {10, 10}}});
    EXPECT_DOUBLE_EQ(agg.total_mean, 13.0);
    EXPECT_DOUBLE_EQ(agg.total_sigma, std::sqrt(2.0));
}

TEST(Percentile, NearestRank) {
    const std::vector<double> s{1, 2, 3, 4};
    EXPECT_EQ(nearest_rank(s, 0.025), 1.0);
    EXPECT_EQ(nearest_rank(s, 0.5), 2.0);
    EXPECT_EQ(nearest_rank(s, 0.975), 4.0);
    EXPECT_THROW(nearest_rank({}, 0.5), std::invalid_argument);
}

TEST(Bootstrap, AllZeroDeltas) {
    const auto a = series({3, 7, 1, 0});
    const auto r = paired_bootstrap_delta(a, a);
    EXPECT_EQ(r.point, 0.0);
    EXPECT_EQ(r.ci_low, 0.0);
    EXPECT_EQ(r.ci_high, 0.0);
    EXPECT_FALSE(r.significant);
    EXPECT_EQ(r.n, 4u);
}

TEST(Bootstrap, DeltaN2Exhaustive) {
    const auto a = series({0, 0});
    const auto b = series({2, 4}); // deltas {-2, -4}
    const auto support = enumerate_delta({-2, -4});
    EXPECT_EQ(support, (std::vector<double>{-4, -3, -3, -2}));
    const auto r = paired_bootstrap_delta(a, b);
    EXPECT_DOUBLE_EQ(r.point, -3.0);
    EXPECT_TRUE(in_support(support, r.ci_low));
    EXPECT_TRUE(in_support(support, r.ci_high));
    EXPECT_LE(r.ci_low, r.point);
    EXPECT_GE(r.ci_high, r.point);
}

TEST(Bootstrap, RatioN2Exhaustive) {
    const auto a = series({4, 8});
    const auto b = series({2, 2});
    const auto support = enumerate_ratio({4, 8}, {2, 2});
    EXPECT_EQ(support, (std::vector<double>{2, 3, 3, 4}));
    const auto r = paired_bootstrap_ratio(a, b);
    EXPECT_DOUBLE_EQ(r.point, 3.0);
    EXPECT_TRUE(in_support(support, r.ci_low));
    EXPECT_TRUE(in_support(support, r.ci_high));
}

TEST(Bootstrap, N3OracleAgreement) {
    const std::vector<double> av{5, 1, 9}, bv{2, 3, 4};
    const auto d = paired_bootstrap_delta(series(av), series(bv), 4000, 5);
    const auto ds = enumerate_delta({3, -2, 5});
    EXPECT_EQ(ds.size(), 27u);
    EXPECT_TRUE(in_support(ds, d.ci_low));
    EXPECT_TRUE(in_support(ds, d.ci_high));
    // with many resamples the endpoints sit near the exact 2.5/97.5 points
    EXPECT_NEAR(d.ci_low, nearest_rank(ds, 0.025), 1.0 + 1e-9);
    EXPECT_NEAR(d.ci_high, nearest_rank(ds, 0.975), 1.0 + 1e-9);

    const auto r = paired_bootstrap_ratio(series(av), series(bv), 4000, 5);
    const auto rs = enumerate_ratio(av, bv);
    EXPECT_TRUE(in_support(rs, r.ci_low));
    EXPECT_TRUE(in_support(rs, r.ci_high));
    EXPECT_DOUBLE_EQ(r.point, 15.0 / 9.0);
}

TEST(Bootstrap, RatioIdentities) {
    const std::vector<double> b{1, 3, 5, 7, 2};
    std::vector<double> a2;
    for (double x : b) a2.push_back(2 * x);
    const auto twice = paired_bootstrap_ratio(series(a2), series(b));
    EXPECT_EQ(twice.point, 2.0);
    EXPECT_EQ(twice.ci_low, 2.0);
    EXPECT_EQ(twice.ci_high, 2.0);
    EXPECT_TRUE(twice.significant);

    const auto same = paired_bootstrap_ratio(series(b), series(b));
    EXPECT_EQ(same.point, 1.0);
    EXPECT_EQ(same.ci_low, 1.0);
    EXPECT_EQ(same.ci_high, 1.0);
    EXPECT_FALSE(same.significant);
}

TEST(Bootstrap, SeededDeterminism) {
    const auto a = series({5, 2, 8, 1, 9, 4});
    const auto b = series({3, 3, 3, 3, 3, 3});
    const auto r1 = paired_bootstrap_delta(a, b);
    const auto r2 = paired_bootstrap_delta(a, b);
    EXPECT_EQ(r1.ci_low, r2.ci_low);
    EXPECT_EQ(r1.ci_high, r2.ci_high);
    const auto r3 = paired_bootstrap_delta(a, b, kBootstrapResamples, 1);
    EXPECT_TRUE(r3.ci_low != r1.ci_low || r3.ci_high != r1.ci_high || r3.point == r1.point);
}

TEST(Bootstrap, PairingErrors) {
    auto a = series({1, 2, 3});
    auto b = series({1, 2});
    EXPECT_THROW(paired_bootstrap_delta(a, b), PairingError);
    EXPECT_THROW(paired_bootstrap_ratio(b, a), PairingError);
    EXPECT_THROW(paired_bootstrap_delta({}, {}), PairingError);
    b[CellKey{"other", "m", 1024, 3}] = 0;
    EXPECT_THROW(paired_bootstrap_delta(a, b), PairingError);
}

TEST(Bootstrap, ZeroDenominators) {
    // one zero in twenty: a resample needs all twenty draws on it to hit a zero sum
    std::vector<double> b(20, 1.0);
    b[0] = 0;
    EXPECT_EQ(paired_bootstrap_ratio(series(std::vector<double>(20, 1.0)), series(b)).skipped, 0u);

    // n = 2 with one zero: a quarter of resamples have a zero denominator
    EXPECT_THROW(paired_bootstrap_ratio(series({1, 1}), series({0, 1})), BootstrapError);
    EXPECT_THROW(paired_bootstrap_ratio(series({1, 1}), series({0, 0})), BootstrapError);
}
