// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   avmp_acceptance [--only N] [--sharegpt PATH]
//
// The real conversation corpus for criterion 11 is optional; it is read from
// --sharegpt or $AVMP_SHAREGPT_PATH when present.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "avmp/allocator.hpp"
#include "avmp/rebalancer.hpp"
#include "avmp/report.hpp"
#include "avmp/stats.hpp"
#include "avmp/sweep.hpp"
#include "avmp/workload.hpp"

using namespace avmp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

constexpr std::uint32_t kDeskRequests = 2048;
const std::vector<std::string> kDual{"mixed_long", "agentic_burst"};

SweepConfig desk(const std::vector<std::string>& variants, bool events) {
    nlohmann::json j;
    j["name"] = "acceptance";
    j["variants"] = variants;
    j["workloads"] = {"uniform_short", "mixed_long", "agentic_burst"};
    j["n_requests"] = kDeskRequests;
    j["models"] = {"jamba_1_5_mini"};
    j["budgets_mib"] = {1024, 2048};
    j["seeds"] = {1, 2, 3};
    j["record_events"] = events;
    return parse_sweep_config(j);
}

struct Run {
    std::vector<CellConfig> cells;
    std::vector<CellResult> results;
    std::vector<ordered_json> records;
};

Run run_grid(const SweepConfig& cfg, std::uint32_t parallelism) {
    Run r;
    r.cells = expand_grid(cfg);
    r.results = run_cells(r.cells, parallelism);
    for (std::size_t i = 0; i < r.cells.size(); ++i) r.records.push_back(result_record(r.cells[i], r.results[i]));
    return r;
}

const std::vector<std::string>& main_variants() {
    static const std::vector<std::string> v{"padded_unified", "fixed_dual_mr09", "fixed_dual_mr05",
                                            "avmp_static_mr05", "avmp_dynamic_b128"};
    return v;
}

// Shared by criteria 1, 3, 4 and 6.
const Run& main_grid() {
    static const Run r = run_grid(desk(main_variants(), true), 4);
    return r;
}

double sum_metric(const Run& run, const std::string& variant, const std::string& metric,
                  const std::set<std::string>& workloads = {}, std::optional<std::uint64_t> seed = {}) {
    double s = 0;
    for (const auto& [k, v] : metric_by_key(run.records, variant, metric, workloads)) {
        if (!seed || k.seed == *seed) s += v;
    }
    return s;
}

std::string num(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

std::string ci(const BootstrapReport& r) {
    return num(r.point) + " [" + num(r.ci_low) + ", " + num(r.ci_high) + "] n=" + std::to_string(r.n);
}

Outcome c1_equivalence() {
    const auto& g = main_grid();
    std::size_t mismatches = 0;
    for (const char* m : {"oom_count", "rebalance_count", "migrated_bytes"}) {
        const auto a = metric_by_key(g.records, "avmp_static_mr05", m);
        const auto b = metric_by_key(g.records, "fixed_dual_mr05", m);
        for (const auto& [k, v] : a) {
            if (b.at(k) != v) ++mismatches;
            if (std::string(m) != "oom_count" && v != 0) ++mismatches;
        }
    }
    const auto d = paired_bootstrap_delta(metric_by_key(g.records, "avmp_static_mr05", "oom_count"),
                                          metric_by_key(g.records, "fixed_dual_mr05", "oom_count"));
    const bool zero_ci = d.ci_low == 0.0 && d.ci_high == 0.0;
    return {mismatches == 0 && zero_ci && d.n == 18,
            "per-cell mismatches " + std::to_string(mismatches) + ", oom delta " + ci(d)};
}

Outcome c2_determinism() {
    const auto& g = main_grid();
    const auto again = run_grid(desk(main_variants(), true), 1);
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < g.records.size(); ++i) {
        if (deterministic_view(g.records[i]).dump() != deterministic_view(again.records[i]).dump()) ++diffs;
        const auto ea = events_record(g.cells[i], *g.results[i].events).dump();
        const auto eb = events_record(again.cells[i], *again.results[i].events).dump();
        if (ea != eb) ++diffs;
    }
    return {diffs == 0, std::to_string(g.records.size()) + " cells, parallelism 4 vs 1, " + std::to_string(diffs) +
                            " differing records"};
}

Outcome c3_ordering() {
    const auto& g = main_grid();
    const std::set<std::string> dual(kDual.begin(), kDual.end());
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const double p = sum_metric(g, "padded_unified", "oom_count", dual, seed);
        const double f9 = sum_metric(g, "fixed_dual_mr09", "oom_count", dual, seed);
        const double f5 = sum_metric(g, "fixed_dual_mr05", "oom_count", dual, seed);
        const double d = sum_metric(g, "avmp_dynamic_b128", "oom_count", dual, seed);
        ok = ok && p > f9 && f9 > f5 && f5 >= d;
        detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + ": " + num(p) + " > " +
                  num(f9) + " > " + num(f5) + " >= " + num(d);
    }
    return {ok, detail};
}

Outcome c4_dynamic_benefit() {
    const auto& g = main_grid();
    const std::set<std::string> dual(kDual.begin(), kDual.end());
    const auto a = metric_by_key(g.records, "avmp_dynamic_b128", "oom_count", dual);
    const auto b = metric_by_key(g.records, "avmp_static_mr05", "oom_count", dual);
    const auto d = paired_bootstrap_delta(a, b);
    const double ta = sum_metric(g, "avmp_dynamic_b128", "oom_count", dual);
    const double tb = sum_metric(g, "avmp_static_mr05", "oom_count", dual);

    const auto ua = metric_by_key(g.records, "avmp_dynamic_b128", "oom_count", {"uniform_short"});
    const auto ub = metric_by_key(g.records, "avmp_static_mr05", "oom_count", {"uniform_short"});
    double worst = 0;
    for (const auto& [k, v] : ua) worst = std::max(worst, std::abs(v - ub.at(k)));

    const bool ok = ta < tb && (d.ci_high < 0.0 || d.ci_low > 0.0) && d.n >= 12 && worst <= 5.0;
    return {ok, "dual-pressure total " + num(ta) + " vs " + num(tb) + ", delta " + ci(d) +
                    "; uniform_short max per-cell gap " + num(worst)};
}

Outcome c5_migration_arithmetic() {
    std::mt19937_64 rng(20260520);
    std::size_t violations = 0;
    for (int i = 0; i < 100000; ++i) {
        const std::uint64_t dbytes = 1 + rng() % (256 * 1024);
        const std::uint64_t rbytes = 1 + rng() % (256 * 1024);
        const auto batch = static_cast<std::uint32_t>(1 + rng() % 256);
        const auto donor_cap = static_cast<std::uint32_t>(batch + rng() % 64);
        BackingStore donor(PoolGeometry{PoolId::SSM, dbytes, donor_cap, donor_cap});
        const std::uint64_t ds = donor.page_stride();
        const std::uint64_t rs = page_stride(rbytes);
        const auto rcap = static_cast<std::uint32_t>(1 + rng() % 16);
        const auto rmax = static_cast<std::uint32_t>(rcap + (batch * ds) / rs + 1);
        BackingStore recipient(PoolGeometry{PoolId::KV, rbytes, rcap, rmax});
        const auto ev = migrate(donor, recipient, nullptr, batch, static_cast<std::uint64_t>(i));
        const std::uint64_t freed = std::uint64_t{ev.donor_pages_freed} * ds;
        const std::uint64_t gained = std::uint64_t{ev.recipient_pages_gained} * rs;
        if (ev.rolled_back || ev.donor_pages_freed != batch || ev.bytes_migrated != freed ||
            freed != gained + ev.waste_bytes || ev.waste_bytes >= rs ||
            recipient.capacity_pages() != rcap + ev.recipient_pages_gained ||
            donor.capacity_pages() != donor_cap - batch) {
            ++violations;
        }
    }
    return {violations == 0, "100000 random triples, " + std::to_string(violations) + " violations"};
}

Outcome c6_throttle_and_gate() {
    const auto& g = main_grid();
    std::size_t interval = 0, ungated = 0, rebalances = 0, logs = 0;
    for (const auto& r : g.results) {
        const auto& ev = *r.events;
        ++logs;
        std::set<std::uint64_t> error_ops;
        for (const auto& e : ev.capacity_errors) error_ops.insert(e.op);
        std::optional<std::uint64_t> last;
        for (const auto& reb : ev.rebalances) {
            ++rebalances;
            if (!error_ops.count(reb.at_op)) ++ungated;
            if (reb.rolled_back) continue;
            if (last && reb.at_op - *last < 1000) ++interval;
            last = reb.at_op;
        }
    }
    return {interval == 0 && ungated == 0 && rebalances > 0,
            std::to_string(logs) + " event logs, " + std::to_string(rebalances) + " rebalances, " +
                std::to_string(interval) + " interval violations, " + std::to_string(ungated) +
                " without a CapacityError"};
}

Outcome c7_batch_trend() {
    const std::vector<std::string> vs{"avmp_dynamic_b1", "avmp_dynamic_b8", "avmp_dynamic_b128", "avmp_dynamic_b256"};
    const auto run = run_grid(desk(vs, false), 4);
    std::map<std::string, double> t;
    for (const auto& v : vs) t[v] = sum_metric(run, v, "oom_count");
    const double b1 = t["avmp_dynamic_b1"], b128 = t["avmp_dynamic_b128"], b256 = t["avmp_dynamic_b256"];
    const double gap = std::abs(b128 - b256) / std::max(b128, b256);
    const bool ok = b128 <= b1 && gap <= 0.05;
    return {ok, "totals B=1 " + num(b1) + ", B=8 " + num(t["avmp_dynamic_b8"]) + ", B=128 " + num(b128) +
                    ", B=256 " + num(b256) + "; 128 vs 256 differ by " + num(100.0 * gap) + "%"};
}

Outcome c8_threshold_null() {
    const std::vector<std::string> vs{"avmp_dynamic_b128", "avmp_dynamic_b128_tl005_th010",
                                      "avmp_dynamic_b128_tl005_th020", "avmp_dynamic_b128_tl002_th030",
                                      "avmp_dynamic_b128_tl010_th030"};
    const auto run = run_grid(desk(vs, false), 4);
    std::size_t diffs = 0, cells = 0;
    std::string which;
    for (const char* m : {"oom_count", "rebalance_count"}) {
        const auto ref = metric_by_key(run.records, vs[0], m);
        for (std::size_t i = 1; i < vs.size(); ++i) {
            for (const auto& [k, v] : metric_by_key(run.records, vs[i], m)) {
                ++cells;
                if (ref.at(k) != v) {
                    if (diffs++ < 3) which += " " + vs[i] + "@" + k.to_string() + ":" + m;
                }
            }
        }
    }
    return {diffs == 0, std::to_string(cells) + " cell comparisons, " + std::to_string(diffs) + " differ" + which};
}

Outcome c9_reserved_footprint() {
    std::mt19937_64 rng(9);
    std::size_t violations = 0, checked = 0;
    double worst = 0;
    for (const auto& name : builtin_model_names()) {
        const auto model = builtin_model(name);
        const std::uint64_t kv_s = page_stride(model.kv_page_bytes());
        const std::uint64_t ssm_s = page_stride(model.ssm_block_bytes);
        for (int i = 0; i < 200; ++i) {
            const std::uint64_t budget = (64ull << 20) + rng() % (8ull << 30);
            for (const char* ratio : {"01", "05", "09"}) {
                const auto avmp = HybridAllocator(variant_preset(std::string("avmp_static_mr") + ratio), budget, model)
                                      .reserved_bytes();
                const auto fixed = HybridAllocator(variant_preset(std::string("fixed_dual_mr") + ratio), budget, model)
                                       .reserved_bytes();
                const auto dyn = HybridAllocator(variant_preset("avmp_dynamic_b128"), budget, model).reserved_bytes();
                // the static total is floored once per pool, so doubling it can lose up to two strides per pool
                const double tol = 2.0 * static_cast<double>(kv_s + ssm_s);
                for (const auto& a : {avmp, dyn}) {
                    const double dev =
                        std::abs(static_cast<double>(a.total()) - 2.0 * static_cast<double>(fixed.total()));
                    worst = std::max(worst, dev / static_cast<double>(kv_s + ssm_s));
                    ++checked;
                    // each AVMP pool is the full budget floored to one stride
                    if (dev > tol || budget - a.kv >= kv_s || budget - a.ssm >= ssm_s) ++violations;
                }
            }
        }
    }
    return {violations == 0, std::to_string(checked) + " (model, budget, ratio) checks, " +
                                 std::to_string(violations) + " violations, worst |AVMP - 2x static| = " +
                                 num(worst) + " x (kv stride + ssm stride)"};
}

Outcome c10_bootstrap_oracle() {
    std::mt19937_64 rng(10);
    std::size_t violations = 0, cases = 0;
    const auto make = [](const std::vector<double>& v) {
        MetricByKey m;
        for (std::size_t i = 0; i < v.size(); ++i) m[CellKey{"w", "m", 1, i}] = v[i];
        return m;
    };
    const auto check = [&](const std::vector<double>& a, const std::vector<double>& b) {
        const std::size_t n = a.size();
        std::vector<double> deltas, ratios;
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= n;
        for (std::size_t code = 0; code < total; ++code) {
            double sa = 0, sb = 0;
            std::size_t c = code;
            for (std::size_t i = 0; i < n; ++i, c /= n) {
                sa += a[c % n];
                sb += b[c % n];
            }
            deltas.push_back((sa - sb) / static_cast<double>(n));
            if (sb != 0) ratios.push_back(sa / sb);
        }
        const auto in = [](const std::vector<double>& s, double x) {
            return std::any_of(s.begin(), s.end(), [&](double y) { return std::abs(x - y) <= 1e-12 * (1 + std::abs(y)); });
        };
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ma += a[i];
            mb += b[i];
        }
        ++cases;
        const auto d = paired_bootstrap_delta(make(a), make(b), 2000, 1 + cases);
        if (std::abs(d.point - (ma - mb) / n) > 1e-12 || !in(deltas, d.ci_low) || !in(deltas, d.ci_high)) ++violations;
        if (mb != 0 && ratios.size() == total) {
            const auto r = paired_bootstrap_ratio(make(a), make(b), 2000, 1 + cases);
            if (std::abs(r.point - ma / mb) > 1e-12 || !in(ratios, r.ci_low) || !in(ratios, r.ci_high)) ++violations;
        }
    };
    check({0, 0}, {2, 4});
    check({4, 8}, {2, 2});
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 1 + rng() % 3;
        std::vector<double> a(n), b(n);
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = static_cast<double>(rng() % 50);
            b[k] = static_cast<double>(1 + rng() % 50);
        }
        check(a, b);
    }
    return {violations == 0, std::to_string(cases) + " cases with n <= 3, " + std::to_string(violations) +
                                 " disagreements with exhaustive enumeration"};
}

Outcome c11_trace_ingestion(const std::string& corpus) {
    // synthetic corpus: conversation i has a first human turn of exactly words[i] words
    const std::vector<std::size_t> words{0, 1, 5, 12, 13, 15, 19, 20, 100, 777, 3150, 3151, 5000};
    nlohmann::json doc = nlohmann::json::array();
    for (const auto w : words) {
        std::string text;
        for (std::size_t k = 0; k < w; ++k) text += (k ? " w" : "w");
        doc.push_back({{"conversations", {{{"from", "human"}, {"value", text}}, {{"from", "gpt"}, {"value", "ok"}}}}});
    }
    const auto t = parse_sharegpt(doc.dump());
    std::size_t wrong = 0;
    if (t.prompt_tokens.size() != words.size()) ++wrong;
    for (std::size_t i = 0; i < std::min(words.size(), t.prompt_tokens.size()); ++i) {
        const double expect = std::clamp(std::round(1.3 * static_cast<double>(words[i])), 16.0, 4096.0);
        if (t.prompt_tokens[i] != static_cast<std::uint32_t>(expect)) ++wrong;
    }
    std::string detail = "synthetic corpus " + std::to_string(words.size()) + " prompts, " + std::to_string(wrong) +
                         " token-count mismatches";
    bool ok = wrong == 0;
    if (corpus.empty()) {
        detail += "; real corpus skipped (set AVMP_SHAREGPT_PATH or --sharegpt)";
    } else {
        const auto s = summarize_prompts(load_sharegpt(corpus).prompt_tokens);
        const auto near = [](double x, double ref) { return std::abs(x - ref) <= 0.15 * ref; };
        const bool real_ok = near(s.clamp_floor_rate, 0.36) && near(s.median, 25) && near(s.p95, 810);
        ok = ok && real_ok;
        detail += "; real corpus n=" + std::to_string(s.n) + " clamp-floor " + num(100 * s.clamp_floor_rate) +
                  "% median " + std::to_string(s.median) + " p95 " + std::to_string(s.p95) +
                  (real_ok ? " (within 15%)" : " (outside 15%)");
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"avmp acceptance checks"};
    int only = 0;
    std::string corpus;
    if (const char* env = std::getenv("AVMP_SHAREGPT_PATH")) corpus = env;
    app.add_option("--only", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
    app.add_option("--sharegpt", corpus, "real conversation corpus for criterion 11");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"handle-layer equivalence", c1_equivalence},
        {"determinism across parallelism", c2_determinism},
        {"baseline ordering per seed", c3_ordering},
        {"dynamic benefit on dual-pressure workloads", c4_dynamic_benefit},
        {"migration arithmetic", c5_migration_arithmetic},
        {"throttle and gate placement", c6_throttle_and_gate},
        {"batch-size trend", c7_batch_trend},
        {"threshold variants identical", c8_threshold_null},
        {"reserved footprint 2x", c9_reserved_footprint},
        {"bootstrap exhaustive oracle", c10_bootstrap_oracle},
        {"trace ingestion token counts", [&] { return c11_trace_ingestion(corpus); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
