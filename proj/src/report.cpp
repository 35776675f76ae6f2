// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace avmp {

ReportMode parse_report_mode(const std::string& s) {
    if (s == "tables") return ReportMode::Tables;
    if (s == "bootstrap") return ReportMode::Bootstrap;
    if (s == "figures") return ReportMode::Figures;
    throw std::invalid_argument("unknown report mode '" + s + "'");
}

double record_metric(const ordered_json& record, const std::string& metric) {
    const ordered_json* v = nullptr;
    if (const auto it = record.find(metric); it != record.end()) {
        v = &*it;
    } else if (const auto t = record.find("timing"); t != record.end()) {
        if (const auto jt = t->find(metric); jt != t->end()) v = &*jt;
    }
    if (v == nullptr) {
        throw SchemaError("result record has no field '" + metric + "'");
    }
    if (v->is_null()) {
        return 0.0;
    }
    if (v->is_boolean()) {
        return v->get<bool>() ? 1.0 : 0.0;
    }
    if (!v->is_number()) {
        throw SchemaError("field '" + metric + "' is not numeric");
    }
    return v->get<double>();
}

CellKey record_key(const ordered_json& r) {
    try {
        return CellKey{r.at("workload").get<std::string>(), r.at("model").get<std::string>(),
                       r.at("budget_bytes").get<std::uint64_t>(), r.at("seed").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed result record: ") + e.what());
    }
}

MetricByKey metric_by_key(const std::vector<ordered_json>& records, const std::string& variant,
                          const std::string& metric, const std::set<std::string>& workloads) {
    MetricByKey out;
    for (const auto& r : records) {
        if (r.value("variant", std::string()) != variant) continue;
        auto key = record_key(r);
        if (!workloads.empty() && !workloads.contains(key.workload)) continue;
        if (!out.emplace(key, record_metric(r, metric)).second) {
            throw SchemaError("duplicate cell " + key.to_string() + " for variant " + variant);
        }
    }
    return out;
}

namespace {

std::vector<std::string> first_seen(const std::vector<ordered_json>& records, const char* field) {
    std::vector<std::string> out;
    for (const auto& r : records) {
        const auto v = r.value(field, std::string());
        if (std::find(out.begin(), out.end(), v) == out.end()) {
            out.push_back(v);
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "# schema_version," << kSchemaVersion << "\n";
    return out;
}

} // namespace

std::vector<std::string> variants_of(const std::vector<ordered_json>& records) {
    return first_seen(records, "variant");
}

std::vector<std::string> workloads_of(const std::vector<ordered_json>& records) {
    return first_seen(records, "workload");
}

Aggregate workload_aggregate(const std::vector<ordered_json>& records, const std::string& variant,
                             const std::string& workload, const std::string& metric) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : records) {
        if (r.value("variant", std::string()) != variant || r.value("workload", std::string()) != workload) {
            continue;
        }
        const auto key = record_key(r);
        groups[key.model + "/" + std::to_string(key.budget_bytes)].push_back(record_metric(r, metric));
    }
    if (groups.empty()) {
        throw SchemaError("no cells for " + variant + " / " + workload);
    }
    return aggregate_mean_sigma(groups);
}

std::vector<Comparison> default_comparisons(const std::vector<ordered_json>& records) {
    const auto vs = variants_of(records);
    const auto has = [&](const char* v) { return std::find(vs.begin(), vs.end(), v) != vs.end(); };
    std::vector<Comparison> out;
    for (const auto& [a, b] : std::vector<std::pair<const char*, const char*>>{
             {"avmp_static_mr05", "fixed_dual_mr05"},
             {"avmp_dynamic_b128", "avmp_static_mr05"},
             {"avmp_dynamic_b128", "fixed_dual_mr05"},
             {"avmp_dynamic_b128", "padded_unified"},
             {"fixed_dual_mr05", "padded_unified"}}) {
        if (has(a) && has(b)) out.push_back({a, b});
    }
    return out;
}

std::string bootstrap_csv_header() {
    return "comparison,metric,scope,stat,n,point,ci_low,ci_high,significant,resamples,skipped";
}

std::string to_csv(const BootstrapReport& r, const std::string& metric, const std::string& scope) {
    std::ostringstream os;
    const bool ratio = r.label.find(" / ") != std::string::npos;
    os << r.label << ',' << metric << ',' << scope << ',' << (ratio ? "ratio" : "delta") << ',' << r.n << ','
       << fmt(r.point) << ',' << fmt(r.ci_low) << ',' << fmt(r.ci_high) << ',' << (r.significant ? "yes" : "no")
       << ',' << r.resamples << ',' << r.skipped;
    return os.str();
}

namespace {

std::filesystem::path write_tables(const std::vector<ordered_json>& records, const std::filesystem::path& dir,
                                   const std::string& metric) {
    const auto variants = variants_of(records);
    const auto workloads = workloads_of(records);
    const auto path = dir / ("table_" + metric + ".csv");
    auto out = open_csv(path);

    out << "variant";
    for (const auto& w : workloads) out << ',' << w << "_mean," << w << "_sigma";
    out << ",total_mean,total_sigma,delta_pct_vs_padded\n";

    std::optional<double> padded_total;
    std::vector<std::pair<std::string, std::pair<double, double>>> totals;
    for (const auto& v : variants) {
        std::vector<double> sigmas;
        double total = 0.0;
        std::ostringstream row;
        row << v;
        for (const auto& w : workloads) {
            const auto agg = workload_aggregate(records, v, w, metric);
            row << ',' << fmt(agg.total_mean) << ',' << fmt(agg.total_sigma);
            total += agg.total_mean;
            sigmas.push_back(agg.total_sigma);
        }
        row << ',' << fmt(total) << ',' << fmt(total_sigma(sigmas));
        if (v == "padded_unified") padded_total = total;
        totals.push_back({row.str(), {total, 0.0}});
    }
    for (const auto& [row, t] : totals) {
        out << row << ',';
        if (padded_total && *padded_total != 0.0) out << fmt(100.0 * (t.first - *padded_total) / *padded_total);
        out << '\n';
    }
    return path;
}

std::filesystem::path write_bootstrap(const std::vector<ordered_json>& records, const std::filesystem::path& dir,
                                      const BootstrapOptions& opt) {
    const auto comparisons = opt.comparisons.empty() ? default_comparisons(records) : opt.comparisons;
    const auto workloads = workloads_of(records);
    const auto path = dir / "bootstrap.csv";
    auto out = open_csv(path);
    out << bootstrap_csv_header() << '\n';

    std::vector<std::pair<std::string, std::set<std::string>>> scopes{{"all", {}}};
    std::set<std::string> dual;
    for (const auto& w : workloads) {
        if (w == "mixed_long" || w == "agentic_burst") dual.insert(w);
    }
    if (!dual.empty()) scopes.push_back({"mixed_long+agentic_burst", dual});
    for (const auto& w : workloads) scopes.push_back({w, {w}});

    for (const auto& c : comparisons) {
        for (const auto& [scope, filter] : scopes) {
            const auto oa = metric_by_key(records, c.a, "oom_count", filter);
            const auto ob = metric_by_key(records, c.b, "oom_count", filter);
            const auto d = paired_bootstrap_delta(oa, ob, opt.resamples, opt.seed, c.a + " - " + c.b);
            out << to_csv(d, "oom_count", scope) << '\n';

            const auto ga = metric_by_key(records, c.a, "goodput", filter);
            const auto gb = metric_by_key(records, c.b, "goodput", filter);
            try {
                const auto r = paired_bootstrap_ratio(ga, gb, opt.resamples, opt.seed, c.a + " / " + c.b);
                out << to_csv(r, "goodput", scope) << '\n';
            } catch (const BootstrapError& e) {
                out << c.a << " / " << c.b << ",goodput," << scope << ",ratio,,,,,error,,\n";
            }
        }
    }
    return path;
}

std::vector<std::filesystem::path> write_figures(const std::vector<ordered_json>& records,
                                                 const std::filesystem::path& dir, const BootstrapOptions& opt) {
    const auto variants = variants_of(records);
    const auto workloads = workloads_of(records);
    std::vector<std::filesystem::path> paths;

    {
        paths.push_back(dir / "fig_oom_bars.csv");
        auto out = open_csv(paths.back());
        out << "variant,workload,oom_mean,oom_sigma\n";
        for (const auto& v : variants) {
            for (const auto& w : workloads) {
                const auto agg = workload_aggregate(records, v, w, "oom_count");
                out << v << ',' << w << ',' << fmt(agg.total_mean) << ',' << fmt(agg.total_sigma) << '\n';
            }
        }
    }
    {
        paths.push_back(dir / "fig_phase_stack.csv");
        auto out = open_csv(paths.back());
        out << "variant,workload,service,oom_retry,migration,idle\n";
        for (const auto& v : variants) {
            for (const auto& w : workloads) {
                double b[4] = {0, 0, 0, 0};
                for (const auto& r : records) {
                    if (r.value("variant", std::string()) != v || r.value("workload", std::string()) != w) continue;
                    b[0] += record_metric(r, "service_s");
                    b[1] += record_metric(r, "oom_retry_s");
                    b[2] += record_metric(r, "migration_s");
                    b[3] += record_metric(r, "idle_s");
                }
                const double sum = b[0] + b[1] + b[2] + b[3];
                out << v << ',' << w;
                for (const double x : b) out << ',' << fmt(sum > 0.0 ? x / sum : 0.0);
                out << '\n';
            }
        }
    }
    {
        paths.push_back(dir / "fig_goodput_ratio.csv");
        auto out = open_csv(paths.back());
        out << "variant,workload,ratio_vs_padded,ci_low,ci_high\n";
        const bool have_padded = std::find(variants.begin(), variants.end(), "padded_unified") != variants.end();
        for (const auto& v : variants) {
            if (!have_padded || v == "padded_unified") continue;
            for (const auto& w : workloads) {
                const auto a = metric_by_key(records, v, "goodput", {w});
                const auto b = metric_by_key(records, "padded_unified", "goodput", {w});
                try {
                    const auto r = paired_bootstrap_ratio(a, b, opt.resamples, opt.seed);
                    out << v << ',' << w << ',' << fmt(r.point) << ',' << fmt(r.ci_low) << ',' << fmt(r.ci_high)
                        << '\n';
                } catch (const BootstrapError&) {
                    out << v << ',' << w << ",,,\n";
                }
            }
        }
    }
    {
        paths.push_back(dir / "fig_oom_vs_b.csv");
        auto out = open_csv(paths.back());
        out << "variant,migration_batch_size,threshold_low,threshold_high,workload,oom_mean,oom_sigma\n";
        for (const auto& v : variants) {
            const auto it = std::find_if(records.begin(), records.end(),
                                         [&](const ordered_json& r) { return r.value("variant", std::string()) == v; });
            const auto& alloc = it->at("config").at("allocator");
            if (alloc.at("variant") != "avmp_dynamic") continue;
            const auto& reb = alloc.at("rebalance");
            for (const auto& w : workloads) {
                const auto agg = workload_aggregate(records, v, w, "oom_count");
                out << v << ',' << reb.at("migration_batch_size").get<std::uint32_t>() << ','
                    << fmt(reb.at("threshold_low").get<double>()) << ',' << fmt(reb.at("threshold_high").get<double>())
                    << ',' << w << ',' << fmt(agg.total_mean) << ',' << fmt(agg.total_sigma) << '\n';
            }
        }
    }
    {
        paths.push_back(dir / "fig_reserved_bytes.csv");
        auto out = open_csv(paths.back());
        out << "variant,model,budget_bytes,reserved_bytes\n";
        std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
        for (const auto& r : records) {
            const auto k = record_key(r);
            const auto v = r.value("variant", std::string());
            if (!seen.insert({v, k.model, k.budget_bytes}).second) continue;
            out << v << ',' << k.model << ',' << k.budget_bytes << ','
                << r.at("peak_reserved_bytes").get<std::uint64_t>() << '\n';
        }
    }
    return paths;
}

} // namespace

std::vector<std::filesystem::path> write_report(const std::vector<ordered_json>& records, ReportMode mode,
                                                const std::filesystem::path& out_dir,
                                                const BootstrapOptions& options) {
    if (records.empty()) {
        throw SchemaError("no result records to report on");
    }
    std::filesystem::create_directories(out_dir);
    switch (mode) {
    case ReportMode::Tables: {
        std::vector<std::filesystem::path> out;
        for (const char* m : {"oom_count", "rebalance_count", "migrated_bytes", "effective_batch_size_p50", "goodput"}) {
            out.push_back(write_tables(records, out_dir, m));
        }
        return out;
    }
    case ReportMode::Bootstrap:
        return {write_bootstrap(records, out_dir, options)};
    case ReportMode::Figures:
        return write_figures(records, out_dir, options);
    }
    return {};
}

} // namespace avmp
