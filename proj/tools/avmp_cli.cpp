// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

// avmp: sweep runner and report front end.
//
//   avmp sweep --config configs/desk.json [--out-dir DIR] [-j N] [--events] [--trace FILE]
//   avmp report --mode tables|bootstrap|figures --out-dir DIR results.jsonl...
//   avmp bootstrap --a VARIANT --b VARIANT [--metric oom_count] [--ratio] results.jsonl...
//   avmp ingest-trace --trace FILE [--limit N] [--out counts.json]
//
// Exit codes: 0 ok, 1 config error, 2 cell failure, 3 report/schema error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "avmp/report.hpp"
#include "avmp/sweep.hpp"
#include "avmp/workload.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kCell = 2, kSchema = 3 };

std::vector<avmp::ordered_json> load_all(const std::vector<std::string>& files) {
    std::vector<avmp::ordered_json> all;
    for (const auto& f : files) {
        auto part = avmp::read_results(f);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

std::set<std::string> split_csv(const std::string& s) {
    std::set<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid KV/SSM memory pool simulator"};
    app.require_subcommand(1);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run a sweep grid and write one JSONL record per cell");
    std::string config_path;
    std::string out_dir;
    std::string sweep_trace;
    std::uint32_t parallelism = 0;
    bool events = false;
    sweep->add_option("-c,--config", config_path, "sweep config (JSON)")->required();
    sweep->add_option("-o,--out-dir", out_dir, "override output_dir");
    sweep->add_option("-j,--parallelism", parallelism, "worker threads (overrides config)");
    sweep->add_option("--trace", sweep_trace, "ShareGPT-style trace for sharegpt_replay workloads");
    sweep->add_flag("--events", events, "also write per-cell event logs");

    // report
    auto* report = app.add_subcommand("report", "aggregate result files into CSV tables and figure data");
    std::string mode = "tables";
    std::string report_dir = "reports";
    std::vector<std::string> report_inputs;
    std::uint32_t resamples = avmp::kBootstrapResamples;
    std::uint64_t boot_seed = avmp::kBootstrapSeed;
    report->add_option("-m,--mode", mode, "tables | bootstrap | figures")
        ->check(CLI::IsMember({"tables", "bootstrap", "figures"}));
    report->add_option("-o,--out-dir", report_dir, "directory for CSV output");
    report->add_option("-B,--resamples", resamples, "bootstrap resamples");
    report->add_option("--seed", boot_seed, "bootstrap RNG seed");
    report->add_option("results", report_inputs, "result files")->required();

    // bootstrap
    auto* boot = app.add_subcommand("bootstrap", "paired bootstrap CI for one comparison");
    std::string var_a;
    std::string var_b;
    std::string metric = "oom_count";
    std::string workloads;
    bool ratio = false;
    std::vector<std::string> boot_inputs;
    boot->add_option("--a", var_a, "variant A")->required();
    boot->add_option("--b", var_b, "variant B")->required();
    boot->add_option("--metric", metric, "result field");
    boot->add_option("--workloads", workloads, "comma-separated workload filter");
    boot->add_flag("--ratio", ratio, "ratio of means instead of mean delta");
    boot->add_option("-B,--resamples", resamples, "bootstrap resamples");
    boot->add_option("--seed", boot_seed, "bootstrap RNG seed");
    boot->add_option("results", boot_inputs, "result files")->required();

    // ingest-trace
    auto* ingest = app.add_subcommand("ingest-trace", "convert a ShareGPT-style corpus into prompt token counts");
    std::string trace_path;
    std::size_t limit = avmp::kTracePromptLimit;
    std::string counts_out;
    ingest->add_option("-t,--trace", trace_path, "trace file (JSON)")->required();
    ingest->add_option("--limit", limit, "maximum prompts kept");
    ingest->add_option("-o,--out", counts_out, "write the counts as a JSON array");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    if (*sweep) {
        avmp::SweepConfig cfg;
        try {
            cfg = avmp::load_sweep_config(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (parallelism > 0) cfg.parallelism = parallelism;
            if (events) cfg.record_events = true;
            if (!sweep_trace.empty()) {
                avmp::attach_trace(cfg, avmp::load_sharegpt(sweep_trace).prompt_tokens);
            }
            avmp::expand_grid(cfg);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kConfig;
        }
        try {
            const auto s = avmp::run_sweep(cfg);
            std::cout << "wrote " << s.cells << " cells to " << s.results_path.string();
            if (s.events_path) std::cout << " (events: " << s.events_path->string() << ")";
            std::printf(" in %.1f s\n", s.wall_s);
        } catch (const avmp::CellFailure& e) {
            std::cerr << "cell failure: " << e.what() << "\n";
            return kCell;
        } catch (const std::exception& e) {
            std::cerr << "sweep failed: " << e.what() << "\n";
            return kCell;
        }
        return kOk;
    }

    if (*report) {
        try {
            avmp::BootstrapOptions opt;
            opt.resamples = resamples;
            opt.seed = boot_seed;
            const auto paths = avmp::write_report(load_all(report_inputs), avmp::parse_report_mode(mode), report_dir, opt);
            for (const auto& p : paths) std::cout << p.string() << "\n";
        } catch (const std::exception& e) {
            std::cerr << "report error: " << e.what() << "\n";
            return kSchema;
        }
        return kOk;
    }

    if (*boot) {
        try {
            const auto records = load_all(boot_inputs);
            const auto filter = split_csv(workloads);
            const auto a = avmp::metric_by_key(records, var_a, metric, filter);
            const auto b = avmp::metric_by_key(records, var_b, metric, filter);
            const auto r = ratio ? avmp::paired_bootstrap_ratio(a, b, resamples, boot_seed, var_a + " / " + var_b)
                                 : avmp::paired_bootstrap_delta(a, b, resamples, boot_seed, var_a + " - " + var_b);
            std::string scope;
            for (const auto& w : filter) scope += (scope.empty() ? "" : "+") + w;
            std::cout << avmp::bootstrap_csv_header() << "\n"
                      << avmp::to_csv(r, metric, scope.empty() ? "all" : scope) << "\n";
        } catch (const std::exception& e) {
            std::cerr << "bootstrap error: " << e.what() << "\n";
            return kSchema;
        }
        return kOk;
    }

    if (*ingest) {
        try {
            const auto t = avmp::load_sharegpt(trace_path, limit);
            const auto s = avmp::summarize_prompts(t.prompt_tokens);
            std::printf("prompts %zu (records %zu, skipped %zu)\n", s.n, t.records_seen, t.skipped);
            std::printf("clamp_floor_rate %.4f\nmedian %u\np95 %u\n", s.clamp_floor_rate, s.median, s.p95);
            if (!counts_out.empty()) {
                std::ofstream out(counts_out);
                out << nlohmann::json(t.prompt_tokens).dump() << "\n";
                if (!out) throw std::runtime_error("cannot write " + counts_out);
            }
        } catch (const std::exception& e) {
            std::cerr << "trace error: " << e.what() << "\n";
            return kConfig;
        }
        return kOk;
    }
    return kOk;
}
