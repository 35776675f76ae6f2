// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#include "avmp/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <regex>
#include <thread>

namespace avmp {

using nlohmann::json;

// ---- presets ----------------------------------------------------------------

std::vector<std::string> builtin_model_names() {
    return {"jamba_1_5_mini", "mamba2_1b3"};
}

ModelSpec builtin_model(const std::string& name) {
    // KV bytes per token are summed over attention layers (fp16 K and V).
    if (name == "jamba_1_5_mini") {
        return ModelSpec{name, 4, 28, 4096, 10240, 16};
    }
    if (name == "mamba2_1b3") {
        return ModelSpec{name, 1, 48, 1024, 16384, 16};
    }
    throw ConfigError("unknown model preset '" + name + "'");
}

std::vector<std::string> default_variant_names() {
    return {"padded_unified", "fixed_dual_mr05", "fixed_dual_mr09", "avmp_static_mr05", "avmp_dynamic_b128"};
}

AllocatorConfig variant_preset(const std::string& name) {
    static const std::regex ratio_re(R"((fixed_dual|avmp_static)_mr(\d\d))");
    static const std::regex dyn_re(R"(avmp_dynamic_b(\d+)(?:_tl(\d{3})_th(\d{3}))?)");

    AllocatorConfig c;
    c.name = name;
    std::smatch m;
    if (name == "padded_unified") {
        c.variant = AllocatorVariant::PaddedUnified;
    } else if (std::regex_match(name, m, ratio_re)) {
        c.variant = parse_variant(m[1]);
        c.mamba_full_memory_ratio = std::stoi(m[2]) / 10.0;
    } else if (std::regex_match(name, m, dyn_re)) {
        c.variant = AllocatorVariant::AvmpDynamic;
        c.mamba_full_memory_ratio = 0.5;
        c.rebalance.migration_batch_size = static_cast<std::uint32_t>(std::stoul(m[1]));
        if (m[2].matched) {
            c.rebalance.threshold_low = std::stoi(m[2]) / 100.0;
            c.rebalance.threshold_high = std::stoi(m[3]) / 100.0;
        }
    } else {
        throw ConfigError("unknown variant preset '" + name + "'");
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("variant '" + name + "': " + e.what());
    }
    return c;
}

// ---- JSON -------------------------------------------------------------------

namespace {

ordered_json range_json(const TokenRange& r) {
    return ordered_json::array({r.lo, r.hi});
}

TokenRange range_from(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(std::string(key) + " must be a [lo, hi] pair");
    }
    return TokenRange{j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>()};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) {
        out = it->get<T>();
    }
}

void take_range(const json& j, const char* key, TokenRange& out) {
    if (const auto it = j.find(key); it != j.end()) {
        out = range_from(*it, key);
    }
}

// nlohmann type errors become config errors so the CLI maps them to exit 1
template <typename F>
auto config_guard(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

} // namespace

ordered_json to_json(const ModelSpec& m) {
    return ordered_json{{"name", m.name},
                        {"attention_layers", m.attention_layers},
                        {"ssm_layers", m.ssm_layers},
                        {"per_token_bytes", m.per_token_bytes},
                        {"ssm_block_bytes", m.ssm_block_bytes},
                        {"attention_page_tokens", m.attention_page_tokens}};
}

ordered_json to_json(const AllocatorConfig& a) {
    ordered_json j{{"name", a.name},
                   {"variant", to_string(a.variant)},
                   {"mamba_full_memory_ratio", a.mamba_full_memory_ratio},
                   {"ssm_padding", to_string(a.ssm_padding)}};
    j["rebalance"] = ordered_json{{"threshold_low", a.rebalance.threshold_low},
                                  {"threshold_high", a.rebalance.threshold_high},
                                  {"migration_batch_size", a.rebalance.migration_batch_size},
                                  {"min_rebalance_interval_ops", a.rebalance.min_rebalance_interval_ops}};
    return j;
}

ordered_json to_json(const WorkloadSpec& w) {
    const auto& p = w.params;
    ordered_json params{{"short_prompt", range_json(p.short_prompt)},
                        {"long_prompt", range_json(p.long_prompt)},
                        {"long_fraction", p.long_fraction},
                        {"gen", range_json(p.gen)},
                        {"arrivals_per_tick", p.arrivals_per_tick},
                        {"wave_size", p.wave_size},
                        {"wave_gap", p.wave_gap},
                        {"burst_size", range_json(p.burst_size)},
                        {"burst_gap", range_json(p.burst_gap)},
                        {"gen_log_mu", p.gen_log_mu},
                        {"gen_log_sigma", p.gen_log_sigma}};
    if (w.kind == WorkloadKind::SharegptReplay) {
        params["prompt_counts"] = p.prompt_counts;
    }
    return ordered_json{{"name", w.name},
                        {"kind", to_string(w.kind)},
                        {"n_requests", w.n_requests},
                        {"seed", w.seed},
                        {"params", std::move(params)}};
}

ordered_json to_json(const CellConfig& c) {
    return ordered_json{{"allocator", to_json(c.allocator)},
                        {"workload", to_json(c.workload)},
                        {"model", to_json(c.model)},
                        {"budget_bytes", c.budget_bytes},
                        {"retry_backoff_ticks", c.retry_backoff_ticks},
                        {"horizon_ticks", c.horizon_ticks},
                        {"record_events", c.record_events}};
}

ModelSpec model_from_json(const json& j) {
    return config_guard("model", [&] {
        if (j.is_string()) {
            return builtin_model(j.get<std::string>());
        }
        ModelSpec m;
        if (const auto it = j.find("preset"); it != j.end()) {
            m = builtin_model(it->get<std::string>());
        }
        take(j, "name", m.name);
        take(j, "attention_layers", m.attention_layers);
        take(j, "ssm_layers", m.ssm_layers);
        take(j, "per_token_bytes", m.per_token_bytes);
        take(j, "ssm_block_bytes", m.ssm_block_bytes);
        take(j, "attention_page_tokens", m.attention_page_tokens);
        m.validate();
        return m;
    });
}

AllocatorConfig allocator_from_json(const json& j) {
    return config_guard("variant", [&] {
        if (j.is_string()) {
            return variant_preset(j.get<std::string>());
        }
        AllocatorConfig a;
        if (const auto it = j.find("preset"); it != j.end()) {
            a = variant_preset(it->get<std::string>());
        }
        take(j, "name", a.name);
        if (const auto it = j.find("variant"); it != j.end()) {
            a.variant = parse_variant(it->get<std::string>());
        }
        take(j, "mamba_full_memory_ratio", a.mamba_full_memory_ratio);
        if (const auto it = j.find("ssm_padding"); it != j.end()) {
            a.ssm_padding = parse_ssm_padding(it->get<std::string>());
        }
        if (const auto it = j.find("rebalance"); it != j.end()) {
            take(*it, "threshold_low", a.rebalance.threshold_low);
            take(*it, "threshold_high", a.rebalance.threshold_high);
            take(*it, "migration_batch_size", a.rebalance.migration_batch_size);
            take(*it, "min_rebalance_interval_ops", a.rebalance.min_rebalance_interval_ops);
        }
        if (a.name.empty()) {
            a.name = to_string(a.variant);
        }
        a.validate();
        return a;
    });
}

WorkloadSpec workload_from_json(const json& j) {
    return config_guard("workload", [&] {
        WorkloadSpec w;
        const json obj = j.is_string() ? json{{"kind", j}} : j;
        w.kind = parse_workload_kind(obj.at("kind").get<std::string>());
        w.name = obj.value("name", std::string(to_string(w.kind)));
        w.params = default_params(w.kind);
        take(obj, "n_requests", w.n_requests);
        take(obj, "seed", w.seed);
        if (const auto it = obj.find("params"); it != obj.end()) {
            auto& p = w.params;
            const auto& pj = *it;
            take_range(pj, "short_prompt", p.short_prompt);
            take_range(pj, "long_prompt", p.long_prompt);
            take(pj, "long_fraction", p.long_fraction);
            take_range(pj, "gen", p.gen);
            take(pj, "arrivals_per_tick", p.arrivals_per_tick);
            take(pj, "wave_size", p.wave_size);
            take(pj, "wave_gap", p.wave_gap);
            take_range(pj, "burst_size", p.burst_size);
            take_range(pj, "burst_gap", p.burst_gap);
            take(pj, "gen_log_mu", p.gen_log_mu);
            take(pj, "gen_log_sigma", p.gen_log_sigma);
            take(pj, "prompt_counts", p.prompt_counts);
        }
        return w;
    });
}

CellConfig cell_from_json(const json& j) {
    return config_guard("cell", [&] {
        CellConfig c;
        c.allocator = allocator_from_json(j.at("allocator"));
        c.workload = workload_from_json(j.at("workload"));
        c.model = model_from_json(j.at("model"));
        c.budget_bytes = j.at("budget_bytes").get<std::uint64_t>();
        take(j, "retry_backoff_ticks", c.retry_backoff_ticks);
        take(j, "horizon_ticks", c.horizon_ticks);
        take(j, "record_events", c.record_events);
        return c;
    });
}

// ---- config -----------------------------------------------------------------

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

template <typename T, typename F>
std::vector<T> axis(const json& j, const char* key, F&& parse) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array() || it->empty()) {
        throw ConfigError(std::string("sweep axis '") + key + "' is missing or empty");
    }
    std::vector<T> out;
    for (const auto& item : *it) {
        out.push_back(parse(item));
    }
    return out;
}

} // namespace

SweepConfig parse_sweep_config(const json& j, const std::filesystem::path& base_dir) {
    return config_guard("sweep config", [&] {
        if (!j.is_object()) {
            throw ConfigError("sweep config must be a JSON object");
        }
        SweepConfig cfg;
        take(j, "name", cfg.name);

        if (j.contains("variants") && j.at("variants").is_string() && j.at("variants") == "default") {
            for (const auto& n : default_variant_names()) {
                cfg.variants.push_back(variant_preset(n));
            }
        } else {
            cfg.variants = axis<AllocatorConfig>(j, "variants", [](const json& v) { return allocator_from_json(v); });
        }

        cfg.workloads = axis<WorkloadSpec>(j, "workloads", [&](const json& v) {
            auto w = workload_from_json(v);
            if (v.is_object() && v.contains("trace") && w.params.prompt_counts.empty()) {
                const auto ingest = load_sharegpt(resolve(base_dir, v.at("trace").get<std::string>()));
                w.params.prompt_counts = ingest.prompt_tokens;
            }
            if (const auto n = j.find("n_requests"); n != j.end() && !(v.is_object() && v.contains("n_requests"))) {
                w.n_requests = n->get<std::uint32_t>();
            }
            return w;
        });

        cfg.models = axis<ModelSpec>(j, "models", [&](const json& v) {
            if (v.is_string()) {
                const auto s = v.get<std::string>();
                if (s.ends_with(".json")) {
                    return model_from_json(read_json_file(resolve(base_dir, s)));
                }
            }
            return model_from_json(v);
        });

        if (j.contains("budgets_mib")) {
            cfg.budgets_bytes = axis<std::uint64_t>(j, "budgets_mib", [](const json& v) {
                return v.get<std::uint64_t>() << 20;
            });
        } else {
            cfg.budgets_bytes = axis<std::uint64_t>(j, "budgets_bytes", [](const json& v) {
                return v.get<std::uint64_t>();
            });
        }
        cfg.seeds = axis<std::uint64_t>(j, "seeds", [](const json& v) { return v.get<std::uint64_t>(); });

        take(j, "parallelism", cfg.parallelism);
        if (const auto it = j.find("output_dir"); it != j.end()) {
            cfg.output_dir = it->get<std::string>();
        }
        take(j, "retry_backoff_ticks", cfg.retry_backoff_ticks);
        take(j, "horizon_ticks", cfg.horizon_ticks);
        take(j, "record_events", cfg.record_events);

        if (cfg.parallelism == 0) {
            throw ConfigError("parallelism must be >= 1");
        }
        if (cfg.retry_backoff_ticks == 0) {
            throw ConfigError("retry_backoff_ticks must be >= 1");
        }
        for (const auto b : cfg.budgets_bytes) {
            if (b == 0) throw ConfigError("budgets must be positive");
        }
        return cfg;
    });
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
    return parse_sweep_config(read_json_file(path), path.parent_path());
}

void attach_trace(SweepConfig& cfg, const std::vector<std::uint32_t>& prompt_counts) {
    for (auto& w : cfg.workloads) {
        if (w.kind == WorkloadKind::SharegptReplay && w.params.prompt_counts.empty()) {
            w.params.prompt_counts = prompt_counts;
        }
    }
}

std::vector<CellConfig> expand_grid(const SweepConfig& cfg) {
    if (cfg.grid_size() == 0) {
        throw ConfigError("sweep grid has an empty axis");
    }
    std::vector<CellConfig> cells;
    cells.reserve(cfg.grid_size());
    for (const auto& v : cfg.variants) {
        for (const auto& w : cfg.workloads) {
            try {
                w.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            for (const auto& m : cfg.models) {
                for (const auto budget : cfg.budgets_bytes) {
                    for (const auto seed : cfg.seeds) {
                        CellConfig c;
                        c.allocator = v;
                        c.workload = w;
                        c.workload.seed = seed;
                        c.model = m;
                        c.budget_bytes = budget;
                        c.retry_backoff_ticks = cfg.retry_backoff_ticks;
                        c.horizon_ticks = cfg.horizon_ticks;
                        c.record_events = cfg.record_events;
                        cells.push_back(std::move(c));
                    }
                }
            }
        }
    }
    return cells;
}

// ---- records ----------------------------------------------------------------

ordered_json result_record(const CellConfig& cell, const CellResult& r) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["variant"] = cell.allocator.name;
    j["workload"] = cell.workload.name;
    j["model"] = cell.model.name;
    j["budget_bytes"] = cell.budget_bytes;
    j["seed"] = cell.seed();
    j["config"] = to_json(cell);

    j["oom_count"] = r.oom_count;
    j["oom_admit"] = r.oom_admit;
    j["oom_decode"] = r.oom_decode;
    j["rebalance_count"] = r.rebalance_count;
    j["rolled_back_count"] = r.rolled_back_count;
    j["migrated_bytes"] = r.migrated_bytes;
    j["waste_bytes"] = r.waste_bytes;
    j["effective_batch_size_p50"] = r.effective_batch_size_p50;
    j["completed_requests"] = r.completed_requests;
    j["preemptions"] = r.preemptions;
    j["ticks"] = r.ticks;
    j["logical_ops"] = r.logical_ops;
    j["peak_reserved_bytes"] = r.peak_reserved_bytes;
    j["horizon_hit"] = r.horizon_hit;
    j["final_live_pages"] = r.final_live_pages;

    ordered_json t;
    t["goodput"] = r.goodput;
    t["time_to_first_oom_s"] = r.time_to_first_oom_s ? ordered_json(*r.time_to_first_oom_s) : ordered_json(nullptr);
    t["wall_s"] = r.wall_s;
    t["service_s"] = r.phase.service_s;
    t["oom_retry_s"] = r.phase.oom_retry_s;
    t["migration_s"] = r.phase.migration_s;
    t["idle_s"] = r.phase.idle_s;
    j["timing"] = std::move(t);
    return j;
}

ordered_json events_record(const CellConfig& cell, const CellEvents& ev) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["variant"] = cell.allocator.name;
    j["workload"] = cell.workload.name;
    j["model"] = cell.model.name;
    j["budget_bytes"] = cell.budget_bytes;
    j["seed"] = cell.seed();

    auto& ooms = j["ooms"] = ordered_json::array();
    for (const auto& o : ev.ooms) {
        ooms.push_back({o.tick, o.req_id, o.op, o.site == OomSite::Admit ? "admit" : "decode"});
    }
    auto& errs = j["capacity_errors"] = ordered_json::array();
    for (const auto& e : ev.capacity_errors) {
        errs.push_back(ordered_json{{"op", e.op},
                                    {"pool", to_string(e.pool)},
                                    {"requested", e.requested},
                                    {"free_pages", e.free_pages},
                                    {"other_free_fraction", e.other_free_fraction},
                                    {"recovered", e.recovered}});
    }
    auto& rebs = j["rebalances"] = ordered_json::array();
    for (const auto& r : ev.rebalances) {
        rebs.push_back(ordered_json{{"at_op", r.at_op},
                                    {"donor", to_string(r.donor)},
                                    {"recipient", to_string(r.recipient)},
                                    {"donor_pages_freed", r.donor_pages_freed},
                                    {"recipient_pages_gained", r.recipient_pages_gained},
                                    {"bytes_migrated", r.bytes_migrated},
                                    {"waste_bytes", r.waste_bytes},
                                    {"rolled_back", r.rolled_back}});
    }
    j["arrival_ticks"] = ev.arrival_ticks;
    return j;
}

ordered_json deterministic_view(const ordered_json& record) {
    auto out = record;
    out.erase("timing");
    return out;
}

// ---- execution --------------------------------------------------------------

namespace {

std::string cell_label(const CellConfig& c) {
    return c.allocator.name + " / " + c.workload.name + " / " + c.model.name + " / " +
           std::to_string(c.budget_bytes) + " B / seed " + std::to_string(c.seed());
}

/// Runs cells on a worker pool and hands results to `emit` on the calling
/// thread in grid order. Stops scheduling after the first failure and
/// rethrows it as CellFailure once the workers have drained.
void for_each_cell(const std::vector<CellConfig>& cells, std::uint32_t parallelism,
                   const std::function<void(std::size_t, CellResult&)>& emit) {
    const std::size_t n = cells.size();
    std::vector<std::optional<CellResult>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::condition_variable cv;
    std::optional<std::size_t> failed_index;
    std::string failure;

    std::uint32_t finished_workers = 0;
    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                auto r = run_cell(cells[i]);
                std::lock_guard lock(mu);
                slots[i] = std::move(r);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                if (!failed_index || i < *failed_index) {
                    failed_index = i;
                    failure = e.what();
                }
                stop = true;
            }
            cv.notify_all();
        }
        std::lock_guard lock(mu);
        ++finished_workers;
        cv.notify_all();
    };

    const auto n_threads = static_cast<std::uint32_t>(std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::uint32_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }

    // Cells below a failure were all claimed before it, so they still finish
    // and the written prefix stays contiguous.
    std::exception_ptr emit_error;
    for (std::size_t i = 0; i < n; ++i) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] {
            return slots[i].has_value() || (failed_index && *failed_index <= i) || finished_workers == n_threads;
        });
        if (!slots[i]) {
            break;
        }
        auto r = std::move(*slots[i]);
        slots[i].reset();
        lock.unlock();
        try {
            emit(i, r);
        } catch (...) {
            emit_error = std::current_exception();
            stop = true;
            break;
        }
    }
    for (auto& t : pool) {
        t.join();
    }
    if (emit_error) {
        std::rethrow_exception(emit_error);
    }
    if (failed_index) {
        throw CellFailure("cell " + std::to_string(*failed_index) + " (" + cell_label(cells[*failed_index]) +
                          ") failed: " + failure + "\nconfig: " + to_json(cells[*failed_index]).dump());
    }
}

void write_line(std::ofstream& out, const ordered_json& j, const std::filesystem::path& path) {
    const std::string line = j.dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed on " + path.string());
    }
}

} // namespace

std::vector<CellResult> run_cells(const std::vector<CellConfig>& cells, std::uint32_t parallelism) {
    std::vector<CellResult> out(cells.size());
    for_each_cell(cells, parallelism, [&](std::size_t i, CellResult& r) { out[i] = std::move(r); });
    return out;
}

SweepSummary run_sweep(const SweepConfig& cfg) {
    const auto cells = expand_grid(cfg);
    std::filesystem::create_directories(cfg.output_dir);

    SweepSummary s;
    s.cells = cells.size();
    s.results_path = cfg.output_dir / (cfg.name + ".jsonl");
    std::ofstream out(s.results_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + s.results_path.string());
    }
    std::ofstream events;
    if (cfg.record_events) {
        s.events_path = cfg.output_dir / (cfg.name + ".events.jsonl");
        events.open(*s.events_path, std::ios::binary | std::ios::trunc);
        if (!events) {
            throw std::runtime_error("cannot open " + s.events_path->string());
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    for_each_cell(cells, cfg.parallelism, [&](std::size_t i, CellResult& r) {
        write_line(out, result_record(cells[i], r), s.results_path);
        if (r.events) {
            write_line(events, events_record(cells[i], *r.events), *s.events_path);
        }
    });
    s.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

std::vector<ordered_json> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot read results file " + path.string());
    }
    std::vector<ordered_json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const auto it = j.find("schema_version");
        if (it == j.end() || !it->is_string() || *it != kSchemaVersion) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected schema_version " +
                              kSchemaVersion + ", got " + (it == j.end() ? std::string("none") : it->dump()));
        }
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace avmp
