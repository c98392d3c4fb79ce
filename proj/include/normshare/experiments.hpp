// Experiment harness: the sweep/curve/zero-shot/analysis recipes behind the
// CLI. Cells are keyed (dataset, config, aux, size, seed), run on a bounded
// worker pool, and flushed to results.csv in canonical order so reruns are
// idempotent and byte-identical.
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "normshare/metrics.hpp"
#include "normshare/results.hpp"
#include "normshare/specfile.hpp"
#include "normshare/svg.hpp"
#include "normshare/synthetic.hpp"
#include "normshare/trainer.hpp"

namespace normshare {

namespace fs = std::filesystem;

// ---- data cache (immutable after preload; shared read-only) ----

class DataCache {
public:
    const TaskDataset& load(const DatasetSpec& ds, bool dev) {
        const std::string& path = dev ? ds.dev_path : ds.train_path;
        const std::string key = cat(path, "|", task_name(ds.task), "|", ds.language, "|", ds.name);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        TaskDataset loaded = load_pairs(path, ds.task, ds.language, dev ? ds.name + "_dev" : ds.name);
        return cache_.emplace(key, std::move(loaded)).first->second;
    }

    const TaskDataset& load_dev_checked(const DatasetSpec& ds) {
        if (ds.dev_path.empty()) throw SpecError(cat("dataset '", ds.name, "' needs a dev file"));
        return load(ds, /*dev=*/true);
    }

private:
    std::map<std::string, TaskDataset> cache_;
};

// ---- eval report io ----

inline void save_eval_report(const std::string& path, const EvalReport& r, const std::string& config,
                             const std::string& aux, long size, uint64_t seed) {
    std::ostringstream out;
    auto num = [](double v) { return detail::fmt4(v); };
    out << "dataset = " << r.dataset << "\n";
    out << "config = " << (config.empty() ? "single" : config) << "\n";
    out << "aux = " << aux << "\n";
    out << "size = " << size << "\n";
    out << "seed = " << seed << "\n";
    out << "n = " << r.n << "\n";
    out << "correct = " << r.correct << "\n";
    out << "accuracy = " << num(r.accuracy) << "\n";
    out << "identity_accuracy = " << num(r.identity_accuracy) << "\n";
    const char* known_names[2] = {"unknown", "known"};
    const char* ident_names[2] = {"nonidentity", "identity"};
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i) {
            out << "cell[" << known_names[k] << "," << ident_names[i] << "].n = " << r.cells[k][i].n << "\n";
            out << "cell[" << known_names[k] << "," << ident_names[i] << "].correct = " << r.cells[k][i].correct
                << "\n";
        }
    for (int k = 0; k < 2; ++k) {
        out << "marginal[" << known_names[k] << "].n = " << r.known_marginal[k].n << "\n";
        out << "marginal[" << known_names[k] << "].correct = " << r.known_marginal[k].correct << "\n";
    }
    for (int i = 0; i < 2; ++i) {
        out << "marginal[" << ident_names[i] << "].n = " << r.identity_marginal[i].n << "\n";
        out << "marginal[" << ident_names[i] << "].correct = " << r.identity_marginal[i].correct << "\n";
    }
    write_file_atomic(path, out.str());
}

struct SavedEvalReport {
    EvalReport report;
    std::string config;
    std::string aux;
    long size = 0;
    uint64_t seed = 0;
};

inline SavedEvalReport load_eval_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(cat("cannot open eval report: ", path));
    SavedEvalReport out;
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw ParseError(cat(path, ": bad line '", line, "'"));
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    auto get = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(cat(path, ": missing key '", key, "'"));
        return it->second;
    };
    out.report.dataset = get("dataset");
    out.config = get("config") == "single" ? "" : get("config");
    out.aux = get("aux");
    out.size = std::stol(get("size"));
    out.seed = std::stoull(get("seed"));
    out.report.n = std::stol(get("n"));
    out.report.correct = std::stol(get("correct"));
    out.report.accuracy = std::stod(get("accuracy"));
    out.report.identity_accuracy = std::stod(get("identity_accuracy"));
    out.report.has_splits = true;
    const char* known_names[2] = {"unknown", "known"};
    const char* ident_names[2] = {"nonidentity", "identity"};
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i) {
            out.report.cells[k][i].n = std::stol(get(cat("cell[", known_names[k], ",", ident_names[i], "].n")));
            out.report.cells[k][i].correct =
                std::stol(get(cat("cell[", known_names[k], ",", ident_names[i], "].correct")));
        }
    for (int k = 0; k < 2; ++k) {
        out.report.known_marginal[k].n = std::stol(get(cat("marginal[", known_names[k], "].n")));
        out.report.known_marginal[k].correct = std::stol(get(cat("marginal[", known_names[k], "].correct")));
    }
    for (int i = 0; i < 2; ++i) {
        out.report.identity_marginal[i].n = std::stol(get(cat("marginal[", ident_names[i], "].n")));
        out.report.identity_marginal[i].correct = std::stol(get(cat("marginal[", ident_names[i], "].correct")));
    }
    return out;
}

inline void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
    std::ostringstream out;
    for (const auto& p : preds) out << p.source << '\t' << p.gold << '\t' << p.hypothesis << '\n';
    write_file_atomic(path, out.str());
}

// ---- cells ----

struct CellSpec {
    DatasetSpec main;
    std::vector<DatasetSpec> aux;
    std::string config_str;
    long size = 0;  // actual training-token count after clipping
    uint64_t seed = 1;

    std::string aux_descriptor() const {
        if (aux.empty()) return "none";
        std::vector<std::string> names;
        for (const auto& a : aux) names.push_back(task_short_name(a.task));
        std::sort(names.begin(), names.end());
        return join(names, "+");
    }

    ResultRow row_stub() const {
        ResultRow r;
        r.dataset = main.name;
        r.config = config_str;
        r.aux = aux_descriptor();
        r.size = size;
        r.seed = seed;
        return r;
    }

    std::string dir_name() const {
        return cat(main.name, "_", config_str.empty() ? "single" : config_str, "_", aux_descriptor(), "_", size,
                   "_s", seed);
    }
};

struct CellOutcome {
    ResultRow row;
    double seconds = 0.0;
};

template <class Real>
CellOutcome run_cell(const ExperimentSpec& spec, const CellSpec& cell, DataCache& cache) {
    const auto t0 = std::chrono::steady_clock::now();

    const TaskDataset& full_main = cache.load(cell.main, /*dev=*/false);
    const TaskDataset& dev = cache.load_dev_checked(cell.main);
    const TaskDataset truncated = truncate(full_main, static_cast<size_t>(cell.size));
    const auto [train_split, val_split] = split_train_validation(truncated);

    TrainPlan plan;
    plan.config = SharingConfig::parse(cell.config_str);
    plan.hp = spec.hp;
    plan.seed = cell.seed;
    plan.lr = spec.lr;
    plan.max_epochs = spec.max_epochs;
    plan.patience = spec.patience;
    plan.main_train = &train_split;
    plan.main_val = &val_split;
    std::vector<const TaskDataset*> aux_sets;
    for (const auto& a : cell.aux) aux_sets.push_back(&cache.load(a, false));
    plan.aux = aux_sets;

    auto result = train<Real>(plan);

    const auto preds = predict_dataset(result.model, task_name(TaskKind::normalization), dev);
    std::set<std::string> train_sources;
    for (const auto& p : train_split.pairs) train_sources.insert(p.source);
    EvalReport report = split_report(preds, train_sources, cell.main.name);
    report.identity_accuracy = identity_baseline(dev);

    CellOutcome out;
    out.row = cell.row_stub();
    out.row.accuracy = report.accuracy;
    out.row.identity = report.identity_accuracy;

    const fs::path cell_dir = fs::path(spec.out_dir) / "cells" / cell.dir_name();
    fs::create_directories(cell_dir);
    result.log.save((cell_dir / "train.log").string());
    save_checkpoint(result.model, (cell_dir / "checkpoint.bin").string());
    save_eval_report((cell_dir / "eval.txt").string(), report, cell.config_str, cell.aux_descriptor(), cell.size,
                     cell.seed);
    save_predictions((cell_dir / "predictions.tsv").string(), preds);

    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Runs cells over a worker pool; rows are appended in canonical (given) order.
// Error reductions are filled at flush time from the single-task baseline of
// the same (dataset, size, seed).
template <class Real>
void run_cells(const ExperimentSpec& spec, const std::vector<CellSpec>& cells) {
    fs::create_directories(spec.out_dir);
    const std::string results_path = (fs::path(spec.out_dir) / "results.csv").string();
    const std::string timings_path = (fs::path(spec.out_dir) / "timings.csv").string();

    std::map<std::string, double> baselines;  // dataset|size|seed -> single-task accuracy
    auto baseline_key = [](const ResultRow& r) { return cat(r.dataset, "|", r.size, "|", r.seed); };
    std::set<std::string> existing;
    for (const auto& r : ResultsFile::load(results_path)) {
        existing.insert(r.key());
        if (r.config.empty() && !baselines.count(baseline_key(r))) baselines[baseline_key(r)] = r.accuracy;
    }

    DataCache cache;
    std::vector<char> skip(cells.size(), 0);
    for (size_t i = 0; i < cells.size(); ++i) {
        if (existing.count(cells[i].row_stub().key())) {
            skip[i] = 1;
            continue;
        }
        // Preload all referenced files single-threaded.
        cache.load(cells[i].main, false);
        cache.load_dev_checked(cells[i].main);
        for (const auto& a : cells[i].aux) cache.load(a, false);
    }

    std::vector<std::optional<CellOutcome>> done(cells.size());
    std::mutex mu;
    size_t flush_pos = 0;
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;

    auto flush_ready = [&]() {  // caller holds mu
        while (flush_pos < cells.size() && (skip[flush_pos] || done[flush_pos].has_value())) {
            if (!skip[flush_pos]) {
                ResultRow row = done[flush_pos]->row;
                const std::string bkey = baseline_key(row);
                if (row.config.empty()) {
                    if (!baselines.count(bkey)) baselines[bkey] = row.accuracy;
                } else if (baselines.count(bkey)) {
                    row.error_reduction = error_reduction(baselines[bkey], row.accuracy);
                }
                ResultsFile::append(results_path, row);
                append_timing(timings_path, row, done[flush_pos]->seconds);
            }
            ++flush_pos;
        }
    };

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            if (skip[i]) {
                std::lock_guard<std::mutex> lock(mu);
                flush_ready();
                continue;
            }
            try {
                CellOutcome outcome = run_cell<Real>(spec, cells[i], cache);
                std::lock_guard<std::mutex> lock(mu);
                done[i] = std::move(outcome);
                flush_ready();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                skip[i] = 1;
                flush_ready();
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(spec.workers, static_cast<int>(cells.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    {
        std::lock_guard<std::mutex> lock(mu);
        flush_ready();
    }
    if (first_error) std::rethrow_exception(first_error);
}

// ---- command implementations ----

inline long effective_size(long requested, size_t dataset_size, const std::string& dataset_name) {
    if (requested == -1) return static_cast<long>(dataset_size);
    if (requested > static_cast<long>(dataset_size)) {
        std::cerr << "warning: size " << requested << " exceeds dataset " << dataset_name << " ("
                  << dataset_size << " pairs); clipped\n";
        return static_cast<long>(dataset_size);
    }
    return requested;
}

// Builds the cell grid for the given configs/sizes/seeds over every
// normalization dataset in the spec, with sizes clipped per dataset.
inline std::vector<CellSpec> make_cell_grid(const ExperimentSpec& spec, const std::vector<std::string>& configs,
                                            const std::vector<long>& sizes, DataCache& cache,
                                            bool with_aux = true) {
    std::vector<CellSpec> cells;
    for (const auto& main : spec.normalization_datasets()) {
        if (main.dev_path.empty()) throw SpecError(cat("dataset '", main.name, "' needs a dev file"));
        const size_t have = cache.load(main, false).pairs.size();
        std::vector<long> used_sizes;
        for (long s : sizes) {
            const long eff = effective_size(s, have, main.name);
            if (std::find(used_sizes.begin(), used_sizes.end(), eff) == used_sizes.end())
                used_sizes.push_back(eff);
        }
        for (const auto& config : configs)
            for (long size : used_sizes)
                for (uint64_t seed : spec.seeds) {
                    CellSpec cell;
                    cell.main = main;
                    // The empty config is the single-task baseline; it trains
                    // without auxiliary data (nothing would be shared with it).
                    if (with_aux && !config.empty()) cell.aux = spec.aux_datasets_for(main.language);
                    cell.config_str = config;
                    cell.size = size;
                    cell.seed = seed;
                    cells.push_back(std::move(cell));
                }
    }
    return cells;
}

template <class Real>
int cmd_train(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.configs_set && spec.configs.size() != 1)
        throw SpecError("train: exactly one config expected (use sweep-sharing for many)");
    if (spec.sizes_set && spec.sizes.size() != 1) throw SpecError("train: exactly one size expected");
    if (spec.seeds.size() != 1) throw SpecError("train: exactly one seed expected");
    const std::vector<std::string> configs = {spec.configs_set ? spec.configs[0] : std::string()};
    const std::vector<long> sizes = {spec.sizes_set ? spec.sizes[0] : -1};
    DataCache cache;
    auto cells = make_cell_grid(spec, configs, sizes, cache);
    run_cells<Real>(spec, cells);
    return 0;
}

// Helper shared by sweep ranking and curve defaults.
struct RankingEntry {
    std::string config;
    int shared_count = 0;
    double mean_accuracy = 0.0;
};

inline std::vector<RankingEntry> load_ranking(const std::string& path) {
    std::vector<RankingEntry> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first || trim(line).empty()) {
            first = false;
            continue;
        }
        const auto cols = split(line, ',');
        if (cols.size() != 3) throw ParseError(cat(path, ": expected 3 columns"));
        RankingEntry e;
        e.config = cols[0] == "single" ? "" : cols[0];
        e.shared_count = std::stoi(cols[1]);
        e.mean_accuracy = std::stod(cols[2]);
        out.push_back(std::move(e));
    }
    return out;
}

template <class Real>
int cmd_sweep_sharing(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<std::string> configs;
    for (const auto& c : enumerate_configs()) configs.push_back(c.str());
    const std::vector<long> sizes = spec.sizes_set ? spec.sizes : std::vector<long>{1000};
    DataCache cache;
    auto cells = make_cell_grid(spec, configs, sizes, cache);
    run_cells<Real>(spec, cells);

    // Ranking report over mean accuracy per config, plus the quartile summary
    // bucketed by the number of shared components.
    std::set<std::string> cell_keys;
    for (const auto& c : cells) cell_keys.insert(c.row_stub().key());
    std::vector<ResultRow> rows;
    for (const auto& r : ResultsFile::load((fs::path(spec.out_dir) / "results.csv").string()))
        if (cell_keys.count(r.key())) rows.push_back(r);
    std::map<std::string, std::pair<double, long>> by_config;  // sum, count
    for (const auto& r : rows) {
        by_config[r.config].first += r.accuracy;
        by_config[r.config].second += 1;
    }
    std::vector<RankingEntry> ranking;
    for (const auto& [config, sc] : by_config) {
        RankingEntry e;
        e.config = config;
        e.shared_count = SharingConfig::parse(config).count();
        e.mean_accuracy = sc.first / static_cast<double>(sc.second);
        ranking.push_back(std::move(e));
    }
    std::sort(ranking.begin(), ranking.end(), [](const RankingEntry& a, const RankingEntry& b) {
        if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
        return a.config < b.config;
    });
    {
        std::ostringstream out;
        out << "config,shared_count,mean_accuracy\n";
        for (const auto& e : ranking)
            out << (e.config.empty() ? "single" : e.config) << ',' << e.shared_count << ','
                << detail::fmt4(e.mean_accuracy) << "\n";
        write_file_atomic((fs::path(spec.out_dir) / "ranking.csv").string(), out.str());
    }
    {
        std::ostringstream out;
        out << "accuracy quartiles by number of shared components\n";
        out << "shared n min q1 median q3 max\n";
        for (int shared = 0; shared <= 6; ++shared) {
            std::vector<double> accs;
            for (const auto& e : ranking)
                if (e.shared_count == shared) accs.push_back(e.mean_accuracy);
            if (accs.empty()) continue;
            std::sort(accs.begin(), accs.end());
            auto quantile = [&](double q) {
                const double pos = q * static_cast<double>(accs.size() - 1);
                const size_t lo = static_cast<size_t>(pos);
                const size_t hi = std::min(accs.size() - 1, lo + 1);
                return accs[lo] + (pos - static_cast<double>(lo)) * (accs[hi] - accs[lo]);
            };
            out << shared << ' ' << accs.size() << ' ' << detail::fmt4(accs.front()) << ' '
                << detail::fmt4(quantile(0.25)) << ' ' << detail::fmt4(quantile(0.5)) << ' '
                << detail::fmt4(quantile(0.75)) << ' ' << detail::fmt4(accs.back()) << "\n";
        }
        write_file_atomic((fs::path(spec.out_dir) / "sharing_summary.txt").string(), out.str());
    }
    return 0;
}

template <class Real>
int cmd_learning_curve(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<std::string> configs;
    if (spec.configs_set) {
        configs = spec.configs;
    } else {
        // Default: single-task plus the top three configs of this output
        // directory's sweep ranking.
        const auto ranking = load_ranking((fs::path(spec.out_dir) / "ranking.csv").string());
        configs.push_back("");
        for (const auto& e : ranking) {
            if (e.config.empty()) continue;
            configs.push_back(e.config);
            if (configs.size() == 4) break;
        }
        if (configs.size() < 2)
            throw SpecError(
                "learning-curve: no configs given and no sweep ranking.csv in the output directory; "
                "run sweep-sharing first or set configs = ... in the spec");
    }
    const std::vector<long> sizes =
        spec.sizes_set ? spec.sizes : std::vector<long>{100, 500, 1000, 5000, 10000, 50000};

    DataCache cache;
    auto cells = make_cell_grid(spec, configs, sizes, cache);
    run_cells<Real>(spec, cells);

    std::set<std::string> cell_keys;
    for (const auto& c : cells) cell_keys.insert(c.row_stub().key());
    std::vector<ResultRow> rows;
    for (const auto& r : ResultsFile::load((fs::path(spec.out_dir) / "results.csv").string()))
        if (cell_keys.count(r.key())) rows.push_back(r);

    // curve.csv: dataset,config,size,seed,accuracy
    {
        std::ostringstream out;
        out << "dataset,config,size,seed,accuracy\n";
        for (const auto& r : rows)
            out << r.dataset << ',' << r.config_label() << ',' << r.size << ',' << r.seed << ','
                << detail::fmt4(r.accuracy) << "\n";
        write_file_atomic((fs::path(spec.out_dir) / "curve.csv").string(), out.str());
    }

    // Per-dataset accuracy curves (mean over seeds), log-x.
    for (const auto& main : spec.normalization_datasets()) {
        std::vector<ChartSeries> series;
        for (const auto& config : configs) {
            ChartSeries s;
            s.label = config.empty() ? "single" : config;
            std::map<long, std::pair<double, long>> by_size;
            for (const auto& r : rows)
                if (r.dataset == main.name && r.config == config) {
                    by_size[r.size].first += r.accuracy;
                    by_size[r.size].second += 1;
                }
            for (const auto& [size, sc] : by_size)
                s.points.push_back({static_cast<double>(size), sc.first / static_cast<double>(sc.second)});
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        write_line_chart((fs::path(spec.out_dir) / cat("curve_", main.name, ".svg")).string(),
                         cat("learning curve: ", main.name), "training tokens", "word accuracy (%)", series,
                         /*log_x=*/true);
    }

    // Micro-averaged error reduction vs the single-task model, per config and
    // size. Dev-set sizes come from the per-cell eval reports.
    {
        std::map<std::string, long> dev_n;  // row key -> dev token count
        for (const auto& r : rows) {
            const auto eval_file =
                fs::path(spec.out_dir) / "cells" /
                cat(r.dataset, "_", r.config_label(), "_", r.aux, "_", r.size, "_s", r.seed) / "eval.txt";
            if (fs::exists(eval_file)) dev_n[r.key()] = load_eval_report(eval_file.string()).report.n;
        }
        std::set<long> size_set;
        for (const auto& r : rows)
            if (dev_n.count(r.key())) size_set.insert(r.size);

        std::ostringstream out;
        out << "config,size,micro_accuracy,single_micro_accuracy,error_reduction\n";
        std::vector<ChartSeries> series;
        for (const auto& config : configs) {
            if (config.empty()) continue;
            ChartSeries s;
            s.label = config;
            for (long size : size_set) {
                std::vector<std::pair<double, long>> mtl, single;
                for (const auto& r : rows) {
                    if (r.size != size || !dev_n.count(r.key())) continue;
                    if (r.config == config && r.aux != "none" && r.aux != "zeroshot")
                        mtl.push_back({r.accuracy, dev_n[r.key()]});
                    else if (r.config.empty())
                        single.push_back({r.accuracy, dev_n[r.key()]});
                }
                if (mtl.empty() || single.empty()) continue;
                const double mtl_micro = micro_average(mtl);
                const double single_micro = micro_average(single);
                if (single_micro >= 100.0) continue;
                const double er = error_reduction(single_micro, mtl_micro);
                out << config << ',' << size << ',' << detail::fmt4(mtl_micro) << ','
                    << detail::fmt4(single_micro) << ',' << detail::fmt4(er) << "\n";
                s.points.push_back({static_cast<double>(size), er});
            }
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        write_file_atomic((fs::path(spec.out_dir) / "curve_error_reduction.csv").string(), out.str());
        write_line_chart((fs::path(spec.out_dir) / "curve_error_reduction.svg").string(),
                         "error reduction vs single-task (micro-averaged)", "training tokens",
                         "error reduction (%)", series, /*log_x=*/true);
    }
    return 0;
}

template <class Real>
int cmd_zero_shot(const ExperimentSpec& spec, bool inject_breach = false) {
    spec.validate();
    if (spec.target_language.empty()) throw SpecError("zero-shot: target_language must be set");
    const long requested = spec.sizes_set ? spec.sizes[0] : 1000;

    DataCache cache;
    std::vector<TaskDataset> truncated_norm;
    std::vector<const TaskDataset*> all;
    for (const auto& d : spec.datasets) {
        const TaskDataset& loaded = cache.load(d, false);
        if (d.task == TaskKind::normalization) {
            const long size = effective_size(requested, loaded.pairs.size(), d.name);
            truncated_norm.push_back(truncate(loaded, static_cast<size_t>(size)));
        }
    }
    {
        size_t norm_i = 0;
        for (const auto& d : spec.datasets)
            all.push_back(d.task == TaskKind::normalization ? &truncated_norm[norm_i++] : &cache.load(d, false));
    }

    TrainPlan plan;
    plan.mode = TrainPlan::Mode::zero_shot;
    plan.hp = spec.hp;
    plan.seed = spec.seeds[0];
    plan.lr = spec.lr;
    plan.all_datasets = all;
    plan.target_language = spec.target_language;
    plan.zs_epochs = spec.zs_epochs;
    plan.zs_epoch_samples = spec.zs_epoch_samples;
    plan.zs_update_samples = spec.zs_update_samples;
    plan.inject_exclusion_breach = inject_breach;

    auto result = train_zero_shot<Real>(plan);

    fs::create_directories(spec.out_dir);
    result.log.save((fs::path(spec.out_dir) / "zero_shot_train.log").string());
    save_checkpoint(result.model, (fs::path(spec.out_dir) / "zero_shot_checkpoint.bin").string());

    // Per-dataset Identity vs Zero-shot for the target language, plus micro-average.
    std::ostringstream out;
    out << "zero-shot normalization: target language '" << spec.target_language << "'\n";
    out << "config: " << result.log.config_str << "\n";
    out << "normalization tokens (target lang): "
        << result.log.tokens_seen_total("normalization", spec.target_language) << "\n\n";
    out << "dataset\tn\tidentity\tzero_shot\n";
    std::vector<std::pair<double, long>> ident_micro, zs_micro;
    const std::string results_path = (fs::path(spec.out_dir) / "results.csv").string();
    auto existing = ResultsFile::keys(results_path);
    for (const auto& d : spec.normalization_datasets()) {
        if (d.language != spec.target_language) continue;
        if (d.dev_path.empty()) throw SpecError(cat("zero-shot: dataset '", d.name, "' needs a dev file"));
        const TaskDataset& dev = cache.load(d, true);
        const auto preds = predict_dataset_tagged(result.model, dev);
        const double acc = word_accuracy(preds);
        const double ident = identity_baseline(dev);
        out << d.name << '\t' << dev.pairs.size() << '\t' << detail::fmt4(ident) << '\t' << detail::fmt4(acc)
            << "\n";
        ident_micro.push_back({ident, static_cast<long>(dev.pairs.size())});
        zs_micro.push_back({acc, static_cast<long>(dev.pairs.size())});
        save_predictions((fs::path(spec.out_dir) / cat("zero_shot_", d.name, "_predictions.tsv")).string(), preds);

        ResultRow row;
        row.dataset = d.name;
        row.config = "SEATDP";
        row.aux = "zeroshot";
        row.size = requested;
        row.seed = plan.seed;
        row.accuracy = acc;
        row.identity = ident;
        if (!existing.count(row.key())) ResultsFile::append(results_path, row);
    }
    if (!ident_micro.empty()) {
        out << "micro-avg\t-\t" << detail::fmt4(micro_average(ident_micro)) << '\t'
            << detail::fmt4(micro_average(zs_micro)) << "\n";
    }
    write_file_atomic((fs::path(spec.out_dir) / "zero_shot_report.txt").string(), out.str());
    std::cout << out.str();
    return 0;
}

// ---- evaluate / probe ----

struct EvaluateArgs {
    std::string checkpoint;
    std::string data_path;
    std::string task = "normalization";      // model task used for component resolution
    std::string data_task = "normalization"; // how to parse the data file
    std::string language;
    std::string name;
    std::string out_dir;
    std::string train_path;  // optional: enables known/unknown splits
    bool tagged = false;     // zero-shot checkpoints expect tag prefixes
    std::string probe_task;  // when set, append a probes.csv row under this label
};

template <class Real>
int cmd_evaluate(const EvaluateArgs& args) {
    if (args.checkpoint.empty() || !fs::exists(args.checkpoint))
        throw SpecError(cat("evaluate: checkpoint does not exist: ", args.checkpoint));
    if (args.data_path.empty() || !fs::exists(args.data_path))
        throw SpecError(cat("evaluate: data file does not exist: ", args.data_path));
    if (args.out_dir.empty()) throw SpecError("evaluate: missing --out");

    auto model = load_checkpoint<Real>(args.checkpoint);
    const TaskKind data_kind = task_from_string(args.data_task);
    const TaskDataset data = load_pairs(args.data_path, data_kind, args.language,
                                        args.name.empty() ? args.data_path : args.name);
    std::string model_task = args.task;
    if (std::find(model.tasks().begin(), model.tasks().end(), model_task) == model.tasks().end())
        model_task = model.tasks().front();

    std::vector<Prediction> preds;
    if (args.tagged)
        preds = predict_dataset_tagged(model, data);
    else {
        // Resolve with the requested task but render per the data's own kind.
        preds.reserve(data.pairs.size());
        for (const auto& pair : data.pairs) {
            const auto src_ids = model.src_vocab().encode(symbolize_source(pair.source));
            preds.push_back({pair.source, pair.target, greedy_decode(model, model_task, src_ids, data_kind)});
        }
    }

    std::set<std::string> train_sources;
    if (!args.train_path.empty()) {
        const TaskDataset train = load_pairs(args.train_path, data_kind, args.language, "train");
        for (const auto& p : train.pairs) train_sources.insert(p.source);
    }
    EvalReport report = split_report(preds, train_sources, data.name);
    report.identity_accuracy = identity_baseline(data);

    fs::create_directories(args.out_dir);
    const std::string base = fs::path(args.data_path).stem().string();
    save_eval_report((fs::path(args.out_dir) / cat("eval_", base, ".txt")).string(), report, "", "eval", 0, 0);
    save_predictions((fs::path(args.out_dir) / cat("predictions_", base, ".tsv")).string(), preds);

    if (!args.probe_task.empty()) {
        const std::string probes_path = (fs::path(args.out_dir) / "probes.csv").string();
        const bool fresh = !fs::exists(probes_path);
        std::ofstream out(probes_path, std::ios::binary | std::ios::app);
        if (fresh) out << "dataset,task,probe_accuracy,probe_lcs,probe_levenshtein\n";
        out << data.name << ',' << task_short_name(task_from_string(args.probe_task)) << ','
            << detail::fmt4(word_accuracy(preds)) << ','
            << detail::fmt4(prediction_similarity(preds, ProbeMetric::lcs)) << ','
            << detail::fmt4(prediction_similarity(preds, ProbeMetric::levenshtein)) << "\n";
    }
    std::cout << "accuracy = " << detail::fmt4(report.accuracy)
              << "  identity = " << detail::fmt4(report.identity_accuracy) << "  n = " << report.n << "\n";
    return 0;
}

// ---- analyze ----

struct ProbeRow {
    std::string dataset;
    std::string task;
    double accuracy = 0.0;
};

inline std::vector<ProbeRow> load_probes(const std::string& path) {
    std::vector<ProbeRow> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first || trim(line).empty()) {
            first = false;
            continue;
        }
        const auto cols = split(line, ',');
        if (cols.size() < 3) throw ParseError(cat(path, ": expected >=3 columns"));
        out.push_back({cols[0], cols[1], std::stod(cols[2])});
    }
    return out;
}

template <class Real>
int cmd_analyze(const std::string& results_dir, const std::string& out_dir_arg = "") {
    const std::string out_dir = out_dir_arg.empty() ? results_dir : out_dir_arg;
    const std::string results_path = (fs::path(results_dir) / "results.csv").string();
    if (!fs::exists(results_path)) throw SpecError(cat("analyze: no results.csv under ", results_dir));
    const auto rows = ResultsFile::load(results_path);
    const auto probes = load_probes((fs::path(results_dir) / "probes.csv").string());
    fs::create_directories(out_dir);

    std::ostringstream report;
    report << "correlation report (Pearson r with 95% confidence intervals)\n\n";

    // (a) probe accuracy vs error reduction, per auxiliary task
    for (const std::string task : {"autoenc", "lemma", "g2p"}) {
        std::map<std::string, double> probe_acc;
        for (const auto& p : probes)
            if (p.task == task) probe_acc[p.dataset] = p.accuracy;
        std::vector<ScatterPoint> points;
        for (const auto& r : rows) {
            if (r.aux != task || !r.error_reduction) continue;
            auto it = probe_acc.find(r.dataset);
            if (it == probe_acc.end()) continue;
            points.push_back({it->second, *r.error_reduction, r.dataset});
        }
        if (points.size() < 3) {
            std::cerr << "warning: skipping probe correlation for " << task << " (need >= 3 datasets, have "
                      << points.size() << ")\n";
            continue;
        }
        std::vector<double> xs, ys;
        for (const auto& p : points) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        const auto res = pearson_with_ci(xs, ys);
        report << "probe_vs_error_reduction[" << task << "]: n = " << xs.size() << "  r = " << detail::fmt4(res.r)
               << "  ci95 = [" << detail::fmt4(res.lo) << ", " << detail::fmt4(res.hi) << "]\n";
        write_scatter_chart((fs::path(out_dir) / cat("correlation_", task, ".svg")).string(),
                            cat("probe accuracy vs error reduction (", task, ")"), "probe accuracy (%)",
                            "error reduction (%)", points);
    }

    // (b) identity baseline vs error reduction of the full MTL model
    {
        std::vector<ScatterPoint> points;
        for (const auto& r : rows) {
            if (r.aux != "autoenc+g2p+lemma" || !r.error_reduction) continue;
            points.push_back({r.identity, *r.error_reduction, r.dataset});
        }
        if (points.size() < 3) {
            std::cerr << "warning: skipping identity correlation (need >= 3 datasets, have " << points.size()
                      << ")\n";
        } else {
            std::vector<double> xs, ys;
            for (const auto& p : points) {
                xs.push_back(p.x);
                ys.push_back(p.y);
            }
            const auto res = pearson_with_ci(xs, ys);
            report << "identity_vs_error_reduction: n = " << xs.size() << "  r = " << detail::fmt4(res.r)
                   << "  ci95 = [" << detail::fmt4(res.lo) << ", " << detail::fmt4(res.hi) << "]\n";
            write_scatter_chart((fs::path(out_dir) / "correlation_identity.svg").string(),
                                "identity baseline vs error reduction (all 3 aux)", "identity baseline (%)",
                                "error reduction (%)", points);
        }
    }

    // (c) known/unknown and identity/non-identity curves from the cell reports
    {
        struct Bucket {
            SplitCell known, unknown, identity, nonidentity;
        };
        std::map<std::pair<std::string, long>, Bucket> buckets;  // (config, size)
        const fs::path cells_dir = fs::path(results_dir) / "cells";
        if (fs::exists(cells_dir)) {
            std::vector<fs::path> eval_files;
            for (const auto& entry : fs::directory_iterator(cells_dir)) {
                const fs::path eval_file = entry.path() / "eval.txt";
                if (fs::exists(eval_file)) eval_files.push_back(eval_file);
            }
            std::sort(eval_files.begin(), eval_files.end());
            for (const auto& file : eval_files) {
                const auto saved = load_eval_report(file.string());
                auto& b = buckets[{saved.config, saved.size}];
                auto absorb = [](SplitCell& into, const SplitCell& from) {
                    into.n += from.n;
                    into.correct += from.correct;
                };
                absorb(b.known, saved.report.known_marginal[1]);
                absorb(b.unknown, saved.report.known_marginal[0]);
                absorb(b.identity, saved.report.identity_marginal[1]);
                absorb(b.nonidentity, saved.report.identity_marginal[0]);
            }
        }
        if (!buckets.empty()) {
            std::ostringstream csv;
            csv << "config,size,subset,n,accuracy\n";
            std::map<std::string, ChartSeries> known_series, ident_series;
            for (const auto& [key, b] : buckets) {
                const std::string label = key.first.empty() ? "single" : key.first;
                auto emit = [&](const char* subset, const SplitCell& cell) {
                    if (cell.n == 0) return;
                    csv << label << ',' << key.second << ',' << subset << ',' << cell.n << ','
                        << detail::fmt4(cell.accuracy()) << "\n";
                };
                emit("known", b.known);
                emit("unknown", b.unknown);
                emit("identity", b.identity);
                emit("nonidentity", b.nonidentity);
                if (b.known.n)
                    known_series[label + " known"].points.push_back({static_cast<double>(key.second), b.known.accuracy()});
                if (b.unknown.n)
                    known_series[label + " unknown"].points.push_back({static_cast<double>(key.second), b.unknown.accuracy()});
                if (b.identity.n)
                    ident_series[label + " identity"].points.push_back({static_cast<double>(key.second), b.identity.accuracy()});
                if (b.nonidentity.n)
                    ident_series[label + " non-identity"].points.push_back({static_cast<double>(key.second), b.nonidentity.accuracy()});
            }
            write_file_atomic((fs::path(out_dir) / "split_curves.csv").string(), csv.str());
            auto to_series = [](std::map<std::string, ChartSeries>& m) {
                std::vector<ChartSeries> out;
                for (auto& [label, s] : m) {
                    s.label = label;
                    std::sort(s.points.begin(), s.points.end());
                    out.push_back(std::move(s));
                }
                return out;
            };
            auto ks = to_series(known_series);
            write_line_chart((fs::path(out_dir) / "split_known_unknown.svg").string(),
                             "accuracy on known vs unknown tokens", "training tokens", "word accuracy (%)", ks,
                             /*log_x=*/true);
            auto is = to_series(ident_series);
            write_line_chart((fs::path(out_dir) / "split_identity.svg").string(),
                             "accuracy on identity vs non-identity tokens", "training tokens",
                             "word accuracy (%)", is, /*log_x=*/true);
        }
    }

    write_file_atomic((fs::path(out_dir) / "correlations.txt").string(), report.str());
    std::cout << report.str();
    return 0;
}

// ---- synthetic corpus generation ----

struct GenSyntheticArgs {
    std::string out_dir;
    std::string language = "syn";
    uint64_t seed = 1;
    int lexicon = 500;
    int train_tokens = 2000;
    int dev_tokens = 500;
    int aux_tokens = 2000;
    int g2p_entries = 400;
    int lemma_entries = 400;
    double corruption = 0.5;
    std::string rules_path;  // optional override of the built-in ruleset
};

inline int cmd_gen_synthetic(const GenSyntheticArgs& args) {
    if (args.out_dir.empty()) throw SpecError("gen-synthetic: missing --out");
    SyntheticConfig cfg;
    cfg.seed = args.seed;
    cfg.language = args.language;
    cfg.lexicon_size = args.lexicon;
    cfg.norm_train_tokens = args.train_tokens;
    cfg.norm_dev_tokens = args.dev_tokens;
    cfg.autoenc_tokens = args.aux_tokens;
    cfg.g2p_entries = args.g2p_entries;
    cfg.lemma_entries = args.lemma_entries;
    if (args.rules_path.empty()) {
        cfg.rules = default_rules(args.language, args.corruption);
    } else {
        std::ifstream in(args.rules_path, std::ios::binary);
        if (!in) throw SpecError(cat("gen-synthetic: cannot open rules file: ", args.rules_path));
        std::string line;
        while (std::getline(in, line)) {
            const std::string text = trim(line);
            if (text.empty() || text[0] == '#') continue;
            const auto eq = text.find('=');
            if (eq == std::string::npos || trim(text.substr(0, eq)) != "rule")
                throw SpecError(cat(args.rules_path, ": expected 'rule = FROM > TO @ ANCHOR p=P', got '", text, "'"));
            cfg.rules.push_back(parse_rule(trim(text.substr(eq + 1))));
        }
    }

    const auto corpus = generate_synthetic_corpus(cfg);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    save_pairs(corpus.norm_train, (dir / cat(args.language, "_norm.train.tsv")).string());
    save_pairs(corpus.norm_dev, (dir / cat(args.language, "_norm.dev.tsv")).string());
    save_pairs(corpus.autoencoding, (dir / cat(args.language, "_autoenc.tsv")).string());
    save_pairs(corpus.g2p, (dir / cat(args.language, "_g2p.tsv")).string());
    save_pairs(corpus.lemmatization, (dir / cat(args.language, "_lemma.tsv")).string());
    {
        std::ostringstream out;
        out << "# rewrite rules used for " << args.language << "\n";
        for (const auto& r : cfg.rules) out << "rule = " << render_rule(r) << "\n";
        write_file_atomic((dir / cat(args.language, "_rules.txt")).string(), out.str());
    }
    std::cout << "wrote synthetic corpus for '" << args.language << "' (identity baseline on dev: "
              << detail::fmt4(corpus.norm_dev.pairs.empty() ? 100.0 : identity_baseline(corpus.norm_dev))
              << "%)\n";
    return 0;
}

}  // namespace normshare
