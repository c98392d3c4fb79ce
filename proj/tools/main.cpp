// normshare command-line interface: training, the sharing-configuration sweep,
// learning curves, zero-shot runs, evaluation/probing, analysis, and synthetic
// corpus generation.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "normshare/experiments.hpp"

namespace {

using namespace normshare;

struct GlobalOpts {
    std::string spec_path;
    std::string out_dir;
    std::string seeds_csv;
    int workers = 0;  // 0 = unset
    std::string precision;
};

ExperimentSpec load_spec(const GlobalOpts& opts, bool need_spec = true) {
    ExperimentSpec spec;
    if (!opts.spec_path.empty())
        spec = ExperimentSpec::parse_file(opts.spec_path);
    else if (need_spec)
        throw SpecError("missing --spec PATH");
    if (!opts.out_dir.empty()) spec.out_dir = opts.out_dir;
    if (!opts.seeds_csv.empty()) {
        spec.seeds.clear();
        for (const auto& s : split(opts.seeds_csv, ',')) spec.seeds.push_back(std::stoull(trim(s)));
    }
    if (opts.workers > 0)
        spec.workers = opts.workers;
    else if (const char* env = std::getenv("NORMSHARE_WORKERS"); env && *env && spec.workers == 1)
        spec.workers = std::max(1, std::atoi(env));
    if (!opts.precision.empty()) spec.precision = opts.precision;
    return spec;
}

template <class Fn>
int with_precision(const std::string& precision, Fn&& fn) {
    if (precision == "f32") return fn(float{});
    if (precision == "f64" || precision.empty()) return fn(double{});
    throw SpecError(cat("unknown precision '", precision, "' (expected f32 or f64)"));
}

void add_globals(CLI::App* cmd, GlobalOpts& opts, bool with_spec = true) {
    if (with_spec) cmd->add_option("--spec", opts.spec_path, "experiment spec file");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides spec)");
    cmd->add_option("--seed", opts.seeds_csv, "seed list, e.g. 1,2,3 (overrides spec)");
    cmd->add_option("--workers", opts.workers, "parallel worker count (or NORMSHARE_WORKERS)");
    cmd->add_option("--precision", opts.precision, "f32 or f64 (default f64)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"normshare: multi-task character transduction for historical text normalization"};
    app.require_subcommand(1);

    GlobalOpts train_opts, sweep_opts, curve_opts, zs_opts;
    bool zs_inject = false;

    auto* train_cmd = app.add_subcommand("train", "train and evaluate one model per normalization dataset");
    add_globals(train_cmd, train_opts);

    auto* sweep_cmd = app.add_subcommand("sweep-sharing", "train all 64 sharing configurations");
    add_globals(sweep_cmd, sweep_opts);

    auto* curve_cmd = app.add_subcommand("learning-curve", "accuracy across training-set sizes");
    add_globals(curve_cmd, curve_opts);

    auto* zs_cmd = app.add_subcommand("zero-shot", "train on all tasks/languages except the target's normalization");
    add_globals(zs_cmd, zs_opts);
    zs_cmd->add_flag("--inject-exclusion-breach", zs_inject,
                     "deliberately violate the exclusion invariant (guard demonstration; aborts with exit 3)")
        ->group("");  // hidden

    EvaluateArgs eval_args;
    std::string eval_precision;
    auto* eval_cmd = app.add_subcommand("evaluate", "decode a dataset with a checkpoint and score it");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--data", eval_args.data_path, "pair file to evaluate")->required();
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();
    eval_cmd->add_option("--task", eval_args.task, "model task to decode with (default normalization)");
    eval_cmd->add_option("--data-task", eval_args.data_task, "task format of the data file");
    eval_cmd->add_option("--language", eval_args.language, "language label");
    eval_cmd->add_option("--name", eval_args.name, "dataset name for reports");
    eval_cmd->add_option("--train-file", eval_args.train_path, "training pairs for known/unknown splits");
    eval_cmd->add_flag("--tagged", eval_args.tagged, "prepend zero-shot language/task tags when decoding");
    eval_cmd->add_option("--probe", eval_args.probe_task,
                         "record a probes.csv row labeling this model as the given auxiliary task");
    eval_cmd->add_option("--precision", eval_precision, "f32 or f64 (must match the checkpoint)");

    std::string analyze_dir, analyze_out, analyze_precision;
    auto* analyze_cmd = app.add_subcommand("analyze", "correlation and split reports over a results directory");
    analyze_cmd->add_option("--results", analyze_dir, "directory holding results.csv")->required();
    analyze_cmd->add_option("--out", analyze_out, "output directory (default: results dir)");
    analyze_cmd->add_option("--precision", analyze_precision, "unused; accepted for symmetry");

    GenSyntheticArgs gen_args;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "generate a synthetic corpus (all four tasks)");
    gen_cmd->add_option("--out", gen_args.out_dir, "output directory")->required();
    gen_cmd->add_option("--language", gen_args.language, "language id (default syn)");
    gen_cmd->add_option("--seed", gen_args.seed, "generator seed");
    gen_cmd->add_option("--lexicon", gen_args.lexicon, "lexicon size (types)");
    gen_cmd->add_option("--train-tokens", gen_args.train_tokens, "normalization training tokens");
    gen_cmd->add_option("--dev-tokens", gen_args.dev_tokens, "normalization dev tokens");
    gen_cmd->add_option("--aux-tokens", gen_args.aux_tokens, "autoencoding tokens");
    gen_cmd->add_option("--g2p-entries", gen_args.g2p_entries, "g2p lexicon entries");
    gen_cmd->add_option("--lemma-entries", gen_args.lemma_entries, "lemmatization entries");
    gen_cmd->add_option("--corruption", gen_args.corruption, "rule intensity in [0,1] (default 0.5)");
    gen_cmd->add_option("--rules", gen_args.rules_path, "rewrite rule file (overrides built-in rules)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            const auto spec = load_spec(train_opts);
            return with_precision(spec.precision, [&](auto real) {
                return cmd_train<decltype(real)>(spec);
            });
        }
        if (sweep_cmd->parsed()) {
            const auto spec = load_spec(sweep_opts);
            return with_precision(spec.precision, [&](auto real) {
                return cmd_sweep_sharing<decltype(real)>(spec);
            });
        }
        if (curve_cmd->parsed()) {
            const auto spec = load_spec(curve_opts);
            return with_precision(spec.precision, [&](auto real) {
                return cmd_learning_curve<decltype(real)>(spec);
            });
        }
        if (zs_cmd->parsed()) {
            const auto spec = load_spec(zs_opts);
            return with_precision(spec.precision, [&](auto real) {
                return cmd_zero_shot<decltype(real)>(spec, zs_inject);
            });
        }
        if (eval_cmd->parsed()) {
            return with_precision(eval_precision, [&](auto real) {
                return cmd_evaluate<decltype(real)>(eval_args);
            });
        }
        if (analyze_cmd->parsed()) {
            return cmd_analyze<double>(analyze_dir, analyze_out);
        }
        if (gen_cmd->parsed()) {
            return cmd_gen_synthetic(gen_args);
        }
    } catch (const SpecError& e) {
        std::cerr << "spec error: " << e.what() << "\n";
        return 2;
    } catch (const ExclusionError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
