// Training loops: the early-stopping MTL trainer and the fixed-budget
// zero-shot trainer, plus the TrainLog evidence carrier.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "normshare/adam.hpp"
#include "normshare/batching.hpp"
#include "normshare/dataset.hpp"
#include "normshare/decoding.hpp"
#include "normshare/metrics.hpp"
#include "normshare/model.hpp"

namespace normshare {

struct TrainPlan {
    enum class Mode { standard, zero_shot };

    Mode mode = Mode::standard;
    SharingConfig config;
    HyperParams hp;
    uint64_t seed = 1;
    double lr = 1e-3;
    int max_epochs = 50;
    int patience = 5;

    // standard mode
    const TaskDataset* main_train = nullptr;
    const TaskDataset* main_val = nullptr;
    std::vector<const TaskDataset*> aux;

    // zero-shot mode
    std::vector<const TaskDataset*> all_datasets;
    std::string target_language;
    int zs_epochs = 10;
    int zs_epoch_samples = 1000;
    int zs_update_samples = 10;
    bool inject_exclusion_breach = false;  // test hook: deliberately violate the exclusion
};

struct TrainLog {
    struct EpochRecord {
        int epoch = 0;
        double train_loss = 0.0;
        double val_acc = -1.0;  // -1 when no validation pass ran (zero-shot)
        std::map<std::pair<std::string, std::string>, long> tokens_seen;  // (task, language)
    };

    std::string mode;
    std::string config_str;
    uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    std::string stop_reason;
    int best_epoch = -1;
    double best_val_acc = -1.0;

    long tokens_seen_total(const std::string& task, const std::string& language) const {
        long total = 0;
        for (const auto& e : epochs) {
            auto it = e.tokens_seen.find({task, language});
            if (it != e.tokens_seen.end()) total += it->second;
        }
        return total;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(cat("cannot write train log: ", path));
        char buf[64];
        out << "# normshare train log\n";
        out << "mode = " << mode << "\n";
        out << "config = " << config_str << "\n";
        out << "seed = " << seed << "\n";
        for (const auto& e : epochs) {
            std::snprintf(buf, sizeof buf, "%.6f", e.train_loss);
            out << "epoch = " << e.epoch << "\ttrain_loss = " << buf;
            std::snprintf(buf, sizeof buf, "%.6f", e.val_acc);
            out << "\tval_acc = " << buf;
            for (const auto& [key, count] : e.tokens_seen)
                out << "\ttokens_seen[" << key.first << "," << key.second << "] = " << count;
            out << "\n";
        }
        out << "stop_reason = " << stop_reason << "\n";
        out << "best_epoch = " << best_epoch << "\n";
        std::snprintf(buf, sizeof buf, "%.6f", best_val_acc);
        out << "best_val_acc = " << buf << "\n";
    }

    static TrainLog load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(cat("cannot open train log: ", path));
        TrainLog log;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (line.rfind("epoch = ", 0) == 0) {
                EpochRecord rec;
                for (const auto& field : split(line, '\t')) {
                    const auto eq = field.find(" = ");
                    if (eq == std::string::npos) throw ParseError(cat(path, ": bad log field '", field, "'"));
                    const std::string key = field.substr(0, eq);
                    const std::string value = field.substr(eq + 3);
                    if (key == "epoch")
                        rec.epoch = std::stoi(value);
                    else if (key == "train_loss")
                        rec.train_loss = std::stod(value);
                    else if (key == "val_acc")
                        rec.val_acc = std::stod(value);
                    else if (key.rfind("tokens_seen[", 0) == 0 && key.back() == ']') {
                        const std::string inner = key.substr(12, key.size() - 13);
                        const auto comma = inner.find(',');
                        if (comma == std::string::npos) throw ParseError(cat(path, ": bad tokens_seen key '", key, "'"));
                        rec.tokens_seen[{inner.substr(0, comma), inner.substr(comma + 1)}] = std::stol(value);
                    } else
                        throw ParseError(cat(path, ": unknown log field '", key, "'"));
                }
                log.epochs.push_back(std::move(rec));
                continue;
            }
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) throw ParseError(cat(path, ": bad log line '", line, "'"));
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 3);
            if (key == "mode")
                log.mode = value;
            else if (key == "config")
                log.config_str = value;
            else if (key == "seed")
                log.seed = std::stoull(value);
            else if (key == "stop_reason")
                log.stop_reason = value;
            else if (key == "best_epoch")
                log.best_epoch = std::stoi(value);
            else if (key == "best_val_acc")
                log.best_val_acc = std::stod(value);
            else
                throw ParseError(cat(path, ": unknown log field '", key, "'"));
        }
        return log;
    }
};

template <class Real>
struct TrainResult {
    MultiTaskModel<Real> model;
    TrainLog log;
};

// Early stopping on validation accuracy: strict improvement resets the
// counter, ties keep the earlier epoch, stop after `patience` stale epochs.
struct EarlyStopper {
    int patience;
    double best_acc = -1.0;
    int best_epoch = -1;

    explicit EarlyStopper(int patience_epochs) : patience(patience_epochs) {}

    // Returns true when training should stop after this epoch.
    bool record(int epoch, double acc) {
        if (acc > best_acc) {
            best_acc = acc;
            best_epoch = epoch;
        }
        return epoch - best_epoch >= patience;
    }
};

namespace detail {

// Composite update loss: mean over all characters of all sub-batches.
template <class Real>
Var<Real> weighted_char_mean(Tape<Real>& tape, const std::vector<BatchLoss<Real>>& losses) {
    size_t total_chars = 0;
    for (const auto& l : losses) total_chars += l.char_count;
    std::vector<Var<Real>> weighted;
    weighted.reserve(losses.size());
    for (const auto& l : losses)
        weighted.push_back(scale(l.loss, static_cast<double>(l.char_count) / static_cast<double>(total_chars)));
    Var<Real> total = weighted[0];
    for (size_t i = 1; i < weighted.size(); ++i) total = add(total, weighted[i]);
    return total;
}

template <class Real>
double validation_accuracy(MultiTaskModel<Real>& model, const std::string& task, const TaskDataset& val) {
    const auto preds = predict_dataset(model, task, val);
    return word_accuracy(preds);
}

}  // namespace detail

// Standard-mode training with early stopping on validation word accuracy.
// Returns the best-validation checkpoint (ties keep the earliest epoch).
template <class Real>
TrainResult<Real> train(const TrainPlan& plan) {
    if (plan.mode != TrainPlan::Mode::standard) throw ContractError("train: plan mode must be standard");
    if (!plan.main_train || plan.main_train->pairs.empty()) throw ContractError("train: empty train split");
    if (!plan.main_val || plan.main_val->pairs.empty()) throw ContractError("train: empty validation split");

    // Vocabulary over the full truncated main dataset (train + validation
    // portions) plus auxiliary training data.
    std::vector<const TaskDataset*> vocab_sets = {plan.main_train, plan.main_val};
    for (const auto* a : plan.aux) vocab_sets.push_back(a);
    auto [src_vocab, tgt_vocab] = build_vocabularies(vocab_sets);

    const std::string main_task = task_name(plan.main_train->task);
    std::vector<std::string> tasks = {main_task};
    for (const auto* a : plan.aux) {
        const std::string name = task_name(a->task);
        if (std::find(tasks.begin(), tasks.end(), name) == tasks.end()) tasks.push_back(name);
    }

    MultiTaskModel<Real> model(plan.config, tasks, src_vocab, tgt_vocab, plan.hp, plan.seed);
    Pcg32 rng(derive_seed(plan.seed, 0x7261696e));

    const auto main_encoded = encode_dataset(*plan.main_train, model.src_vocab(), model.tgt_vocab());
    std::vector<std::vector<EncodedPair>> aux_encoded;
    std::vector<size_t> aux_sizes;
    for (const auto* a : plan.aux) {
        aux_encoded.push_back(encode_dataset(*a, model.src_vocab(), model.tgt_vocab()));
        aux_sizes.push_back(a->pairs.size());
    }

    MtlBatcher batcher(main_encoded.size(), aux_sizes, plan.hp, rng);
    AdamState<Real> opt;
    opt.lr = plan.lr;

    TrainLog log;
    log.mode = "standard";
    log.config_str = plan.config.str();
    log.seed = plan.seed;

    std::vector<std::vector<Real>> best_snapshot = model.snapshot_values();
    EarlyStopper stopper(plan.patience);

    for (int epoch = 1; epoch <= plan.max_epochs; ++epoch) {
        TrainLog::EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0.0;
        long updates = 0;
        for (const auto& draw : batcher.next_epoch(rng)) {
            Tape<Real> tape;
            std::vector<BatchLoss<Real>> losses;
            std::vector<EncodedPair> main_batch;
            for (size_t idx : draw.main) main_batch.push_back(main_encoded[idx]);
            losses.push_back(forward_loss(model, tape, main_task, main_batch, /*train=*/true, &rng));
            rec.tokens_seen[{main_task, plan.main_train->language}] += static_cast<long>(draw.main.size());
            for (size_t a = 0; a < aux_encoded.size(); ++a) {
                std::vector<EncodedPair> aux_batch;
                for (size_t idx : draw.aux[a]) aux_batch.push_back(aux_encoded[a][idx]);
                losses.push_back(
                    forward_loss(model, tape, task_name(plan.aux[a]->task), aux_batch, /*train=*/true, &rng));
                rec.tokens_seen[{task_name(plan.aux[a]->task), plan.aux[a]->language}] +=
                    static_cast<long>(draw.aux[a].size());
            }
            auto composite = detail::weighted_char_mean(tape, losses);
            loss_sum += static_cast<double>(composite.scalar());
            ++updates;
            adam_step(tape.backward(composite), opt);
        }
        rec.train_loss = loss_sum / static_cast<double>(updates);
        rec.val_acc = detail::validation_accuracy(model, main_task, *plan.main_val);
        log.epochs.push_back(rec);

        const bool was_best = rec.val_acc > stopper.best_acc;
        const bool stop = stopper.record(epoch, rec.val_acc);
        if (was_best) best_snapshot = model.snapshot_values();
        if (stop) {
            log.stop_reason = cat("early_stopping(patience=", plan.patience, ")");
            break;
        }
    }
    if (log.stop_reason.empty()) log.stop_reason = cat("max_epochs(", plan.max_epochs, ")");
    log.best_epoch = stopper.best_epoch;
    log.best_val_acc = stopper.best_acc;
    model.restore_values(best_snapshot);
    return {std::move(model), std::move(log)};
}

// Zero-shot training: full sharing, tagged inputs, no early stopping, a fixed
// epoch budget, and a hard runtime guard on the exclusion invariant.
template <class Real>
TrainResult<Real> train_zero_shot(const TrainPlan& plan) {
    if (plan.mode != TrainPlan::Mode::zero_shot) throw ContractError("train_zero_shot: plan mode must be zero_shot");
    if (plan.all_datasets.empty()) throw ContractError("train_zero_shot: no datasets");

    Pcg32 rng(derive_seed(plan.seed, 0x7a65726f));
    ZeroShotSchedule schedule(plan.all_datasets, plan.target_language, plan.zs_epoch_samples,
                              plan.zs_update_samples, rng);

    // Tag symbols for every language and task present anywhere in the data, so
    // the unseen (target language, normalization) combination stays encodable.
    std::set<std::string> lang_set;
    std::set<std::string> task_set;
    for (const auto* ds : plan.all_datasets) {
        lang_set.insert(ds->language);
        task_set.insert(task_name(ds->task));
    }
    std::vector<std::string> languages(lang_set.begin(), lang_set.end());
    std::vector<TaskKind> kinds;
    for (const auto& t : task_set) kinds.push_back(task_from_string(t));

    auto [src_vocab, tgt_vocab] = build_vocabularies(plan.all_datasets, languages, kinds);

    // All layers shared between all tasks and languages.
    SharingConfig config = SharingConfig::full();
    std::vector<std::string> tasks;
    for (const auto& t : task_set) tasks.push_back(t);
    MultiTaskModel<Real> model(config, tasks, src_vocab, tgt_vocab, plan.hp, plan.seed);

    // Pre-encode every included combination with its two leading tag ids.
    const auto& combos = schedule.combinations();
    std::vector<std::vector<EncodedPair>> encoded(combos.size());
    for (size_t c = 0; c < combos.size(); ++c) {
        encoded[c] = encode_dataset(*combos[c], model.src_vocab(), model.tgt_vocab());
        const int lt = model.src_vocab().id_of(lang_tag(combos[c]->language));
        const int tt = model.src_vocab().id_of(task_tag(combos[c]->task));
        for (auto& pair : encoded[c]) pair.src.insert(pair.src.begin(), {lt, tt});
    }

    // The injection hook appends one pair from an excluded dataset so the
    // runtime guard can be demonstrated to abort.
    const TaskDataset* breach_ds = nullptr;
    EncodedPair breach_pair;
    if (plan.inject_exclusion_breach) {
        for (const auto* ds : plan.all_datasets)
            if (ds->task == TaskKind::normalization && ds->language == plan.target_language) breach_ds = ds;
        if (!breach_ds) throw ContractError("inject_exclusion_breach: no excluded dataset exists to inject");
        breach_pair = encode_pair(breach_ds->pairs.front(), breach_ds->task, model.src_vocab(), model.tgt_vocab());
    }

    AdamState<Real> opt;
    opt.lr = plan.lr;
    TrainLog log;
    log.mode = "zero_shot";
    log.config_str = config.str();
    log.seed = plan.seed;

    for (int epoch = 1; epoch <= plan.zs_epochs; ++epoch) {
        TrainLog::EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0.0;
        long updates = 0;
        for (const auto& update : schedule.next_epoch(rng)) {
            Tape<Real> tape;
            std::vector<BatchLoss<Real>> losses;
            for (size_t c = 0; c < combos.size(); ++c) {
                schedule.check_exclusion(*combos[c]);
                std::vector<EncodedPair> batch;
                for (size_t idx : update.draws[c]) batch.push_back(encoded[c][idx]);
                if (plan.inject_exclusion_breach && epoch == 1 && updates == 0 && c == 0) {
                    schedule.check_exclusion(*breach_ds);  // throws ExclusionError
                    batch.push_back(breach_pair);
                }
                losses.push_back(forward_loss(model, tape, task_name(combos[c]->task), batch, /*train=*/true, &rng));
                rec.tokens_seen[{task_name(combos[c]->task), combos[c]->language}] +=
                    static_cast<long>(update.draws[c].size());
            }
            auto composite = detail::weighted_char_mean(tape, losses);
            loss_sum += static_cast<double>(composite.scalar());
            ++updates;
            adam_step(tape.backward(composite), opt);
        }
        rec.train_loss = loss_sum / static_cast<double>(updates);
        log.epochs.push_back(rec);
    }
    log.stop_reason = cat("fixed_epochs(", plan.zs_epochs, ")");
    log.best_epoch = plan.zs_epochs;

    // Exclusion evidence: the log must show zero target-language normalization tokens.
    if (log.tokens_seen_total(task_name(TaskKind::normalization), plan.target_language) != 0)
        throw ExclusionError("zero-shot train log shows target-language normalization tokens");
    return {std::move(model), std::move(log)};
}

// Decodes a tagged source for evaluating a zero-shot model on the target task.
template <class Real>
std::vector<Prediction> predict_dataset_tagged(MultiTaskModel<Real>& model, const TaskDataset& data) {
    const int lt = model.src_vocab().id_of(lang_tag(data.language));
    const int tt = model.src_vocab().id_of(task_tag(data.task));
    std::vector<Prediction> preds;
    preds.reserve(data.pairs.size());
    for (const auto& pair : data.pairs) {
        std::vector<int> src_ids = model.src_vocab().encode(symbolize_source(pair.source));
        src_ids.insert(src_ids.begin(), {lt, tt});
        Prediction p;
        p.source = pair.source;
        p.gold = pair.target;
        p.hypothesis = greedy_decode(model, task_name(data.task), src_ids, data.task);
        preds.push_back(std::move(p));
    }
    return preds;
}

}  // namespace normshare
