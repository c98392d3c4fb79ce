// Batch scheduling: balanced MTL composite batches (30 main + 10 per auxiliary
// task per update) and the zero-shot equal-samples-per-combination schedule
// with its same-language exclusion rule.
#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/dataset.hpp"
#include "normshare/model.hpp"
#include "normshare/rng.hpp"

namespace normshare {

// One composite update's worth of example indices.
struct CompositeBatch {
    std::vector<size_t> main;
    std::vector<std::vector<size_t>> aux;  // parallel to the aux dataset list
};

namespace detail {

// Sampling without replacement; reshuffles on wraparound.
class CycleSampler {
public:
    CycleSampler(size_t n, Pcg32& rng) : order_(n) {
        for (size_t i = 0; i < n; ++i) order_[i] = i;
        rng.shuffle(order_);
    }

    void draw(size_t k, Pcg32& rng, std::vector<size_t>& out) {
        for (size_t i = 0; i < k; ++i) {
            if (pos_ == order_.size()) {
                rng.shuffle(order_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
    }

private:
    std::vector<size_t> order_;
    size_t pos_ = 0;
};

}  // namespace detail

// Standard-mode scheduler. One epoch is one full pass over the main task;
// auxiliary datasets cycle independently of epoch boundaries.
class MtlBatcher {
public:
    MtlBatcher(size_t main_size, std::vector<size_t> aux_sizes, const HyperParams& hp, Pcg32& rng)
        : main_size_(main_size), batch_main_(static_cast<size_t>(hp.batch_size_main)),
          aux_per_batch_(static_cast<size_t>(hp.aux_tokens_per_batch)) {
        if (main_size_ == 0) throw ContractError("make_mtl_batches: empty main dataset");
        for (size_t n : aux_sizes) {
            if (n == 0) throw ContractError("make_mtl_batches: empty auxiliary dataset");
            aux_.emplace_back(n, rng);
        }
    }

    // The composite batches of one epoch: each holds up to 30 main pairs (short
    // final batch allowed) plus exactly aux_tokens_per_batch pairs per aux task.
    std::vector<CompositeBatch> next_epoch(Pcg32& rng) {
        std::vector<size_t> order(main_size_);
        for (size_t i = 0; i < main_size_; ++i) order[i] = i;
        rng.shuffle(order);
        std::vector<CompositeBatch> epoch;
        for (size_t start = 0; start < main_size_; start += batch_main_) {
            CompositeBatch b;
            const size_t end = std::min(main_size_, start + batch_main_);
            b.main.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
            for (auto& cycle : aux_) {
                b.aux.emplace_back();
                cycle.draw(aux_per_batch_, rng, b.aux.back());
            }
            epoch.push_back(std::move(b));
        }
        return epoch;
    }

private:
    size_t main_size_;
    size_t batch_main_;
    size_t aux_per_batch_;
    std::vector<detail::CycleSampler> aux_;
};

// ---- zero-shot schedule ----

struct ZeroShotUpdate {
    // Per included combination, the drawn pair indices (parallel to
    // ZeroShotSchedule::combinations()).
    std::vector<std::vector<size_t>> draws;
};

class ZeroShotSchedule {
public:
    // Excludes every normalization dataset whose language equals the target
    // language (both same-language sets go when either would be the target).
    ZeroShotSchedule(std::vector<const TaskDataset*> all_datasets, std::string target_language,
                     int epoch_samples, int update_samples, Pcg32& rng)
        : target_language_(std::move(target_language)),
          epoch_samples_(epoch_samples),
          update_samples_(update_samples) {
        if (epoch_samples_ <= 0 || update_samples_ <= 0 || epoch_samples_ % update_samples_ != 0)
            throw ContractError(cat("zero-shot schedule: epoch samples (", epoch_samples_,
                                    ") must be a positive multiple of update samples (", update_samples_, ")"));
        std::set<std::string> languages;
        bool target_in_aux = false;
        for (const TaskDataset* ds : all_datasets) {
            languages.insert(ds->language);
            const bool excluded = ds->task == TaskKind::normalization && ds->language == target_language_;
            if (!excluded) {
                combinations_.push_back(ds);
                if (ds->language == target_language_) target_in_aux = true;
            }
        }
        if (languages.size() < 2)
            throw ContractError("zero-shot schedule: need datasets from at least 2 languages");
        if (!languages.count(target_language_))
            throw Error(cat("zero-shot schedule: target language '", target_language_, "' not present in any dataset"));
        if (!target_in_aux)
            throw Error(cat("zero-shot schedule: no auxiliary data for target language '", target_language_,
                            "'; the model would never see the language"));
        for (const TaskDataset* ds : combinations_) cycles_.emplace_back(ds->pairs.size(), rng);
    }

    const std::vector<const TaskDataset*>& combinations() const { return combinations_; }
    int updates_per_epoch() const { return epoch_samples_ / update_samples_; }
    int update_samples() const { return update_samples_; }

    std::vector<ZeroShotUpdate> next_epoch(Pcg32& rng) {
        std::vector<ZeroShotUpdate> epoch(static_cast<size_t>(updates_per_epoch()));
        for (auto& update : epoch) {
            update.draws.resize(combinations_.size());
            for (size_t c = 0; c < combinations_.size(); ++c)
                cycles_[c].draw(static_cast<size_t>(update_samples_), rng, update.draws[c]);
        }
        return epoch;
    }

    // Hard invariant: no drawn pair may belong to the target language's
    // normalization task.
    void check_exclusion(const TaskDataset& ds) const {
        if (ds.task == TaskKind::normalization && ds.language == target_language_)
            throw ExclusionError(cat("zero-shot exclusion violated: normalization pair of target language '",
                                     target_language_, "' (dataset ", ds.name, ") reached a batch"));
    }

private:
    std::string target_language_;
    int epoch_samples_;
    int update_samples_;
    std::vector<const TaskDataset*> combinations_;
    std::vector<detail::CycleSampler> cycles_;
};

inline ZeroShotSchedule make_zero_shot_schedule(std::vector<const TaskDataset*> all_datasets,
                                                const std::string& target_language, Pcg32& rng,
                                                int epoch_samples = 1000, int update_samples = 10) {
    return ZeroShotSchedule(std::move(all_datasets), target_language, epoch_samples, update_samples, rng);
}

}  // namespace normshare
