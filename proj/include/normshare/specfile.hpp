// Experiment spec files: key-value lines with [dataset] sections. One spec
// describes datasets, sharing configs, training sizes, seeds and overrides;
// validation happens before any training starts.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/dataset.hpp"
#include "normshare/model.hpp"
#include "normshare/sharing.hpp"

namespace normshare {

struct DatasetSpec {
    std::string name;
    TaskKind task = TaskKind::normalization;
    std::string language;
    std::string train_path;
    std::string dev_path;  // normalization datasets only
};

struct ExperimentSpec {
    std::string out_dir;
    std::vector<uint64_t> seeds = {1};
    std::vector<std::string> configs;
    bool configs_set = false;
    std::vector<long> sizes;  // -1 = full dataset
    bool sizes_set = false;
    std::vector<TaskKind> aux_tasks = {TaskKind::autoencoding, TaskKind::g2p, TaskKind::lemmatization};
    HyperParams hp;
    double lr = 1e-3;
    int patience = 5;
    int max_epochs = 50;
    std::string target_language;
    int zs_epochs = 10;
    int zs_epoch_samples = 1000;
    int zs_update_samples = 10;
    std::string precision = "f64";
    int workers = 1;
    std::vector<DatasetSpec> datasets;

    std::vector<DatasetSpec> normalization_datasets() const {
        std::vector<DatasetSpec> out;
        for (const auto& d : datasets)
            if (d.task == TaskKind::normalization) out.push_back(d);
        return out;
    }

    // Auxiliary datasets for one language, restricted to the selected tasks.
    std::vector<DatasetSpec> aux_datasets_for(const std::string& language) const {
        std::vector<DatasetSpec> out;
        for (const auto& d : datasets) {
            if (d.task == TaskKind::normalization || d.language != language) continue;
            for (TaskKind t : aux_tasks)
                if (d.task == t) out.push_back(d);
        }
        return out;
    }

    static ExperimentSpec parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SpecError(cat("cannot open spec file: ", path));
        ExperimentSpec spec;
        DatasetSpec* current = nullptr;
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string text = trim(line);
            if (text.empty() || text[0] == '#') continue;
            if (text == "[dataset]") {
                spec.datasets.emplace_back();
                current = &spec.datasets.back();
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw SpecError(cat(path, ":", line_no, ": expected key = value, got '", text, "'"));
            const std::string key = trim(text.substr(0, eq));
            const std::string value = trim(text.substr(eq + 1));
            try {
                if (current)
                    parse_dataset_key(*current, key, value);
                else
                    spec.parse_key(key, value);
            } catch (const SpecError&) {
                throw;
            } catch (const std::exception& e) {
                throw SpecError(cat(path, ":", line_no, ": ", e.what()));
            }
        }
        return spec;
    }

    // Throws SpecError on the first violated constraint.
    void validate(bool need_datasets = true) const {
        if (out_dir.empty()) throw SpecError("spec: missing output directory (out = ... or --out)");
        if (seeds.empty()) throw SpecError("spec: need at least one seed");
        std::set<uint64_t> seed_set(seeds.begin(), seeds.end());
        if (seed_set.size() != seeds.size()) throw SpecError("spec: seeds must be distinct");
        for (const auto& c : configs) SharingConfig::parse(c);  // throws ParseError on bad letters
        for (long s : sizes)
            if (s != -1 && s < 100) throw SpecError(cat("spec: training size must be >= 100 or 'full', got ", s));
        hp.validate();
        if (workers < 1) throw SpecError("spec: workers must be >= 1");
        if (precision != "f32" && precision != "f64")
            throw SpecError(cat("spec: precision must be f32 or f64, got '", precision, "'"));
        if (need_datasets && datasets.empty()) throw SpecError("spec: no [dataset] sections");
        std::set<std::string> names;
        for (const auto& d : datasets) {
            if (d.name.empty()) throw SpecError("spec: dataset without a name");
            if (!names.insert(d.name).second) throw SpecError(cat("spec: duplicate dataset name '", d.name, "'"));
            if (d.language.empty()) throw SpecError(cat("spec: dataset '", d.name, "' without a language"));
            if (d.train_path.empty()) throw SpecError(cat("spec: dataset '", d.name, "' without a train file"));
            if (!std::filesystem::exists(d.train_path))
                throw SpecError(cat("spec: dataset '", d.name, "' train file does not exist: ", d.train_path));
            if (!d.dev_path.empty() && !std::filesystem::exists(d.dev_path))
                throw SpecError(cat("spec: dataset '", d.name, "' dev file does not exist: ", d.dev_path));
        }
    }

private:
    void parse_key(const std::string& key, const std::string& value) {
        if (key == "out")
            out_dir = value;
        else if (key == "seeds" || key == "seed") {
            seeds.clear();
            for (const auto& s : split(value, ',')) seeds.push_back(std::stoull(trim(s)));
        } else if (key == "configs" || key == "config") {
            configs.clear();
            configs_set = true;
            for (const auto& s : split(value, ',')) configs.push_back(trim(s));
        } else if (key == "sizes" || key == "size") {
            sizes.clear();
            sizes_set = true;
            for (const auto& s : split(value, ',')) {
                const std::string t = trim(s);
                sizes.push_back(t == "full" ? -1 : std::stol(t));
            }
        } else if (key == "aux") {
            aux_tasks.clear();
            if (trim(value) != "none")
                for (const auto& s : split(value, ',')) aux_tasks.push_back(task_from_string(trim(s)));
        } else if (key == "embed_dim")
            hp.embed_dim = std::stoi(value);
        else if (key == "hidden_dim")
            hp.hidden_dim = std::stoi(value);
        else if (key == "dropout")
            hp.dropout = std::stod(value);
        else if (key == "batch_size")
            hp.batch_size_main = std::stoi(value);
        else if (key == "aux_tokens")
            hp.aux_tokens_per_batch = std::stoi(value);
        else if (key == "lr")
            lr = std::stod(value);
        else if (key == "patience")
            patience = std::stoi(value);
        else if (key == "max_epochs")
            max_epochs = std::stoi(value);
        else if (key == "target_language")
            target_language = value;
        else if (key == "zs_epochs")
            zs_epochs = std::stoi(value);
        else if (key == "zs_epoch_samples")
            zs_epoch_samples = std::stoi(value);
        else if (key == "zs_update_samples")
            zs_update_samples = std::stoi(value);
        else if (key == "precision")
            precision = value;
        else if (key == "workers")
            workers = std::stoi(value);
        else
            throw SpecError(cat("unknown spec key '", key, "'"));
    }

    static void parse_dataset_key(DatasetSpec& ds, const std::string& key, const std::string& value) {
        if (key == "name")
            ds.name = value;
        else if (key == "task")
            ds.task = task_from_string(value);
        else if (key == "language")
            ds.language = value;
        else if (key == "train")
            ds.train_path = value;
        else if (key == "dev")
            ds.dev_path = value;
        else
            throw SpecError(cat("unknown dataset key '", key, "'"));
    }
};

}  // namespace normshare
