// Corpus ingestion: pair files, truncation, the deterministic 90/10
// early-stopping split, zero-shot tagging and id-sequence encoding.
#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/vocab.hpp"

namespace normshare {

enum class TaskKind { normalization, autoencoding, g2p, lemmatization };

inline const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::normalization: return "normalization";
        case TaskKind::autoencoding: return "autoencoding";
        case TaskKind::g2p: return "g2p";
        case TaskKind::lemmatization: return "lemmatization";
    }
    return "?";
}

inline const char* task_short_name(TaskKind t) {
    switch (t) {
        case TaskKind::normalization: return "norm";
        case TaskKind::autoencoding: return "autoenc";
        case TaskKind::g2p: return "g2p";
        case TaskKind::lemmatization: return "lemma";
    }
    return "?";
}

inline TaskKind task_from_string(const std::string& s) {
    if (s == "normalization" || s == "norm") return TaskKind::normalization;
    if (s == "autoencoding" || s == "autoenc" || s == "autoencoder") return TaskKind::autoencoding;
    if (s == "g2p") return TaskKind::g2p;
    if (s == "lemmatization" || s == "lemma") return TaskKind::lemmatization;
    throw ParseError(cat("unknown task '", s, "' (expected normalization|autoencoding|g2p|lemmatization)"));
}

struct TokenPair {
    std::string source;
    std::string target;
};

struct TaskDataset {
    TaskKind task = TaskKind::normalization;
    std::string language;
    std::string name;
    std::vector<TokenPair> pairs;

    size_t size() const { return pairs.size(); }
};

// Target-side symbolization: g2p targets are space-separated phoneme symbols,
// everything else is per-character.
inline std::vector<std::string> symbolize_target(const std::string& target, TaskKind task) {
    if (task == TaskKind::g2p) {
        std::vector<std::string> out;
        for (auto& part : split(target, ' '))
            if (!part.empty()) out.push_back(part);
        return out;
    }
    return split_symbols(target);
}

inline std::vector<std::string> symbolize_source(const std::string& source) { return split_symbols(source); }

// Loads a two-column tab-separated pair file. Autoencoding also accepts
// one-column word lists (the word is duplicated). Blank lines and lines
// starting with '#' are skipped; any other malformed line reports its number.
inline TaskDataset load_pairs(const std::string& path, TaskKind task, const std::string& language,
                              const std::string& name = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(cat("cannot open pair file: ", path));
    TaskDataset ds;
    ds.task = task;
    ds.language = language;
    ds.name = name.empty() ? path : name;

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        const auto cols = split(line, '\t');
        TokenPair pair;
        if (cols.size() == 1) {
            if (task != TaskKind::autoencoding)
                throw ParseError(cat(path, ":", line_no, ": expected two tab-separated columns"));
            pair.source = trim(cols[0]);
            pair.target = pair.source;
        } else if (cols.size() == 2) {
            pair.source = trim(cols[0]);
            pair.target = trim(cols[1]);
            if (task == TaskKind::autoencoding && pair.source != pair.target)
                throw ParseError(cat(path, ":", line_no, ": autoencoding pair with source != target"));
        } else {
            throw ParseError(cat(path, ":", line_no, ": expected at most two tab-separated columns, got ",
                                 cols.size()));
        }
        if (pair.source.empty() || pair.target.empty())
            throw ParseError(cat(path, ":", line_no, ": empty token"));
        // Word-by-word model: drop tokens with internal whitespace (g2p targets
        // legitimately use spaces as the phoneme separator).
        if (contains_inner_whitespace(pair.source)) continue;
        if (task != TaskKind::g2p && contains_inner_whitespace(pair.target)) continue;
        ds.pairs.push_back(std::move(pair));
    }
    if (ds.pairs.empty()) throw Error(cat(path, ": no usable pairs"));
    return ds;
}

inline void save_pairs(const TaskDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(cat("cannot write pair file: ", path));
    for (const auto& p : ds.pairs) out << p.source << '\t' << p.target << '\n';
}

inline TaskDataset truncate(const TaskDataset& ds, size_t n) {
    if (n < 1) throw ContractError("truncate: n must be >= 1");
    TaskDataset out = ds;
    if (out.pairs.size() > n) out.pairs.resize(n);
    return out;
}

// First ceil(ratio * n) pairs become training data, the rest validation.
// Deterministic prefix split; no shuffling.
inline std::pair<TaskDataset, TaskDataset> split_train_validation(const TaskDataset& ds, double ratio = 0.9) {
    if (ds.pairs.size() < 10) throw ContractError(cat("split: dataset too small (", ds.pairs.size(), " < 10)"));
    const size_t train_n = static_cast<size_t>(std::ceil(ratio * static_cast<double>(ds.pairs.size())));
    TaskDataset train = ds, val = ds;
    train.pairs.assign(ds.pairs.begin(), ds.pairs.begin() + static_cast<long>(train_n));
    val.pairs.assign(ds.pairs.begin() + static_cast<long>(train_n), ds.pairs.end());
    return {std::move(train), std::move(val)};
}

inline std::string lang_tag(const std::string& language) { return make_tag("lang", language); }
inline std::string task_tag(TaskKind task) { return make_tag("task", task_short_name(task)); }

// Prepends the language and task identifier symbols to the source side.
// Re-tagging an already tagged pair is a contract violation.
inline TokenPair tag_for_zero_shot(const TokenPair& pair, const std::string& language, TaskKind task,
                                   const Vocabulary* src_vocab = nullptr) {
    if (starts_with_tag(pair.source))
        throw ContractError(cat("pair already tagged: ", pair.source));
    const std::string lt = lang_tag(language);
    const std::string tt = task_tag(task);
    if (src_vocab && (!src_vocab->contains(lt) || !src_vocab->contains(tt)))
        throw Error(cat("unregistered zero-shot tag for language '", language, "' / task '", task_name(task), "'"));
    TokenPair out;
    out.source = lt + tt + pair.source;
    out.target = pair.target;
    return out;
}

// Builds frozen source/target vocabularies over the given datasets. When tag
// sets are supplied (zero-shot mode), one source-side symbol is registered per
// language and per task before the corpus characters.
inline std::pair<Vocabulary, Vocabulary> build_vocabularies(
    const std::vector<const TaskDataset*>& datasets,
    const std::vector<std::string>& tag_languages = {},
    const std::vector<TaskKind>& tag_tasks = {}) {
    if (datasets.empty()) throw ContractError("build_vocabularies: need at least one dataset");
    Vocabulary src, tgt;
    for (const auto& lang : tag_languages) src.add(lang_tag(lang));
    for (TaskKind t : tag_tasks) src.add(task_tag(t));
    for (const TaskDataset* ds : datasets) {
        for (const auto& pair : ds->pairs) {
            for (const auto& s : symbolize_source(pair.source)) src.add(s);
            for (const auto& s : symbolize_target(pair.target, ds->task)) tgt.add(s);
        }
    }
    src.freeze();
    tgt.freeze();
    return {std::move(src), std::move(tgt)};
}

struct EncodedPair {
    std::vector<int> src;
    std::vector<int> tgt;
};

inline EncodedPair encode_pair(const TokenPair& pair, TaskKind task, const Vocabulary& src_vocab,
                               const Vocabulary& tgt_vocab) {
    EncodedPair out;
    out.src = src_vocab.encode(symbolize_source(pair.source));
    out.tgt = tgt_vocab.encode(symbolize_target(pair.target, task));
    return out;
}

inline std::vector<EncodedPair> encode_dataset(const TaskDataset& ds, const Vocabulary& src_vocab,
                                               const Vocabulary& tgt_vocab) {
    std::vector<EncodedPair> out;
    out.reserve(ds.pairs.size());
    for (const auto& p : ds.pairs) out.push_back(encode_pair(p, ds.task, src_vocab, tgt_vocab));
    return out;
}

}  // namespace normshare
