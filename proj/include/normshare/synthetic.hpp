// Synthetic corpus generator: a Zipf-sampled token stream over a generated
// lexicon, plus probabilistic character rewrites that play the role of
// historical spelling variation. Stands in for the real corpora at desk scale.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/dataset.hpp"
#include "normshare/rng.hpp"

namespace normshare {

struct RewriteRule {
    enum class Anchor { initial, final, any };
    std::string from;
    std::string to;  // empty = deletion
    Anchor where = Anchor::any;
    double prob = 1.0;
};

inline const char* anchor_name(RewriteRule::Anchor a) {
    switch (a) {
        case RewriteRule::Anchor::initial: return "initial";
        case RewriteRule::Anchor::final: return "final";
        case RewriteRule::Anchor::any: return "any";
    }
    return "?";
}

// Rule syntax: "FROM > TO @ ANCHOR p=P"; TO may be "_" for deletion.
inline RewriteRule parse_rule(const std::string& text) {
    const auto gt = text.find('>');
    const auto at = text.find('@');
    const auto pp = text.find("p=");
    if (gt == std::string::npos || at == std::string::npos || pp == std::string::npos || !(gt < at && at < pp))
        throw ParseError(cat("bad rule '", text, "' (expected FROM > TO @ ANCHOR p=P)"));
    RewriteRule r;
    r.from = trim(text.substr(0, gt));
    r.to = trim(text.substr(gt + 1, at - gt - 1));
    if (r.to == "_") r.to.clear();
    const std::string anchor = trim(text.substr(at + 1, pp - at - 1));
    if (anchor == "initial")
        r.where = RewriteRule::Anchor::initial;
    else if (anchor == "final")
        r.where = RewriteRule::Anchor::final;
    else if (anchor == "any")
        r.where = RewriteRule::Anchor::any;
    else
        throw ParseError(cat("bad rule anchor '", anchor, "' in '", text, "'"));
    try {
        r.prob = std::stod(trim(text.substr(pp + 2)));
    } catch (const std::exception&) {
        throw ParseError(cat("bad rule probability in '", text, "'"));
    }
    if (r.from.empty()) throw ParseError(cat("rule with empty FROM: '", text, "'"));
    if (r.prob < 0.0 || r.prob > 1.0) throw ParseError(cat("rule probability outside [0,1]: '", text, "'"));
    return r;
}

inline std::string render_rule(const RewriteRule& r) {
    return cat(r.from, " > ", r.to.empty() ? "_" : r.to, " @ ", anchor_name(r.where), " p=", r.prob);
}

// Rules are applied in order; @any scans left to right and a firing site is
// skipped past so a rule cannot re-trigger on its own output.
inline std::string apply_rules(const std::string& word, const std::vector<RewriteRule>& rules, Pcg32& rng) {
    std::string w = word;
    for (const auto& r : rules) {
        switch (r.where) {
            case RewriteRule::Anchor::initial:
                if (w.rfind(r.from, 0) == 0 && rng.next_double() < r.prob) w = r.to + w.substr(r.from.size());
                break;
            case RewriteRule::Anchor::final:
                if (w.size() >= r.from.size() && w.compare(w.size() - r.from.size(), r.from.size(), r.from) == 0 &&
                    rng.next_double() < r.prob)
                    w = w.substr(0, w.size() - r.from.size()) + r.to;
                break;
            case RewriteRule::Anchor::any: {
                std::string out;
                size_t i = 0;
                while (i < w.size()) {
                    if (w.compare(i, r.from.size(), r.from) == 0 && rng.next_double() < r.prob) {
                        out += r.to;
                        i += r.from.size();
                    } else {
                        out += w[i];
                        ++i;
                    }
                }
                w = std::move(out);
                break;
            }
        }
    }
    return w;
}

// Per-language alphabets: a deterministic subset of a shared consonant/vowel
// pool so different languages overlap but are not identical.
struct LanguageProfile {
    std::string consonants;
    std::string vowels;
    std::vector<std::string> suffixes;

    static LanguageProfile make(const std::string& language) {
        uint64_t h = 1469598103934665603ull;
        for (char c : language) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
        Pcg32 rng(h);
        const std::string cons_pool = "bdfghklmnprstvz";
        const std::string vowel_pool = "aeiou";
        auto choose = [&rng](const std::string& pool, size_t count) {
            std::vector<char> v(pool.begin(), pool.end());
            rng.shuffle(v);
            std::string out(v.begin(), v.begin() + static_cast<long>(count));
            std::sort(out.begin(), out.end());
            return out;
        };
        LanguageProfile p;
        p.consonants = choose(cons_pool, 10);
        p.vowels = choose(vowel_pool, 4);
        const std::vector<std::string> suffix_pool = {"en", "er", "es", "est", "ung", "ing", "ar", "um", "al", "or"};
        std::vector<std::string> sfx = suffix_pool;
        rng.shuffle(sfx);
        p.suffixes.assign(sfx.begin(), sfx.begin() + 4);
        return p;
    }
};

// A concrete per-language ruleset whose firing probabilities scale with
// `intensity` in [0,1]; intensity 0 disables all corruption.
inline std::vector<RewriteRule> default_rules(const std::string& language, double intensity) {
    if (intensity < 0.0 || intensity > 1.0) throw ParameterError(cat("corruption intensity outside [0,1]: ", intensity));
    const LanguageProfile p = LanguageProfile::make(language);
    std::vector<RewriteRule> rules;
    if (intensity == 0.0) return rules;
    auto rule = [&](std::string from, std::string to, RewriteRule::Anchor where, double base) {
        RewriteRule r;
        r.from = std::move(from);
        r.to = std::move(to);
        r.where = where;
        r.prob = std::min(1.0, base * intensity);
        rules.push_back(std::move(r));
    };
    const std::string v = p.vowels;
    const std::string c = p.consonants;
    // vowel shift, consonant doubling, final-vowel drop, initial substitution
    rule(std::string(1, v[0]), std::string(1, v[1]), RewriteRule::Anchor::any, 0.9);
    rule(std::string(1, v[2]), std::string(1, v[2]) + std::string(1, v[3]), RewriteRule::Anchor::any, 0.7);
    rule(std::string(1, c[1]), std::string(2, c[1]), RewriteRule::Anchor::any, 0.6);
    rule(std::string(1, v[3]), "", RewriteRule::Anchor::final, 0.8);
    rule(std::string(1, c[0]), std::string(1, c[2]), RewriteRule::Anchor::initial, 0.9);
    rule(std::string(1, c[4]) + std::string(1, v[1]), std::string(1, c[4]) + std::string(1, v[0]),
         RewriteRule::Anchor::any, 0.5);
    return rules;
}

// Deterministic pseudo-phoneme mapping; one output symbol per character.
inline std::string pseudo_phonemes(const std::string& word) {
    static const char* vowel_sym[] = {"AH", "EH", "IY", "OW", "UW"};
    std::string out;
    for (char ch : word) {
        if (!out.empty()) out += ' ';
        const char* vp = nullptr;
        switch (ch) {
            case 'a': vp = vowel_sym[0]; break;
            case 'e': vp = vowel_sym[1]; break;
            case 'i': vp = vowel_sym[2]; break;
            case 'o': vp = vowel_sym[3]; break;
            case 'u': vp = vowel_sym[4]; break;
            default: break;
        }
        if (vp)
            out += vp;
        else
            out += static_cast<char>(ch - 'a' + 'A');
    }
    return out;
}

struct SyntheticConfig {
    uint64_t seed = 1;
    std::string language = "syn";
    int lexicon_size = 500;
    std::vector<RewriteRule> rules;
    int norm_train_tokens = 2000;
    int norm_dev_tokens = 500;
    int autoenc_tokens = 2000;
    int g2p_entries = 400;
    int lemma_entries = 400;
    double zipf_s = 1.1;
};

struct SyntheticCorpus {
    TaskDataset norm_train;
    TaskDataset norm_dev;
    TaskDataset autoencoding;
    TaskDataset g2p;
    TaskDataset lemmatization;
};

class WordSampler {
public:
    WordSampler(const LanguageProfile& profile, int lexicon_size, double zipf_s, Pcg32& rng) {
        std::set<std::string> seen;
        while (static_cast<int>(lexicon_.size()) < lexicon_size) {
            const int syllables = 1 + static_cast<int>(rng.below(3));
            std::string w;
            for (int s = 0; s < syllables; ++s) {
                w += profile.consonants[rng.below(static_cast<uint32_t>(profile.consonants.size()))];
                w += profile.vowels[rng.below(static_cast<uint32_t>(profile.vowels.size()))];
                if (rng.next_double() < 0.4)
                    w += profile.consonants[rng.below(static_cast<uint32_t>(profile.consonants.size()))];
            }
            if (seen.insert(w).second) lexicon_.push_back(w);
        }
        cum_.resize(lexicon_.size());
        double total = 0;
        for (size_t i = 0; i < lexicon_.size(); ++i) {
            total += 1.0 / std::pow(static_cast<double>(i + 1), zipf_s);
            cum_[i] = total;
        }
        for (double& c : cum_) c /= total;
    }

    const std::string& sample(Pcg32& rng) const {
        const double u = rng.next_double();
        const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
        const size_t idx = std::min(lexicon_.size() - 1, static_cast<size_t>(it - cum_.begin()));
        return lexicon_[idx];
    }

    const std::vector<std::string>& lexicon() const { return lexicon_; }

private:
    std::vector<std::string> lexicon_;
    std::vector<double> cum_;
};

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
    Pcg32 rng(cfg.seed);
    const LanguageProfile profile = LanguageProfile::make(cfg.language);
    WordSampler sampler(profile, cfg.lexicon_size, cfg.zipf_s, rng);

    SyntheticCorpus corpus;
    auto init = [&](TaskDataset& ds, TaskKind task, const char* suffix) {
        ds.task = task;
        ds.language = cfg.language;
        ds.name = cfg.language + "_" + suffix;
    };
    init(corpus.norm_train, TaskKind::normalization, "norm");
    init(corpus.norm_dev, TaskKind::normalization, "norm_dev");
    init(corpus.autoencoding, TaskKind::autoencoding, "autoenc");
    init(corpus.g2p, TaskKind::g2p, "g2p");
    init(corpus.lemmatization, TaskKind::lemmatization, "lemma");

    auto norm_pair = [&]() {
        const std::string& modern = sampler.sample(rng);
        return TokenPair{apply_rules(modern, cfg.rules, rng), modern};
    };
    for (int i = 0; i < cfg.norm_train_tokens; ++i) corpus.norm_train.pairs.push_back(norm_pair());
    for (int i = 0; i < cfg.norm_dev_tokens; ++i) corpus.norm_dev.pairs.push_back(norm_pair());

    for (int i = 0; i < cfg.autoenc_tokens; ++i) {
        const std::string& w = sampler.sample(rng);
        corpus.autoencoding.pairs.push_back({w, w});
    }

    const auto& lex = sampler.lexicon();
    const int g2p_n = std::min<int>(cfg.g2p_entries, static_cast<int>(lex.size()));
    for (int i = 0; i < g2p_n; ++i) corpus.g2p.pairs.push_back({lex[static_cast<size_t>(i)], pseudo_phonemes(lex[static_cast<size_t>(i)])});

    const int lemma_n = std::min<int>(cfg.lemma_entries, static_cast<int>(lex.size()));
    for (int i = 0; i < lemma_n; ++i) {
        const std::string& stem = lex[static_cast<size_t>(i)];
        const std::string& sfx = profile.suffixes[rng.below(static_cast<uint32_t>(profile.suffixes.size()))];
        corpus.lemmatization.pairs.push_back({stem + sfx, stem});
    }
    return corpus;
}

}  // namespace normshare
