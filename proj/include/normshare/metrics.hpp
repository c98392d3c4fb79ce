// Evaluation kit: word accuracy, identity baseline, micro-average, error
// reduction, known/unknown and identity splits, auxiliary-model probing, and
// Pearson correlation with Fisher-z confidence intervals.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/dataset.hpp"
#include "normshare/decoding.hpp"
#include "normshare/model.hpp"

namespace normshare {

struct Prediction {
    std::string source;
    std::string gold;
    std::string hypothesis;
};

struct SplitCell {
    long n = 0;
    long correct = 0;
    double accuracy() const { return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(n); }
};

struct EvalReport {
    std::string dataset;
    long n = 0;
    long correct = 0;
    double accuracy = 0.0;
    double identity_accuracy = 0.0;
    // cells[known][identity_gold]: known = source seen in training,
    // identity_gold = gold equals source.
    SplitCell cells[2][2];
    SplitCell known_marginal[2];     // [0]=unknown, [1]=known
    SplitCell identity_marginal[2];  // [0]=non-identity, [1]=identity
    bool has_splits = false;
};

inline double word_accuracy(const std::vector<Prediction>& preds) {
    if (preds.empty()) throw ContractError("word_accuracy: empty prediction list");
    long correct = 0;
    for (const auto& p : preds)
        if (p.hypothesis == p.gold) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

// Accuracy when every source is left unchanged.
inline double identity_baseline(const TaskDataset& pairs) {
    if (pairs.pairs.empty()) throw ContractError("identity_baseline: empty dataset");
    long correct = 0;
    for (const auto& p : pairs.pairs)
        if (p.source == p.target) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.pairs.size());
}

// Accuracy over the concatenation of all datasets (token-weighted).
inline double micro_average(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ContractError("micro_average: no reports");
    double correct = 0.0;
    long total = 0;
    for (const auto& r : reports) {
        if (r.n <= 0) throw ContractError(cat("micro_average: report '", r.dataset, "' has no token count"));
        correct += static_cast<double>(r.correct);
        total += r.n;
    }
    return 100.0 * correct / static_cast<double>(total);
}

inline double micro_average(const std::vector<std::pair<double, long>>& acc_and_n) {
    if (acc_and_n.empty()) throw ContractError("micro_average: no inputs");
    double weighted = 0.0;
    long total = 0;
    for (const auto& [acc, n] : acc_and_n) {
        if (n <= 0) throw ContractError("micro_average: nonpositive token count");
        weighted += acc * static_cast<double>(n);
        total += n;
    }
    return weighted / static_cast<double>(total);
}

// Relative reduction of the remaining error, in percent; negative when the
// system is worse than the baseline.
inline double error_reduction(double baseline_acc, double system_acc) {
    if (baseline_acc >= 100.0)
        throw Error(cat("error_reduction undefined: baseline accuracy is ", baseline_acc));
    return 100.0 * (system_acc - baseline_acc) / (100.0 - baseline_acc);
}

inline EvalReport split_report(const std::vector<Prediction>& preds,
                               const std::set<std::string>& train_sources,
                               const std::string& dataset_name = "") {
    if (preds.empty()) throw ContractError("split_report: empty prediction list");
    EvalReport r;
    r.dataset = dataset_name;
    r.has_splits = true;
    for (const auto& p : preds) {
        const int known = train_sources.count(p.source) ? 1 : 0;
        const int ident = (p.source == p.gold) ? 1 : 0;
        const int ok = (p.hypothesis == p.gold) ? 1 : 0;
        r.n += 1;
        r.correct += ok;
        r.cells[known][ident].n += 1;
        r.cells[known][ident].correct += ok;
        r.known_marginal[known].n += 1;
        r.known_marginal[known].correct += ok;
        r.identity_marginal[ident].n += 1;
        r.identity_marginal[ident].correct += ok;
    }
    r.accuracy = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.n);
    long ident_n = r.identity_marginal[1].n;
    r.identity_accuracy = 100.0 * static_cast<double>(ident_n) / static_cast<double>(r.n);
    return r;
}

// Decodes a dataset with a (frozen) model and scores against the gold side.
template <class Real>
std::vector<Prediction> predict_dataset(MultiTaskModel<Real>& model, const std::string& task,
                                        const TaskDataset& data) {
    std::vector<Prediction> preds;
    preds.reserve(data.pairs.size());
    for (const auto& pair : data.pairs) {
        const auto src_ids = model.src_vocab().encode(symbolize_source(pair.source));
        Prediction p;
        p.source = pair.source;
        p.gold = pair.target;
        p.hypothesis = greedy_decode(model, task, src_ids, data.task);
        preds.push_back(std::move(p));
    }
    return preds;
}

// Feeds normalization data through a model trained on an auxiliary task, as if
// it were a normalizer. Vocabulary gaps go through <unk>; never aborts.
template <class Real>
double probe_auxiliary_model(MultiTaskModel<Real>& aux_model, const std::string& task,
                             const TaskDataset& norm_dataset) {
    const auto preds = predict_dataset(aux_model, task, norm_dataset);
    return word_accuracy(preds);
}

// ---- optional sequence-similarity probe metrics ----

inline size_t longest_common_subsequence(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline size_t levenshtein_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

enum class ProbeMetric { accuracy, lcs, levenshtein };

// Mean similarity in [0,100]: exact match for accuracy, otherwise a normalized
// sequence similarity over character symbols.
inline double prediction_similarity(const std::vector<Prediction>& preds, ProbeMetric metric) {
    if (preds.empty()) throw ContractError("prediction_similarity: empty prediction list");
    if (metric == ProbeMetric::accuracy) return word_accuracy(preds);
    double total = 0.0;
    for (const auto& p : preds) {
        const auto h = split_symbols(p.hypothesis);
        const auto g = split_symbols(p.gold);
        const size_t longest = std::max(h.size(), g.size());
        if (longest == 0) {
            total += 1.0;
            continue;
        }
        if (metric == ProbeMetric::lcs)
            total += static_cast<double>(longest_common_subsequence(h, g)) / static_cast<double>(longest);
        else
            total += 1.0 - static_cast<double>(levenshtein_distance(h, g)) / static_cast<double>(longest);
    }
    return 100.0 * total / static_cast<double>(preds.size());
}

// ---- Pearson correlation with Fisher-z confidence interval ----

namespace detail {

// Acklam's rational approximation to the standard normal quantile.
inline double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw ParameterError(cat("normal quantile: p outside (0,1): ", p));
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace detail

struct PearsonResult {
    double r = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline PearsonResult pearson_with_ci(const std::vector<double>& xs, const std::vector<double>& ys,
                                     double confidence = 0.95) {
    if (xs.size() != ys.size()) throw ContractError("pearson: length mismatch");
    const size_t n = xs.size();
    if (n < 3) throw ContractError(cat("pearson: need at least 3 points, got ", n));
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double cov = 0, vx = 0, vy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) throw Error("pearson undefined: zero variance input");
    PearsonResult out;
    out.r = cov / std::sqrt(vx * vy);
    // Fisher z interval, back-transformed.
    const double clamped = std::clamp(out.r, -0.999999999, 0.999999999);
    const double z = std::atanh(clamped);
    const double zcrit = detail::normal_quantile(0.5 + confidence / 2.0);
    const double half = zcrit / std::sqrt(static_cast<double>(n) - 3.0);
    out.lo = std::tanh(z - half);
    out.hi = std::tanh(z + half);
    return out;
}

}  // namespace normshare
