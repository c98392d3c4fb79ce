#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "normshare/adam.hpp"
#include "normshare/metrics.hpp"
#include "normshare/model.hpp"
#include "normshare/synthetic.hpp"

using namespace normshare;

namespace {

std::vector<Prediction> random_predictions(Pcg32& rng, int n) {
    std::vector<Prediction> preds;
    for (int i = 0; i < n; ++i) {
        Prediction p;
        p.source = "s" + std::to_string(rng.below(8));
        p.gold = "g" + std::to_string(rng.below(4));
        p.hypothesis = rng.next_double() < 0.5 ? p.gold : "h" + std::to_string(rng.below(4));
        if (rng.next_double() < 0.3) p.gold = p.source;  // some identity-gold items
        preds.push_back(std::move(p));
    }
    return preds;
}

}  // namespace

TEST_CASE("word_accuracy") {
    SECTION("all correct is 100") {
        std::vector<Prediction> preds = {{"a", "x", "x"}, {"b", "y", "y"}};
        REQUIRE(word_accuracy(preds) == 100.0);
    }

    SECTION("1 of 4 correct is 25") {
        std::vector<Prediction> preds = {{"a", "x", "x"}, {"b", "y", "n"}, {"c", "z", "n"}, {"d", "w", "n"}};
        REQUIRE(word_accuracy(preds) == 25.0);
    }

    SECTION("empty list is a contract error") {
        REQUIRE_THROWS_AS(word_accuracy({}), ContractError);
    }

    SECTION("matches a brute-force count on large random lists") {
        Pcg32 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const auto preds = random_predictions(rng, 500 + static_cast<int>(rng.below(1000)));
            long correct = 0;
            for (const auto& p : preds)
                if (p.hypothesis == p.gold) ++correct;
            const double expect = 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
            REQUIRE(word_accuracy(preds) == Catch::Approx(expect).margin(1e-12));
        }
    }
}

TEST_CASE("identity_baseline") {
    SECTION("autoencoding-shaped data scores 100") {
        TaskDataset ds;
        ds.pairs = {{"a", "a"}, {"bb", "bb"}};
        REQUIRE(identity_baseline(ds) == 100.0);
    }

    SECTION("definitional consistency with word_accuracy on identity hypotheses") {
        Pcg32 rng(17);
        TaskDataset ds;
        std::vector<Prediction> identity_preds;
        for (int i = 0; i < 200; ++i) {
            TokenPair p;
            p.source = "w" + std::to_string(rng.below(30));
            p.target = rng.next_double() < 0.4 ? p.source : "m" + std::to_string(rng.below(30));
            ds.pairs.push_back(p);
            identity_preds.push_back({p.source, p.target, p.source});
        }
        REQUIRE(identity_baseline(ds) == word_accuracy(identity_preds));
    }
}

TEST_CASE("micro_average") {
    SECTION("weighted mean: acc 100 (n=10) and 0 (n=30) gives 25") {
        REQUIRE(micro_average({{100.0, 10L}, {0.0, 30L}}) == 25.0);
    }

    SECTION("equal sizes reduce to the arithmetic mean") {
        REQUIRE(micro_average({{40.0, 50L}, {60.0, 50L}}) == 50.0);
    }

    SECTION("micro over reports equals accuracy over the concatenation, exactly") {
        Pcg32 rng(29);
        std::vector<EvalReport> reports;
        std::vector<Prediction> concatenated;
        for (int d = 0; d < 5; ++d) {
            const auto preds = random_predictions(rng, 50 + static_cast<int>(rng.below(200)));
            EvalReport r = split_report(preds, {}, "d" + std::to_string(d));
            reports.push_back(r);
            concatenated.insert(concatenated.end(), preds.begin(), preds.end());
        }
        REQUIRE(micro_average(reports) == word_accuracy(concatenated));
    }

    SECTION("paper table reproduction: dev-size weighting") {
        // Dev sizes and per-dataset accuracies from the evaluation tables; the
        // published micro-averages for the 1k-token experiment reproduce exactly.
        const std::vector<long> dev = {45996, 9712, 16334, 11650, 16707, 6109, 26749, 5841, 20878, 2245};
        const std::vector<double> single = {54.84, 56.72, 66.95, 74.68, 42.44, 63.40, 72.23, 74.06, 86.34, 69.98};
        const std::vector<double> autoenc = {56.41, 65.05, 76.94, 77.87, 40.39, 67.31, 76.28, 74.44, 87.86, 70.29};
        const std::vector<double> ident = {30.16, 43.57, 75.47, 72.29, 17.81, 47.77, 65.18, 39.84, 85.58, 59.24};
        auto weighted = [&](const std::vector<double>& acc) {
            std::vector<std::pair<double, long>> input;
            for (size_t i = 0; i < acc.size(); ++i) input.push_back({acc[i], dev[i]});
            return micro_average(input);
        };
        REQUIRE(weighted(single) == Catch::Approx(64.46).margin(0.01));
        REQUIRE(weighted(autoenc) == Catch::Approx(67.46).margin(0.01));
        // The identity column recomputes to 51.600; the printed 50.17 is not
        // consistent with the same dev sizes (see the single/autoenc checks).
        REQUIRE(weighted(ident) == Catch::Approx(51.600).margin(0.01));
    }
}

TEST_CASE("error_reduction") {
    SECTION("half the remaining errors removed") {
        REQUIRE(error_reduction(50.0, 75.0) == Catch::Approx(50.0).margin(1e-12));
    }

    SECTION("table-derived value: (66.95, 76.94) -> 30.23") {
        REQUIRE(error_reduction(66.95, 76.94) == Catch::Approx(30.2269).margin(0.01));
    }

    SECTION("regressions go negative") {
        REQUIRE(error_reduction(70.0, 65.0) == Catch::Approx(-16.6667).margin(1e-3));
    }

    SECTION("identity and monotonicity") {
        REQUIRE(error_reduction(40.0, 40.0) == 0.0);
        double prev = -1e9;
        for (double sys = 10.0; sys <= 90.0; sys += 5.0) {
            const double er = error_reduction(40.0, sys);
            REQUIRE(er > prev);
            prev = er;
        }
    }

    SECTION("baseline 100 is undefined") {
        REQUIRE_THROWS_AS(error_reduction(100.0, 99.0), Error);
    }
}

TEST_CASE("split_report") {
    SECTION("known/unknown and identity splits partition the data") {
        std::vector<Prediction> preds = {{"a", "a", "a"}, {"b", "c", "c"}};
        const auto r = split_report(preds, {"a"}, "toy");
        REQUIRE(r.n == 2);
        REQUIRE(r.known_marginal[1].n == 1);
        REQUIRE(r.known_marginal[0].n == 1);
        REQUIRE(r.identity_marginal[1].n == 1);
        REQUIRE(r.cells[1][1].n == 1);  // "a": known, identity-gold
        REQUIRE(r.cells[0][0].n == 1);  // "b": unknown, non-identity
        REQUIRE(r.accuracy == 100.0);
    }

    SECTION("gold == source everywhere puts all mass in the identity marginal") {
        std::vector<Prediction> preds = {{"a", "a", "x"}, {"b", "b", "b"}};
        const auto r = split_report(preds, {}, "toy");
        REQUIRE(r.identity_marginal[1].n == r.n);
        REQUIRE(r.identity_marginal[0].n == 0);
    }

    SECTION("cell populations always sum to n; marginals micro-average their cells") {
        Pcg32 rng(31);
        for (int trial = 0; trial < 25; ++trial) {
            const auto preds = random_predictions(rng, 100 + static_cast<int>(rng.below(400)));
            std::set<std::string> train_sources;
            for (int i = 0; i < 5; ++i) train_sources.insert("s" + std::to_string(i));
            const auto r = split_report(preds, train_sources, "prop");
            long cell_total = 0, cell_correct = 0;
            for (int k = 0; k < 2; ++k)
                for (int i = 0; i < 2; ++i) {
                    cell_total += r.cells[k][i].n;
                    cell_correct += r.cells[k][i].correct;
                }
            REQUIRE(cell_total == r.n);
            REQUIRE(cell_correct == r.correct);
            for (int k = 0; k < 2; ++k)
                REQUIRE(r.known_marginal[k].n == r.cells[k][0].n + r.cells[k][1].n);
            for (int i = 0; i < 2; ++i)
                REQUIRE(r.identity_marginal[i].n == r.cells[0][i].n + r.cells[1][i].n);
        }
    }
}

TEST_CASE("probe_auxiliary_model") {
    // A perfect autoencoder probed as a normalizer scores exactly the identity
    // baseline, so probe the real model only for well-definedness and use a
    // hand-built identity check for the equality.
    SECTION("untrained model gives a well-defined accuracy") {
        Vocabulary src, tgt;
        for (int i = 0; i < 8; ++i) {
            src.add(std::string(1, static_cast<char>('a' + i)));
            tgt.add(std::string(1, static_cast<char>('a' + i)));
        }
        src.freeze();
        tgt.freeze();
        HyperParams hp;
        hp.embed_dim = 6;
        hp.hidden_dim = 8;
        auto model = build_model<double>(SharingConfig::full(), {"autoencoding"}, src, tgt, hp, 3);
        TaskDataset norm;
        norm.task = TaskKind::normalization;
        norm.pairs = {{"ab", "ab"}, {"cd", "dc"}, {"zz", "zz"}};  // z is <unk> in the vocab
        const double acc = probe_auxiliary_model(model, "autoencoding", norm);
        REQUIRE(acc >= 0.0);
        REQUIRE(acc <= 100.0);
    }

    SECTION("identity-function hypotheses score the identity baseline") {
        TaskDataset norm;
        norm.pairs = {{"ab", "ab"}, {"cd", "dc"}, {"ee", "ee"}};
        std::vector<Prediction> identity;
        for (const auto& p : norm.pairs) identity.push_back({p.source, p.target, p.source});
        REQUIRE(word_accuracy(identity) == identity_baseline(norm));
    }
}

TEST_CASE("pearson_with_ci") {
    SECTION("perfect positive and negative correlation") {
        const std::vector<double> xs = {1, 2, 3, 4, 5};
        std::vector<double> ys;
        for (double x : xs) ys.push_back(2 * x + 1);
        REQUIRE(pearson_with_ci(xs, ys).r == Catch::Approx(1.0).margin(1e-12));
        for (auto& y : ys) y = -y;
        REQUIRE(pearson_with_ci(xs, ys).r == Catch::Approx(-1.0).margin(1e-12));
    }

    SECTION("worked example with Fisher interval") {
        // Hand-computed: cov=10, var_x=10, var_y=14.8 => r = 10/sqrt(148).
        const std::vector<double> xs = {1, 2, 3, 4, 5};
        const std::vector<double> ys = {2, 1, 4, 3, 6};
        const auto res = pearson_with_ci(xs, ys);
        REQUIRE(res.r == Catch::Approx(10.0 / std::sqrt(148.0)).margin(1e-12));
        REQUIRE(res.r == Catch::Approx(0.82199).margin(1e-5));
        REQUIRE(res.lo == Catch::Approx(-0.21934).margin(1e-4));
        REQUIRE(res.hi == Catch::Approx(0.98785).margin(1e-4));
    }

    SECTION("brute-force agreement on random instances") {
        Pcg32 rng(41);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 3 + static_cast<int>(rng.below(40));
            std::vector<double> xs, ys;
            for (int i = 0; i < n; ++i) {
                xs.push_back(rng.uniform(-5, 5));
                ys.push_back(rng.uniform(-5, 5));
            }
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < n; ++i) {
                sx += xs[static_cast<size_t>(i)];
                sy += ys[static_cast<size_t>(i)];
                sxx += xs[static_cast<size_t>(i)] * xs[static_cast<size_t>(i)];
                syy += ys[static_cast<size_t>(i)] * ys[static_cast<size_t>(i)];
                sxy += xs[static_cast<size_t>(i)] * ys[static_cast<size_t>(i)];
            }
            const double num = n * sxy - sx * sy;
            const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
            REQUIRE(pearson_with_ci(xs, ys).r == Catch::Approx(num / den).margin(1e-9));
        }
    }

    SECTION("affine invariance; sign flip under negative scale") {
        Pcg32 rng(43);
        std::vector<double> xs, ys;
        for (int i = 0; i < 12; ++i) {
            xs.push_back(rng.uniform(0, 10));
            ys.push_back(rng.uniform(0, 10));
        }
        const double base = pearson_with_ci(xs, ys).r;
        std::vector<double> xs2;
        for (double x : xs) xs2.push_back(3.5 * x + 11.0);
        REQUIRE(pearson_with_ci(xs2, ys).r == Catch::Approx(base).margin(1e-12));
        for (auto& x : xs2) x = -x;
        REQUIRE(pearson_with_ci(xs2, ys).r == Catch::Approx(-base).margin(1e-12));
    }

    SECTION("contract violations") {
        REQUIRE_THROWS_AS(pearson_with_ci({1, 2}, {1, 2}), ContractError);
        REQUIRE_THROWS_AS(pearson_with_ci({1, 1, 1}, {1, 2, 3}), Error);
    }
}

TEST_CASE("sequence similarity probe metrics") {
    SECTION("lcs and levenshtein on simple cases") {
        const auto a = split_symbols("kitten");
        const auto b = split_symbols("sitting");
        REQUIRE(levenshtein_distance(a, b) == 3);
        REQUIRE(longest_common_subsequence(a, b) == 4);  // ittn
        REQUIRE(levenshtein_distance(a, a) == 0);
        REQUIRE(longest_common_subsequence(a, a) == 6);
    }

    SECTION("similarity is 100 exactly when predictions match") {
        std::vector<Prediction> preds = {{"x", "abc", "abc"}, {"y", "abc", "abc"}};
        REQUIRE(prediction_similarity(preds, ProbeMetric::lcs) == 100.0);
        REQUIRE(prediction_similarity(preds, ProbeMetric::levenshtein) == 100.0);
        REQUIRE(prediction_similarity(preds, ProbeMetric::accuracy) == 100.0);
    }
}
