#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>
#include <unistd.h>

#include "normshare/synthetic.hpp"
#include "normshare/trainer.hpp"

using namespace normshare;

namespace {

TaskDataset make_ds(TaskKind task, const std::string& language, const std::string& name, int n,
                    const std::string& salt = "") {
    TaskDataset ds;
    ds.task = task;
    ds.language = language;
    ds.name = name;
    for (int i = 0; i < n; ++i) {
        const std::string w = "w" + salt + std::to_string(i % 23);
        ds.pairs.push_back({w, task == TaskKind::autoencoding ? w : "t" + std::to_string(i % 7)});
    }
    return ds;
}

HyperParams tiny_hp(int embed = 8, int hidden = 12) {
    HyperParams hp;
    hp.embed_dim = embed;
    hp.hidden_dim = hidden;
    hp.dropout = 0.1;
    return hp;
}

}  // namespace

TEST_CASE("mtl batch scheduler") {
    Pcg32 rng(5);

    SECTION("3 aux tasks: every update sees 30 + 3x10 pairs") {
        HyperParams hp;
        MtlBatcher batcher(900, {57, 1000, 13}, hp, rng);
        const auto epoch = batcher.next_epoch(rng);
        REQUIRE(epoch.size() == 30);  // 900 / 30
        for (const auto& b : epoch) {
            REQUIRE(b.main.size() == 30);
            REQUIRE(b.aux.size() == 3);
            for (const auto& a : b.aux) REQUIRE(a.size() == 10);
        }
    }

    SECTION("no aux tasks degenerates to plain 30-pair batches") {
        HyperParams hp;
        MtlBatcher batcher(90, {}, hp, rng);
        const auto epoch = batcher.next_epoch(rng);
        REQUIRE(epoch.size() == 3);
        for (const auto& b : epoch) {
            REQUIRE(b.main.size() == 30);
            REQUIRE(b.aux.empty());
        }
    }

    SECTION("short final main batch; aux stays balanced") {
        HyperParams hp;
        MtlBatcher batcher(95, {7}, hp, rng);
        const auto epoch = batcher.next_epoch(rng);
        REQUIRE(epoch.size() == 4);
        REQUIRE(epoch.back().main.size() == 5);
        for (const auto& b : epoch) REQUIRE(b.aux[0].size() == 10);
    }

    SECTION("epoch accounting: main tokens per epoch equal the split size exactly") {
        HyperParams hp;
        MtlBatcher batcher(137, {20}, hp, rng);
        for (int e = 0; e < 3; ++e) {
            size_t total = 0;
            std::set<size_t> seen;
            for (const auto& b : batcher.next_epoch(rng)) {
                total += b.main.size();
                for (size_t idx : b.main) seen.insert(idx);
            }
            REQUIRE(total == 137);
            REQUIRE(seen.size() == 137);  // full pass, no duplicates
        }
    }

    SECTION("aux cycles without replacement and reshuffles on wraparound") {
        HyperParams hp;
        hp.aux_tokens_per_batch = 4;
        MtlBatcher batcher(30, {6}, hp, rng);
        const auto epoch = batcher.next_epoch(rng);  // 1 batch of 30 main, 4 aux draws
        REQUIRE(epoch.size() == 1);
        std::vector<size_t> draws = epoch[0].aux[0];
        // First 6 draws across updates must cover all 6 aux items exactly once.
        const auto epoch2 = batcher.next_epoch(rng);
        for (size_t idx : epoch2[0].aux[0]) draws.push_back(idx);
        std::set<size_t> first_six(draws.begin(), draws.begin() + 6);
        REQUIRE(first_six.size() == 6);
    }
}

TEST_CASE("early stopping rule") {
    SECTION("patience 5 on [10,20,20,20,20,20,20] stops after epoch 7 keeping epoch 2") {
        EarlyStopper stopper(5);
        const std::vector<double> accs = {10, 20, 20, 20, 20, 20, 20};
        int stopped_at = -1;
        for (int e = 1; e <= static_cast<int>(accs.size()); ++e) {
            if (stopper.record(e, accs[static_cast<size_t>(e - 1)])) {
                stopped_at = e;
                break;
            }
        }
        REQUIRE(stopped_at == 7);
        REQUIRE(stopper.best_epoch == 2);
        REQUIRE(stopper.best_acc == 20.0);
    }

    SECTION("strictly improving accuracies never stop") {
        EarlyStopper stopper(5);
        for (int e = 1; e <= 50; ++e) REQUIRE_FALSE(stopper.record(e, static_cast<double>(e)));
        REQUIRE(stopper.best_epoch == 50);
    }

    SECTION("ties break toward the earliest epoch") {
        EarlyStopper stopper(3);
        stopper.record(1, 40.0);
        stopper.record(2, 40.0);
        stopper.record(3, 40.0);
        REQUIRE(stopper.best_epoch == 1);
    }
}

TEST_CASE("train on a small synthetic task") {
    SyntheticConfig cfg;
    cfg.seed = 21;
    cfg.language = "tr";
    cfg.lexicon_size = 30;
    cfg.rules = default_rules("tr", 0.6);
    cfg.norm_train_tokens = 60;
    cfg.norm_dev_tokens = 0;
    cfg.autoenc_tokens = 60;
    const auto corpus = generate_synthetic_corpus(cfg);
    const auto [train_split, val_split] = split_train_validation(corpus.norm_train);

    TrainPlan plan;
    plan.config = SharingConfig::parse("SEADP");
    plan.hp = tiny_hp(8, 16);
    plan.seed = 3;
    plan.max_epochs = 4;
    plan.patience = 5;
    plan.main_train = &train_split;
    plan.main_val = &val_split;
    plan.aux = {&corpus.autoencoding};

    SECTION("log structure and epoch accounting") {
        auto result = train<double>(plan);
        REQUIRE(result.log.mode == "standard");
        REQUIRE(result.log.config_str == "SEADP");
        REQUIRE_FALSE(result.log.epochs.empty());
        for (const auto& e : result.log.epochs) {
            REQUIRE(e.tokens_seen.at({"normalization", "tr"}) == 54);  // |train split|
            // 2 updates per epoch (54/30), 10 aux tokens each
            REQUIRE(e.tokens_seen.at({"autoencoding", "tr"}) == 20);
        }
        REQUIRE(result.log.stop_reason == "max_epochs(4)");
        REQUIRE(result.log.best_epoch >= 1);
    }

    SECTION("returned model is the best-validation checkpoint") {
        auto result = train<double>(plan);
        const auto preds = predict_dataset(result.model, "normalization", val_split);
        REQUIRE(word_accuracy(preds) == Catch::Approx(result.log.best_val_acc).margin(1e-9));
    }

    SECTION("determinism: same plan and seed give identical logs and parameters") {
        auto a = train<double>(plan);
        auto b = train<double>(plan);
        REQUIRE(a.log.epochs.size() == b.log.epochs.size());
        for (size_t i = 0; i < a.log.epochs.size(); ++i) {
            REQUIRE(a.log.epochs[i].train_loss == b.log.epochs[i].train_loss);
            REQUIRE(a.log.epochs[i].val_acc == b.log.epochs[i].val_acc);
        }
        auto pa = a.model.all_params();
        auto pb = b.model.all_params();
        for (size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->values == pb[i]->values);
    }

    SECTION("empty train split is a contract error") {
        TaskDataset empty;
        empty.task = TaskKind::normalization;
        TrainPlan bad = plan;
        bad.main_train = &empty;
        REQUIRE_THROWS_AS(train<double>(bad), ContractError);
    }
}

TEST_CASE("train log round-trips through its text format") {
    TrainLog log;
    log.mode = "standard";
    log.config_str = "SEATD";
    log.seed = 17;
    TrainLog::EpochRecord e1;
    e1.epoch = 1;
    e1.train_loss = 2.25;
    e1.val_acc = 12.5;
    e1.tokens_seen[{"normalization", "de"}] = 900;
    e1.tokens_seen[{"g2p", "de"}] = 300;
    log.epochs.push_back(e1);
    log.stop_reason = "early_stopping(patience=5)";
    log.best_epoch = 1;
    log.best_val_acc = 12.5;

    const auto path = std::filesystem::temp_directory_path() /
                      ("normshare_log_" + std::to_string(::getpid()) + ".txt");
    log.save(path.string());
    const auto loaded = TrainLog::load(path.string());
    REQUIRE(loaded.mode == "standard");
    REQUIRE(loaded.config_str == "SEATD");
    REQUIRE(loaded.seed == 17);
    REQUIRE(loaded.epochs.size() == 1);
    REQUIRE(loaded.epochs[0].tokens_seen.at({"normalization", "de"}) == 900);
    REQUIRE(loaded.epochs[0].tokens_seen.at({"g2p", "de"}) == 300);
    REQUIRE(loaded.stop_reason == "early_stopping(patience=5)");
    REQUIRE(loaded.best_val_acc == 12.5);
    std::filesystem::remove(path);
}

TEST_CASE("zero-shot schedule") {
    Pcg32 rng(7);

    SECTION("both same-language normalization sets are excluded; aux retained") {
        auto slb = make_ds(TaskKind::normalization, "sl", "SL_B", 40, "b");
        auto slg = make_ds(TaskKind::normalization, "sl", "SL_G", 40, "g");
        auto de = make_ds(TaskKind::normalization, "de", "DE_A", 40);
        auto sl_aux = make_ds(TaskKind::autoencoding, "sl", "SL_wiki", 40);
        auto de_aux = make_ds(TaskKind::autoencoding, "de", "DE_wiki", 40);
        auto schedule = make_zero_shot_schedule({&slb, &slg, &de, &sl_aux, &de_aux}, "sl", rng, 100, 10);
        std::set<std::string> names;
        for (const auto* ds : schedule.combinations()) names.insert(ds->name);
        REQUIRE(names == std::set<std::string>{"DE_A", "SL_wiki", "DE_wiki"});
    }

    SECTION("combination count matches the inventory oracle") {
        // 10 normalization sets over 8 languages + 3 aux tasks x 8 languages;
        // EN has a single dataset, so targeting EN removes exactly one.
        std::vector<TaskDataset> storage;
        const std::vector<std::pair<std::string, std::string>> norm_sets = {
            {"DE_A", "de"}, {"DE_R", "de"}, {"EN", "en"}, {"ES", "es"}, {"HU", "hu"},
            {"IS", "is"},   {"PT", "pt"},   {"SL_B", "sl"}, {"SL_G", "sl"}, {"SV", "sv"}};
        for (const auto& [name, lang] : norm_sets)
            storage.push_back(make_ds(TaskKind::normalization, lang, name, 25, name));
        for (const auto& lang : {"de", "en", "es", "hu", "is", "pt", "sl", "sv"})
            for (TaskKind kind : {TaskKind::autoencoding, TaskKind::g2p, TaskKind::lemmatization})
                storage.push_back(make_ds(kind, lang, cat(lang, "_", task_short_name(kind)), 25, lang));
        std::vector<const TaskDataset*> all;
        for (const auto& ds : storage) all.push_back(&ds);
        auto schedule = make_zero_shot_schedule(all, "en", rng, 50, 10);
        REQUIRE(schedule.combinations().size() == (10 - 1) + 24);
    }

    SECTION("equal samples per combination per update; exact epoch totals") {
        auto a = make_ds(TaskKind::normalization, "aa", "A", 35, "a");
        auto b = make_ds(TaskKind::normalization, "bb", "B", 17, "b");
        auto a_aux = make_ds(TaskKind::autoencoding, "aa", "A_x", 11);
        auto b_aux = make_ds(TaskKind::autoencoding, "bb", "B_x", 13);
        auto schedule = make_zero_shot_schedule({&a, &b, &a_aux, &b_aux}, "aa", rng, 100, 5);
        REQUIRE(schedule.updates_per_epoch() == 20);
        long per_combo[3] = {0, 0, 0};
        for (const auto& update : schedule.next_epoch(rng)) {
            REQUIRE(update.draws.size() == 3);
            for (size_t c = 0; c < 3; ++c) {
                REQUIRE(update.draws[c].size() == 5);
                per_combo[c] += static_cast<long>(update.draws[c].size());
            }
        }
        for (long n : per_combo) REQUIRE(n == 100);
    }

    SECTION("target language absent from aux data is an error") {
        auto a = make_ds(TaskKind::normalization, "aa", "A", 30, "a");
        auto b = make_ds(TaskKind::normalization, "bb", "B", 30, "b");
        auto b_aux = make_ds(TaskKind::autoencoding, "bb", "B_x", 30);
        REQUIRE_THROWS_AS(make_zero_shot_schedule({&a, &b, &b_aux}, "aa", rng, 100, 10), Error);
    }

    SECTION("fewer than two languages is a contract error") {
        auto a = make_ds(TaskKind::normalization, "aa", "A", 30, "a");
        auto a_aux = make_ds(TaskKind::autoencoding, "aa", "A_x", 30);
        REQUIRE_THROWS_AS(make_zero_shot_schedule({&a, &a_aux}, "aa", rng, 100, 10), ContractError);
    }

    SECTION("non-divisible epoch/update sample counts are rejected") {
        auto a = make_ds(TaskKind::normalization, "aa", "A", 30, "a");
        auto b_aux = make_ds(TaskKind::autoencoding, "aa", "B_x", 30);
        auto c = make_ds(TaskKind::normalization, "bb", "C", 30, "c");
        REQUIRE_THROWS_AS(make_zero_shot_schedule({&a, &b_aux, &c}, "aa", rng, 100, 7), ContractError);
    }
}

TEST_CASE("train_zero_shot") {
    // Three languages; "aa" has two normalization datasets that must both be excluded.
    auto a1 = make_ds(TaskKind::normalization, "aa", "AA_1", 30, "x");
    auto a2 = make_ds(TaskKind::normalization, "aa", "AA_2", 30, "y");
    auto b = make_ds(TaskKind::normalization, "bb", "BB", 30, "b");
    auto c = make_ds(TaskKind::normalization, "cc", "CC", 30, "c");
    auto a_aux = make_ds(TaskKind::autoencoding, "aa", "AA_wiki", 30);
    auto b_aux = make_ds(TaskKind::autoencoding, "bb", "BB_wiki", 30);

    TrainPlan plan;
    plan.mode = TrainPlan::Mode::zero_shot;
    plan.hp = tiny_hp(8, 12);
    plan.seed = 9;
    plan.target_language = "aa";
    plan.all_datasets = {&a1, &a2, &b, &c, &a_aux, &b_aux};
    plan.zs_epochs = 2;
    plan.zs_epoch_samples = 20;
    plan.zs_update_samples = 5;

    SECTION("log proves the exclusion and reports full sharing") {
        auto result = train_zero_shot<double>(plan);
        REQUIRE(result.log.config_str == "SEATDP");
        REQUIRE(result.log.mode == "zero_shot");
        REQUIRE(result.log.epochs.size() == 2);  // exactly the fixed budget
        REQUIRE(result.log.tokens_seen_total("normalization", "aa") == 0);
        // 4 included combinations x 20 samples per epoch
        REQUIRE(result.log.tokens_seen_total("normalization", "bb") == 40);
        REQUIRE(result.log.tokens_seen_total("autoencoding", "aa") == 40);
        REQUIRE(result.log.stop_reason == "fixed_epochs(2)");
    }

    SECTION("total sample arithmetic: epochs x combinations x epoch_samples") {
        auto result = train_zero_shot<double>(plan);
        long total = 0;
        for (const auto& e : result.log.epochs)
            for (const auto& [key, n] : e.tokens_seen) total += n;
        REQUIRE(total == 2L * 4 * 20);
    }

    SECTION("injected exclusion breach aborts") {
        TrainPlan bad = plan;
        bad.inject_exclusion_breach = true;
        REQUIRE_THROWS_AS(train_zero_shot<double>(bad), ExclusionError);
    }

    SECTION("tagged decoding of the target normalization set works") {
        auto result = train_zero_shot<double>(plan);
        const auto preds = predict_dataset_tagged(result.model, a1);
        REQUIRE(preds.size() == a1.pairs.size());
    }
}
