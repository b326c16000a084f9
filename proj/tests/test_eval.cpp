#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "argmine/experiment.hpp"
#include "argmine/synthetic.hpp"
#include "oracles.hpp"

using namespace argmine;

namespace {

std::vector<std::string> labels_of(std::initializer_list<std::pair<const char*, int>> counts) {
    std::vector<std::string> out;
    for (const auto& [c, n] : counts) {
        for (int i = 0; i < n; ++i) out.push_back(c);
    }
    return out;
}

std::size_t count_in(const std::vector<std::size_t>& rows, const std::vector<std::string>& labels, const std::string& c) {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](auto r) { return labels[r] == c; }));
}

struct Corpus {
    std::vector<TokenList> tokens;
    std::vector<ClaimType> labels;
};

const Corpus& small_corpus() {
    static const Corpus c = [] {
        SyntheticConfig cfg;
        cfg.sentences = 2400;
        cfg.seed = 12;
        const auto syn = generate_synthetic(cfg);
        Corpus out;
        for (std::size_t i = 0; i < syn.sentences.size(); ++i) {
            out.tokens.push_back(syn.sentences[i].tokens);
            out.labels.push_back(syn.planted[i]);
        }
        return out;
    }();
    return c;
}

ExperimentConfig quick(Task t) {
    ExperimentConfig cfg;
    cfg.task = t;
    cfg.strategy = default_strategy(t);
    cfg.search.budget = 2;
    cfg.seed = 5;
    cfg.split.seed = 5;
    cfg.ensemble_folds = 3;
    return cfg;
}

} // namespace

// ----- split

TEST(Split, CountsForDocumentedCases) {
    EXPECT_EQ(split_counts(100, {}), (std::array<std::size_t, 3>{70, 15, 15}));
    EXPECT_EQ(split_counts(10, {}), (std::array<std::size_t, 3>{7, 2, 1}));
    EXPECT_EQ(split_counts(90, {}), (std::array<std::size_t, 3>{63, 14, 13}));
    EXPECT_EQ(split_counts(3, {}), (std::array<std::size_t, 3>{2, 1, 0}));
}

TEST(Split, StratifiedTwoClassFixture) {
    const auto labels = labels_of({{"A", 10}, {"B", 90}});
    const Split s = stratified_split(labels, {});
    EXPECT_EQ(count_in(s.train, labels, "A"), 7u);
    EXPECT_EQ(count_in(s.dev, labels, "A"), 2u);
    EXPECT_EQ(count_in(s.test, labels, "A"), 1u);
    EXPECT_EQ(count_in(s.train, labels, "B"), 63u);
    EXPECT_EQ(count_in(s.dev, labels, "B"), 14u);
    EXPECT_EQ(count_in(s.test, labels, "B"), 13u);
}

TEST(Split, SmallClassNamed) {
    const auto labels = labels_of({{"A", 10}, {"Rare", 2}});
    try {
        stratified_split(labels, {});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("Rare"), std::string::npos);
    }
}

TEST(Split, BadFractionsRejected) {
    EXPECT_THROW(stratified_split(labels_of({{"A", 10}}), {0.5, 0.2, 0.2, 0}), ValidationError);
    EXPECT_THROW(stratified_split(labels_of({{"A", 10}}), {1.0, 0.0, 0.0, 0}), ValidationError);
}

TEST(Split, PartitionAndStratificationOnRandomCorpora) {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> labels;
        const std::size_t k = 1 + rng.index(6);
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t n = 3 + rng.index(60);
            for (std::size_t i = 0; i < n; ++i) labels.push_back("c" + std::to_string(c));
        }
        rng.shuffle(labels);
        SplitConfig cfg;
        cfg.seed = rng.next();
        const Split s = stratified_split(labels, cfg);
        std::vector<int> seen(labels.size(), 0);
        for (const auto* part : {&s.train, &s.dev, &s.test}) {
            EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
            for (auto r : *part) ++seen[r];
        }
        for (int v : seen) EXPECT_EQ(v, 1);
        for (std::size_t c = 0; c < k; ++c) {
            const std::string name = "c" + std::to_string(c);
            const double n = static_cast<double>(std::count(labels.begin(), labels.end(), name));
            EXPECT_LE(std::abs(static_cast<double>(count_in(s.train, labels, name)) - 0.70 * n), 1.0);
            EXPECT_LE(std::abs(static_cast<double>(count_in(s.dev, labels, name)) - 0.15 * n), 1.0);
            EXPECT_LE(std::abs(static_cast<double>(count_in(s.test, labels, name)) - 0.15 * n), 1.0);
        }
        const Split again = stratified_split(labels, cfg);
        EXPECT_EQ(again.train, s.train);
        EXPECT_EQ(again.test, s.test);
    }
}

// ----- metrics

TEST(Metrics, PerfectAndAllOneClass) {
    EXPECT_DOUBLE_EQ(metrics({"A", "B", "A"}, {"A", "B", "A"}, {"A", "B"}).macro_f1, 1.0);
    const auto r = metrics({"A", "A", "B", "B"}, {"A", "A", "A", "A"}, {"A", "B"});
    EXPECT_DOUBLE_EQ(r.at("A").f1, 2.0 / 3);
    EXPECT_EQ(r.at("B").f1, 0.0);
    EXPECT_EQ(r.macro_f1, 1.0 / 3);
}

TEST(Metrics, AbsentClassCountsAsZero) {
    const auto r = metrics({"A", "B"}, {"A", "B"}, {"A", "B", "C"});
    EXPECT_DOUBLE_EQ(r.macro_f1, 2.0 / 3);
    EXPECT_EQ(r.at("C").support, 0u);
}

TEST(Metrics, Errors) {
    EXPECT_THROW(metrics({}, {}, {"A"}), ValidationError);
    EXPECT_THROW(metrics({"A"}, {"A", "B"}, {"A", "B"}), ValidationError);
    EXPECT_THROW(metrics({"A"}, {"Z"}, {"A", "B"}), ValidationError);
}

TEST(Metrics, MatchesBruteForceOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.index(6), n = 1 + rng.index(80);
        std::vector<std::string> classes;
        for (std::size_t c = 0; c < k; ++c) classes.push_back("k" + std::to_string(c));
        std::vector<std::string> gold, pred;
        for (std::size_t i = 0; i < n; ++i) {
            gold.push_back(classes[rng.index(k)]);
            pred.push_back(rng.uniform() < 0.5 ? gold.back() : classes[rng.index(k)]);
        }
        const auto r = metrics(gold, pred, classes);
        const auto o = oracle::brute_force_metrics(gold, pred, classes);
        for (std::size_t c = 0; c < k; ++c) {
            EXPECT_NEAR(r.per_class[c].precision, o.precision[c], 1e-12);
            EXPECT_NEAR(r.per_class[c].recall, o.recall[c], 1e-12);
            EXPECT_NEAR(r.per_class[c].f1, o.f1[c], 1e-12);
            std::size_t row = 0;
            for (auto v : r.confusion[c]) row += v;
            EXPECT_EQ(row, r.per_class[c].support);
        }
        EXPECT_NEAR(r.macro_f1, o.macro_f1, 1e-12);
        EXPECT_NEAR(r.macro_precision, o.macro_p, 1e-12);
        EXPECT_NEAR(r.macro_recall, o.macro_r, 1e-12);
        auto shuffled = classes;
        rng.shuffle(shuffled);
        EXPECT_NEAR(metrics(gold, pred, shuffled).macro_f1, r.macro_f1, 1e-12);
    }
}

TEST(Metrics, ReportRows) {
    const auto j = metrics({"A", "B"}, {"A", "A"}, {"A", "B"}).to_json();
    ASSERT_EQ(j["classes"].size(), 2u);
    EXPECT_EQ(j["classes"][0]["class"], "A");
    for (const char* key : {"R", "P", "F1", "support"}) EXPECT_TRUE(j["classes"][0].contains(key)) << key;
    EXPECT_TRUE(j["macro"].contains("F1"));
}

// ----- search

TEST(Search, BudgetOneReturnsThatConfig) {
    SearchSpace sp;
    sp.budget = 1;
    const auto only = sample_configs(sp, {});
    const auto r = search(sp, [](const TrainConfig&) { return 0.3; });
    EXPECT_EQ(r.trials.size(), 1u);
    EXPECT_EQ(r.best.lambda, only[0].lambda);
    EXPECT_EQ(r.best_trial, 0);
}

TEST(Search, SameSeedSameSequence) {
    SearchSpace sp;
    sp.budget = 10;
    sp.seed = 4;
    const auto a = sample_configs(sp, {}), b = sample_configs(sp, {});
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(a[i].lambda, b[i].lambda);
        EXPECT_EQ(a[i].learning_rate, b[i].learning_rate);
        EXPECT_EQ(a[i].epochs, b[i].epochs);
        EXPECT_GE(a[i].lambda, sp.lambda_min);
        EXPECT_LE(a[i].lambda, sp.lambda_max);
        EXPECT_GE(a[i].epochs, sp.epochs_min);
        EXPECT_LE(a[i].epochs, sp.epochs_max);
    }
    sp.seed = 5;
    EXPECT_NE(sample_configs(sp, {})[0].lambda, a[0].lambda);
}

TEST(Search, UnimodalObjectiveLandsInTopDecileOfGrid) {
    // Peak at λ = 1e-4 on the log scale.
    auto f = [](double lambda) { return -std::pow(std::log10(lambda) + 4.0, 2); };
    SearchSpace sp;
    sp.budget = 50;
    sp.seed = 1;
    const auto r = search(sp, [&](const TrainConfig& c) { return f(c.lambda); });
    std::vector<double> grid;
    for (int i = 0; i <= 1000; ++i) grid.push_back(f(std::pow(10.0, -6 + 4.0 * i / 1000)));
    std::sort(grid.begin(), grid.end(), std::greater<>());
    EXPECT_GE(r.best_score, grid[grid.size() / 10]);
}

TEST(Search, FailuresAndTies) {
    SearchSpace sp;
    sp.budget = 4;
    int calls = 0;
    const auto r = search(sp, [&](const TrainConfig&) {
        if (calls++ == 0) throw ValidationError("diverged");
        return 0.5;
    });
    EXPECT_FALSE(r.trials[0].ok);
    EXPECT_EQ(r.best_trial, 1);
    const auto log = r.trial_log();
    EXPECT_NE(log.find("\"status\":\"failed\""), std::string::npos);
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
    EXPECT_THROW(search(sp, [](const TrainConfig&) -> double { throw ValidationError("no"); }), Error);
    sp.budget = 0;
    EXPECT_THROW(search(sp, [](const TrainConfig&) { return 1.0; }), ValidationError);
}

// ----- top n-grams

TEST(TopNgrams, OrderTiesAndBounds) {
    const auto vocab = NgramVocab::build({{"x", "y", "z"}});
    LinearModel m({"a", "b"}, vocab.size(), 0);
    const auto c = m.class_index("a");
    for (std::size_t j = 0; j < vocab.size(); ++j) m.weight(c, j) = 0.0;
    m.weight(c, *vocab.find("x")) = 3;
    m.weight(c, *vocab.find("y")) = 2;
    m.weight(c, *vocab.find("z")) = 1;
    auto top = top_ngrams(m, vocab, "a", 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0].first, "x");
    EXPECT_EQ(top[1].first, "y");
    EXPECT_EQ(top[2].first, "z");
    EXPECT_TRUE(top_ngrams(m, vocab, "a", 0).empty());
    EXPECT_EQ(top_ngrams(m, vocab, "a", 100).size(), vocab.size());
    // Zero-weight bigrams tie and come back in lexicographic order.
    top = top_ngrams(m, vocab, "a", 5);
    EXPECT_EQ(top[3].first, "x y");
    EXPECT_EQ(top[4].first, "y z");
    EXPECT_THROW(top_ngrams(m, vocab, "nope", 3), ValidationError);
}

// ----- experiments

TEST(Experiment, TaskClassLists) {
    EXPECT_EQ(task_classes(Task::Stance), (std::vector<std::string>{"Opposition", "Support"}));
    const auto with = task_classes(Task::ClaimPlusNeutral), without = task_classes(Task::ClaimNeutral);
    EXPECT_EQ(with.size(), 17u);
    EXPECT_EQ(without.size(), 16u);
    EXPECT_NE(std::find(with.begin(), with.end(), "Neutral"), with.end());
    EXPECT_EQ(std::find(without.begin(), without.end(), "Neutral"), without.end());
}

TEST(Experiment, TaskStrategyMismatch) {
    EXPECT_THROW(check_task_strategy(Task::Stance, Strategy::Hierarchical), ValidationError);
    EXPECT_THROW(check_task_strategy(Task::ClaimPlusEnsemble, Strategy::Flat), ValidationError);
    EXPECT_NO_THROW(check_task_strategy(Task::ClaimPlusNeutral, Strategy::TwoStage));
    auto cfg = quick(Task::ClaimPlusNeutral);
    cfg.strategy = Strategy::Ensemble;
    EXPECT_THROW(run_experiment(small_corpus().tokens, small_corpus().labels, cfg), ValidationError);
    EXPECT_THROW(parse_task("claims"), ValidationError);
}

TEST(Experiment, BalancedDownsamplesNeutralInTrainingOnly) {
    const auto& c = small_corpus();
    std::vector<std::size_t> all(c.labels.size());
    std::iota(all.begin(), all.end(), 0);
    const auto rows = task_train_rows(Task::ClaimIdBalanced, c.labels, all, 1);
    const auto neutral = std::count_if(rows.begin(), rows.end(), [&](auto r) { return c.labels[r] == ClaimType::Neutral; });
    EXPECT_EQ(static_cast<std::size_t>(neutral) * 2, rows.size());
    EXPECT_EQ(task_train_rows(Task::ClaimIdBalanced, c.labels, all, 1), rows);
    EXPECT_NE(task_train_rows(Task::ClaimIdBalanced, c.labels, all, 2), rows);
}

TEST(Experiment, StanceReportHasExactlyTwoClasses) {
    const auto r = run_experiment(small_corpus().tokens, small_corpus().labels, quick(Task::Stance));
    ASSERT_EQ(r.test.per_class.size(), 2u);
    EXPECT_EQ(r.test.per_class[0].name, "Opposition");
    EXPECT_EQ(r.test.per_class[1].name, "Support");
    EXPECT_GE(r.test.macro_f1, 0.9);
}

TEST(Experiment, ClaimPlusNeutralRowsAndReproducibility) {
    const auto cfg = quick(Task::ClaimPlusNeutral);
    const auto a = run_experiment(small_corpus().tokens, small_corpus().labels, cfg);
    EXPECT_EQ(a.test.per_class.size(), 17u);
    EXPECT_EQ(a.report["test"]["classes"].size(), 17u);
    EXPECT_EQ(a.search.trials.size(), 2u);
    const auto b = run_experiment(small_corpus().tokens, small_corpus().labels, cfg);
    EXPECT_EQ(a.report.dump(), b.report.dump());
    EXPECT_EQ(a.bundle.serialize(), b.bundle.serialize());
    EXPECT_EQ(a.search.trial_log(), b.search.trial_log());
}

TEST(Experiment, SuppVOppScoresClaimsOnly) {
    const auto r = run_experiment(small_corpus().tokens, small_corpus().labels, quick(Task::SuppVOpp));
    EXPECT_EQ(r.test.per_class.size(), 16u);
    EXPECT_EQ(r.bundle.strategy, Strategy::Hierarchical);
}

TEST(Experiment, NoTestLeakageIntoVocabulary) {
    const auto& c = small_corpus();
    const auto cfg = quick(Task::ClaimPlusNeutral);
    const Split split = split_for(c.labels, cfg.split);
    const auto r = run_experiment(c.tokens, c.labels, cfg, &split);
    std::vector<TokenList> train_tokens;
    for (auto i : split.train) train_tokens.push_back(c.tokens[i]);
    EXPECT_EQ(r.bundle.features.vocab().source_fingerprint(), NgramVocab::build(train_tokens).source_fingerprint());
}
