// Acceptance run: one PASS/FAIL line per primary criterion, exit status 1 if
// any fails. Thresholds are the contract; do not relax them here.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "argmine/cky.hpp"
#include "argmine/experiment.hpp"
#include "argmine/synthetic.hpp"
#include "corpus_gen.hpp"
#include "gradcheck.hpp"
#include "grammar_gen.hpp"
#include "oracles.hpp"

using namespace argmine;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            if (ok) detail << "failed: ";
            else detail << "; ";
            detail << what;
            ok = false;
        }
    }
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0) {
        std::ostringstream lim;
        lim << "runtime " << secs << " s exceeds " << limit_seconds << " s";
        o.require(secs < limit_seconds, lim.str());
    }
    if (!o.ok) ++failures;
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << " (" << std::fixed;
    std::cout.precision(1);
    std::cout << secs << " s) " << o.detail.str() << std::endl;
    std::cout.unsetf(std::ios::fixed);
}

// ----- synthetic grid, shared by the grid, n-gram and determinism checks

struct GridRun {
    std::string labels_jsonl;
    std::map<Task, ExperimentResult> results;
};

GridRun run_grid(std::uint64_t seed) {
    SyntheticConfig sc;
    sc.sentences = 20000;
    sc.seed = seed;
    const auto syn = generate_synthetic(sc);
    const auto labels = label_corpus(syn.sentences, compile(RuleGrammar::parse(syn.grammar_text), syn.lexicons));
    GridRun run;
    std::vector<TokenList> tokens;
    std::vector<ClaimType> y;
    for (const auto& s : syn.sentences) {
        tokens.push_back(s.tokens);
        y.push_back(labels.at(s.sentence_id).claim);
        run.labels_jsonl += label_to_json(s.sentence_id, labels.at(s.sentence_id)).dump() + "\n";
    }
    const EmbeddingTable vectors(syn.vectors);
    ExperimentConfig base;
    base.seed = seed;
    base.split.seed = seed;
    base.search.seed = seed;
    base.vectors = &vectors;
    const Split split = split_for(y, base.split);
    for (Task t : {Task::ClaimIdBalanced, Task::ClaimIdImbalanced, Task::Stance, Task::ClaimNeutral, Task::SuppVOpp,
                   Task::ClaimPlusNeutral, Task::ClaimPlusEnsemble}) {
        ExperimentConfig cfg = base;
        cfg.task = t;
        cfg.strategy = default_strategy(t);
        run.results.emplace(t, run_experiment(tokens, y, cfg, &split));
    }
    return run;
}

const Classifier& component_for(const ModelBundle& b, const std::string& cls) {
    for (const auto& [name, c] : b.components) {
        const auto& classes = c.classes();
        if (std::find(classes.begin(), classes.end(), cls) != classes.end()) return c;
    }
    throw ValidationError("no component predicts " + cls);
}

} // namespace

int main() {
    criterion("cky-oracle-equivalence", 30, [](Outcome& o) {
        Rng rng(20240101);
        int mismatches = 0;
        for (int pair = 0; pair < 1000; ++pair) {
            const auto c = gen::random_grammar(rng);
            const auto grammar = RuleGrammar::parse(c.grammar_text);
            const auto compiled = compile(grammar, c.lexicons);
            const auto sentence = gen::random_sentence(rng);
            std::vector<oracle::Match> got;
            for (const auto& w : cky_match(sentence, compiled)) got.push_back({w.claim, w.span.begin, w.span.end, w.rule_id});
            std::sort(got.begin(), got.end());
            if (got != oracle::BruteForceMatcher(grammar, c.lexicons).match(sentence)) ++mismatches;
        }
        o.detail << "1000 pairs, " << mismatches << " mismatches";
        o.require(mismatches == 0, "CKY output differs from brute force");
    });

    criterion("dedup-properties", 30, [](Outcome& o) {
        Rng rng(77);
        int oracle_bad = 0, idem_bad = 0, dup_bad = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto corpus = corpus_gen::random_corpus(rng, 1 + rng.index(200));
            const double tau = trial % 2 == 0 ? 0.95 : 0.6 + 0.39 * rng.uniform();
            const auto once = dedup(corpus, {tau});
            if (corpus_gen::ids_of(once) != oracle::greedy_dedup(corpus, tau)) ++oracle_bad;
            if (corpus_gen::ids_of(dedup(once, {tau})) != corpus_gen::ids_of(once)) ++idem_bad;
            const std::string t = corpus_gen::random_text(rng, 1 + rng.index(80), "abc xyz");
            if (dedup(corpus_gen::make_sentences({t, t}), {tau}).size() != 1) ++dup_bad;
        }
        const std::string a = "abcdefghijklmnopqrst", b = "abcdefghijklmnopqrsX";
        const bool strict = similarity(a, b) == 0.95 && dedup(corpus_gen::make_sentences({a, b}), {0.95}).size() == 2 &&
                            dedup(corpus_gen::make_sentences({a, b}), {0.949}).size() == 1;
        o.detail << "100 corpora; oracle mismatches " << oracle_bad << ", non-idempotent " << idem_bad
                 << ", uncollapsed duplicates " << dup_bad << ", strict at 0.95: " << (strict ? "yes" : "no");
        o.require(oracle_bad == 0, "differs from greedy oracle");
        o.require(idem_bad == 0, "not idempotent");
        o.require(dup_bad == 0, "exact duplicate survived");
        o.require(strict, "threshold not strict");
    });

    criterion("optimization-correctness", 60, [](Outcome& o) {
        double worst_lr = 0, worst_ft = 0;
        for (std::uint64_t i = 0; i < 50; ++i) {
            worst_lr = std::max(worst_lr, gradcheck::check_linear(gradcheck::random_linear_problem(1000 + i)));
            worst_ft = std::max(worst_ft, gradcheck::check_fasttext(gradcheck::random_fasttext_problem(2000 + i)));
        }
        std::vector<FeatureVector> X;
        std::vector<std::string> y;
        Rng rng(9);
        for (int i = 0; i < 30; ++i) {
            FeatureVector x;
            for (std::uint32_t j = 0; j < 5; ++j) {
                if (rng.uniform() < 0.4) x.sparse.push_back(j);
            }
            x.dense = {rng.normal(), rng.normal()};
            X.push_back(x);
            y.push_back(std::string(1, static_cast<char>('a' + rng.index(3))));
        }
        TrainConfig cfg;
        cfg.lambda = 0.05;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 0;
        cfg.decay = 1.0;
        cfg.epochs = 4000;
        cfg.init_stddev = 1.0;
        cfg.seed = 1;
        const auto m1 = train(X, y, cfg);
        cfg.seed = 2;
        const auto m2 = train(X, y, cfg);
        const double gap = std::abs(training_loss(m1, X, y, cfg) - training_loss(m2, X, y, cfg));
        o.detail << "max rel. error logreg " << worst_lr << ", fasttext " << worst_ft << "; reconvergence gap " << gap;
        o.require(worst_lr <= 1e-4, "logreg gradient check");
        o.require(worst_ft <= 1e-4, "fasttext gradient check");
        o.require(gap <= 1e-6, "convex reconvergence");
    });

    criterion("metrics-oracle", 0, [](Outcome& o) {
        Rng rng(31);
        double worst = 0;
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t k = 2 + rng.index(8), n = 1 + rng.index(150);
            std::vector<std::string> classes, gold, pred;
            for (std::size_t c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
            for (std::size_t i = 0; i < n; ++i) {
                gold.push_back(classes[rng.index(k)]);
                pred.push_back(rng.uniform() < 0.4 ? gold.back() : classes[rng.index(k)]);
            }
            const auto r = metrics(gold, pred, classes);
            const auto b = oracle::brute_force_metrics(gold, pred, classes);
            for (std::size_t c = 0; c < k; ++c) {
                worst = std::max({worst, std::abs(r.per_class[c].precision - b.precision[c]),
                                  std::abs(r.per_class[c].recall - b.recall[c]), std::abs(r.per_class[c].f1 - b.f1[c])});
            }
            worst = std::max({worst, std::abs(r.macro_f1 - b.macro_f1), std::abs(r.macro_precision - b.macro_p),
                              std::abs(r.macro_recall - b.macro_r)});
        }
        const double third = metrics({"A", "A", "B", "B"}, {"A", "A", "A", "A"}, {"A", "B"}).macro_f1;
        o.detail << "200 sets, max deviation " << worst << "; all-one-class macro-F1 " << third;
        o.require(worst <= 1e-12, "deviation above 1e-12");
        o.require(third == 1.0 / 3.0, "all-one-class case is not exactly 1/3");
    });

    criterion("sif-invariant", 0, [](Outcome& o) {
        EmbeddingTable t = EmbeddingTable::load(std::string(ARGMINE_TEST_DATA) + "/toy_vectors.txt");
        Rng rng(8);
        const std::vector<std::string> words = {"the", "rule", "is", "too", "burdensome", "costly", "this", "we",
                                                "oppose", "support", "proposal", "agency", "time", "delay",
                                                "court", "lawsuit", "exempt", "unseenword"};
        std::vector<TokenList> sentences;
        for (int i = 0; i < 1000; ++i) {
            TokenList s;
            const std::size_t len = 1 + rng.index(14);
            for (std::size_t k = 0; k < len; ++k) s.push_back(words[rng.index(words.size())]);
            sentences.push_back(s);
        }
        t.fit(sentences);
        double worst_ratio = 0;
        bool ok = t.component().has_value();
        for (const auto& s : sentences) {
            const Vec v = t.embed(s);
            double d = 0, n = 0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                d += (*t.component())[i] * v[i];
                n += v[i] * v[i];
            }
            n = std::sqrt(n);
            if (std::abs(d) > 1e-9 * n) ok = false;
            if (n > 0) worst_ratio = std::max(worst_ratio, std::abs(d) / n);
        }
        double worst_pc = 0;
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<Vec> rows;
            const double sx = 0.2 + 3 * rng.uniform(), sy = 0.2 + 3 * rng.uniform(), rho = 2 * rng.uniform() - 1;
            for (int i = 0; i < 40; ++i) {
                const double a = rng.normal(), b = rng.normal();
                rows.push_back({sx * a, sy * (rho * a + std::sqrt(1 - rho * rho) * b)});
            }
            double mx = 0, my = 0;
            for (auto& r : rows) {
                mx += r[0] / 40;
                my += r[1] / 40;
            }
            double a = 0, b = 0, c = 0;
            for (auto& r : rows) {
                a += (r[0] - mx) * (r[0] - mx);
                b += (r[0] - mx) * (r[1] - my);
                c += (r[1] - my) * (r[1] - my);
            }
            const auto [ex, ey] = oracle::dominant_eigenvector_2x2(a, b, c);
            const auto u = fit_principal_component(rows);
            if (!u) {
                worst_pc = INFINITY;
                continue;
            }
            worst_pc = std::max({worst_pc, std::abs((*u)[0] - ex), std::abs((*u)[1] - ey)});
        }
        o.detail << "1000 sentences, max |u.v|/|v| " << worst_ratio << "; 2x2 power iteration max error " << worst_pc;
        o.require(ok, "embedding not orthogonal to u within 1e-9");
        o.require(worst_pc <= 1e-8, "power iteration differs from closed form");
    });

    GridRun grid;
    criterion("synthetic-grid", 600, [&](Outcome& o) {
        grid = run_grid(0);
        auto f1 = [&](Task t) { return grid.results.at(t).test.macro_f1; };
        const double balanced = f1(Task::ClaimIdBalanced);
        const double neutral = grid.results.at(Task::ClaimIdImbalanced).test.at("Neutral").f1;
        const double stance = f1(Task::Stance);
        const double plus = f1(Task::ClaimPlusNeutral), ens = f1(Task::ClaimPlusEnsemble);
        o.detail << "20000 sentences; claim-id balanced macro-F1 " << balanced << ", imbalanced Neutral F1 " << neutral
                 << ", stance " << stance << ", claim-neutral " << f1(Task::ClaimNeutral) << ", supp-v-opp "
                 << f1(Task::SuppVOpp) << ", claim+neutral " << plus << ", claim+ensemble " << ens;
        o.require(balanced >= 0.95, "balanced claim-id below 0.95");
        o.require(neutral >= 0.95, "imbalanced Neutral F1 below 0.95");
        o.require(stance >= 0.90, "stance below 0.90");
        o.require(ens >= plus - 0.02, "ensemble more than 0.02 below claim+neutral");
    });

    criterion("planted-cues-in-top-ngrams", 0, [&](Outcome& o) {
        const ModelBundle& b = grid.results.at(Task::ClaimPlusNeutral).bundle;
        int missing = 0, total = 0;
        for (const auto& [claim, cues] : planted_cues()) {
            const std::string cls(to_string(claim));
            const auto top = top_ngrams(component_for(b, cls).linear, b.features.vocab(), cls, 10);
            for (const auto& cue : cues) {
                ++total;
                if (std::none_of(top.begin(), top.end(), [&](const auto& p) { return p.first == cue; })) {
                    ++missing;
                    o.require(false, "'" + cue + "' not in top-10 for " + cls);
                }
            }
        }
        o.detail << total - missing << "/" << total << " planted bigrams in their class top-10";
    });

    criterion("determinism", 600, [&](Outcome& o) {
        const GridRun again = run_grid(0);
        int diffs = 0;
        if (again.labels_jsonl != grid.labels_jsonl) ++diffs;
        for (const auto& [task, r] : grid.results) {
            const auto& r2 = again.results.at(task);
            if (r.bundle.serialize() != r2.bundle.serialize() || r.report.dump() != r2.report.dump() ||
                r.search.trial_log() != r2.search.trial_log()) {
                ++diffs;
                o.require(false, std::string("task ") + std::string(to_string(task)) + " differs");
            }
        }
        o.detail << "labels and 7 bundles/reports/trial logs compared, " << diffs << " differ";
        o.require(again.labels_jsonl == grid.labels_jsonl, "labels differ");
    });

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
