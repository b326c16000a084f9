#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/eval.hpp"
#include "argmine/models.hpp"
#include "argmine/taxonomy.hpp"

namespace argmine {

enum class Task { ClaimIdBalanced, ClaimIdImbalanced, Stance, ClaimNeutral, SuppVOpp, ClaimPlusNeutral, ClaimPlusEnsemble };

inline constexpr std::array<Task, 7> all_tasks() {
    return {Task::ClaimIdBalanced, Task::ClaimIdImbalanced, Task::Stance,           Task::ClaimNeutral,
            Task::SuppVOpp,        Task::ClaimPlusNeutral,  Task::ClaimPlusEnsemble};
}

inline std::string_view to_string(Task t) {
    switch (t) {
    case Task::ClaimIdBalanced: return "claim-id-balanced";
    case Task::ClaimIdImbalanced: return "claim-id-imbalanced";
    case Task::Stance: return "stance";
    case Task::ClaimNeutral: return "claim-neutral";
    case Task::SuppVOpp: return "supp-v-opp";
    case Task::ClaimPlusNeutral: return "claim+neutral";
    case Task::ClaimPlusEnsemble: return "claim+ensemble";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    for (Task t : all_tasks()) {
        if (s == to_string(t)) return t;
    }
    std::string allowed;
    for (Task t : all_tasks()) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(t));
    throw ValidationError("unknown task '" + std::string(s) + "' (" + allowed + ")");
}

// Report class list, in taxonomy order.
inline std::vector<std::string> task_classes(Task t, const Taxonomy& tax = default_taxonomy()) {
    std::vector<std::string> out;
    switch (t) {
    case Task::ClaimIdBalanced:
    case Task::ClaimIdImbalanced: return {std::string(kArgumentative), std::string(kNeutralClass)};
    case Task::Stance: return {"Opposition", "Support"};
    case Task::ClaimNeutral:
    case Task::SuppVOpp:
        for (ClaimType c : tax.claims()) out.emplace_back(to_string(c));
        return out;
    case Task::ClaimPlusNeutral:
    case Task::ClaimPlusEnsemble:
        out.emplace_back(to_string(ClaimType::Neutral));
        for (ClaimType c : tax.claims()) out.emplace_back(to_string(c));
        return out;
    }
    return out;
}

inline void check_task_strategy(Task t, Strategy s) {
    bool ok = false;
    switch (t) {
    case Task::ClaimPlusNeutral: ok = s == Strategy::Flat || s == Strategy::TwoStage || s == Strategy::Hierarchical; break;
    case Task::ClaimPlusEnsemble: ok = s == Strategy::Ensemble; break;
    case Task::SuppVOpp: ok = s == Strategy::Hierarchical; break;
    default: ok = s == Strategy::Flat; break;
    }
    if (!ok)
        throw ValidationError("strategy " + std::string(to_string(s)) + " does not apply to task " + std::string(to_string(t)));
}

// Strategy used when none is given.
inline Strategy default_strategy(Task t) {
    switch (t) {
    case Task::ClaimPlusEnsemble: return Strategy::Ensemble;
    case Task::SuppVOpp: return Strategy::Hierarchical;
    default: return Strategy::Flat;
    }
}

// Gold label of a sentence under a task; nullopt when the task ignores it.
inline std::optional<std::string> task_label(Task t, ClaimType c, const Taxonomy& tax = default_taxonomy()) {
    switch (t) {
    case Task::ClaimIdBalanced:
    case Task::ClaimIdImbalanced: return std::string(c == ClaimType::Neutral ? kNeutralClass : kArgumentative);
    case Task::Stance:
        if (c == ClaimType::Neutral) return std::nullopt;
        return std::string(to_string(tax.stance_of(c)));
    case Task::ClaimNeutral:
    case Task::SuppVOpp:
        if (c == ClaimType::Neutral) return std::nullopt;
        return std::string(to_string(c));
    case Task::ClaimPlusNeutral:
    case Task::ClaimPlusEnsemble: return std::string(to_string(c));
    }
    return std::nullopt;
}

struct ExperimentConfig {
    Task task = Task::ClaimPlusNeutral;
    Strategy strategy = Strategy::Flat;
    ClassifierConfig classifier;
    SearchSpace search;
    SplitConfig split;
    std::size_t vocab_cap = NgramVocab::kDefaultCap;
    const EmbeddingTable* vectors = nullptr;
    int ensemble_folds = 5;
    std::uint64_t seed = 0;
};

struct ExperimentResult {
    MetricsReport test;
    SearchResult search;
    ModelBundle bundle;
    nlohmann::json report;
};

// Rows of `subset` used to train for a task. The balanced claim-id setting
// keeps a uniform sample of Neutral rows equal in number to the
// argumentative rows.
inline std::vector<std::size_t> task_train_rows(Task t, const std::vector<ClaimType>& labels,
                                                const std::vector<std::size_t>& subset, std::uint64_t seed) {
    std::vector<std::size_t> rows;
    if (t == Task::ClaimIdBalanced) {
        std::vector<std::size_t> neutral;
        for (auto i : subset) (labels[i] == ClaimType::Neutral ? neutral : rows).push_back(i);
        Rng rng(splitmix64(seed ^ fnv1a64("balance")));
        rng.shuffle(neutral);
        if (neutral.size() > rows.size()) neutral.resize(rows.size());
        rows.insert(rows.end(), neutral.begin(), neutral.end());
    } else if (t == Task::SuppVOpp || t == Task::ClaimPlusNeutral || t == Task::ClaimPlusEnsemble || t == Task::ClaimIdImbalanced) {
        rows = subset;
    } else {
        for (auto i : subset) {
            if (labels[i] != ClaimType::Neutral) rows.push_back(i);
        }
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

inline ModelBundle train_task_bundle(Task task, Strategy strategy, const FeatureSpace& space,
                                     const std::vector<TokenList>& tokens, const std::vector<ClaimType>& labels,
                                     const std::vector<std::size_t>& rows, const ClassifierConfig& cc,
                                     int ensemble_folds, std::uint64_t seed, const Taxonomy& tax = default_taxonomy()) {
    check_task_strategy(task, strategy);
    std::vector<TokenList> sub_tokens;
    std::vector<ClaimType> sub_labels;
    for (auto r : rows) {
        sub_tokens.push_back(tokens[r]);
        sub_labels.push_back(labels[r]);
    }
    if (task == Task::ClaimIdBalanced || task == Task::ClaimIdImbalanced || task == Task::Stance) {
        ModelBundle b;
        b.strategy = Strategy::Flat;
        b.family = cc.family;
        b.features = space;
        b.taxonomy = tax;
        std::vector<FeatureVector> X;
        std::vector<std::string> y;
        for (std::size_t i = 0; i < sub_tokens.size(); ++i) {
            X.push_back(space.encode(sub_tokens[i]));
            y.push_back(*task_label(task, sub_labels[i], tax));
        }
        std::vector<std::size_t> all(X.size());
        std::iota(all.begin(), all.end(), 0);
        b.components.emplace(component::kFlat, fit_classifier(cc, sub_tokens, X, all, y, space.sparse_width(),
                                                              detail::component_seed(seed, component::kFlat)));
        b.metadata["train"] = cc.train.to_json();
        b.metadata["seed"] = seed;
        b.validate();
        return b;
    }
    BundleConfig bc;
    bc.strategy = strategy;
    bc.classifier = cc;
    bc.ensemble_folds = ensemble_folds;
    bc.seed = seed;
    return train_bundle(space, sub_tokens, sub_labels, bc, tax);
}

// Test-style evaluation of a bundle on `rows` under a task's label view. In
// supp-v-opp the gold stance picks the per-stance component.
inline MetricsReport evaluate_bundle(const ModelBundle& b, Task task, const std::vector<TokenList>& tokens,
                                     const std::vector<ClaimType>& labels, const std::vector<std::size_t>& rows) {
    std::vector<std::string> gold, pred;
    for (auto r : rows) {
        const auto g = task_label(task, labels[r], b.taxonomy);
        if (!g) continue;
        gold.push_back(*g);
        if (task == Task::SuppVOpp) {
            const bool support = b.taxonomy.stance_of(labels[r]) == Stance::Support;
            const Classifier& c = b.get(support ? component::kSupportType : component::kOpposeType);
            pred.push_back(c.predict(tokens[r], b.features.encode(tokens[r])));
        } else {
            pred.push_back(b.predict(tokens[r]).label);
        }
    }
    return metrics(gold, pred, task_classes(task, b.taxonomy));
}

inline Split split_for(const std::vector<ClaimType>& labels, const SplitConfig& cfg) {
    std::vector<std::string> names;
    names.reserve(labels.size());
    for (auto c : labels) names.emplace_back(to_string(c));
    return stratified_split(names, cfg);
}

// Trains on the split's train part, picks hyperparameters by dev macro-F1,
// reports test metrics.
inline ExperimentResult run_experiment(const std::vector<TokenList>& tokens, const std::vector<ClaimType>& labels,
                                       const ExperimentConfig& cfg, const Split* given_split = nullptr,
                                       const Taxonomy& tax = default_taxonomy()) {
    if (tokens.size() != labels.size()) throw ValidationError("sentence and label counts differ");
    check_task_strategy(cfg.task, cfg.strategy);
    if (cfg.task == Task::ClaimPlusEnsemble && cfg.classifier.family != ModelFamily::LogReg)
        throw ValidationError("claim+ensemble is defined for the logreg family only");
    const Split split = given_split ? *given_split : split_for(labels, cfg.split);
    const auto train_rows = task_train_rows(cfg.task, labels, split.train, cfg.seed);
    if (train_rows.empty()) throw ValidationError("no training sentences for task " + std::string(to_string(cfg.task)));

    std::vector<TokenList> train_tokens;
    for (auto r : train_rows) train_tokens.push_back(tokens[r]);
    const FeatureSpace space = FeatureSpace::fit(train_tokens, cfg.vocab_cap, cfg.vectors);

    auto fit = [&](const TrainConfig& tc) {
        ClassifierConfig cc = cfg.classifier;
        cc.train = tc;
        return train_task_bundle(cfg.task, cfg.strategy, space, tokens, labels, train_rows, cc, cfg.ensemble_folds,
                                 cfg.seed, tax);
    };
    ExperimentResult r;
    SearchSpace space_cfg = cfg.search;
    space_cfg.seed = splitmix64(cfg.seed ^ fnv1a64("search"));
    r.search = search(space_cfg, [&](const TrainConfig& tc) {
        return evaluate_bundle(fit(tc), cfg.task, tokens, labels, split.dev).macro_f1;
    }, cfg.classifier.train);
    r.bundle = fit(r.search.best);
    r.bundle.metadata["task"] = to_string(cfg.task);
    r.test = evaluate_bundle(r.bundle, cfg.task, tokens, labels, split.test);
    r.report = {{"task", to_string(cfg.task)},
                {"strategy", to_string(cfg.strategy)},
                {"family", to_string(cfg.classifier.family)},
                {"seed", cfg.seed},
                {"sizes", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()},
                           {"train_rows", train_rows.size()}}},
                {"search", {{"budget", cfg.search.budget}, {"best_trial", r.search.best_trial},
                            {"dev_macro_f1", r.search.best_score}, {"config", r.search.best.to_json()}}},
                {"test", r.test.to_json()}};
    return r;
}

} // namespace argmine
