#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"
#include "argmine/features.hpp"
#include "argmine/linear_model.hpp"
#include "argmine/rng.hpp"

namespace argmine {

// ---------------------------------------------------------------------------
// stratified split

struct SplitConfig {
    double train = 0.70;
    double dev = 0.15;
    double test = 0.15;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train > 0) || !(dev > 0) || !(test > 0)) throw ValidationError("split fractions must be positive");
        if (std::abs(train + dev + test - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
    }
};

struct Split {
    std::vector<std::size_t> train, dev, test;  // positions into the input, ascending

    nlohmann::json to_json() const { return {{"train", train}, {"dev", dev}, {"test", test}}; }
    static Split from_json(const nlohmann::json& j) {
        return {j.at("train").get<std::vector<std::size_t>>(), j.at("dev").get<std::vector<std::size_t>>(),
                j.at("test").get<std::vector<std::size_t>>()};
    }
};

// Per-class largest-remainder counts: floor(n·f) each, leftover instances go
// to the largest fractional parts, ties in train, dev, test order.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const SplitConfig& cfg) {
    const std::array<double, 3> f = {cfg.train, cfg.dev, cfg.test};
    std::array<std::size_t, 3> out{};
    std::array<double, 3> frac{};
    std::size_t used = 0;
    for (int i = 0; i < 3; ++i) {
        const double t = static_cast<double>(n) * f[i];
        out[i] = static_cast<std::size_t>(std::floor(t + 1e-9));
        frac[i] = std::max(0.0, t - static_cast<double>(out[i]));
        used += out[i];
    }
    while (used < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (frac[i] > frac[best] + 1e-9) best = i;
        }
        ++out[best];
        frac[best] = -1.0;
        ++used;
    }
    return out;
}

inline Split stratified_split(const std::vector<std::string>& labels, const SplitConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [c, rows] : by_class) {
        if (rows.size() < 3)
            throw ValidationError("class " + c + " has " + std::to_string(rows.size()) + " instances; need at least 3");
    }
    Rng rng(cfg.seed);
    Split s;
    for (auto& [c, rows] : by_class) {
        rng.shuffle(rows);
        const auto n = split_counts(rows.size(), cfg);
        s.train.insert(s.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n[0]));
        s.dev.insert(s.dev.end(), rows.begin() + static_cast<std::ptrdiff_t>(n[0]),
                     rows.begin() + static_cast<std::ptrdiff_t>(n[0] + n[1]));
        s.test.insert(s.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n[0] + n[1]), rows.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.dev.begin(), s.dev.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------------------
// metrics

struct ClassScores {
    std::string name;
    double precision = 0, recall = 0, f1 = 0;
    std::size_t support = 0;
};

struct MetricsReport {
    std::vector<ClassScores> per_class;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted], class-list order

    const ClassScores& at(const std::string& c) const {
        for (const auto& s : per_class) {
            if (s.name == c) return s;
        }
        throw ValidationError("no class " + c + " in report");
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& s : per_class) {
            rows.push_back({{"class", s.name}, {"R", s.recall}, {"P", s.precision}, {"F1", s.f1}, {"support", s.support}});
        }
        return {{"classes", rows},
                {"macro", {{"R", macro_recall}, {"P", macro_precision}, {"F1", macro_f1}}},
                {"confusion", confusion}};
    }
};

inline MetricsReport metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                             const std::vector<std::string>& classes) {
    if (gold.size() != pred.size()) throw ValidationError("gold and predicted label counts differ");
    if (gold.empty()) throw ValidationError("metrics of an empty label set");
    if (classes.empty()) throw ValidationError("metrics needs a class list");
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (!idx.emplace(classes[i], i).second) throw ValidationError("duplicate class " + classes[i]);
    }
    auto lookup = [&](const std::string& c) {
        auto it = idx.find(c);
        if (it == idx.end()) throw ValidationError("label " + c + " is not in the class list");
        return it->second;
    };
    const std::size_t k = classes.size();
    MetricsReport r;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < gold.size(); ++i) ++r.confusion[lookup(gold[i])][lookup(pred[i])];
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = r.confusion[c][c], row = 0, col = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row += r.confusion[c][j];
            col += r.confusion[j][c];
        }
        ClassScores s;
        s.name = classes[c];
        s.support = row;
        s.precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
        s.recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
        s.f1 = s.precision + s.recall == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
        r.per_class.push_back(s);
    }
    for (const auto& s : r.per_class) {
        r.macro_precision += s.precision;
        r.macro_recall += s.recall;
        r.macro_f1 += s.f1;
    }
    r.macro_precision /= static_cast<double>(k);
    r.macro_recall /= static_cast<double>(k);
    r.macro_f1 /= static_cast<double>(k);
    return r;
}

// ---------------------------------------------------------------------------
// hyperparameter search

struct SearchSpace {
    double lambda_min = 1e-6, lambda_max = 1e-2;
    double lr_min = 0.02, lr_max = 0.5;
    int epochs_min = 5, epochs_max = 30;
    int budget = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (budget < 1) throw ValidationError("search budget must be >= 1");
        if (!(lambda_min > 0) || !(lambda_max >= lambda_min)) throw ValidationError("bad lambda range");
        if (!(lr_min > 0) || !(lr_max >= lr_min)) throw ValidationError("bad learning-rate range");
        if (epochs_min < 1 || epochs_max < epochs_min) throw ValidationError("bad epochs range");
    }
};

struct Trial {
    int index = 0;
    TrainConfig config;
    double dev_macro_f1 = 0.0;
    bool ok = false;
    std::string error;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"trial", index}, {"config", config.to_json()}, {"status", ok ? "ok" : "failed"}};
        j["dev_macro_f1"] = ok ? nlohmann::json(dev_macro_f1) : nlohmann::json(nullptr);
        if (!ok) j["error"] = error;
        return j;
    }
};

struct SearchResult {
    TrainConfig best;
    double best_score = 0.0;
    int best_trial = -1;
    std::vector<Trial> trials;

    std::string trial_log() const {
        std::string out;
        for (const auto& t : trials) out += t.to_json().dump() + "\n";
        return out;
    }
};

inline std::vector<TrainConfig> sample_configs(const SearchSpace& space, const TrainConfig& base) {
    space.validate();
    Rng rng(space.seed);
    auto log_uniform = [&](double lo, double hi) {
        return lo == hi ? lo : std::exp(rng.uniform(std::log(lo), std::log(hi)));
    };
    std::vector<TrainConfig> out;
    for (int t = 0; t < space.budget; ++t) {
        TrainConfig c = base;
        c.lambda = log_uniform(space.lambda_min, space.lambda_max);
        c.learning_rate = log_uniform(space.lr_min, space.lr_max);
        c.epochs = space.epochs_min + static_cast<int>(rng.index(static_cast<std::uint64_t>(space.epochs_max - space.epochs_min + 1)));
        out.push_back(c);
    }
    return out;
}

// Seeded random search; a throwing or non-finite objective marks the trial
// failed. Ties keep the earlier trial.
inline SearchResult search(const SearchSpace& space, const std::function<double(const TrainConfig&)>& objective,
                           const TrainConfig& base = {}) {
    SearchResult r;
    const auto configs = sample_configs(space, base);
    for (std::size_t t = 0; t < configs.size(); ++t) {
        Trial trial;
        trial.index = static_cast<int>(t);
        trial.config = configs[t];
        try {
            trial.dev_macro_f1 = objective(configs[t]);
            trial.ok = std::isfinite(trial.dev_macro_f1);
            if (!trial.ok) trial.error = "objective returned a non-finite score";
        } catch (const std::exception& e) {
            trial.error = e.what();
        }
        if (trial.ok && (r.best_trial < 0 || trial.dev_macro_f1 > r.best_score)) {
            r.best_trial = trial.index;
            r.best_score = trial.dev_macro_f1;
            r.best = trial.config;
        }
        r.trials.push_back(std::move(trial));
    }
    if (r.best_trial < 0) {
        throw Error("all " + std::to_string(space.budget) + " search trials failed; first error: " + r.trials.front().error);
    }
    return r;
}

// ---------------------------------------------------------------------------
// weight inspection

// The k sparse-block features with the largest signed weight for `cls`,
// ties by n-gram text.
inline std::vector<std::pair<std::string, double>> top_ngrams(const LinearModel& m, const NgramVocab& vocab,
                                                              const std::string& cls, std::size_t k) {
    const std::size_t c = m.class_index(cls);
    if (m.sparse_width() != vocab.size()) throw ValidationError("model does not match the vocabulary");
    std::vector<std::pair<std::string, double>> all;
    all.reserve(vocab.size());
    for (std::size_t j = 0; j < vocab.size(); ++j) all.emplace_back(vocab.ngram(j), m.weight(c, j));
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

} // namespace argmine
