#pragma once

#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"
#include "argmine/fasttext_model.hpp"
#include "argmine/features.hpp"
#include "argmine/linear_model.hpp"
#include "argmine/taxonomy.hpp"

namespace argmine {

enum class Strategy { Flat, TwoStage, Hierarchical, Ensemble };
enum class ModelFamily { LogReg, FastText };

inline std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Flat: return "flat";
    case Strategy::TwoStage: return "two-stage";
    case Strategy::Hierarchical: return "hierarchical";
    case Strategy::Ensemble: return "ensemble";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view s) {
    const std::string f = detail::fold_name(s);
    if (f == "flat") return Strategy::Flat;
    if (f == "twostage") return Strategy::TwoStage;
    if (f == "hierarchical") return Strategy::Hierarchical;
    if (f == "ensemble") return Strategy::Ensemble;
    throw ValidationError("unknown strategy '" + std::string(s) + "' (flat, two-stage, hierarchical, ensemble)");
}

inline std::string_view to_string(ModelFamily f) { return f == ModelFamily::LogReg ? "logreg" : "fasttext"; }

inline ModelFamily parse_family(std::string_view s) {
    const std::string f = detail::fold_name(s);
    if (f == "logreg" || f == "lr" || f == "lrw2v") return ModelFamily::LogReg;
    if (f == "fasttext") return ModelFamily::FastText;
    throw ValidationError("unknown model family '" + std::string(s) + "' (logreg, fasttext)");
}

inline constexpr std::string_view kArgumentative = "Argumentative";
inline constexpr std::string_view kNeutralClass = "Neutral";

namespace component {
inline constexpr const char* kFlat = "flat";
inline constexpr const char* kClaimId = "claim_id";
inline constexpr const char* kClaimType = "claim_type";
inline constexpr const char* kStance = "stance";
inline constexpr const char* kSupportType = "support_type";
inline constexpr const char* kOpposeType = "oppose_type";
inline constexpr const char* kEnsemble = "ensemble";
} // namespace component

inline std::vector<std::string> required_components(Strategy s) {
    using namespace component;
    switch (s) {
    case Strategy::Flat: return {kFlat};
    case Strategy::TwoStage: return {kClaimId, kClaimType};
    case Strategy::Hierarchical: return {kClaimId, kStance, kSupportType, kOpposeType};
    case Strategy::Ensemble: return {kClaimId, kStance, kSupportType, kOpposeType, kEnsemble};
    }
    return {};
}

// ---------------------------------------------------------------------------
// feature space

// Vocabulary plus optional fitted SIF embedding; both built on training data only.
class FeatureSpace {
public:
    FeatureSpace() = default;

    static FeatureSpace fit(const std::vector<TokenList>& train, std::size_t vocab_cap,
                            const EmbeddingTable* vectors = nullptr) {
        FeatureSpace s;
        s.vocab_ = NgramVocab::build(train, vocab_cap);
        if (vectors) {
            auto e = std::make_shared<EmbeddingTable>(*vectors);
            e->fit(train);
            s.emb_ = std::move(e);
        }
        return s;
    }

    const NgramVocab& vocab() const { return vocab_; }
    const EmbeddingTable* embedding() const { return emb_.get(); }
    std::size_t sparse_width() const { return vocab_.size(); }
    std::size_t dense_width() const { return emb_ ? emb_->dim() : 0; }

    FeatureVector encode(const TokenList& tokens) const { return featurize(tokens, vocab_, emb_.get()); }

    nlohmann::json to_json() const {
        nlohmann::json v = nlohmann::json::array();
        for (std::size_t i = 0; i < vocab_.size(); ++i) v.push_back({vocab_.ngram(i), vocab_.frequency(i)});
        nlohmann::json j = {{"vocab", v}, {"vocab_fingerprint", text::to_hex(vocab_.fingerprint())}};
        if (emb_) {
            j["embedding"] = {{"source", emb_->source()},
                              {"fingerprint", text::to_hex(emb_->fingerprint())},
                              {"dim", emb_->dim()},
                              {"a", emb_->a()},
                              {"component", emb_->component() ? nlohmann::json(*emb_->component()) : nlohmann::json(nullptr)},
                              {"counts", emb_->counts()},
                              {"total", emb_->total_count()}};
        } else {
            j["embedding"] = nullptr;
        }
        return j;
    }

    // `vectors` supplies the word-vector table when the space uses one; its
    // fingerprint must match the one recorded at training time.
    static FeatureSpace from_json(const nlohmann::json& j, const EmbeddingTable* vectors) {
        FeatureSpace s;
        std::string vocab_text;
        std::size_t i = 0;
        for (const auto& e : j.at("vocab")) {
            vocab_text += e.at(0).get<std::string>() + "\t" + std::to_string(i++) + "\t" +
                          std::to_string(e.at(1).get<std::uint64_t>()) + "\n";
        }
        s.vocab_ = NgramVocab::parse(vocab_text);
        const auto& ej = j.at("embedding");
        if (!ej.is_null()) {
            if (!vectors)
                throw MissingInputError("model uses word vectors from '" + ej.at("source").get<std::string>() +
                                        "'; supply them with --vectors");
            if (text::to_hex(vectors->fingerprint()) != ej.at("fingerprint").get<std::string>())
                throw ValidationError("word-vector table does not match the one the model was trained with");
            auto e = std::make_shared<EmbeddingTable>(*vectors);
            e->set_a(ej.at("a").get<double>());
            e->set_counts(ej.at("counts").get<std::map<std::string, std::uint64_t>>(), ej.at("total").get<std::uint64_t>());
            if (!ej.at("component").is_null()) e->set_component(ej.at("component").get<Vec>());
            s.emb_ = std::move(e);
        }
        return s;
    }

private:
    NgramVocab vocab_;
    std::shared_ptr<const EmbeddingTable> emb_;
};

// ---------------------------------------------------------------------------
// classifier of either family

struct Classifier {
    ModelFamily family = ModelFamily::LogReg;
    LinearModel linear;
    FastTextModel fasttext;

    const std::vector<std::string>& classes() const {
        return family == ModelFamily::LogReg ? linear.classes() : fasttext.classes();
    }

    Vec predict_proba(const TokenList& tokens, const FeatureVector& x) const {
        return family == ModelFamily::LogReg ? linear.predict_proba(x) : fasttext.predict_proba(tokens);
    }

    double probability_of(const TokenList& tokens, const FeatureVector& x, std::string_view cls) const {
        const Vec p = predict_proba(tokens, x);
        const auto& cs = classes();
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (cs[i] == cls) return p[i];
        }
        return 0.0;
    }

    const std::string& predict(const TokenList& tokens, const FeatureVector& x) const {
        return classes()[argmax(predict_proba(tokens, x))];
    }

    nlohmann::json to_json() const {
        return {{"family", to_string(family)},
                {"model", family == ModelFamily::LogReg ? linear.to_json() : fasttext.to_json()}};
    }

    static Classifier from_json(const nlohmann::json& j) {
        Classifier c;
        c.family = parse_family(j.at("family").get<std::string>());
        if (c.family == ModelFamily::LogReg) {
            c.linear = LinearModel::from_json(j.at("model"));
        } else {
            c.fasttext = FastTextModel::from_json(j.at("model"));
        }
        return c;
    }

    bool operator==(const Classifier& o) const { return to_json() == o.to_json(); }
};

struct ClassifierConfig {
    ModelFamily family = ModelFamily::LogReg;
    TrainConfig train;
    std::size_t fasttext_dims = 50;
    std::uint64_t fasttext_buckets = kDefaultBuckets;
    // Replaces train.batch_size for the fasttext family. Bucket vectors only
    // receive gradient through the output layer, which starts at zero, so
    // batch-averaged steps barely move them; per-example updates do.
    std::size_t fasttext_batch_size = 1;
    bool balanced_class_weights = true;
};

// Trains on the listed rows. A single observed class yields a constant
// classifier (probability 1) instead of an error, which cross-fitting folds
// on rare stances can hit.
inline Classifier fit_classifier(const ClassifierConfig& cfg, const std::vector<TokenList>& tokens,
                                 const std::vector<FeatureVector>& X, const std::vector<std::size_t>& rows,
                                 const std::vector<std::string>& y, std::size_t sparse_width, std::uint64_t seed) {
    if (rows.size() != y.size()) throw ValidationError("row and label counts differ");
    if (rows.empty()) throw ValidationError("no training rows for component");
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    if (cfg.balanced_class_weights) tc.class_weights = balanced_weights(y);
    Classifier c;
    c.family = cfg.family;
    const bool single = std::all_of(y.begin(), y.end(), [&](const std::string& v) { return v == y.front(); });
    if (cfg.family == ModelFamily::LogReg) {
        if (single) {
            c.linear = LinearModel({y.front()}, sparse_width, X.at(rows.front()).dense.size());
            return c;
        }
        std::vector<FeatureVector> xs;
        xs.reserve(rows.size());
        for (auto r : rows) xs.push_back(X.at(r));
        c.linear = train(xs, y, tc, sparse_width, nullptr);
    } else {
        if (single) {
            c.fasttext.embeddings = BucketMatrix(cfg.fasttext_dims, cfg.fasttext_buckets, seed);
            c.fasttext.output = LinearModel({y.front()}, 0, cfg.fasttext_dims);
            return c;
        }
        std::vector<TokenList> ts;
        ts.reserve(rows.size());
        for (auto r : rows) ts.push_back(tokens.at(r));
        tc.batch_size = cfg.fasttext_batch_size;
        c.fasttext = train_fasttext_like(ts, y, FastTextConfig{cfg.fasttext_dims, cfg.fasttext_buckets, tc});
    }
    return c;
}

// ---------------------------------------------------------------------------
// model bundle and prediction strategies

struct Prediction {
    std::string label;                       // claim name for claim tasks
    std::map<std::string, double> probabilities;
};

class ModelBundle {
public:
    static constexpr int kFormatVersion = 1;
    static constexpr std::size_t kProbabilityFeatures = 20;

    Strategy strategy = Strategy::Flat;
    ModelFamily family = ModelFamily::LogReg;
    FeatureSpace features;
    Taxonomy taxonomy = Taxonomy::builtin();
    std::map<std::string, Classifier> components;
    nlohmann::json metadata = nlohmann::json::object();

    void validate() const {
        for (const auto& name : required_components(strategy)) {
            if (!components.count(name))
                throw ValidationError("bundle strategy " + std::string(to_string(strategy)) + " needs component " + name);
        }
        for (const auto& [name, c] : components) {
            const auto req = required_components(strategy);
            if (std::find(req.begin(), req.end(), name) == req.end())
                throw ValidationError("bundle has unexpected component " + name);
            if (c.family != ModelFamily::LogReg) continue;
            std::size_t dense = features.dense_width() + (name == component::kEnsemble ? kProbabilityFeatures : 0);
            if (c.linear.sparse_width() != features.sparse_width() || c.linear.dense_width() != dense)
                throw ValidationError("component " + name + " does not match the bundle feature layout");
        }
    }

    const Classifier& get(const std::string& name) const {
        auto it = components.find(name);
        if (it == components.end()) throw ValidationError("bundle is missing component " + name);
        return it->second;
    }

    // Fixed 20-slot layout: claim-id (Argumentative, Neutral), stance
    // (Opposition, Support), support types, opposition types in taxonomy order.
    std::vector<std::pair<std::string, std::string>> probability_slots() const {
        std::vector<std::pair<std::string, std::string>> slots = {
            {component::kClaimId, std::string(kArgumentative)},
            {component::kClaimId, std::string(kNeutralClass)},
            {component::kStance, "Opposition"},
            {component::kStance, "Support"}};
        for (ClaimType t : taxonomy.members(Stance::Support)) slots.emplace_back(component::kSupportType, to_string(t));
        for (ClaimType t : taxonomy.members(Stance::Opposition)) slots.emplace_back(component::kOpposeType, to_string(t));
        if (slots.size() != kProbabilityFeatures) throw ValidationError("taxonomy does not give 20 probability features");
        return slots;
    }

    Vec probability_features(const TokenList& tokens, const FeatureVector& x) const {
        std::map<std::string, std::pair<const Classifier*, Vec>> cache;
        Vec out;
        for (const auto& [comp, cls] : probability_slots()) {
            auto it = cache.find(comp);
            if (it == cache.end()) {
                const Classifier& c = get(comp);
                it = cache.emplace(comp, std::make_pair(&c, c.predict_proba(tokens, x))).first;
            }
            const auto& cs = it->second.first->classes();
            double p = 0.0;
            for (std::size_t i = 0; i < cs.size(); ++i) {
                if (cs[i] == cls) p = it->second.second[i];
            }
            out.push_back(p);
        }
        return out;
    }

    static FeatureVector augment(FeatureVector x, const Vec& probs) {
        x.dense.insert(x.dense.end(), probs.begin(), probs.end());
        return x;
    }

    Prediction predict(const TokenList& tokens) const {
        const FeatureVector x = features.encode(tokens);
        Prediction out;
        auto fill = [&](const Classifier& c, const Vec& p, double scale, std::map<std::string, double>& dst) {
            for (std::size_t i = 0; i < p.size(); ++i) dst[c.classes()[i]] = scale * p[i];
        };
        switch (strategy) {
        case Strategy::Flat: {
            const Classifier& c = get(component::kFlat);
            const Vec p = c.predict_proba(tokens, x);
            out.label = c.classes()[argmax(p)];
            fill(c, p, 1.0, out.probabilities);
            break;
        }
        case Strategy::TwoStage: {
            const double p_arg = get(component::kClaimId).probability_of(tokens, x, kArgumentative);
            const Classifier& t = get(component::kClaimType);
            const Vec p = t.predict_proba(tokens, x);
            out.probabilities[std::string(kNeutralClass)] = 1.0 - p_arg;
            fill(t, p, p_arg, out.probabilities);
            out.label = p_arg >= 0.5 ? t.classes()[argmax(p)] : std::string(kNeutralClass);
            break;
        }
        case Strategy::Hierarchical: {
            const double p_arg = get(component::kClaimId).probability_of(tokens, x, kArgumentative);
            const double p_sup = get(component::kStance).probability_of(tokens, x, "Support");
            const Classifier& s = get(component::kSupportType);
            const Classifier& o = get(component::kOpposeType);
            const Vec ps = s.predict_proba(tokens, x);
            const Vec po = o.predict_proba(tokens, x);
            out.probabilities[std::string(kNeutralClass)] = 1.0 - p_arg;
            fill(s, ps, p_arg * p_sup, out.probabilities);
            fill(o, po, p_arg * (1.0 - p_sup), out.probabilities);
            if (p_arg < 0.5) {
                out.label = kNeutralClass;
            } else if (p_sup >= 0.5) {
                out.label = s.classes()[argmax(ps)];
            } else {
                out.label = o.classes()[argmax(po)];
            }
            break;
        }
        case Strategy::Ensemble: {
            const Classifier& e = get(component::kEnsemble);
            if (e.family != ModelFamily::LogReg) throw ValidationError("ensemble component must be a linear model");
            const Vec p = e.linear.predict_proba(augment(x, probability_features(tokens, x)));
            out.label = e.classes()[argmax(p)];
            fill(e, p, 1.0, out.probabilities);
            break;
        }
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json comps = nlohmann::json::object();
        for (const auto& [name, c] : components) comps[name] = c.to_json();
        return {{"format", "argmine-model-bundle"},
                {"version", kFormatVersion},
                {"strategy", to_string(strategy)},
                {"family", to_string(family)},
                {"taxonomy", taxonomy.to_json()},
                {"features", features.to_json()},
                {"components", comps},
                {"metadata", metadata}};
    }

    static ModelBundle from_json(const nlohmann::json& j, const EmbeddingTable* vectors = nullptr) {
        if (j.value("format", "") != "argmine-model-bundle") throw ValidationError("not a model bundle");
        if (j.value("version", 0) != kFormatVersion)
            throw ValidationError("unsupported bundle version " + std::to_string(j.value("version", 0)));
        ModelBundle b;
        b.strategy = parse_strategy(j.at("strategy").get<std::string>());
        b.family = parse_family(j.at("family").get<std::string>());
        b.taxonomy = Taxonomy::from_json(j.at("taxonomy"));
        b.features = FeatureSpace::from_json(j.at("features"), vectors);
        for (const auto& [name, c] : j.at("components").items()) b.components.emplace(name, Classifier::from_json(c));
        b.metadata = j.value("metadata", nlohmann::json::object());
        b.validate();
        return b;
    }

    std::string serialize() const { return to_json().dump(1) + "\n"; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw MissingInputError("cannot write " + path);
        out << serialize();
    }

    static nlohmann::json read_json(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingInputError("cannot read model bundle " + path);
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("model bundle " + path + ": " + e.what());
        }
    }

    static ModelBundle load(const std::string& path, const EmbeddingTable* vectors = nullptr) {
        return from_json(read_json(path), vectors);
    }
};

namespace detail {
inline ClaimType claim_of(const ModelBundle& b, const TokenList& tokens, Strategy expected) {
    if (b.strategy != expected)
        throw ValidationError("bundle strategy is " + std::string(to_string(b.strategy)) + ", not " +
                              std::string(to_string(expected)));
    return claim_type_from_string(b.predict(tokens).label);
}
} // namespace detail

inline ClaimType predict_flat(const ModelBundle& b, const TokenList& t) { return detail::claim_of(b, t, Strategy::Flat); }
inline ClaimType predict_two_stage(const ModelBundle& b, const TokenList& t) {
    return detail::claim_of(b, t, Strategy::TwoStage);
}
inline ClaimType predict_hierarchical(const ModelBundle& b, const TokenList& t) {
    return detail::claim_of(b, t, Strategy::Hierarchical);
}
inline ClaimType predict_ensemble(const ModelBundle& b, const TokenList& t) {
    return detail::claim_of(b, t, Strategy::Ensemble);
}

// ---------------------------------------------------------------------------
// training a bundle

struct BundleConfig {
    Strategy strategy = Strategy::Flat;
    ClassifierConfig classifier;
    int ensemble_folds = 5;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t component_seed(std::uint64_t seed, std::string_view name) { return splitmix64(seed ^ fnv1a64(name)); }

struct LabeledRows {
    std::vector<std::size_t> rows;
    std::vector<std::string> y;
};

// Gold-filtered training rows for each component.
inline LabeledRows component_rows(const std::string& name, const std::vector<ClaimType>& labels,
                                  const std::vector<std::size_t>& subset, const Taxonomy& tax) {
    LabeledRows out;
    for (auto i : subset) {
        const ClaimType c = labels[i];
        const Stance s = tax.stance_of(c);
        std::optional<std::string> y;
        if (name == component::kFlat || name == component::kEnsemble) {
            y = std::string(to_string(c));
        } else if (name == component::kClaimId) {
            y = std::string(c == ClaimType::Neutral ? kNeutralClass : kArgumentative);
        } else if (name == component::kClaimType) {
            if (c != ClaimType::Neutral) y = std::string(to_string(c));
        } else if (name == component::kStance) {
            if (c != ClaimType::Neutral) y = std::string(to_string(s));
        } else if (name == component::kSupportType) {
            if (s == Stance::Support) y = std::string(to_string(c));
        } else if (name == component::kOpposeType) {
            if (s == Stance::Opposition) y = std::string(to_string(c));
        }
        if (y) {
            out.rows.push_back(i);
            out.y.push_back(*y);
        }
    }
    return out;
}

} // namespace detail

inline ModelBundle train_bundle(const FeatureSpace& space, const std::vector<TokenList>& tokens,
                                const std::vector<ClaimType>& labels, const BundleConfig& cfg,
                                const Taxonomy& tax = default_taxonomy()) {
    if (tokens.size() != labels.size()) throw ValidationError("sentence and label counts differ");
    if (cfg.strategy == Strategy::Ensemble && cfg.classifier.family != ModelFamily::LogReg)
        throw ValidationError("the ensemble strategy is defined for the logreg family only");
    if (cfg.ensemble_folds < 2) throw ValidationError("ensemble_folds must be >= 2");
    ModelBundle b;
    b.strategy = cfg.strategy;
    b.family = cfg.classifier.family;
    b.features = space;
    b.taxonomy = tax;

    std::vector<FeatureVector> X;
    X.reserve(tokens.size());
    for (const auto& t : tokens) X.push_back(space.encode(t));
    std::vector<std::size_t> all(tokens.size());
    std::iota(all.begin(), all.end(), 0);

    auto fit = [&](const std::string& name, const std::vector<std::size_t>& subset, std::uint64_t seed,
                   const std::vector<FeatureVector>& feats) {
        auto rows = detail::component_rows(name, labels, subset, tax);
        if (rows.rows.empty()) throw ValidationError("no training sentences for component " + name);
        return fit_classifier(cfg.classifier, tokens, feats, rows.rows, rows.y, space.sparse_width(),
                              detail::component_seed(seed, name));
    };

    for (const auto& name : required_components(cfg.strategy)) {
        if (name == component::kEnsemble) continue;
        b.components.emplace(name, fit(name, all, cfg.seed, X));
    }

    if (cfg.strategy == Strategy::Ensemble) {
        // Out-of-fold sub-model probabilities for the ensemble's training rows.
        std::vector<std::size_t> order = all;
        Rng rng(detail::component_seed(cfg.seed, "folds"));
        rng.shuffle(order);
        std::vector<FeatureVector> augmented(X.size());
        const auto subs = required_components(Strategy::Hierarchical);
        for (int k = 0; k < cfg.ensemble_folds; ++k) {
            std::vector<std::size_t> in_fold, out_fold;
            for (std::size_t t = 0; t < order.size(); ++t) {
                (static_cast<int>(t % static_cast<std::size_t>(cfg.ensemble_folds)) == k ? in_fold : out_fold)
                    .push_back(order[t]);
            }
            std::sort(in_fold.begin(), in_fold.end());
            std::sort(out_fold.begin(), out_fold.end());
            if (in_fold.empty()) continue;
            ModelBundle fold;
            fold.strategy = Strategy::Hierarchical;
            fold.taxonomy = tax;
            for (const auto& name : subs) {
                fold.components.emplace(name, fit(name, out_fold, splitmix64(cfg.seed + static_cast<std::uint64_t>(k) + 1), X));
            }
            for (auto i : in_fold) augmented[i] = ModelBundle::augment(X[i], fold.probability_features(tokens[i], X[i]));
        }
        b.components.emplace(component::kEnsemble, fit(component::kEnsemble, all, cfg.seed, augmented));
    }
    b.metadata["train"] = cfg.classifier.train.to_json();
    b.metadata["seed"] = cfg.seed;
    b.validate();
    return b;
}

} // namespace argmine
