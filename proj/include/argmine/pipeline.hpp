#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/cluster.hpp"
#include "argmine/experiment.hpp"
#include "argmine/workspace.hpp"

namespace argmine {

inline std::map<std::string, std::string> docket_index(const Workspace& ws) {
    std::map<std::string, std::string> out;
    if (!fs::exists(ws.comments_path())) return out;
    for (const auto& j : read_jsonl(ws.comments_path().string())) out[j.value("comment_id", "")] = j.value("docket_id", "");
    return out;
}

// Sentence record as exposed to readers: text, tokens, docket and current label.
inline nlohmann::json sentence_view(const Sentence& s, const LabelMap& labels,
                                    const std::map<std::string, std::string>& dockets) {
    auto it = labels.find(s.sentence_id);
    nlohmann::json j = label_to_json(s.sentence_id, it == labels.end() ? LabelRecord{} : it->second);
    auto d = dockets.find(s.comment_id);
    j["comment_id"] = s.comment_id;
    j["docket_id"] = d == dockets.end() ? std::string() : d->second;
    j["text"] = s.text;
    j["tokens"] = s.tokens;
    j["label"] = j["claim"];
    return j;
}

struct ClusterRequest {
    std::size_t k = 8;
    std::string pool = "Neutral";  // "all" or a label name
    std::size_t exemplars = 5;
    std::uint64_t seed = 0;
};

// Clusters the sentences whose current label matches the pool and reports
// size, exemplars and dominant label per cluster. Dominant-label ties go to
// the earlier label in taxonomy order.
inline nlohmann::json cluster_summary(const std::vector<Sentence>& sentences, const LabelMap& labels,
                                      const std::map<std::string, std::string>& dockets, const ClusterRequest& req,
                                      const EmbeddingTable* vectors) {
    std::optional<ClaimType> pool_claim;
    if (req.pool != "all") {
        pool_claim = parse_claim_type(req.pool);
        if (!pool_claim) throw ValidationError("unknown pool '" + req.pool + "'; use all or a label name");
    }
    auto label_of = [&](SentenceId id) {
        auto it = labels.find(id);
        return it == labels.end() ? ClaimType::Neutral : it->second.claim;
    };
    std::vector<const Sentence*> members;
    for (const auto& s : sentences) {
        if (!pool_claim || label_of(s.sentence_id) == *pool_claim) members.push_back(&s);
    }
    if (members.empty()) throw ValidationError("pool '" + req.pool + "' is empty");
    if (req.k < 1 || req.k > members.size())
        throw ValidationError("k must be in [1, " + std::to_string(members.size()) + "] for pool '" + req.pool + "'");
    std::vector<TokenList> toks;
    for (auto* s : members) toks.push_back(s->tokens);
    ClusterConfig cfg;
    cfg.k = req.k;
    cfg.exemplars = req.exemplars;
    cfg.seed = req.seed;
    const auto cl = cluster_candidates(clustering_embeddings(toks, vectors, req.seed), cfg);
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t c = 0; c < cl.size(); ++c) {
        std::array<std::size_t, kClaimTypeCount> counts{};
        for (auto i : cl[c].members) ++counts[static_cast<std::size_t>(label_of(members[i]->sentence_id))];
        ClaimType dominant = ClaimType::Neutral;
        std::size_t best = 0;
        for (ClaimType t : all_claim_types()) {
            if (counts[static_cast<std::size_t>(t)] > best) {
                best = counts[static_cast<std::size_t>(t)];
                dominant = t;
            }
        }
        nlohmann::json ex = nlohmann::json::array();
        for (auto i : cl[c].exemplars) ex.push_back(sentence_view(*members[i], labels, dockets));
        out.push_back({{"id", c}, {"size", cl[c].members.size()}, {"dominant_label", to_string(dominant)}, {"exemplars", ex}});
    }
    return {{"k", req.k}, {"pool", req.pool}, {"pool_size", members.size()}, {"clusters", out}};
}

// Sentences with their current weak labels, aligned by position.
struct LabeledCorpus {
    std::vector<Sentence> sentences;
    std::vector<TokenList> tokens;
    std::vector<ClaimType> labels;
};

inline LabeledCorpus load_labeled_corpus(const Workspace& ws) {
    LabeledCorpus c;
    c.sentences = read_sentences(ws.active_sentences_path().string());
    if (!fs::exists(ws.labels_path())) throw MissingInputError("workspace has no labels; run label first");
    const LabelMap labels = read_labels(ws.labels_path().string());
    for (const auto& s : c.sentences) {
        auto it = labels.find(s.sentence_id);
        if (it == labels.end())
            throw ValidationError("sentence " + std::to_string(s.sentence_id) + " has no label; rerun label");
        c.tokens.push_back(s.tokens);
        c.labels.push_back(it->second.claim);
    }
    return c;
}

// Split persisted by sentence id so it survives reordering of the corpus file.
inline nlohmann::json split_to_json(const Split& s, const std::vector<Sentence>& sentences) {
    auto ids = [&](const std::vector<std::size_t>& rows) {
        std::vector<SentenceId> out;
        for (auto r : rows) out.push_back(sentences[r].sentence_id);
        return out;
    };
    return {{"train", ids(s.train)}, {"dev", ids(s.dev)}, {"test", ids(s.test)}};
}

inline Split split_from_json(const nlohmann::json& j, const std::vector<Sentence>& sentences) {
    std::map<SentenceId, std::size_t> pos;
    for (std::size_t i = 0; i < sentences.size(); ++i) pos[sentences[i].sentence_id] = i;
    std::size_t seen = 0;
    auto rows = [&](const char* key) {
        std::vector<std::size_t> out;
        for (const auto& id : j.at(key)) {
            auto it = pos.find(id.get<SentenceId>());
            if (it == pos.end()) throw ValidationError("split refers to unknown sentence " + id.dump() + "; rerun split");
            out.push_back(it->second);
        }
        std::sort(out.begin(), out.end());
        seen += out.size();
        return out;
    };
    Split s{rows("train"), rows("dev"), rows("test")};
    if (seen != sentences.size()) throw ValidationError("split does not cover the corpus; rerun split");
    return s;
}

inline Split make_split(const Workspace& ws, const LabeledCorpus& c, const SplitConfig& cfg) {
    const Split s = split_for(c.labels, cfg);
    write_file_atomic(ws.split_path(), split_to_json(s, c.sentences).dump() + "\n");
    return s;
}

inline Split load_or_make_split(const Workspace& ws, const LabeledCorpus& c, const SplitConfig& cfg) {
    if (fs::exists(ws.split_path())) return split_from_json(nlohmann::json::parse(read_file(ws.split_path())), c.sentences);
    return make_split(ws, c, cfg);
}

// Runs one experiment and writes its bundle, report and trial log.
inline ExperimentResult train_in_workspace(const Workspace& ws, const ExperimentConfig& cfg) {
    const LabeledCorpus c = load_labeled_corpus(ws);
    const Split split = load_or_make_split(ws, c, cfg.split);
    ExperimentResult r = run_experiment(c.tokens, c.labels, cfg, &split);
    const std::string name =
        Workspace::experiment_name(to_string(cfg.task), to_string(cfg.strategy), to_string(cfg.classifier.family));
    ws.ensure();
    write_file_atomic(ws.bundle_path(name), r.bundle.serialize());
    write_file_atomic(ws.report_path(name), r.report.dump(1) + "\n");
    write_file_atomic(ws.trials_path(name), r.search.trial_log());
    write_file_atomic(ws.reports_dir() / "latest.json", r.report.dump(1) + "\n");
    return r;
}

} // namespace argmine
