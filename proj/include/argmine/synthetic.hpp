#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/features.hpp"
#include "argmine/grammar.hpp"
#include "argmine/rng.hpp"
#include "argmine/taxonomy.hpp"

namespace argmine {

// Two cue bigrams per claim type, pairwise word-disjoint across types. Most
// echo n-grams that carry heavy weight for their type in real comments.
inline const std::map<ClaimType, std::vector<std::string>>& planted_cues() {
    static const std::map<ClaimType, std::vector<std::string>> cues = {
        {ClaimType::ExplicitSupport, {"fully endorse", "support passage"}},
        {ClaimType::LikelySupport, {"economic benefit", "applaud efforts"}},
        {ClaimType::ExplicitOpposition, {"not approve", "oppose adoption"}},
        {ClaimType::LikelyOpposition, {"please reconsider", "potential risk"}},
        {ClaimType::Burdensome, {"time consuming", "prohibitive costs"}},
        {ClaimType::LacksFlexibility, {"inflexible mandate", "artificially inflated"}},
        {ClaimType::NotSufficientTime, {"postpone deadline", "extend timeline"}},
        {ClaimType::ConflictingInterests, {"anti competitive", "unfair advantage"}},
        {ClaimType::DisputedInformation, {"unintended consequences", "flawed science"}},
        {ClaimType::LegalChallenge, {"file lawsuit", "court litigation"}},
        {ClaimType::Overreach, {"overstep authority", "federal overreach"}},
        {ClaimType::RequestsClarification, {"kindly amend", "revise wording"}},
        {ClaimType::LacksClarity, {"ambiguous definition", "confusing language"}},
        {ClaimType::SeeksExclusion, {"grant exemptions", "seek relief"}},
        {ClaimType::TooBroad, {"overly broad", "open interpretation"}},
        {ClaimType::TooNarrow, {"narrow scope", "be expanded"}},
    };
    return cues;
}

struct SyntheticConfig {
    std::size_t sentences = 20000;
    double neutral_fraction = 0.85;
    double leak_rate = 0.05;  // Neutral sentences carrying one lone cue word
    std::size_t min_tokens = 6;
    std::size_t max_tokens = 14;
    std::size_t filler_words = 400;
    std::size_t sentences_per_comment = 5;
    std::size_t vector_dim = 10;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    std::vector<Comment> comments;
    std::vector<Sentence> sentences;        // ids 0..n-1
    std::vector<ClaimType> planted;         // by sentence id
    std::string grammar_text;
    LexiconSet lexicons;
    std::vector<std::pair<std::string, Vec>> vectors;  // every word used

    std::string vectors_text() const {
        std::string out = std::to_string(vectors.size()) + " " + std::to_string(vectors.empty() ? 0 : vectors[0].second.size()) + "\n";
        char buf[32];
        for (const auto& [w, v] : vectors) {
            out += w;
            for (double x : v) {
                std::snprintf(buf, sizeof buf, " %.6f", x);
                out += buf;
            }
            out += '\n';
        }
        return out;
    }
};

namespace detail {

inline std::string upper_snake(std::string_view camel) {
    std::string out;
    for (char c : camel) {
        if (c >= 'A' && c <= 'Z' && !out.empty()) out += '_';
        out += static_cast<char>(c >= 'a' && c <= 'z' ? c - 32 : c);
    }
    return out;
}

inline std::vector<std::string> pseudo_words(std::size_t n, const std::set<std::string>& reserved, Rng& rng) {
    static const char* onset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
    static const char* nucleus[] = {"a", "e", "i", "o", "u"};
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        const std::size_t syl = 2 + rng.index(2);
        for (std::size_t s = 0; s < syl; ++s) {
            w += onset[rng.index(14)];
            w += nucleus[rng.index(5)];
        }
        if (reserved.count(w) || !seen.insert(w).second) continue;
        out.push_back(w);
    }
    return out;
}

} // namespace detail

// Planted-cue corpus: each argumentative sentence is filler words around one
// cue bigram of its type; Neutral sentences are filler only, with a few
// carrying a single cue word. Ships the matching grammar and lexicons.
inline SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.sentences == 0) throw ValidationError("synthetic corpus needs at least one sentence");
    if (cfg.min_tokens < 3 || cfg.max_tokens < cfg.min_tokens) throw ValidationError("bad synthetic sentence length range");
    if (!(cfg.neutral_fraction >= 0 && cfg.neutral_fraction <= 1)) throw ValidationError("neutral_fraction must be in [0,1]");
    Rng rng(cfg.seed);
    const auto& cues = planted_cues();
    std::set<std::string> cue_words;
    for (const auto& [c, list] : cues) {
        for (const auto& p : list) {
            for (const auto& w : text::tokenize(p)) cue_words.insert(w);
        }
    }
    const auto filler = detail::pseudo_words(cfg.filler_words, cue_words, rng);
    const std::vector<std::string> lone(cue_words.begin(), cue_words.end());

    SyntheticCorpus out;
    const auto n_neutral = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.sentences) * cfg.neutral_fraction));
    std::vector<ClaimType> classes;
    for (std::size_t i = 0; i < n_neutral; ++i) classes.push_back(ClaimType::Neutral);
    const auto claims = default_taxonomy().claims();
    for (std::size_t i = n_neutral; i < cfg.sentences; ++i) classes.push_back(claims[(i - n_neutral) % claims.size()]);
    rng.shuffle(classes);

    std::vector<std::string> texts;
    for (std::size_t i = 0; i < cfg.sentences; ++i) {
        const std::size_t len = cfg.min_tokens + rng.index(cfg.max_tokens - cfg.min_tokens + 1);
        std::vector<std::string> words;
        for (std::size_t k = 0; k < len; ++k) words.push_back(filler[rng.index(filler.size())]);
        const ClaimType c = classes[i];
        // Insert before the last filler word so sentences end on filler.
        const std::size_t pos = rng.index(len - 1);
        if (c != ClaimType::Neutral) {
            const auto& list = cues.at(c);
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), list[rng.index(list.size())]);
        } else if (rng.uniform() < cfg.leak_rate) {
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), lone[rng.index(lone.size())]);
        }
        std::string s = text::join(words, " ");
        s[0] = static_cast<char>(s[0] - 32);
        texts.push_back(s + ".");
    }

    for (std::size_t i = 0; i < cfg.sentences; i += cfg.sentences_per_comment) {
        Comment cm;
        const std::size_t idx = i / cfg.sentences_per_comment;
        char id[32];
        std::snprintf(id, sizeof id, "SYN-%06zu", idx);
        cm.comment_id = id;
        std::snprintf(id, sizeof id, "SYN-D%02zu", idx % 20);
        cm.docket_id = id;
        cm.agency = "SYN";
        for (std::size_t j = i; j < std::min(cfg.sentences, i + cfg.sentences_per_comment); ++j) {
            if (j > i) cm.text += ' ';
            cm.text += texts[j];
            out.sentences.push_back(Sentence::make(static_cast<SentenceId>(j), cm.comment_id,
                                                   static_cast<int>(j - i), texts[j]));
            out.planted.push_back(classes[j]);
        }
        out.comments.push_back(std::move(cm));
    }

    for (const auto& [c, list] : cues) {
        const std::string name = "CUE_" + detail::upper_snake(to_string(c));
        out.lexicons.emplace(name, Lexicon(name, list));
        out.grammar_text += "claim " + detail::upper_snake(to_string(c)) + " -> @" + name + "\n";
    }

    std::vector<std::string> vocab(filler.begin(), filler.end());
    vocab.insert(vocab.end(), lone.begin(), lone.end());
    Rng vrng(splitmix64(cfg.seed ^ 0x76656373ULL));
    for (const auto& w : vocab) {
        Vec v(cfg.vector_dim);
        for (double& x : v) x = std::round(vrng.normal() * 1e6) / 1e6;
        out.vectors.emplace_back(w, std::move(v));
    }
    return out;
}

} // namespace argmine
