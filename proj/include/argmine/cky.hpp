#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "argmine/corpus.hpp"
#include "argmine/grammar.hpp"
#include "argmine/taxonomy.hpp"

namespace argmine {

struct TokenSpan {
    int begin = 0;  // inclusive
    int end = 0;    // exclusive
    int length() const { return end - begin; }
    auto operator<=>(const TokenSpan&) const = default;
};

struct WeakLabel {
    SentenceId sentence_id = 0;
    ClaimType claim = ClaimType::Neutral;
    TokenSpan span;
    int rule_id = 0;
    int priority = RuleGrammar::kDefaultPriority;

    bool operator==(const WeakLabel&) const = default;
};

namespace detail {

class Chart {
public:
    Chart(std::size_t n, std::size_t symbols) : n_(n), words_((symbols + 63) / 64), bits_((n + 1) * (n + 1) * words_, 0) {}

    void set(std::size_t i, std::size_t j, Symbol s) { cell(i, j)[s / 64] |= std::uint64_t{1} << (s % 64); }

    bool test(std::size_t i, std::size_t j, Symbol s) const {
        return (cell(i, j)[s / 64] >> (s % 64)) & 1U;
    }

    template <typename F>
    void for_each(std::size_t i, std::size_t j, F&& f) const {
        const std::uint64_t* c = cell(i, j);
        for (std::size_t w = 0; w < words_; ++w) {
            std::uint64_t bits = c[w];
            while (bits) {
                const int b = __builtin_ctzll(bits);
                f(static_cast<Symbol>(w * 64 + static_cast<std::size_t>(b)));
                bits &= bits - 1;
            }
        }
    }

private:
    std::uint64_t* cell(std::size_t i, std::size_t j) { return bits_.data() + (i * (n_ + 1) + j) * words_; }
    const std::uint64_t* cell(std::size_t i, std::size_t j) const {
        return bits_.data() + (i * (n_ + 1) + j) * words_;
    }

    std::size_t n_, words_;
    std::vector<std::uint64_t> bits_;
};

} // namespace detail

// Every (claim, span) where some rule for the claim derives the contiguous
// token span and no strictly larger span of the same claim contains it. The
// reported rule is the lowest rule id deriving that exact span. Ordered by
// claim, then span.
inline std::vector<WeakLabel> cky_match(const std::vector<std::string>& tokens, const CompiledGrammar& g,
                                        SentenceId sentence_id = 0) {
    const std::size_t n = tokens.size();
    std::vector<WeakLabel> out;
    if (n == 0 || g.starts.empty()) return out;
    detail::Chart chart(n, g.symbol_count());

    for (std::size_t i = 0; i < n; ++i) {
        if (auto it = g.terminal_rules.find(tokens[i]); it != g.terminal_rules.end()) {
            for (Symbol a : it->second) chart.set(i, i + 1, a);
        }
        for (Symbol a : g.any_token_rules) chart.set(i, i + 1, a);
    }
    for (std::size_t len = 2; len <= n; ++len) {
        for (std::size_t i = 0; i + len <= n; ++i) {
            const std::size_t j = i + len;
            for (std::size_t k = i + 1; k < j; ++k) {
                chart.for_each(i, k, [&](Symbol left) {
                    for (const auto& [right, lhs] : g.by_left[left]) {
                        if (chart.test(k, j, right)) chart.set(i, j, lhs);
                    }
                });
            }
        }
    }

    // claim -> span -> best (rule_id, priority)
    std::map<ClaimType, std::map<TokenSpan, std::pair<int, int>>> derived;
    for (const auto& s : g.starts) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j <= n; ++j) {
                if (!chart.test(i, j, s.symbol)) continue;
                auto& slot = derived[s.claim];
                const TokenSpan span{static_cast<int>(i), static_cast<int>(j)};
                auto it = slot.find(span);
                if (it == slot.end() || s.rule_id < it->second.first) slot[span] = {s.rule_id, s.priority};
            }
        }
    }
    for (const auto& [claim, spans] : derived) {
        for (const auto& [span, rule] : spans) {
            const bool contained = std::any_of(spans.begin(), spans.end(), [&](const auto& other) {
                const TokenSpan& o = other.first;
                return o != span && o.begin <= span.begin && span.end <= o.end;
            });
            if (!contained) out.push_back({sentence_id, claim, span, rule.first, rule.second});
        }
    }
    return out;
}

inline std::vector<WeakLabel> cky_match(const Sentence& s, const CompiledGrammar& g) {
    return cky_match(s.tokens, g, s.sentence_id);
}

// Ordered tie-break criteria for choosing one label among candidates.
struct ConflictPolicy {
    enum class Criterion { DeeperClaim, LowerPriority, LongerSpan, LowerRuleId };
    std::vector<Criterion> order{Criterion::DeeperClaim, Criterion::LowerPriority, Criterion::LongerSpan,
                                 Criterion::LowerRuleId};

    // True when a should win over b.
    bool prefers(const WeakLabel& a, const WeakLabel& b, const Taxonomy& tax) const {
        for (Criterion c : order) {
            int cmp = 0;
            switch (c) {
            case Criterion::DeeperClaim: cmp = tax.depth(a.claim) - tax.depth(b.claim); break;
            case Criterion::LowerPriority: cmp = b.priority - a.priority; break;
            case Criterion::LongerSpan: cmp = a.span.length() - b.span.length(); break;
            case Criterion::LowerRuleId: cmp = b.rule_id - a.rule_id; break;
            }
            if (cmp != 0) return cmp > 0;
        }
        // Fully tied: fall back to a fixed total order for determinism.
        return std::tie(a.claim, a.span) < std::tie(b.claim, b.span);
    }
};

inline std::optional<WeakLabel> resolve_label(const std::vector<WeakLabel>& candidates,
                                              const Taxonomy& tax = default_taxonomy(),
                                              const ConflictPolicy& policy = {}) {
    if (candidates.empty()) return std::nullopt;
    const WeakLabel* best = &candidates.front();
    for (const auto& c : candidates) {
        if (policy.prefers(c, *best, tax)) best = &c;
    }
    return *best;
}

inline ClaimType resolve(const std::vector<WeakLabel>& candidates, const Taxonomy& tax = default_taxonomy(),
                         const ConflictPolicy& policy = {}) {
    auto w = resolve_label(candidates, tax, policy);
    return w ? w->claim : ClaimType::Neutral;
}

struct LabelRecord {
    ClaimType claim = ClaimType::Neutral;
    std::optional<int> rule_id;
    std::optional<TokenSpan> span;

    bool operator==(const LabelRecord&) const = default;
};

using LabelMap = std::map<SentenceId, LabelRecord>;

// Labels each sentence independently; sentences without a match are Neutral.
inline LabelMap label_corpus(const std::vector<Sentence>& sentences, const CompiledGrammar& g,
                             const Taxonomy& tax = default_taxonomy(), const ConflictPolicy& policy = {}) {
    LabelMap out;
    for (const auto& s : sentences) {
        LabelRecord rec;
        if (auto w = resolve_label(cky_match(s, g), tax, policy)) {
            rec.claim = w->claim;
            rec.rule_id = w->rule_id;
            rec.span = w->span;
        }
        out[s.sentence_id] = rec;
    }
    return out;
}

inline nlohmann::json label_to_json(SentenceId id, const LabelRecord& rec) {
    nlohmann::json j = {{"sentence_id", id}, {"claim", to_string(rec.claim)}};
    j["rule_id"] = rec.rule_id ? nlohmann::json(*rec.rule_id) : nlohmann::json(nullptr);
    j["span"] = rec.span ? nlohmann::json::array({rec.span->begin, rec.span->end}) : nlohmann::json(nullptr);
    return j;
}

inline void write_labels(const std::string& path, const LabelMap& labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingInputError("cannot write " + path);
    for (const auto& [id, rec] : labels) out << label_to_json(id, rec).dump() << '\n';
}

inline LabelMap read_labels(const std::string& path) {
    LabelMap out;
    for (const auto& j : read_jsonl(path)) {
        LabelRecord rec;
        rec.claim = claim_type_from_string(j.at("claim").get<std::string>());
        if (j.contains("rule_id") && !j["rule_id"].is_null()) rec.rule_id = j["rule_id"].get<int>();
        if (j.contains("span") && j["span"].is_array()) rec.span = TokenSpan{j["span"][0].get<int>(), j["span"][1].get<int>()};
        out[j.at("sentence_id").get<SentenceId>()] = rec;
    }
    return out;
}

} // namespace argmine
