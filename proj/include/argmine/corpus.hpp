#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"
#include "argmine/text.hpp"

namespace argmine {

using SentenceId = std::int64_t;

struct Comment {
    std::string comment_id;
    std::string docket_id;
    std::string agency;
    std::string text;
    std::optional<std::string> received_at;
};

struct Sentence {
    SentenceId sentence_id = 0;
    std::string comment_id;
    int index_in_comment = 0;
    std::string text;
    std::vector<std::string> tokens;

    static Sentence make(SentenceId id, std::string comment_id, int index, std::string text) {
        Sentence s;
        s.sentence_id = id;
        s.comment_id = std::move(comment_id);
        s.index_in_comment = index;
        s.tokens = text::tokenize(text);
        s.text = std::move(text);
        return s;
    }
};

struct DedupConfig {
    double similarity_threshold = 0.95;

    void validate() const {
        if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
            throw ValidationError("similarity_threshold must be in (0, 1], got " +
                                  std::to_string(similarity_threshold));
        }
    }
};

// ---------------------------------------------------------------------------
// JSON-lines records

inline nlohmann::json to_json(const Comment& c) {
    nlohmann::json j = {{"comment_id", c.comment_id},
                        {"docket_id", c.docket_id},
                        {"agency", c.agency},
                        {"text", c.text}};
    j["received_at"] = c.received_at ? nlohmann::json(*c.received_at) : nlohmann::json(nullptr);
    return j;
}

// Throws ValidationError on a record that is not a usable comment.
inline Comment comment_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("comment record is not an object");
    auto str = [&](const char* key, bool required) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) {
            if (required) throw ValidationError(std::string("missing field ") + key);
            return {};
        }
        if (!it->is_string()) throw ValidationError(std::string("field ") + key + " is not a string");
        return it->get<std::string>();
    };
    Comment c;
    c.comment_id = str("comment_id", true);
    c.docket_id = str("docket_id", true);
    c.agency = str("agency", false);
    c.text = str("text", true);
    if (auto r = str("received_at", false); !r.empty()) c.received_at = r;
    if (c.comment_id.empty()) throw ValidationError("empty comment_id");
    if (text::is_blank(c.text)) throw ValidationError("empty comment text");
    return c;
}

inline nlohmann::json to_json(const Sentence& s) {
    return {{"sentence_id", s.sentence_id},
            {"comment_id", s.comment_id},
            {"index_in_comment", s.index_in_comment},
            {"text", s.text}};
}

inline Sentence sentence_from_json(const nlohmann::json& j) {
    return Sentence::make(j.at("sentence_id").get<SentenceId>(), j.at("comment_id").get<std::string>(),
                          j.at("index_in_comment").get<int>(), j.at("text").get<std::string>());
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename Range, typename ToJson>
void write_jsonl(const std::string& path, const Range& items, ToJson&& to) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingInputError("cannot write " + path);
    for (const auto& item : items) out << to(item).dump() << '\n';
}

inline std::vector<Sentence> read_sentences(const std::string& path) {
    std::vector<Sentence> out;
    for (const auto& j : read_jsonl(path)) out.push_back(sentence_from_json(j));
    return out;
}

inline void write_sentences(const std::string& path, const std::vector<Sentence>& sentences) {
    write_jsonl(path, sentences, [](const Sentence& s) { return to_json(s); });
}

// ---------------------------------------------------------------------------
// Sentence segmentation

namespace detail {

inline bool is_abbreviation(std::string word) {
    static const std::unordered_set<std::string> known = {
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "inc", "ltd",
        "co", "corp", "no", "nos", "sec", "secs", "art", "fig", "al", "jan", "feb", "mar",
        "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "cf", "approx",
        "dept", "gov", "p", "pp", "vol", "ch", "para", "pt", "subpt", "est", "rev", "gen"};
    while (!word.empty() && !text::is_word(static_cast<unsigned char>(word.front())) &&
           static_cast<unsigned char>(word.front()) < 0x80) {
        word.erase(word.begin());
    }
    word = text::lowercase(word);
    if (word.empty()) return false;
    if (known.count(word)) return true;
    // Initials and dotted citations: "J", "U.S", "C.F.R".
    std::size_t part = 0;
    bool dotted = false;
    for (char ch : word) {
        if (ch == '.') {
            if (part == 0) return false;
            dotted = true;
            part = 0;
        } else if ((ch >= 'a' && ch <= 'z') && ++part <= 3) {
            continue;
        } else {
            return false;
        }
    }
    return part > 0 && (dotted || word.size() == 1);
}

inline bool is_closer(char32_t c) {
    return c == U')' || c == U']' || c == U'"' || c == U'\'' || c == 0x2019 || c == 0x201D;
}

} // namespace detail

// Splits comment text into sentences. Boundaries: '!' or '?' followed by
// whitespace; '.' followed by whitespace unless the preceding word is an
// abbreviation or citation, or the next word starts lowercase; blank lines.
// Every non-whitespace character lands in exactly one sentence.
inline std::vector<Sentence> segment_sentences(const Comment& comment, SentenceId first_id = 0) {
    std::vector<Sentence> out;
    const std::u32string cps = text::decode_utf8(comment.text);
    const std::size_t n = cps.size();
    std::size_t start = 0;

    auto emit = [&](std::size_t b, std::size_t e) {
        while (b < e && text::is_space(cps[b])) ++b;
        while (e > b && text::is_space(cps[e - 1])) --e;
        if (b == e) return;
        out.push_back(Sentence::make(first_id + static_cast<SentenceId>(out.size()), comment.comment_id,
                                     static_cast<int>(out.size()),
                                     text::encode_utf8(std::u32string_view(cps).substr(b, e - b))));
    };

    std::size_t i = 0;
    while (i < n) {
        const char32_t c = cps[i];
        if (c == U'\n') {
            std::size_t j = i + 1;
            while (j < n && text::is_space(cps[j]) && cps[j] != U'\n') ++j;
            if (j < n && cps[j] == U'\n') {
                emit(start, i);
                while (j < n && text::is_space(cps[j])) ++j;
                start = j;
                i = j;
                continue;
            }
            ++i;
            continue;
        }
        if (c != U'.' && c != U'!' && c != U'?') {
            ++i;
            continue;
        }
        std::size_t end = i;
        bool has_strong = false;
        while (end < n && (cps[end] == U'.' || cps[end] == U'!' || cps[end] == U'?')) {
            has_strong = has_strong || cps[end] != U'.';
            ++end;
        }
        while (end < n && detail::is_closer(cps[end])) ++end;
        if (end < n && !text::is_space(cps[end])) {
            i = end;
            continue;
        }
        std::size_t next = end;
        while (next < n && text::is_space(cps[next])) ++next;
        bool boundary = true;
        if (!has_strong) {
            std::size_t wb = i;
            while (wb > start && !text::is_space(cps[wb - 1])) --wb;
            const std::string word = text::encode_utf8(std::u32string_view(cps).substr(wb, i - wb));
            if (end - i == 1 && detail::is_abbreviation(word)) boundary = false;
            if (next < n && text::is_ascii_lower(cps[next])) boundary = false;
        }
        if (boundary) {
            emit(start, end);
            start = end;
        }
        i = end;
    }
    emit(start, n);
    return out;
}

// Segments each comment and numbers sentences consecutively from first_id.
inline std::vector<Sentence> segment_corpus(const std::vector<Comment>& comments, SentenceId first_id = 0) {
    std::vector<Sentence> out;
    for (const auto& c : comments) {
        auto part = segment_sentences(c, first_id + static_cast<SentenceId>(out.size()));
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Similarity and near-duplicate removal

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

// Exact edit distance when it is <= limit, otherwise some value > limit.
// Only the diagonal band of half-width `limit` is evaluated.
inline std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b, std::size_t limit) {
    const std::size_t la = a.size(), lb = b.size();
    const std::size_t diff = la > lb ? la - lb : lb - la;
    if (diff > limit) return limit + 1;
    if (la == 0 || lb == 0) return std::max(la, lb);
    const std::size_t inf = limit + 1;
    std::vector<std::size_t> prev(lb + 1, inf), cur(lb + 1, inf);
    for (std::size_t j = 0; j <= std::min(lb, limit); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= la; ++i) {
        const std::size_t lo = i > limit ? i - limit : 1;
        const std::size_t hi = std::min(lb, i + limit);
        std::fill(cur.begin(), cur.end(), inf);
        cur[0] = i <= limit ? i : inf;
        std::size_t row_min = cur[0];
        for (std::size_t j = lo; j <= hi; ++j) {
            std::size_t v = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            v = std::min(v, prev[j] + 1);
            v = std::min(v, cur[j - 1] + 1);
            cur[j] = std::min(v, inf);
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > limit) return inf;
        std::swap(prev, cur);
    }
    return std::min(prev[lb], inf);
}

// 1 - distance / max_length over normalized code points; two empty strings
// are identical.
inline double similarity_normalized(std::u32string_view a, std::u32string_view b) {
    const std::size_t m = std::max(a.size(), b.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(m);
}

inline double similarity(std::string_view a, std::string_view b) {
    return similarity_normalized(text::normalize_for_similarity(a), text::normalize_for_similarity(b));
}

inline double similarity(const Sentence& a, const Sentence& b) { return similarity(a.text, b.text); }

// Greedy near-duplicate removal. Sentences are visited in sentence_id order;
// one is dropped when its similarity to an already retained sentence is
// strictly above the threshold. Survivors keep their input order.
//
// Candidates are pruned by an exact-match bucket and by length band before a
// banded edit distance; the outcome equals the all-pairs greedy scan.
inline std::vector<Sentence> dedup(const std::vector<Sentence>& sentences, const DedupConfig& cfg = {}) {
    cfg.validate();
    const double tau = cfg.similarity_threshold;
    const std::size_t n = sentences.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return sentences[x].sentence_id < sentences[y].sentence_id;
    });

    std::vector<std::u32string> norm(n);
    for (std::size_t i = 0; i < n; ++i) norm[i] = text::normalize_for_similarity(sentences[i].text);

    std::unordered_set<std::u32string> exact;
    std::vector<std::vector<std::size_t>> by_length;
    std::vector<char> keep(n, 0);

    for (std::size_t idx : order) {
        const std::u32string& s = norm[idx];
        const std::size_t len = s.size();
        bool duplicate = false;
        if (tau < 1.0 && exact.count(s)) duplicate = true;

        if (!duplicate && tau < 1.0) {
            const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(tau * static_cast<double>(len))));
            const auto hi = static_cast<std::size_t>(std::ceil(static_cast<double>(len) / tau)) + 1;
            for (std::size_t m = lo; m <= hi && m < by_length.size() && !duplicate; ++m) {
                const std::size_t maxlen = std::max(len, m);
                if (maxlen == 0) {
                    duplicate = !by_length[m].empty();
                    break;
                }
                const auto limit = static_cast<std::size_t>(std::floor((1.0 - tau) * static_cast<double>(maxlen))) + 1;
                for (std::size_t other : by_length[m]) {
                    const std::size_t d = levenshtein_bounded(s, norm[other], limit);
                    if (d > limit) continue;
                    const double sim = 1.0 - static_cast<double>(d) / static_cast<double>(maxlen);
                    if (sim > tau) {
                        duplicate = true;
                        break;
                    }
                }
            }
        }
        if (duplicate) continue;
        keep[idx] = 1;
        if (tau < 1.0) exact.insert(s);
        if (by_length.size() <= len) by_length.resize(len + 1);
        by_length[len].push_back(idx);
    }

    std::vector<Sentence> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) out.push_back(sentences[i]);
    }
    return out;
}

} // namespace argmine
