#pragma once

// Random near-duplicate corpora for the dedup tests and the acceptance run.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/rng.hpp"

namespace corpus_gen {

using argmine::Rng;
using argmine::Sentence;
using argmine::SentenceId;

inline std::vector<Sentence> make_sentences(const std::vector<std::string>& texts) {
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.push_back(Sentence::make(static_cast<SentenceId>(i), "c", static_cast<int>(i), texts[i]));
    }
    return out;
}

inline std::vector<SentenceId> ids_of(const std::vector<Sentence>& s) {
    std::vector<SentenceId> out;
    for (const auto& x : s) out.push_back(x.sentence_id);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string random_text(Rng& rng, std::size_t len, std::string_view alphabet) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.index(alphabet.size())]);
    return s;
}

inline std::string mutate(Rng& rng, std::string s, int edits, std::string_view alphabet) {
    for (int e = 0; e < edits; ++e) {
        const auto op = rng.index(3);
        if (op == 0 || s.empty()) {
            s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.index(s.size() + 1)), alphabet[rng.index(alphabet.size())]);
        } else if (op == 1) {
            s.erase(s.begin() + static_cast<std::ptrdiff_t>(rng.index(s.size())));
        } else {
            s[rng.index(s.size())] = alphabet[rng.index(alphabet.size())];
        }
    }
    return s;
}

// Corpus of clustered near-duplicates, with case and whitespace variants.
inline std::vector<Sentence> random_corpus(Rng& rng, std::size_t n) {
    const std::string_view alphabet = "abcde fgh";
    std::vector<std::string> bases;
    const std::size_t nb = 1 + rng.index(8);
    for (std::size_t b = 0; b < nb; ++b) bases.push_back(random_text(rng, 5 + rng.index(60), alphabet));
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) {
        std::string t = mutate(rng, bases[rng.index(bases.size())], static_cast<int>(rng.index(4)), alphabet);
        if (rng.index(5) == 0 && !t.empty()) t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
        if (rng.index(5) == 0) t = "  " + t + "\t";
        texts.push_back(t);
    }
    auto s = make_sentences(texts);
    rng.shuffle(s);  // input order differs from id order
    return s;
}

} // namespace corpus_gen
