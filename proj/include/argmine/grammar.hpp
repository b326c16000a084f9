#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "argmine/error.hpp"
#include "argmine/rng.hpp"
#include "argmine/taxonomy.hpp"
#include "argmine/text.hpp"

namespace argmine {

using Phrase = std::vector<std::string>;

inline constexpr std::size_t kMaxPhraseTokens = 5;

inline Phrase tokenize_phrase(std::string_view phrase) {
    Phrase p = text::tokenize(phrase);
    if (p.empty()) throw ValidationError("phrase '" + std::string(phrase) + "' has no tokens");
    if (p.size() > kMaxPhraseTokens) {
        throw ValidationError("phrase '" + std::string(phrase) + "' has more than 5 tokens");
    }
    return p;
}

// A named class of cue phrases, usable as a grammar terminal via @NAME.
class Lexicon {
public:
    Lexicon() = default;

    Lexicon(std::string name, const std::vector<std::string>& phrases) : name_(std::move(name)) {
        for (const auto& p : phrases) entries_.insert(tokenize_phrase(p));
        if (entries_.empty()) throw ValidationError("lexicon " + name_ + " has no entries");
    }

    // One phrase per line; '#' starts a comment.
    static Lexicon parse(std::string name, std::string_view content) {
        std::vector<std::string> phrases;
        std::istringstream in{std::string(content)};
        std::string line;
        while (std::getline(in, line)) {
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            if (!text::is_blank(line)) phrases.push_back(line);
        }
        return Lexicon(std::move(name), phrases);
    }

    static Lexicon load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw MissingInputError("cannot open lexicon " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(path.stem().string(), ss.str());
    }

    const std::string& name() const { return name_; }
    const std::set<Phrase>& entries() const { return entries_; }
    bool contains(const Phrase& p) const { return entries_.count(p) > 0; }

    // False when the phrase is already present.
    bool add(std::string_view phrase) { return entries_.insert(tokenize_phrase(phrase)).second; }

    bool remove(std::string_view phrase) {
        const Phrase p = tokenize_phrase(phrase);
        if (!entries_.count(p)) return false;
        if (entries_.size() == 1) throw ValidationError("cannot remove the last entry of lexicon " + name_);
        entries_.erase(p);
        return true;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& e : entries_) out += text::join(e, " ") + "\n";
        return out;
    }

private:
    std::string name_;
    std::set<Phrase> entries_;
};

using LexiconSet = std::map<std::string, Lexicon>;

inline LexiconSet load_lexicon_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw MissingInputError("lexicon directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".lex" || ext == ".txt")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    LexiconSet out;
    for (const auto& f : files) {
        Lexicon lex = Lexicon::load(f);
        out.emplace(lex.name(), std::move(lex));
    }
    return out;
}

inline void write_lexicon_dir(const std::filesystem::path& dir, const LexiconSet& lexicons) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, lex] : lexicons) {
        std::ofstream out(dir / (name + ".lex"), std::ios::binary | std::ios::trunc);
        out << lex.serialize();
    }
}

// ---------------------------------------------------------------------------
// Source grammar

struct GrammarItem {
    enum class Kind { Phrase, Lexicon, Gap, Nonterminal };
    Kind kind = Kind::Phrase;
    Phrase tokens;      // Phrase
    std::string name;   // Lexicon / Nonterminal
    int gap = 0;        // Gap: accepts 0..gap arbitrary tokens

    static GrammarItem phrase(Phrase p) { return {Kind::Phrase, std::move(p), {}, 0}; }
    static GrammarItem lexicon(std::string n) { return {Kind::Lexicon, {}, std::move(n), 0}; }
    static GrammarItem gap_of(int n) { return {Kind::Gap, {}, {}, n}; }
    static GrammarItem nonterminal(std::string n) { return {Kind::Nonterminal, {}, std::move(n), 0}; }

    std::string to_text() const {
        switch (kind) {
        case Kind::Phrase: return "\"" + text::join(tokens, " ") + "\"";
        case Kind::Lexicon: return "@" + name;
        case Kind::Gap: return "GAP{" + std::to_string(gap) + "}";
        default: return name;
        }
    }
};

struct Production {
    std::string lhs;                 // nonterminal name; empty for claim rules
    std::optional<ClaimType> claim;  // set for claim rules
    std::vector<GrammarItem> items;
    int rule_id = 0;                 // position in the grammar, used as provenance
    int line = 0;
};

// Text format, one production per line:
//   claim BURDENSOME priority=2 -> "too" "burdensome"
//   NEG -> "not" | @NEGATION
//   claim EXPLICIT_OPPOSITION -> NEG GAP{2} "support"
// Items: "phrase", @LEXICON, GAP{n}, NONTERMINAL. '|' separates alternatives,
// '#' starts a comment outside quotes.
class RuleGrammar {
public:
    static constexpr int kDefaultPriority = 100;

    static RuleGrammar parse(std::string_view source) {
        RuleGrammar g;
        g.source_ = std::string(source);
        std::istringstream in{g.source_};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            g.parse_line(line, lineno);
        }
        return g;
    }

    static RuleGrammar load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw MissingInputError("cannot open grammar " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    const std::vector<Production>& productions() const { return productions_; }
    const std::string& source() const { return source_; }

    int priority(ClaimType c) const {
        auto it = priority_.find(c);
        return it == priority_.end() ? kDefaultPriority : it->second;
    }

    const std::map<ClaimType, int>& priorities() const { return priority_; }

    // Canonical text: parsing it yields the same productions and priorities.
    std::string to_text() const {
        std::string out;
        std::set<ClaimType> announced;
        for (const auto& p : productions_) {
            if (p.claim) {
                out += "claim " + std::string(to_string(*p.claim));
                if (announced.insert(*p.claim).second && priority_.count(*p.claim)) {
                    out += " priority=" + std::to_string(priority_.at(*p.claim));
                }
            } else {
                out += p.lhs;
            }
            out += " ->";
            for (const auto& it : p.items) out += " " + it.to_text();
            out += "\n";
        }
        return out;
    }

private:
    static bool is_ident_char(char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    }

    void parse_line(const std::string& raw, int lineno) {
        // Strip comments outside quotes.
        std::string line;
        bool in_quote = false;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const char c = raw[i];
            if (c == '"' && (i == 0 || raw[i - 1] != '\\')) in_quote = !in_quote;
            if (c == '#' && !in_quote) break;
            line.push_back(c);
        }
        if (in_quote) throw GrammarError("unterminated quote", lineno);
        if (text::is_blank(line)) return;

        const auto arrow = find_arrow(line);
        if (arrow == std::string::npos) throw GrammarError("expected '->'", lineno);
        std::istringstream head(line.substr(0, arrow));
        std::vector<std::string> head_words;
        for (std::string w; head >> w;) head_words.push_back(w);
        if (head_words.empty()) throw GrammarError("missing left-hand side", lineno);

        std::string lhs;
        std::optional<ClaimType> claim;
        if (head_words[0] == "claim") {
            if (head_words.size() < 2) throw GrammarError("claim declaration needs a claim type", lineno);
            claim = parse_claim_type(head_words[1]);
            if (!claim) throw GrammarError("unknown claim type '" + head_words[1] + "'", lineno);
            if (*claim == ClaimType::Neutral) throw GrammarError("Neutral cannot be a rule target", lineno);
            for (std::size_t i = 2; i < head_words.size(); ++i) {
                const std::string& w = head_words[i];
                if (w.rfind("priority=", 0) != 0) throw GrammarError("unexpected '" + w + "'", lineno);
                int pri = 0;
                try {
                    std::size_t used = 0;
                    pri = std::stoi(w.substr(9), &used);
                    if (used != w.size() - 9) throw std::invalid_argument(w);
                } catch (const std::exception&) {
                    throw GrammarError("bad priority '" + w + "'", lineno);
                }
                auto [it, inserted] = priority_.emplace(*claim, pri);
                if (!inserted && it->second != pri) {
                    throw GrammarError("conflicting priority for " + std::string(to_string(*claim)), lineno);
                }
            }
        } else {
            if (head_words.size() != 1) throw GrammarError("left-hand side must be a single symbol", lineno);
            lhs = head_words[0];
            if (!std::all_of(lhs.begin(), lhs.end(), is_ident_char) || lhs == "GAP") {
                throw GrammarError("invalid nonterminal name '" + lhs + "'", lineno);
            }
        }

        for (auto& alt : split_alternatives(line.substr(arrow + 2), lineno)) {
            Production p;
            p.lhs = lhs;
            p.claim = claim;
            p.items = std::move(alt);
            p.rule_id = static_cast<int>(productions_.size());
            p.line = lineno;
            if (p.items.empty()) throw GrammarError("empty production", lineno);
            const bool only_gaps = std::all_of(p.items.begin(), p.items.end(), [](const GrammarItem& it) {
                return it.kind == GrammarItem::Kind::Gap;
            });
            if (only_gaps) throw GrammarError("production consists only of GAP items", lineno);
            productions_.push_back(std::move(p));
        }
    }

    static std::size_t find_arrow(const std::string& line) {
        bool in_quote = false;
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (!in_quote && line[i] == '-' && line[i + 1] == '>') return i;
        }
        return std::string::npos;
    }

    static std::vector<std::vector<GrammarItem>> split_alternatives(const std::string& rhs, int lineno) {
        std::vector<std::vector<GrammarItem>> alts(1);
        std::size_t i = 0;
        while (i < rhs.size()) {
            const char c = rhs[i];
            if (c == ' ' || c == '\t' || c == '\r') {
                ++i;
            } else if (c == '|') {
                alts.emplace_back();
                ++i;
            } else if (c == '"') {
                std::string lit;
                ++i;
                while (i < rhs.size() && rhs[i] != '"') {
                    if (rhs[i] == '\\' && i + 1 < rhs.size()) ++i;
                    lit.push_back(rhs[i++]);
                }
                if (i >= rhs.size()) throw GrammarError("unterminated quote", lineno);
                ++i;
                Phrase p = text::tokenize(lit);
                if (p.empty()) throw GrammarError("empty phrase literal", lineno);
                alts.back().push_back(GrammarItem::phrase(std::move(p)));
            } else if (c == '@') {
                std::size_t j = i + 1;
                while (j < rhs.size() && is_ident_char(rhs[j])) ++j;
                if (j == i + 1) throw GrammarError("empty lexicon reference", lineno);
                alts.back().push_back(GrammarItem::lexicon(rhs.substr(i + 1, j - i - 1)));
                i = j;
            } else if (rhs.compare(i, 4, "GAP{") == 0) {
                const std::size_t close = rhs.find('}', i);
                if (close == std::string::npos) throw GrammarError("unterminated GAP{", lineno);
                int n = -1;
                try {
                    std::size_t used = 0;
                    const std::string num = rhs.substr(i + 4, close - i - 4);
                    n = std::stoi(num, &used);
                    if (used != num.size()) n = -1;
                } catch (const std::exception&) {
                    n = -1;
                }
                if (n < 0) throw GrammarError("GAP bound must be a non-negative integer", lineno);
                alts.back().push_back(GrammarItem::gap_of(n));
                i = close + 1;
            } else if (is_ident_char(c)) {
                std::size_t j = i;
                while (j < rhs.size() && is_ident_char(rhs[j])) ++j;
                alts.back().push_back(GrammarItem::nonterminal(rhs.substr(i, j - i)));
                i = j;
            } else {
                throw GrammarError(std::string("unexpected character '") + c + "'", lineno);
            }
        }
        return alts;
    }

    std::string source_;
    std::vector<Production> productions_;
    std::map<ClaimType, int> priority_;
};

// ---------------------------------------------------------------------------
// Chomsky normal form

using Symbol = std::uint32_t;

struct StartSymbol {
    Symbol symbol;
    ClaimType claim;
    int rule_id;
    int priority;
};

struct BinaryRule {
    Symbol lhs, left, right;
    auto operator<=>(const BinaryRule&) const = default;
};

// Every rule is A -> token, A -> <any token>, or A -> B C.
struct CompiledGrammar {
    std::vector<std::string> symbol_names;
    std::map<std::string, std::vector<Symbol>> terminal_rules;  // token -> sorted LHS list
    std::vector<Symbol> any_token_rules;
    std::vector<BinaryRule> binary_rules;                       // sorted, unique
    std::vector<StartSymbol> starts;                            // ordered by rule_id
    std::size_t binarization_symbols = 0;
    std::uint64_t fingerprint = 0;

    // left symbol -> (right, lhs)
    std::vector<std::vector<std::pair<Symbol, Symbol>>> by_left;

    std::size_t symbol_count() const { return symbol_names.size(); }

    std::string to_text() const {
        std::string out;
        for (const auto& [tok, lhs] : terminal_rules) {
            for (Symbol a : lhs) out += symbol_names[a] + " -> \"" + tok + "\"\n";
        }
        for (Symbol a : any_token_rules) out += symbol_names[a] + " -> <any>\n";
        for (const auto& r : binary_rules) {
            out += symbol_names[r.lhs] + " -> " + symbol_names[r.left] + " " + symbol_names[r.right] + "\n";
        }
        for (const auto& s : starts) {
            out += "start " + symbol_names[s.symbol] + " " + std::string(to_string(s.claim)) + " rule=" +
                   std::to_string(s.rule_id) + " priority=" + std::to_string(s.priority) + "\n";
        }
        return out;
    }
};

namespace detail {

// Right-hand side element of the intermediate grammar.
struct Element {
    enum class Kind { Token, Any, Sym } kind;
    std::string token;
    Symbol sym = 0;
    auto operator<=>(const Element&) const = default;
};

class CnfBuilder {
public:
    Symbol intern(const std::string& name) {
        auto [it, inserted] = index_.emplace(name, static_cast<Symbol>(names_.size()));
        if (inserted) names_.push_back(name);
        return it->second;
    }

    Symbol fresh(const std::string& hint) {
        std::string name = hint;
        for (int k = 1; index_.count(name); ++k) name = hint + "~" + std::to_string(k);
        return intern(name);
    }

    void add(Symbol lhs, std::vector<Element> rhs) { rules_.emplace(lhs, std::move(rhs)); }

    std::vector<std::string>& names() { return names_; }
    std::set<std::pair<Symbol, std::vector<Element>>>& rules() { return rules_; }

private:
    std::map<std::string, Symbol> index_;
    std::vector<std::string> names_;
    std::set<std::pair<Symbol, std::vector<Element>>> rules_;
};

} // namespace detail

// Compiles a rule grammar to CNF. Phrases become token chains, @LEX a
// nonterminal over its entries, GAP{n} an optional chain of 1..n arbitrary
// tokens (the production is duplicated with and without it). Long productions
// are binarized with fresh symbols and unit productions are eliminated.
inline CompiledGrammar compile(const RuleGrammar& grammar, const LexiconSet& lexicons) {
    using detail::Element;
    detail::CnfBuilder b;

    std::set<std::string> defined;
    for (const auto& p : grammar.productions()) {
        if (!p.claim) defined.insert(p.lhs);
    }
    for (const auto& p : grammar.productions()) {
        for (const auto& it : p.items) {
            if (it.kind == GrammarItem::Kind::Lexicon && !lexicons.count(it.name)) {
                throw GrammarError("unresolved lexicon reference @" + it.name, p.line);
            }
            if (it.kind == GrammarItem::Kind::Nonterminal && !defined.count(it.name)) {
                throw GrammarError("undefined nonterminal " + it.name, p.line);
            }
        }
    }

    const Symbol any = b.intern("<ANY>");
    std::map<int, Symbol> gap_syms;
    auto gap_symbol = [&](int n) {
        // G_n -> ANY | ANY G_{n-1}; derives 1..n tokens.
        for (int k = 1; k <= n; ++k) {
            if (gap_syms.count(k)) continue;
            const Symbol g = b.intern("<GAP" + std::to_string(k) + ">");
            gap_syms[k] = g;
            b.add(g, {Element{Element::Kind::Any, {}, 0}});
            if (k > 1) b.add(g, {Element{Element::Kind::Any, {}, 0}, Element{Element::Kind::Sym, {}, gap_syms[k - 1]}});
        }
        return gap_syms.at(n);
    };
    (void)any;

    std::map<std::string, Symbol> lex_syms;
    auto lexicon_symbol = [&](const std::string& name) {
        if (auto it = lex_syms.find(name); it != lex_syms.end()) return it->second;
        const Symbol s = b.intern("@" + name);
        lex_syms[name] = s;
        for (const auto& entry : lexicons.at(name).entries()) {
            std::vector<Element> rhs;
            for (const auto& tok : entry) rhs.push_back(Element{Element::Kind::Token, tok, 0});
            b.add(s, std::move(rhs));
        }
        return s;
    };

    CompiledGrammar out;
    for (const auto& p : grammar.productions()) {
        Symbol lhs;
        if (p.claim) {
            lhs = b.intern("<" + std::string(to_string(*p.claim)) + "#" + std::to_string(p.rule_id) + ">");
            out.starts.push_back({lhs, *p.claim, p.rule_id, grammar.priority(*p.claim)});
        } else {
            lhs = b.intern(p.lhs);
        }
        // Each GAP item doubles the alternatives: absent, or present as G_n.
        std::vector<std::vector<Element>> variants(1);
        for (const auto& it : p.items) {
            switch (it.kind) {
            case GrammarItem::Kind::Phrase:
                for (auto& v : variants) {
                    for (const auto& tok : it.tokens) v.push_back(Element{Element::Kind::Token, tok, 0});
                }
                break;
            case GrammarItem::Kind::Lexicon: {
                const Symbol s = lexicon_symbol(it.name);
                for (auto& v : variants) v.push_back(Element{Element::Kind::Sym, {}, s});
                break;
            }
            case GrammarItem::Kind::Nonterminal: {
                const Symbol s = b.intern(it.name);
                for (auto& v : variants) v.push_back(Element{Element::Kind::Sym, {}, s});
                break;
            }
            case GrammarItem::Kind::Gap: {
                if (it.gap == 0) break;
                const Symbol g = gap_symbol(it.gap);
                const std::size_t n = variants.size();
                for (std::size_t k = 0; k < n; ++k) {
                    auto with = variants[k];
                    with.push_back(Element{Element::Kind::Sym, {}, g});
                    variants.push_back(std::move(with));
                }
                break;
            }
            }
        }
        for (auto& v : variants) {
            if (!v.empty()) b.add(lhs, std::move(v));
        }
    }

    // Lift terminals out of productions of length >= 2.
    std::map<Element, Symbol> preterminal;
    std::set<std::pair<Symbol, std::vector<Element>>> lifted;
    for (const auto& [lhs, rhs] : b.rules()) {
        if (rhs.size() < 2) {
            lifted.emplace(lhs, rhs);
            continue;
        }
        std::vector<Element> nr;
        for (const auto& e : rhs) {
            if (e.kind == Element::Kind::Sym) {
                nr.push_back(e);
                continue;
            }
            auto it = preterminal.find(e);
            if (it == preterminal.end()) {
                const Symbol t = b.intern(e.kind == Element::Kind::Any ? "<T:ANY>" : "<T:" + e.token + ">");
                it = preterminal.emplace(e, t).first;
                lifted.emplace(t, std::vector<Element>{e});
            }
            nr.push_back(Element{Element::Kind::Sym, {}, it->second});
        }
        lifted.emplace(lhs, std::move(nr));
    }

    // Binarize: A -> X1 X2 ... Xk becomes a right-branching chain; identical
    // suffixes share one fresh symbol.
    std::map<std::vector<Element>, Symbol> suffix_sym;
    std::set<std::pair<Symbol, std::vector<Element>>> binarized;
    for (const auto& [lhs, rhs] : lifted) {
        if (rhs.size() <= 2) {
            binarized.emplace(lhs, rhs);
            continue;
        }
        Symbol cur = lhs;
        for (std::size_t i = 0; i + 2 < rhs.size(); ++i) {
            std::vector<Element> suffix(rhs.begin() + static_cast<std::ptrdiff_t>(i + 1), rhs.end());
            auto it = suffix_sym.find(suffix);
            const bool is_new = it == suffix_sym.end();
            if (is_new) {
                it = suffix_sym.emplace(suffix, b.fresh("<" + b.names()[lhs] + "|" + std::to_string(i + 1) + ">")).first;
                ++out.binarization_symbols;
            }
            binarized.emplace(cur, std::vector<Element>{rhs[i], Element{Element::Kind::Sym, {}, it->second}});
            cur = it->second;
            if (!is_new) break;
            if (i + 3 == rhs.size()) binarized.emplace(cur, std::vector<Element>{rhs[i + 1], rhs[i + 2]});
        }
    }

    // Unit elimination: A inherits every non-unit rule of each B in its unit closure.
    const std::size_t nsym = b.names().size();
    std::vector<std::set<Symbol>> unit(nsym);
    std::vector<std::vector<std::vector<Element>>> nonunit(nsym);
    for (const auto& [lhs, rhs] : binarized) {
        if (rhs.size() == 1 && rhs[0].kind == Element::Kind::Sym) {
            unit[lhs].insert(rhs[0].sym);
        } else {
            nonunit[lhs].push_back(rhs);
        }
    }
    std::set<std::pair<Symbol, std::vector<Element>>> final_rules;
    for (Symbol a = 0; a < nsym; ++a) {
        std::set<Symbol> closure{a};
        std::vector<Symbol> stack{a};
        while (!stack.empty()) {
            const Symbol s = stack.back();
            stack.pop_back();
            for (Symbol t : unit[s]) {
                if (closure.insert(t).second) stack.push_back(t);
            }
        }
        for (Symbol s : closure) {
            for (const auto& rhs : nonunit[s]) final_rules.emplace(a, rhs);
        }
    }

    out.symbol_names = b.names();
    for (const auto& [lhs, rhs] : final_rules) {
        if (rhs.size() == 1) {
            if (rhs[0].kind == Element::Kind::Token) {
                out.terminal_rules[rhs[0].token].push_back(lhs);
            } else {
                out.any_token_rules.push_back(lhs);
            }
        } else {
            out.binary_rules.push_back({lhs, rhs[0].sym, rhs[1].sym});
        }
    }
    for (auto& [tok, v] : out.terminal_rules) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    std::sort(out.any_token_rules.begin(), out.any_token_rules.end());
    out.any_token_rules.erase(std::unique(out.any_token_rules.begin(), out.any_token_rules.end()),
                              out.any_token_rules.end());
    std::sort(out.binary_rules.begin(), out.binary_rules.end());
    out.binary_rules.erase(std::unique(out.binary_rules.begin(), out.binary_rules.end()), out.binary_rules.end());
    out.by_left.assign(nsym, {});
    for (const auto& r : out.binary_rules) out.by_left[r.left].push_back({r.right, r.lhs});

    std::string fp = grammar.to_text();
    for (const auto& [name, lex] : lexicons) fp += "\n@" + name + "\n" + lex.serialize();
    out.fingerprint = fnv1a64(fp);
    return out;
}

} // namespace argmine
