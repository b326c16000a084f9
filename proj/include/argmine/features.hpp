#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"
#include "argmine/rng.hpp"
#include "argmine/text.hpp"

namespace argmine {

using Vec = std::vector<double>;
using TokenList = std::vector<std::string>;

// Unigrams followed by space-joined bigrams, in sentence order, repeats kept.
inline std::vector<std::string> ngrams(const TokenList& tokens) {
    std::vector<std::string> out(tokens.begin(), tokens.end());
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + ' ' + tokens[i + 1]);
    return out;
}

// ---------------------------------------------------------------------------
// n-gram vocabulary

class NgramVocab {
public:
    static constexpr std::size_t kDefaultCap = 30000;

    NgramVocab() = default;

    // Keeps the `cap` most frequent n-grams by total occurrence count, ties
    // broken lexicographically; index = rank.
    static NgramVocab build(const std::vector<TokenList>& train, std::size_t cap = kDefaultCap) {
        std::unordered_map<std::string, std::uint64_t> counts;
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& toks : train) {
            for (const auto& g : ngrams(toks)) ++counts[g];
            for (const auto& t : toks) h = fnv1a64(t, fnv1a64(" ", h));
            h = fnv1a64("\n", h);
        }
        std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (ranked.size() > cap) ranked.resize(cap);
        NgramVocab v;
        for (auto& [g, c] : ranked) v.push(std::move(g), c);
        v.source_fingerprint_ = h;
        return v;
    }

    std::size_t size() const { return ngrams_.size(); }
    const std::string& ngram(std::size_t i) const { return ngrams_.at(i); }
    std::uint64_t frequency(std::size_t i) const { return freq_.at(i); }

    std::optional<std::uint32_t> find(const std::string& g) const {
        auto it = index_.find(g);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    // Hash of the token stream the vocabulary was built from.
    std::uint64_t source_fingerprint() const { return source_fingerprint_; }

    std::uint64_t fingerprint() const { return fnv1a64(serialize()); }

    std::string serialize() const {
        std::string out;
        for (std::size_t i = 0; i < ngrams_.size(); ++i) {
            out += ngrams_[i];
            out += '\t';
            out += std::to_string(i);
            out += '\t';
            out += std::to_string(freq_[i]);
            out += '\n';
        }
        return out;
    }

    static NgramVocab parse(const std::string& content) {
        NgramVocab v;
        std::istringstream in(content);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto t1 = line.find('\t');
            const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
            if (t2 == std::string::npos) throw ValidationError("vocab line " + std::to_string(lineno) + ": expected 3 fields");
            try {
                const auto idx = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
                if (idx != v.size()) throw ValidationError("vocab line " + std::to_string(lineno) + ": index out of order");
                v.push(line.substr(0, t1), std::stoull(line.substr(t2 + 1)));
            } catch (const std::logic_error&) {
                throw ValidationError("vocab line " + std::to_string(lineno) + ": bad number");
            }
        }
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw MissingInputError("cannot write " + path);
        out << serialize();
    }

    static NgramVocab load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingInputError("cannot read vocab " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

private:
    void push(std::string g, std::uint64_t c) {
        if (!index_.emplace(g, static_cast<std::uint32_t>(ngrams_.size())).second)
            throw ValidationError("duplicate n-gram in vocab: " + g);
        ngrams_.push_back(std::move(g));
        freq_.push_back(c);
    }

    std::vector<std::string> ngrams_;
    std::vector<std::uint64_t> freq_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::uint64_t source_fingerprint_ = 0;
};

// ---------------------------------------------------------------------------
// feature vectors

// Sparse presence indices (value 1) in [0, vocab size) followed by an
// optional dense block.
struct FeatureVector {
    std::vector<std::uint32_t> sparse;  // sorted, unique
    Vec dense;

    bool empty() const { return sparse.empty() && dense.empty(); }
    bool operator==(const FeatureVector&) const = default;
};

// ---------------------------------------------------------------------------
// word vectors and SIF sentence embeddings

// Dominant eigenvector of the covariance of the centered non-zero rows,
// unit norm, largest-magnitude coordinate positive. nullopt when fewer than
// two usable rows or no variance.
inline std::optional<Vec> fit_principal_component(const std::vector<Vec>& rows) {
    std::vector<const Vec*> usable;
    for (const auto& r : rows) {
        if (std::any_of(r.begin(), r.end(), [](double x) { return x != 0.0; })) usable.push_back(&r);
    }
    if (usable.size() < 2) return std::nullopt;
    const std::size_t d = usable.front()->size();
    if (d == 0) return std::nullopt;

    Vec mean(d, 0.0);
    double scale = 0.0;
    for (const Vec* r : usable) {
        if (r->size() != d) throw ValidationError("embedding rows differ in width");
        for (std::size_t k = 0; k < d; ++k) {
            mean[k] += (*r)[k];
            scale += (*r)[k] * (*r)[k];
        }
    }
    const double n = static_cast<double>(usable.size());
    for (double& m : mean) m /= n;

    std::vector<double> cov(d * d, 0.0);
    Vec c(d);
    for (const Vec* r : usable) {
        for (std::size_t k = 0; k < d; ++k) c[k] = (*r)[k] - mean[k];
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += c[i] * c[j];
        }
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
    if (!(trace > 1e-20 * scale)) return std::nullopt;

    // Power iteration on C^(2^6): squaring first makes the eigen-gap ratio
    // tiny so the iteration below converges to machine precision quickly.
    auto normalize_max = [](std::vector<double>& m) {
        double mx = 0.0;
        for (double x : m) mx = std::max(mx, std::abs(x));
        if (mx > 0) {
            for (double& x : m) x /= mx;
        }
    };
    std::vector<double> m = cov, tmp(d * d);
    normalize_max(m);
    for (int s = 0; s < 6; ++s) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                const double a = m[i * d + k];
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < d; ++j) tmp[i * d + j] += a * m[k * d + j];
            }
        }
        m.swap(tmp);
        normalize_max(m);
    }

    auto norm = [](const Vec& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    // Start from the covariance column with the largest norm.
    std::size_t best_col = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += cov[i * d + j] * cov[i * d + j];
        if (s > best_norm) {
            best_norm = s;
            best_col = j;
        }
    }
    Vec v(d), w(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = cov[i * d + best_col];
    double nv = norm(v);
    for (double& x : v) x /= nv;
    for (int it = 0; it < 1000; ++it) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += m[i * d + j] * v[j];
            w[i] = s;
        }
        const double nw = norm(w);
        if (nw == 0.0) return std::nullopt;
        double delta = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            w[i] /= nw;
            delta = std::max(delta, std::abs(w[i] - v[i]));
        }
        v.swap(w);
        if (delta < 1e-15) break;
    }

    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0) {
        for (double& x : v) x = -x;
    }
    return v;
}

class EmbeddingTable {
public:
    static constexpr double kDefaultA = 1e-3;

    EmbeddingTable() = default;

    // Rows in rank order (most frequent first), as in a word2vec text file.
    explicit EmbeddingTable(std::vector<std::pair<std::string, Vec>> rows) {
        for (auto& [w, v] : rows) add(std::move(w), std::move(v));
    }

    // `token v1 ... vd` per line; an optional `count dim` header line.
    static EmbeddingTable load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingInputError("cannot read vectors " + path);
        EmbeddingTable t;
        t.source_ = path;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream ls(line);
            std::string word;
            if (!(ls >> word)) continue;
            Vec v;
            std::string field;
            while (ls >> field) {
                char* end = nullptr;
                const double x = std::strtod(field.c_str(), &end);
                if (end != field.c_str() + field.size() || !std::isfinite(x))
                    throw ValidationError(path + ":" + std::to_string(lineno) + ": bad vector component '" + field + "'");
                v.push_back(x);
            }
            if (lineno == 1 && v.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos) continue;
            if (v.empty()) throw ValidationError(path + ":" + std::to_string(lineno) + ": vector has no components");
            if (t.index_.count(word)) continue;  // first occurrence wins
            t.add(std::move(word), std::move(v));
        }
        if (t.words_.empty()) throw ValidationError("vector file " + path + " has no vectors");
        return t;
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return words_.size(); }
    const std::string& source() const { return source_; }

    const Vec* find(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? nullptr : &vectors_[it->second];
    }

    double a() const { return a_; }
    void set_a(double a) {
        if (!(a > 0) || !std::isfinite(a)) throw ValidationError("SIF parameter a must be > 0");
        a_ = a;
    }

    // Word probabilities from training counts of in-table tokens.
    void set_counts(const std::vector<TokenList>& train) {
        counts_.clear();
        total_ = 0;
        for (const auto& toks : train) {
            for (const auto& t : toks) {
                ++total_;
                if (index_.count(t)) ++counts_[t];
            }
        }
    }

    void set_counts(std::map<std::string, std::uint64_t> counts, std::uint64_t total) {
        counts_ = std::move(counts);
        total_ = total;
    }
    const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
    std::uint64_t total_count() const { return total_; }

    // Training-count estimate when counts are set, else a Zipf estimate from
    // the table's rank order: p(rank r) = 1 / (r · H_V), r from 1.
    double probability(const std::string& w) const {
        if (total_ > 0) {
            auto it = counts_.find(w);
            return it == counts_.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total_);
        }
        auto it = index_.find(w);
        if (it == index_.end()) return 0.0;
        return 1.0 / (static_cast<double>(it->second + 1) * harmonic_);
    }

    // Weighted average before component removal; zero when no token is in the table.
    Vec weighted_average(const TokenList& tokens) const {
        Vec v(dim_, 0.0);
        std::size_t n = 0;
        for (const auto& t : tokens) {
            const Vec* e = find(t);
            if (!e) continue;
            ++n;
            const double wt = a_ / (a_ + probability(t));
            for (std::size_t k = 0; k < dim_; ++k) v[k] += wt * (*e)[k];
        }
        if (n > 0) {
            for (double& x : v) x /= static_cast<double>(n);
        }
        return v;
    }

    // Sets word counts and the principal component from the training split.
    void fit(const std::vector<TokenList>& train) {
        set_counts(train);
        std::vector<Vec> rows;
        rows.reserve(train.size());
        for (const auto& toks : train) rows.push_back(weighted_average(toks));
        u_ = fit_principal_component(rows);
    }

    const std::optional<Vec>& component() const { return u_; }
    void set_component(std::optional<Vec> u) {
        if (u && u->size() != dim_) throw ValidationError("principal component width mismatch");
        u_ = std::move(u);
    }

    Vec embed(const TokenList& tokens) const {
        Vec v = weighted_average(tokens);
        if (u_) {
            // Two passes keep the residual along u at rounding level of the result.
            for (int pass = 0; pass < 2; ++pass) {
                double dot = 0.0;
                for (std::size_t k = 0; k < dim_; ++k) dot += (*u_)[k] * v[k];
                for (std::size_t k = 0; k < dim_; ++k) v[k] -= dot * (*u_)[k];
            }
        }
        return v;
    }

    // Hash of words and exact vector bits in rank order.
    std::uint64_t fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t i = 0; i < words_.size(); ++i) {
            h = fnv1a64(words_[i], h);
            for (double x : vectors_[i]) {
                std::uint64_t bits;
                std::memcpy(&bits, &x, sizeof bits);
                h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
            }
        }
        return h;
    }

private:
    void add(std::string w, Vec v) {
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_)
            throw ValidationError("vector for '" + w + "' has width " + std::to_string(v.size()) + ", expected " +
                                  std::to_string(dim_));
        index_.emplace(w, words_.size());
        words_.push_back(std::move(w));
        vectors_.push_back(std::move(v));
        harmonic_ += 1.0 / static_cast<double>(words_.size());
    }

    std::size_t dim_ = 0;
    std::vector<std::string> words_;
    std::vector<Vec> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
    double harmonic_ = 0.0;
    double a_ = kDefaultA;
    std::map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::optional<Vec> u_;
    std::string source_;
};

inline Vec sif_embed(const TokenList& tokens, const EmbeddingTable& emb) { return emb.embed(tokens); }

inline FeatureVector featurize(const TokenList& tokens, const NgramVocab& vocab, const EmbeddingTable* emb = nullptr) {
    FeatureVector f;
    for (const auto& g : ngrams(tokens)) {
        if (auto i = vocab.find(g)) f.sparse.push_back(*i);
    }
    std::sort(f.sparse.begin(), f.sparse.end());
    f.sparse.erase(std::unique(f.sparse.begin(), f.sparse.end()), f.sparse.end());
    if (emb) f.dense = emb->embed(tokens);
    return f;
}

// ---------------------------------------------------------------------------
// hashed n-gram embeddings

inline constexpr std::uint64_t kDefaultBuckets = 2'000'000;

inline std::vector<std::uint64_t> hashed_ngram_buckets(const TokenList& tokens, std::uint64_t buckets) {
    std::vector<std::uint64_t> out;
    for (const auto& g : ngrams(tokens)) out.push_back(fnv1a64(g) % buckets);
    return out;
}

// B x d matrix stored sparsely: rows never written keep a deterministic
// initial value derived from (seed, bucket), uniform in [-1/d, 1/d].
class BucketMatrix {
public:
    BucketMatrix() = default;
    BucketMatrix(std::size_t dims, std::uint64_t buckets, std::uint64_t seed)
        : dims_(dims), buckets_(buckets), seed_(seed) {
        if (dims == 0 || buckets == 0) throw ValidationError("bucket matrix needs dims > 0 and buckets > 0");
    }

    std::size_t dims() const { return dims_; }
    std::uint64_t buckets() const { return buckets_; }
    std::uint64_t seed() const { return seed_; }

    Vec row(std::uint64_t b) const {
        auto it = rows_.find(b);
        return it != rows_.end() ? it->second : initial_row(b);
    }

    Vec& mutable_row(std::uint64_t b) {
        auto it = rows_.find(b);
        if (it == rows_.end()) it = rows_.emplace(b, initial_row(b)).first;
        return it->second;
    }

    const std::map<std::uint64_t, Vec>& stored_rows() const { return rows_; }
    void set_row(std::uint64_t b, Vec v) {
        if (b >= buckets_ || v.size() != dims_) throw ValidationError("bucket row out of range");
        rows_[b] = std::move(v);
    }

    Vec initial_row(std::uint64_t b) const {
        Vec v(dims_);
        const double bound = 1.0 / static_cast<double>(dims_);
        for (std::size_t k = 0; k < dims_; ++k) {
            const std::uint64_t r = splitmix64(seed_ ^ splitmix64(b * dims_ + k));
            v[k] = (static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0) * bound;
        }
        return v;
    }

private:
    std::size_t dims_ = 0;
    std::uint64_t buckets_ = 0;
    std::uint64_t seed_ = 0;
    std::map<std::uint64_t, Vec> rows_;
};

inline Vec average_rows(const std::vector<std::uint64_t>& ids, const BucketMatrix& m) {
    Vec v(m.dims(), 0.0);
    if (ids.empty()) return v;
    for (auto b : ids) {
        const Vec r = m.row(b);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += r[k];
    }
    for (double& x : v) x /= static_cast<double>(ids.size());
    return v;
}

inline Vec hashed_avg_embed(const TokenList& tokens, const BucketMatrix& m) {
    return average_rows(hashed_ngram_buckets(tokens, m.buckets()), m);
}

} // namespace argmine
