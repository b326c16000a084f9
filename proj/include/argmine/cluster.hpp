#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "argmine/error.hpp"
#include "argmine/features.hpp"
#include "argmine/rng.hpp"

namespace argmine {

struct ClusterConfig {
    std::size_t k = 8;
    std::size_t exemplars = 5;
    int max_iterations = 100;
    std::uint64_t seed = 0;
};

struct Cluster {
    Vec centroid;                       // unit norm (zero if all members are zero vectors)
    std::vector<std::size_t> members;   // input positions, ascending
    std::vector<std::size_t> exemplars; // nearest to centroid by cosine, best first
};

namespace detail {

inline Vec unit(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    Vec out(v);
    if (s > 0) {
        const double inv = 1.0 / std::sqrt(s);
        for (double& x : out) x *= inv;
    }
    return out;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace detail

// Spherical k-means (cosine) with k-means++ seeding. Every point lands in
// exactly one cluster; a cluster that empties is reseeded with the point
// farthest from its current centroid.
inline std::vector<Cluster> cluster_candidates(const std::vector<Vec>& embeddings, const ClusterConfig& cfg) {
    const std::size_t n = embeddings.size();
    if (cfg.k < 1) throw ValidationError("k must be >= 1");
    if (n == 0) throw ValidationError("cannot cluster an empty pool");
    if (cfg.k > n) throw ValidationError("k = " + std::to_string(cfg.k) + " exceeds pool size " + std::to_string(n));
    const std::size_t d = embeddings.front().size();
    std::vector<Vec> pts;
    pts.reserve(n);
    for (const auto& e : embeddings) {
        if (e.size() != d) throw ValidationError("embeddings differ in width");
        pts.push_back(detail::unit(e));
    }

    Rng rng(cfg.seed);
    auto dist = [&](const Vec& a, const Vec& b) { return 1.0 - detail::dot(a, b); };

    // k-means++ on cosine distance; distinct points are preferred so k = n works.
    std::vector<Vec> centroids;
    std::vector<bool> taken(n, false);
    std::size_t first = rng.index(n);
    centroids.push_back(pts[first]);
    taken[first] = true;
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    while (centroids.size() < cfg.k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], std::max(0.0, dist(pts[i], centroids.back())));
            if (!taken[i]) total += best[i];
        }
        std::size_t pick = n;
        if (total > 0) {
            double r = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i] || best[i] <= 0) continue;
                pick = i;
                r -= best[i];
                if (r < 0) break;
            }
        }
        if (pick == n) {
            // All remaining points coincide with chosen centroids.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i]) free.push_back(i);
            }
            pick = free[rng.index(free.size())];
        }
        taken[pick] = true;
        centroids.push_back(pts[pick]);
    }

    std::vector<std::size_t> assign(n, 0);
    auto nearest = [&](const Vec& p) {
        std::size_t arg = 0;
        double bd = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double s = detail::dot(p, centroids[c]);
            if (s > bd) {
                bd = s;
                arg = c;
            }
        }
        return arg;
    };
    for (int it = 0; it < cfg.max_iterations; ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = nearest(pts[i]);
            if (c != assign[i]) changed = true;
            assign[i] = c;
        }
        std::vector<Vec> sums(cfg.k, Vec(d, 0.0));
        std::vector<std::size_t> counts(cfg.k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += pts[i][j];
        }
        for (std::size_t c = 0; c < cfg.k; ++c) {
            if (counts[c] > 0) {
                centroids[c] = detail::unit(sums[c]);
                continue;
            }
            // Reseed from the point worst served by its own centroid, taken
            // from a cluster with more than one member.
            std::size_t far = n;
            double fd = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] < 2) continue;
                const double di = dist(pts[i], centroids[assign[i]]);
                if (di > fd) {
                    fd = di;
                    far = i;
                }
            }
            if (far == n) continue;
            --counts[assign[far]];
            assign[far] = c;
            counts[c] = 1;
            centroids[c] = pts[far];
            changed = true;
        }
        if (!changed) break;
    }
    // Final assignment is the one the centroids were computed from, except a
    // reseeded singleton keeps its point.
    std::vector<Cluster> out(cfg.k);
    for (std::size_t c = 0; c < cfg.k; ++c) out[c].centroid = centroids[c];
    for (std::size_t i = 0; i < n; ++i) out[assign[i]].members.push_back(i);
    for (auto& cl : out) {
        std::vector<std::pair<double, std::size_t>> ranked;
        for (auto i : cl.members) ranked.emplace_back(-detail::dot(pts[i], cl.centroid), i);
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t r = 0; r < ranked.size() && r < cfg.exemplars; ++r) cl.exemplars.push_back(ranked[r].second);
    }
    return out;
}

// Sentence vectors for clustering: SIF embeddings fitted on the given
// sentences when a word-vector table is available, else a fixed random
// projection of the hashed unigram/bigram bag.
inline std::vector<Vec> clustering_embeddings(const std::vector<TokenList>& sentences, const EmbeddingTable* vectors,
                                              std::uint64_t seed = 0) {
    std::vector<Vec> out;
    out.reserve(sentences.size());
    if (vectors) {
        EmbeddingTable t = *vectors;
        t.fit(sentences);
        for (const auto& s : sentences) out.push_back(t.embed(s));
    } else {
        const BucketMatrix projection(64, std::uint64_t{1} << 20, seed);
        for (const auto& s : sentences) out.push_back(hashed_avg_embed(s, projection));
    }
    return out;
}

} // namespace argmine
