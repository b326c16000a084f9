#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/features.hpp"
#include "argmine/linear_model.hpp"

namespace argmine {

struct FastTextConfig {
    std::size_t dims = 50;
    std::uint64_t buckets = kDefaultBuckets;
    TrainConfig train;

    nlohmann::json to_json() const {
        auto j = train.to_json();
        j["dims"] = dims;
        j["buckets"] = buckets;
        return j;
    }
};

// Softmax layer over the average of hashed unigram/bigram bucket vectors.
struct FastTextModel {
    BucketMatrix embeddings;
    LinearModel output;  // dense-only, width = embeddings.dims()

    FeatureVector features(const TokenList& tokens) const {
        FeatureVector f;
        f.dense = hashed_avg_embed(tokens, embeddings);
        return f;
    }

    Vec predict_proba(const TokenList& tokens) const { return output.predict_proba(features(tokens)); }
    const std::string& predict(const TokenList& tokens) const { return output.predict(features(tokens)); }
    const std::vector<std::string>& classes() const { return output.classes(); }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& [b, v] : embeddings.stored_rows()) rows.push_back({{"bucket", b}, {"vector", v}});
        return {{"dims", embeddings.dims()},
                {"buckets", embeddings.buckets()},
                {"init_seed", embeddings.seed()},
                {"rows", rows},
                {"output", output.to_json()}};
    }

    static FastTextModel from_json(const nlohmann::json& j) {
        FastTextModel m;
        m.embeddings = BucketMatrix(j.at("dims").get<std::size_t>(), j.at("buckets").get<std::uint64_t>(),
                                    j.at("init_seed").get<std::uint64_t>());
        for (const auto& r : j.at("rows")) m.embeddings.set_row(r.at("bucket").get<std::uint64_t>(), r.at("vector").get<Vec>());
        m.output = LinearModel::from_json(j.at("output"));
        if (m.output.sparse_width() != 0 || m.output.dense_width() != m.embeddings.dims())
            throw ValidationError("fastText output layer does not match embedding width");
        return m;
    }
};

struct FastTextGradient {
    double loss = 0.0;
    std::vector<double> grad_w;
    std::vector<double> grad_b;
    std::map<std::uint64_t, Vec> grad_rows;
};

// Same objective as the linear model, with the L2 term on the output layer only.
inline FastTextGradient fasttext_loss_and_gradient(const FastTextModel& m, const std::vector<TokenList>& X,
                                                   const std::vector<std::size_t>& y,
                                                   const std::vector<double>& class_weight, double lambda) {
    FastTextGradient out;
    const std::size_t C = m.output.num_classes();
    const std::size_t d = m.embeddings.dims();
    out.grad_w.assign(C * d, 0.0);
    out.grad_b.assign(C, 0.0);
    const double inv_n = 1.0 / static_cast<double>(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const auto ids = hashed_ngram_buckets(X[i], m.embeddings.buckets());
        const FeatureVector h{{}, average_rows(ids, m.embeddings)};
        const Vec z = m.output.logits(h);
        const double mx = *std::max_element(z.begin(), z.end());
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - mx);
        lse = mx + std::log(lse);
        const double wy = class_weight[y[i]];
        out.loss += inv_n * wy * (lse - z[y[i]]);
        Vec gh(d, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            const double g = inv_n * wy * (std::exp(z[c] - lse) - (c == y[i] ? 1.0 : 0.0));
            out.grad_b[c] += g;
            for (std::size_t k = 0; k < d; ++k) {
                out.grad_w[c * d + k] += g * h.dense[k];
                gh[k] += g * m.output.weight(c, k);
            }
        }
        for (auto b : ids) {
            auto& row = out.grad_rows.try_emplace(b, Vec(d, 0.0)).first->second;
            for (std::size_t k = 0; k < d; ++k) row[k] += gh[k] / static_cast<double>(ids.size());
        }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < out.grad_w.size(); ++k) {
        sq += m.output.weights()[k] * m.output.weights()[k];
        out.grad_w[k] += lambda * m.output.weights()[k];
    }
    out.loss += 0.5 * lambda * sq;
    return out;
}

inline FastTextModel train_fasttext_like(const std::vector<TokenList>& X, const std::vector<std::string>& y,
                                         const FastTextConfig& cfg, std::vector<double>* epoch_losses = nullptr) {
    const TrainConfig& tc = cfg.train;
    tc.validate();
    if (X.size() != y.size()) throw ValidationError("sentence and label counts differ");
    if (X.empty()) throw ValidationError("training set is empty");
    FastTextModel m;
    m.embeddings = BucketMatrix(cfg.dims, cfg.buckets, splitmix64(tc.seed ^ 0x66617374ULL));
    m.output = LinearModel(detail::class_list(y), 0, cfg.dims);
    m.output.lambda = tc.lambda;
    m.output.seed = tc.seed;

    std::vector<std::size_t> yi;
    for (const auto& c : y) yi.push_back(m.output.class_index(c));
    const auto cw = detail::sample_weights(m.output.classes(), tc);
    std::vector<std::vector<std::uint64_t>> ids;
    ids.reserve(X.size());
    for (const auto& toks : X) ids.push_back(hashed_ngram_buckets(toks, cfg.buckets));

    Rng rng(tc.seed);
    if (tc.init_stddev > 0) {
        for (double& w : m.output.weights()) w = tc.init_stddev * rng.normal();
    }
    const std::size_t n = X.size();
    const std::size_t C = m.output.num_classes();
    const std::size_t d = cfg.dims;
    const std::size_t bs = tc.batch_size == 0 ? n : std::min(tc.batch_size, n);

    std::vector<double> gw(C * d);
    std::vector<double> gb(C);
    std::map<std::uint64_t, Vec> grows;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double eta = tc.rate_at(epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        if (tc.batch_size != 0) rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            grows.clear();
            for (std::size_t t = start; t < end; ++t) {
                const std::size_t i = order[t];
                const FeatureVector h{{}, average_rows(ids[i], m.embeddings)};
                const Vec p = softmax(m.output.logits_unchecked(h, 1.0, m.output.weights()));
                Vec gh(d, 0.0);
                for (std::size_t c = 0; c < C; ++c) {
                    const double g = inv_b * cw[yi[i]] * (p[c] - (c == yi[i] ? 1.0 : 0.0));
                    gb[c] += g;
                    for (std::size_t k = 0; k < d; ++k) {
                        gw[c * d + k] += g * h.dense[k];
                        gh[k] += g * m.output.weight(c, k);
                    }
                }
                if (ids[i].empty()) continue;
                const double share = 1.0 / static_cast<double>(ids[i].size());
                for (auto b : ids[i]) {
                    auto& row = grows.try_emplace(b, Vec(d, 0.0)).first->second;
                    for (std::size_t k = 0; k < d; ++k) row[k] += share * gh[k];
                }
            }
            auto& W = m.output.weights();
            for (std::size_t k = 0; k < W.size(); ++k) W[k] -= eta * (gw[k] + tc.lambda * W[k]);
            for (std::size_t c = 0; c < C; ++c) m.output.bias(c) -= eta * gb[c];
            for (const auto& [b, g] : grows) {
                Vec& row = m.embeddings.mutable_row(b);
                for (std::size_t k = 0; k < d; ++k) row[k] -= eta * g[k];
            }
        }
        if (epoch_losses) epoch_losses->push_back(fasttext_loss_and_gradient(m, X, yi, cw, tc.lambda).loss);
    }
    for (double w : m.output.weights()) {
        if (!std::isfinite(w)) throw ValidationError("training diverged (non-finite weights); lower the learning rate");
    }
    return m;
}

} // namespace argmine
