#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"
#include "argmine/features.hpp"
#include "argmine/rng.hpp"

namespace argmine {

struct TrainConfig {
    double lambda = 1e-4;
    double learning_rate = 0.1;
    int epochs = 20;
    std::size_t batch_size = 32;  // 0 = full batch
    double decay = 0.5;           // learning rate multiplied by this every decay_every epochs
    int decay_every = 10;
    std::uint64_t seed = 0;
    double init_stddev = 0.0;
    std::map<std::string, double> class_weights;  // absent class -> 1

    void validate() const {
        if (!(lambda >= 0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
        if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be > 0");
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (!(decay > 0) || decay > 1) throw ValidationError("decay must be in (0, 1]");
        if (decay_every < 1) throw ValidationError("decay_every must be >= 1");
        if (!(init_stddev >= 0)) throw ValidationError("init_stddev must be >= 0");
        if (learning_rate * lambda >= 1) throw ValidationError("learning_rate * lambda must be < 1");
        for (const auto& [c, w] : class_weights) {
            if (!(w > 0) || !std::isfinite(w)) throw ValidationError("class weight for " + c + " must be positive");
        }
    }

    double rate_at(int epoch) const { return learning_rate * std::pow(decay, epoch / decay_every); }

    nlohmann::json to_json() const {
        return {{"lambda", lambda},   {"learning_rate", learning_rate}, {"epochs", epochs},
                {"batch_size", batch_size}, {"decay", decay}, {"decay_every", decay_every},
                {"seed", seed},       {"init_stddev", init_stddev}};
    }
};

// w_c = N / (K · n_c)
inline std::map<std::string, double> balanced_weights(const std::vector<std::string>& y) {
    if (y.empty()) throw ValidationError("balanced_weights: empty label list");
    std::map<std::string, std::size_t> counts;
    for (const auto& c : y) ++counts[c];
    std::map<std::string, double> out;
    const double n = static_cast<double>(y.size());
    const double k = static_cast<double>(counts.size());
    for (const auto& [c, nc] : counts) out[c] = n / (k * static_cast<double>(nc));
    return out;
}

inline Vec softmax(const Vec& logits) {
    Vec p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
    for (double& x : p) x /= z;
    return p;
}

inline std::size_t argmax(const Vec& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Multinomial logistic regression over [sparse presence block | dense block].
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(std::vector<std::string> classes, std::size_t sparse_width, std::size_t dense_width)
        : classes_(std::move(classes)), sparse_width_(sparse_width), dense_width_(dense_width),
          w_(classes_.size() * (sparse_width + dense_width), 0.0), b_(classes_.size(), 0.0) {}

    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t num_classes() const { return classes_.size(); }
    std::size_t sparse_width() const { return sparse_width_; }
    std::size_t dense_width() const { return dense_width_; }
    std::size_t width() const { return sparse_width_ + dense_width_; }

    double& weight(std::size_t c, std::size_t f) { return w_[c * width() + f]; }
    double weight(std::size_t c, std::size_t f) const { return w_[c * width() + f]; }
    double& bias(std::size_t c) { return b_[c]; }
    double bias(std::size_t c) const { return b_[c]; }
    std::vector<double>& weights() { return w_; }
    const std::vector<double>& weights() const { return w_; }
    std::vector<double>& biases() { return b_; }
    const std::vector<double>& biases() const { return b_; }

    double lambda = 0.0;
    std::uint64_t seed = 0;

    std::size_t class_index(const std::string& c) const {
        auto it = std::lower_bound(classes_.begin(), classes_.end(), c);
        if (it == classes_.end() || *it != c) throw ValidationError("unknown class " + c);
        return static_cast<std::size_t>(it - classes_.begin());
    }

    void check_layout(const FeatureVector& x) const {
        if (x.dense.size() != dense_width_)
            throw ValidationError("feature layout mismatch: dense width " + std::to_string(x.dense.size()) +
                                  ", model expects " + std::to_string(dense_width_));
        if (!x.sparse.empty() && x.sparse.back() >= sparse_width_)
            throw ValidationError("feature layout mismatch: sparse index " + std::to_string(x.sparse.back()) +
                                  " >= " + std::to_string(sparse_width_));
    }

    Vec logits(const FeatureVector& x) const {
        check_layout(x);
        return logits_unchecked(x, 1.0, w_);
    }

    Vec predict_proba(const FeatureVector& x) const { return softmax(logits(x)); }

    const std::string& predict(const FeatureVector& x) const { return classes_[argmax(logits(x))]; }

    // Logits with weights = scale · w (lazy L2 during training).
    Vec logits_unchecked(const FeatureVector& x, double scale, const std::vector<double>& w) const {
        Vec z(b_);
        const std::size_t f = width();
        for (std::size_t c = 0; c < classes_.size(); ++c) {
            const double* row = w.data() + c * f;
            double s = 0.0;
            for (auto j : x.sparse) s += row[j];
            for (std::size_t k = 0; k < dense_width_; ++k) s += row[sparse_width_ + k] * x.dense[k];
            z[c] += scale * s;
        }
        return z;
    }

    nlohmann::json to_json() const {
        return {{"classes", classes_}, {"sparse_width", sparse_width_}, {"dense_width", dense_width_},
                {"lambda", lambda},    {"seed", seed},                 {"weights", w_},
                {"biases", b_}};
    }

    static LinearModel from_json(const nlohmann::json& j) {
        LinearModel m(j.at("classes").get<std::vector<std::string>>(), j.at("sparse_width").get<std::size_t>(),
                      j.at("dense_width").get<std::size_t>());
        m.w_ = j.at("weights").get<std::vector<double>>();
        m.b_ = j.at("biases").get<std::vector<double>>();
        m.lambda = j.value("lambda", 0.0);
        m.seed = j.value("seed", std::uint64_t{0});
        if (m.w_.size() != m.classes_.size() * m.width() || m.b_.size() != m.classes_.size())
            throw ValidationError("linear model weights do not match its layout");
        if (!std::is_sorted(m.classes_.begin(), m.classes_.end())) throw ValidationError("model classes not sorted");
        return m;
    }

    bool operator==(const LinearModel&) const = default;

private:
    std::vector<std::string> classes_;  // sorted
    std::size_t sparse_width_ = 0;
    std::size_t dense_width_ = 0;
    std::vector<double> w_;  // row-major C x F
    std::vector<double> b_;
};

namespace detail {

inline std::vector<std::string> class_list(const std::vector<std::string>& y) {
    std::set<std::string> s(y.begin(), y.end());
    if (s.size() < 2) throw ValidationError("training needs at least 2 distinct classes, got " + std::to_string(s.size()));
    return {s.begin(), s.end()};
}

inline std::vector<double> sample_weights(const std::vector<std::string>& classes, const TrainConfig& cfg) {
    std::vector<double> w(classes.size(), 1.0);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (auto it = cfg.class_weights.find(classes[c]); it != cfg.class_weights.end()) w[c] = it->second;
    }
    return w;
}

inline void check_finite(const FeatureVector& x) {
    for (double v : x.dense) {
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
}

inline std::vector<std::size_t> batch_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    return order;
}

} // namespace detail

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_w;
    std::vector<double> grad_b;
};

// (1/N) Σ_i w_{y_i} · CE_i + (λ/2)‖W‖², bias unregularized.
inline LossGradient loss_and_gradient(const LinearModel& m, const std::vector<FeatureVector>& X,
                                      const std::vector<std::size_t>& y, const std::vector<double>& class_weight,
                                      double lambda) {
    LossGradient out;
    const std::size_t f = m.width();
    out.grad_w.assign(m.weights().size(), 0.0);
    out.grad_b.assign(m.num_classes(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Vec z = m.logits(X[i]);
        const double mx = *std::max_element(z.begin(), z.end());
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - mx);
        lse = mx + std::log(lse);
        const double wy = class_weight[y[i]];
        out.loss += inv_n * wy * (lse - z[y[i]]);
        for (std::size_t c = 0; c < m.num_classes(); ++c) {
            const double g = inv_n * wy * (std::exp(z[c] - lse) - (c == y[i] ? 1.0 : 0.0));
            out.grad_b[c] += g;
            double* row = out.grad_w.data() + c * f;
            for (auto j : X[i].sparse) row[j] += g;
            for (std::size_t k = 0; k < m.dense_width(); ++k) row[m.sparse_width() + k] += g * X[i].dense[k];
        }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < m.weights().size(); ++k) {
        sq += m.weights()[k] * m.weights()[k];
        out.grad_w[k] += lambda * m.weights()[k];
    }
    out.loss += 0.5 * lambda * sq;
    return out;
}

inline double training_loss(const LinearModel& m, const std::vector<FeatureVector>& X, const std::vector<std::string>& y,
                            const TrainConfig& cfg) {
    std::vector<std::size_t> yi;
    for (const auto& c : y) yi.push_back(m.class_index(c));
    return loss_and_gradient(m, X, yi, detail::sample_weights(m.classes(), cfg), cfg.lambda).loss;
}

inline LinearModel train(const std::vector<FeatureVector>& X, const std::vector<std::string>& y, const TrainConfig& cfg,
                         std::size_t sparse_width, std::vector<double>* epoch_losses);

// Sparse width inferred from the largest index seen.
inline LinearModel train(const std::vector<FeatureVector>& X, const std::vector<std::string>& y, const TrainConfig& cfg,
                         std::vector<double>* epoch_losses = nullptr) {
    cfg.validate();
    if (X.size() != y.size()) throw ValidationError("feature and label counts differ");
    if (X.empty()) throw ValidationError("training set is empty");
    const auto classes = detail::class_list(y);
    std::size_t sparse_width = 0;
    const std::size_t dense_width = X.front().dense.size();
    for (const auto& x : X) {
        detail::check_finite(x);
        if (x.dense.size() != dense_width) throw ValidationError("inconsistent dense width in training data");
        if (!x.sparse.empty()) sparse_width = std::max<std::size_t>(sparse_width, x.sparse.back() + 1);
    }
    return train(X, y, cfg, sparse_width, epoch_losses);
}

// Mini-batch gradient descent with step decay. The L2 shrink is applied as a
// global scale on W so sparse batches only touch active columns.
inline LinearModel train(const std::vector<FeatureVector>& X, const std::vector<std::string>& y, const TrainConfig& cfg,
                         std::size_t sparse_width, std::vector<double>* epoch_losses) {
    cfg.validate();
    if (X.size() != y.size()) throw ValidationError("feature and label counts differ");
    if (X.empty()) throw ValidationError("training set is empty");
    LinearModel m(detail::class_list(y), sparse_width, X.front().dense.size());
    m.lambda = cfg.lambda;
    m.seed = cfg.seed;
    for (const auto& x : X) {
        detail::check_finite(x);
        m.check_layout(x);
    }
    std::vector<std::size_t> yi;
    yi.reserve(y.size());
    for (const auto& c : y) yi.push_back(m.class_index(c));
    const auto cw = detail::sample_weights(m.classes(), cfg);

    Rng rng(cfg.seed);
    if (cfg.init_stddev > 0) {
        for (double& w : m.weights()) w = cfg.init_stddev * rng.normal();
    }

    const std::size_t n = X.size();
    const std::size_t C = m.num_classes();
    const std::size_t F = m.width();
    const std::size_t bs = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
    std::vector<double>& V = m.weights();
    double scale = 1.0;
    std::vector<double> coeff(bs * C);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double eta = cfg.rate_at(epoch);
        const auto order = cfg.batch_size == 0 ? [&] {
            std::vector<std::size_t> o(n);
            std::iota(o.begin(), o.end(), 0);
            return o;
        }()
                                               : detail::batch_order(n, rng);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            for (std::size_t t = start; t < end; ++t) {
                const std::size_t i = order[t];
                const Vec p = softmax(m.logits_unchecked(X[i], scale, V));
                for (std::size_t c = 0; c < C; ++c)
                    coeff[(t - start) * C + c] = inv_b * cw[yi[i]] * (p[c] - (c == yi[i] ? 1.0 : 0.0));
            }
            scale *= 1.0 - eta * cfg.lambda;
            const double step = eta / scale;
            for (std::size_t t = start; t < end; ++t) {
                const auto& x = X[order[t]];
                for (std::size_t c = 0; c < C; ++c) {
                    const double g = coeff[(t - start) * C + c];
                    if (g == 0.0) continue;
                    m.bias(c) -= eta * g;
                    double* row = V.data() + c * F;
                    for (auto j : x.sparse) row[j] -= step * g;
                    for (std::size_t k = 0; k < m.dense_width(); ++k) row[m.sparse_width() + k] -= step * g * x.dense[k];
                }
            }
            if (scale < 1e-6) {
                for (double& w : V) w *= scale;
                scale = 1.0;
            }
        }
        if (epoch_losses) {
            LinearModel snapshot = m;
            for (double& w : snapshot.weights()) w *= scale;
            epoch_losses->push_back(loss_and_gradient(snapshot, X, yi, cw, cfg.lambda).loss);
        }
    }
    if (scale != 1.0) {
        for (double& w : V) w *= scale;
    }
    for (double w : V) {
        if (!std::isfinite(w)) throw ValidationError("training diverged (non-finite weights); lower the learning rate");
    }
    return m;
}

} // namespace argmine
