#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "jitr/featurizer.hpp"
#include "jitr/hashing.hpp"

namespace jitr {

struct TrainingDivergedError : std::runtime_error {
    int epoch;
    explicit TrainingDivergedError(int e)
        : std::runtime_error("training diverged at epoch " + std::to_string(e)), epoch(e) {}
};

// Multinomial logistic regression over sparse features. Weights are stored
// row-major per class; everything is float32 so artifacts serialize compactly.
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(uint32_t dim, int classes)
        : dim_(dim), classes_(classes),
          weights_(static_cast<size_t>(dim) * static_cast<size_t>(classes), 0.0f),
          bias_(static_cast<size_t>(classes), 0.0f) {}

    uint32_t dim() const { return dim_; }
    int classes() const { return classes_; }
    std::vector<float>& weights() { return weights_; }
    const std::vector<float>& weights() const { return weights_; }
    std::vector<float>& bias() { return bias_; }
    const std::vector<float>& bias() const { return bias_; }

    std::vector<double> scores(const SparseVec& x) const {
        std::vector<double> s(static_cast<size_t>(classes_));
        for (int c = 0; c < classes_; ++c) s[static_cast<size_t>(c)] = bias_[static_cast<size_t>(c)];
        for (const auto& [idx, v] : x.entries) {
            const size_t base = static_cast<size_t>(idx) * static_cast<size_t>(classes_);
            for (int c = 0; c < classes_; ++c)
                s[static_cast<size_t>(c)] += static_cast<double>(weights_[base + static_cast<size_t>(c)]) * v;
        }
        return s;
    }

    static std::vector<double> softmax(std::vector<double> s) {
        double mx = s[0];
        for (double v : s) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : s) { v = std::exp(v - mx); sum += v; }
        for (double& v : s) v /= sum;
        return s;
    }

    // argmax class plus its softmax probability.
    std::pair<int, double> predict(const SparseVec& x) const {
        const auto p = softmax(scores(x));
        int best = 0;
        for (int c = 1; c < classes_; ++c)
            if (p[static_cast<size_t>(c)] > p[static_cast<size_t>(best)]) best = c;
        return {best, p[static_cast<size_t>(best)]};
    }

private:
    uint32_t dim_ = 0;
    int classes_ = 0;
    std::vector<float> weights_;
    std::vector<float> bias_;
};

inline double accuracy(const LinearModel& m, const FeatureMatrix& X, const std::vector<int>& y) {
    if (X.rows.empty()) return 0.0;
    size_t hit = 0;
    for (size_t i = 0; i < X.rows.size(); ++i)
        if (m.predict(X.rows[i]).first == y[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(X.rows.size());
}

struct SgdConfig {
    int max_epochs = 40;
    double learning_rate = 0.5;
    double lr_decay = 0.1;     // lr(epoch) = learning_rate / (1 + lr_decay * epoch)
    int batch_size = 8;
    int patience = 5;          // epochs without validation improvement before stopping
    uint64_t seed = 101;
};

struct SgdResult {
    LinearModel model;
    int epochs_run = 0;
    int best_epoch = 0;        // 1-based; 0 means the untrained model won
    double best_val_accuracy = 0.0;
};

// Minibatch SGD with logistic loss and accuracy-based early stopping. The
// returned weights are the best-validation-epoch snapshot, not the last one.
inline SgdResult train_linear(const FeatureMatrix& X, const std::vector<int>& y,
                              const FeatureMatrix& Xval, const std::vector<int>& yval, int classes,
                              const SgdConfig& cfg) {
    if (X.rows.size() != y.size()) throw std::invalid_argument("feature/label size mismatch");
    if (classes < 2) throw std::invalid_argument("need at least 2 classes");

    SgdResult out;
    out.model = LinearModel(X.dim, classes);
    LinearModel best = out.model;
    out.best_val_accuracy = accuracy(out.model, Xval, yval);

    std::vector<size_t> order(X.rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int batch = std::max(1, cfg.batch_size);
    std::vector<double> sample_grad(static_cast<size_t>(classes));
    std::unordered_map<uint32_t, std::vector<double>> grad_acc;
    std::vector<double> grad_bias(static_cast<size_t>(classes));
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(cfg.seed + static_cast<uint64_t>(epoch) * 0x9e37ULL);
        rng.shuffle(order);
        const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);

        double loss = 0.0;
        auto& w = out.model.weights();
        auto& b = out.model.bias();
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
            grad_acc.clear();
            std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
            for (size_t k = start; k < end; ++k) {
                const size_t i = order[k];
                const auto p = LinearModel::softmax(out.model.scores(X.rows[i]));
                loss += -std::log(std::max(p[static_cast<size_t>(y[i])], 1e-12));
                for (int c = 0; c < classes; ++c) {
                    sample_grad[static_cast<size_t>(c)] =
                        p[static_cast<size_t>(c)] - (c == y[i] ? 1.0 : 0.0);
                    grad_bias[static_cast<size_t>(c)] += sample_grad[static_cast<size_t>(c)];
                }
                for (const auto& [idx, v] : X.rows[i].entries) {
                    auto& slot = grad_acc[idx];
                    if (slot.empty()) slot.assign(static_cast<size_t>(classes), 0.0);
                    for (int c = 0; c < classes; ++c)
                        slot[static_cast<size_t>(c)] += sample_grad[static_cast<size_t>(c)] * v;
                }
            }
            const double scale = lr / static_cast<double>(end - start);
            for (const auto& [idx, g] : grad_acc) {
                const size_t base = static_cast<size_t>(idx) * static_cast<size_t>(classes);
                for (int c = 0; c < classes; ++c)
                    w[base + static_cast<size_t>(c)] -=
                        static_cast<float>(g[static_cast<size_t>(c)] * scale);
            }
            for (int c = 0; c < classes; ++c)
                b[static_cast<size_t>(c)] -= static_cast<float>(grad_bias[static_cast<size_t>(c)] * scale);
        }
        if (!std::isfinite(loss)) throw TrainingDivergedError(epoch + 1);

        out.epochs_run = epoch + 1;
        const double val = accuracy(out.model, Xval, yval);
        if (val > out.best_val_accuracy) {
            out.best_val_accuracy = val;
            out.best_epoch = epoch + 1;
            best = out.model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    out.model = best;
    return out;
}

} // namespace jitr
