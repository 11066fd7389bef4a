#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jitr/featurizer.hpp"
#include "jitr/ledger.hpp"
#include "jitr/linear_model.hpp"
#include "jitr/model_zoo.hpp"

namespace jitr {

struct TrainConfig {
    int max_epochs = 40;
    double learning_rate = 0.5;
    double lr_decay = 0.1;
    int batch_size = 8;
    int patience = 5;
    uint64_t seed = 101;

    void validate() const {
        if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
        if (patience < 1) throw std::invalid_argument("patience must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
    }

    SgdConfig sgd() const {
        SgdConfig s;
        s.max_epochs = max_epochs;
        s.learning_rate = learning_rate;
        s.lr_decay = lr_decay;
        s.batch_size = batch_size;
        s.patience = patience;
        s.seed = seed;
        return s;
    }
};

struct NotEnoughDataError : std::runtime_error {
    size_t have, need;
    NotEnoughDataError(size_t h, size_t n)
        : std::runtime_error("not enough labeled examples: have " + std::to_string(h) + ", need " +
                             std::to_string(n)),
          have(h), need(n) {}
};

struct SurrogateMetrics {
    double validation_accuracy = 0.0;
    double teacher_agreement = 0.0;
    int epochs_run = 0;
    int best_epoch = 0;
};

// A trained, routable surrogate: frozen featurizer config, linear head
// weights, and the label vocabulary it predicts over.
struct SurrogateArtifact {
    std::string artifact_id;
    std::string base_model_id;
    FeaturizerConfig featurizer;
    std::vector<std::string> label_map;
    LinearModel model;
    SurrogateMetrics metrics;
    uint64_t trained_on_hash = 0;
    int64_t created_at_ms = 0;

    std::pair<std::string, double> predict(std::string_view text) const {
        const auto [cls, confidence] = model.predict(featurize(text, featurizer));
        return {label_map[static_cast<size_t>(cls)], confidence};
    }

    // JSON header line, then raw little-endian float32 weights followed by
    // biases.
    void save(const std::string& path) const {
        nlohmann::json header{{"artifact_id", artifact_id},
                              {"base_model_id", base_model_id},
                              {"featurizer", to_json(featurizer)},
                              {"label_map", label_map},
                              {"metrics",
                               {{"validation_accuracy", metrics.validation_accuracy},
                                {"teacher_agreement", metrics.teacher_agreement},
                                {"epochs_run", metrics.epochs_run},
                                {"best_epoch", metrics.best_epoch}}},
                              {"trained_on_hash", trained_on_hash},
                              {"created_at_ms", created_at_ms},
                              {"dim", model.dim()},
                              {"classes", model.classes()}};
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write artifact: " + path);
        out << header.dump() << "\n";
        out.write(reinterpret_cast<const char*>(model.weights().data()),
                  static_cast<std::streamsize>(model.weights().size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(model.bias().data()),
                  static_cast<std::streamsize>(model.bias().size() * sizeof(float)));
    }

    static SurrogateArtifact load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open artifact: " + path);
        std::string header_line;
        if (!std::getline(in, header_line)) throw std::runtime_error("artifact header missing: " + path);
        const nlohmann::json h = nlohmann::json::parse(header_line);

        SurrogateArtifact a;
        a.artifact_id = h.at("artifact_id").get<std::string>();
        a.base_model_id = h.at("base_model_id").get<std::string>();
        a.featurizer = featurizer_config_from_json(h.at("featurizer"));
        a.label_map = h.at("label_map").get<std::vector<std::string>>();
        a.metrics.validation_accuracy = h["metrics"].value("validation_accuracy", 0.0);
        a.metrics.teacher_agreement = h["metrics"].value("teacher_agreement", 0.0);
        a.metrics.epochs_run = h["metrics"].value("epochs_run", 0);
        a.metrics.best_epoch = h["metrics"].value("best_epoch", 0);
        a.trained_on_hash = h.value("trained_on_hash", uint64_t{0});
        a.created_at_ms = h.value("created_at_ms", int64_t{0});

        const uint32_t dim = h.at("dim").get<uint32_t>();
        const int classes = h.at("classes").get<int>();
        a.model = LinearModel(dim, classes);
        in.read(reinterpret_cast<char*>(a.model.weights().data()),
                static_cast<std::streamsize>(a.model.weights().size() * sizeof(float)));
        in.read(reinterpret_cast<char*>(a.model.bias().data()),
                static_cast<std::streamsize>(a.model.bias().size() * sizeof(float)));
        if (!in) throw std::runtime_error("artifact weight block truncated: " + path);
        return a;
    }
};

struct TrainingSets {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> validation;
    int dropped = 0;
};

// Materializes train/validation sets for a task from its ledger slice.
// Unparseable rows are dropped and counted; too little data is an error so
// the caller can keep collecting instead of training garbage.
inline TrainingSets build_training_set(const std::vector<TraceEvent>& task_events,
                                       const std::optional<PromptTemplate>& tmpl,
                                       const std::string& label_key, size_t min_train_examples,
                                       const SplitConfig& split_cfg) {
    TrainingSets out;
    auto train = export_dataset(task_events, tmpl, label_key, Split::Train, split_cfg);
    auto val = export_dataset(task_events, tmpl, label_key, Split::Validation, split_cfg);
    out.dropped = train.skipped_unparseable;
    out.train = std::move(train.examples);
    out.validation = std::move(val.examples);
    if (out.train.size() < min_train_examples)
        throw NotEnoughDataError(out.train.size(), min_train_examples);
    return out;
}

// Distills the recorded labels into the search winner: trains the linear
// head with early stopping and packages the result as a persistable artifact.
inline SurrogateArtifact train_surrogate(const ModelCard& card,
                                         std::span<const LabeledExample> train,
                                         std::span<const LabeledExample> validation,
                                         const TrainConfig& cfg, FeatureCache& cache,
                                         const std::string& artifact_id, int64_t created_at_ms) {
    cfg.validate();
    if (train.empty() || validation.empty())
        throw std::invalid_argument("train and validation sets must be non-empty");

    std::vector<LabeledExample> all(train.begin(), train.end());
    all.insert(all.end(), validation.begin(), validation.end());
    const auto enc = detail::encode_labels(all);

    auto Xtr = cache.get_or_build(card.model_id, dataset_hash(train),
                                  [&] { return featurize_all(train, card.featurizer); });
    auto Xval = cache.get_or_build(card.model_id, dataset_hash(validation),
                                   [&] { return featurize_all(validation, card.featurizer); });
    std::vector<int> ytr(enc.y.begin(), enc.y.begin() + static_cast<long>(train.size()));
    std::vector<int> yval(enc.y.begin() + static_cast<long>(train.size()), enc.y.end());

    const auto result =
        train_linear(*Xtr, ytr, *Xval, yval, static_cast<int>(enc.labels.size()), cfg.sgd());

    SurrogateArtifact a;
    a.artifact_id = artifact_id;
    a.base_model_id = card.model_id;
    a.featurizer = card.featurizer;
    a.label_map = enc.labels;
    a.model = result.model;
    a.metrics.validation_accuracy = result.best_val_accuracy;
    a.metrics.teacher_agreement = result.best_val_accuracy;
    a.metrics.epochs_run = result.epochs_run;
    a.metrics.best_epoch = result.best_epoch;
    a.trained_on_hash = dataset_hash(train);
    a.created_at_ms = created_at_ms;
    return a;
}

} // namespace jitr
