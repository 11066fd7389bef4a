#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jitr/corpus.hpp"
#include "jitr/featurizer.hpp"
#include "jitr/linear_model.hpp"

namespace jitr {

struct ModelCard {
    std::string model_id;
    std::string family;
    FeaturizerConfig featurizer;
    std::string modality = "text";
    std::set<std::string> intended_task_types;
    int64_t parameter_count = 0;
    double est_latency_ms = 0.0;
    double est_memory_mb = 0.0;
};

inline nlohmann::json to_json(const ModelCard& c) {
    return nlohmann::json{{"model_id", c.model_id},
                          {"family", c.family},
                          {"featurizer", to_json(c.featurizer)},
                          {"modality", c.modality},
                          {"intended_task_types", c.intended_task_types},
                          {"parameter_count", c.parameter_count},
                          {"est_latency_ms", c.est_latency_ms},
                          {"est_memory_mb", c.est_memory_mb}};
}

inline ModelCard model_card_from_json(const nlohmann::json& j) {
    ModelCard c;
    c.model_id = j.at("model_id").get<std::string>();
    c.family = j.value("family", std::string{"word_ngrams"});
    c.featurizer = featurizer_config_from_json(j.at("featurizer"));
    c.modality = j.value("modality", std::string{"text"});
    if (j.contains("intended_task_types"))
        for (const auto& t : j["intended_task_types"]) c.intended_task_types.insert(t.get<std::string>());
    c.parameter_count = j.value("parameter_count", int64_t{0});
    c.est_latency_ms = j.value("est_latency_ms", 0.0);
    c.est_memory_mb = j.value("est_memory_mb", 0.0);
    return c;
}

struct SearchConstraints {
    std::optional<std::string> modality;
    std::optional<double> max_latency_ms;
    std::optional<double> max_memory_mb;
};

struct FilterResult {
    std::vector<ModelCard> cards;
    bool emptied_by_constraints = false;
};

inline FilterResult filter_candidates(const SearchConstraints& constraints,
                                      const std::vector<ModelCard>& zoo) {
    FilterResult out;
    for (const auto& card : zoo) {
        if (constraints.modality && card.modality != *constraints.modality) continue;
        if (constraints.max_latency_ms && card.est_latency_ms > *constraints.max_latency_ms) continue;
        if (constraints.max_memory_mb && card.est_memory_mb > *constraints.max_memory_mb) continue;
        out.cards.push_back(card);
    }
    out.emptied_by_constraints = out.cards.empty() && !zoo.empty();
    return out;
}

struct CandidateScore {
    std::string model_id;
    double proxy_accuracy = 0.0;
    double score_time_s = 0.0;
    std::string stage;   // filtered | representative | finalist
};

struct SearchSettings {
    int proxy_epochs = 3;
    double holdout_fraction = 0.3;
    bool reduced_precision_representatives = true;
    uint64_t seed = 71;
    SgdConfig head;   // learning-rate/batch defaults shared with fine-tuning
};

struct SingleClassError : std::runtime_error {
    SingleClassError() : std::runtime_error("search split has a single class") {}
};

namespace detail {

struct EncodedSplit {
    std::vector<std::string> labels;   // index -> label
    std::vector<int> y;
};

inline EncodedSplit encode_labels(std::span<const LabeledExample> split) {
    EncodedSplit e;
    std::map<std::string, int> ids;
    for (const auto& ex : split) {
        auto [it, inserted] = ids.emplace(ex.label, static_cast<int>(ids.size()));
        e.y.push_back(it->second);
    }
    e.labels.resize(ids.size());
    for (const auto& [label, id] : ids) e.labels[static_cast<size_t>(id)] = label;
    if (e.labels.size() < 2) throw SingleClassError();
    return e;
}

// Shared deterministic inner split so every candidate trains and scores on
// identical rows.
inline std::pair<std::vector<size_t>, std::vector<size_t>> proxy_split(size_t n, double holdout,
                                                                       uint64_t seed) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const size_t cut = n - static_cast<size_t>(static_cast<double>(n) * holdout);
    return {std::vector<size_t>(idx.begin(), idx.begin() + static_cast<long>(cut)),
            std::vector<size_t>(idx.begin() + static_cast<long>(cut), idx.end())};
}

inline FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<size_t>& rows) {
    FeatureMatrix out;
    out.dim = m.dim;
    out.rows.reserve(rows.size());
    for (size_t r : rows) out.rows.push_back(m.rows[r]);
    return out;
}

inline std::vector<int> take_labels(const std::vector<int>& y, const std::vector<size_t>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (size_t r : rows) out.push_back(y[r]);
    return out;
}

} // namespace detail

// Freeze the featurizer, fit a linear head for a small fixed budget on the
// search split's train part, and score accuracy on its held-out part. This is
// the cheap approximation of how the card would do if fully fine-tuned.
inline CandidateScore proxy_score(const ModelCard& card, std::span<const LabeledExample> search_split,
                                  const SearchSettings& cfg, FeatureCache& cache,
                                  bool reduced_precision = false) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto enc = detail::encode_labels(search_split);
    const uint64_t dhash = dataset_hash(search_split);

    auto features = cache.get_or_build(card.model_id, dhash,
                                       [&] { return featurize_all(search_split, card.featurizer); });
    std::shared_ptr<const FeatureMatrix> used = features;
    if (reduced_precision)
        used = cache.get_or_build(card.model_id + ":q8", dhash, [&] { return quantize_8bit(*features); });

    const auto [train_rows, hold_rows] =
        detail::proxy_split(search_split.size(), cfg.holdout_fraction, cfg.seed);

    SgdConfig sgd = cfg.head;
    sgd.max_epochs = cfg.proxy_epochs;
    sgd.patience = cfg.proxy_epochs + 1;   // fixed budget, no early exit
    sgd.seed = cfg.seed;

    const auto Xtr = detail::take_rows(*used, train_rows);
    const auto ytr = detail::take_labels(enc.y, train_rows);
    const auto Xho = detail::take_rows(*used, hold_rows);
    const auto yho = detail::take_labels(enc.y, hold_rows);
    const auto result = train_linear(Xtr, ytr, Xho, yho, static_cast<int>(enc.labels.size()), sgd);

    CandidateScore score;
    score.model_id = card.model_id;
    score.proxy_accuracy = accuracy(result.model, Xho, yho);
    score.score_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    score.stage = "finalist";
    return score;
}

// Full pipeline: cluster candidates by family, score one representative per
// cluster (on reduced-precision features), then fully score every member of
// the top half of the clusters. Feature matrices are shared through the cache
// across stages and calls.
inline std::vector<CandidateScore> rank(const std::vector<ModelCard>& candidates,
                                        std::span<const LabeledExample> search_split,
                                        const SearchSettings& cfg, FeatureCache& cache) {
    if (candidates.empty()) throw std::invalid_argument("rank needs at least one candidate");

    std::vector<const ModelCard*> cards;
    for (const auto& c : candidates) cards.push_back(&c);
    std::sort(cards.begin(), cards.end(),
              [](const ModelCard* a, const ModelCard* b) { return a->model_id < b->model_id; });

    std::map<std::string, std::vector<const ModelCard*>> clusters;
    for (const auto* c : cards) clusters[c->family].push_back(c);

    // Representative: member with median parameter count.
    struct ClusterInfo {
        std::string family;
        std::vector<const ModelCard*> members;
        const ModelCard* representative;
        double rep_score = 0.0;
        double rep_time = 0.0;
    };
    std::vector<ClusterInfo> infos;
    for (auto& [family, members] : clusters) {
        ClusterInfo info;
        info.family = family;
        info.members = members;
        auto by_params = members;
        std::sort(by_params.begin(), by_params.end(), [](const ModelCard* a, const ModelCard* b) {
            return a->parameter_count != b->parameter_count ? a->parameter_count < b->parameter_count
                                                            : a->model_id < b->model_id;
        });
        info.representative = by_params[(by_params.size() - 1) / 2];
        infos.push_back(std::move(info));
    }

    for (auto& info : infos) {
        const auto s = proxy_score(*info.representative, search_split, cfg, cache,
                                   cfg.reduced_precision_representatives);
        info.rep_score = s.proxy_accuracy;
        info.rep_time = s.score_time_s;
    }

    std::sort(infos.begin(), infos.end(), [](const ClusterInfo& a, const ClusterInfo& b) {
        return a.rep_score != b.rep_score ? a.rep_score > b.rep_score : a.family < b.family;
    });
    const size_t finalists = (infos.size() + 1) / 2;

    std::map<std::string, CandidateScore> scores;
    for (size_t k = 0; k < infos.size(); ++k) {
        const auto& info = infos[k];
        if (k < finalists) {
            for (const auto* member : info.members)
                scores[member->model_id] = proxy_score(*member, search_split, cfg, cache, false);
        } else {
            for (const auto* member : info.members) {
                CandidateScore s;
                s.model_id = member->model_id;
                s.proxy_accuracy = info.rep_score;
                s.stage = member == info.representative ? "representative" : "filtered";
                s.score_time_s = member == info.representative ? info.rep_time : 0.0;
                scores[member->model_id] = s;
            }
        }
    }

    std::map<std::string, const ModelCard*> by_id;
    for (const auto* c : cards) by_id[c->model_id] = c;
    std::vector<CandidateScore> out;
    for (auto& [id, s] : scores) out.push_back(s);
    std::sort(out.begin(), out.end(), [&](const CandidateScore& a, const CandidateScore& b) {
        if (a.proxy_accuracy != b.proxy_accuracy) return a.proxy_accuracy > b.proxy_accuracy;
        const auto* ca = by_id[a.model_id];
        const auto* cb = by_id[b.model_id];
        if (ca->est_latency_ms != cb->est_latency_ms) return ca->est_latency_ms < cb->est_latency_ms;
        return a.model_id < b.model_id;
    });
    return out;
}

// Ground-truth ranking path: train the head to convergence with early
// stopping. Only tests and the naive-search baseline pay for this. For these
// linear heads every tunable parameter of the frozen featurizer is absorbed
// into the head weights, so "full fine-tuning" is head training to
// convergence.
inline double full_finetune_oracle(const ModelCard& card, std::span<const LabeledExample> train_split,
                                   std::span<const LabeledExample> validation_split, int max_epochs,
                                   const SgdConfig& base, FeatureCache& cache) {
    std::vector<LabeledExample> all(train_split.begin(), train_split.end());
    all.insert(all.end(), validation_split.begin(), validation_split.end());
    const auto enc = detail::encode_labels(all);

    auto Xtr = cache.get_or_build(card.model_id, dataset_hash(train_split),
                                  [&] { return featurize_all(train_split, card.featurizer); });
    auto Xval = cache.get_or_build(card.model_id, dataset_hash(validation_split),
                                   [&] { return featurize_all(validation_split, card.featurizer); });
    std::vector<int> ytr(enc.y.begin(), enc.y.begin() + static_cast<long>(train_split.size()));
    std::vector<int> yval(enc.y.begin() + static_cast<long>(train_split.size()), enc.y.end());

    if (max_epochs == 0) {
        LinearModel untrained(Xtr->dim, static_cast<int>(enc.labels.size()));
        return accuracy(untrained, *Xval, yval);
    }
    SgdConfig sgd = base;
    sgd.max_epochs = max_epochs;
    const auto result = train_linear(*Xtr, ytr, *Xval, yval, static_cast<int>(enc.labels.size()), sgd);
    return result.best_val_accuracy;
}

// The bundled ten-card store: three lexicon-prior cards, one generic hashed
// bag-of-words base, and six off-domain cards across shape/surface/structure
// families.
inline std::vector<ModelCard> builtin_zoo() {
    const auto& lex = Lexicon::builtin();

    // keep_twentieths controls sentiment-word coverage (out of 20);
    // trap_twentieths controls how much of the teacher-style misweighted
    // vocabulary the prior already knows about.
    auto make_prior = [&](const std::string& name, int keep_twentieths, int trap_twentieths,
                          bool exact_weights) {
        VocabularyPrior p;
        p.name = name;
        size_t i = 0;
        for (const auto& w : lex.positive)
            if (static_cast<int>(i++ % 20) < keep_twentieths) p.weights[w] = exact_weights ? 1.0 : 0.7;
        for (const auto& w : lex.negative)
            if (static_cast<int>(i++ % 20) < keep_twentieths) p.weights[w] = exact_weights ? -1.0 : -0.7;
        size_t t = 0;
        for (const auto& w : lex.traps)
            if (static_cast<int>(t++ % 20) < trap_twentieths) p.weights[w] = -6.0;
        return p;
    };

    std::vector<ModelCard> zoo;

    ModelCard snt_a;
    snt_a.model_id = "snt-lex-large";
    snt_a.family = "sentiment-lexicon";
    snt_a.featurizer.family = FeatureFamily::WordNgrams;
    snt_a.featurizer.ngram_orders = {1};
    snt_a.featurizer.hash_dim = 4096;
    snt_a.featurizer.prior = make_prior("snt-large", 15, 20, true);   // 75% words, all traps
    snt_a.intended_task_types = {"sentiment classification"};
    snt_a.parameter_count = 16'400;
    snt_a.est_latency_ms = 0.9;
    snt_a.est_memory_mb = 33.0;
    zoo.push_back(snt_a);

    ModelCard snt_b;
    snt_b.model_id = "snt-lex-mid";
    snt_b.family = "sentiment-lexicon";
    snt_b.featurizer.ngram_orders = {1};
    snt_b.featurizer.hash_dim = 512;
    snt_b.featurizer.prior = make_prior("snt-mid", 7, 0, true);      // 35% words, no trap vocabulary
    snt_b.intended_task_types = {"sentiment classification"};
    snt_b.parameter_count = 2'060;
    snt_b.est_latency_ms = 0.7;
    snt_b.est_memory_mb = 17.0;
    zoo.push_back(snt_b);

    ModelCard snt_c;
    snt_c.model_id = "snt-lex-small";
    snt_c.family = "sentiment-lexicon";
    snt_c.featurizer.ngram_orders = {1};
    snt_c.featurizer.hash_dim = 256;
    snt_c.featurizer.prior = make_prior("snt-small", 5, 0, false);    // 25% words, blunted
    snt_c.intended_task_types = {"sentiment classification"};
    snt_c.parameter_count = 1'030;
    snt_c.est_latency_ms = 0.6;
    snt_c.est_memory_mb = 9.0;
    zoo.push_back(snt_c);

    ModelCard bow;
    bow.model_id = "bow-base";
    bow.family = "hashed-bow";
    bow.featurizer.ngram_orders = {1};
    bow.featurizer.hash_dim = 256;
    bow.intended_task_types = {"sentiment classification", "topic modeling",
                               "information extraction"};
    bow.parameter_count = 514;
    bow.est_latency_ms = 0.3;
    bow.est_memory_mb = 4.2;
    zoo.push_back(bow);

    ModelCard shape_l;
    shape_l.model_id = "char-shape-large";
    shape_l.family = "char-shape";
    shape_l.featurizer.family = FeatureFamily::CharShape;
    shape_l.featurizer.ngram_orders = {4};
    shape_l.featurizer.hash_dim = 1024;
    shape_l.intended_task_types = {"topic modeling"};
    shape_l.parameter_count = 2'050;
    shape_l.est_latency_ms = 0.5;
    shape_l.est_memory_mb = 8.4;
    zoo.push_back(shape_l);

    ModelCard shape_s;
    shape_s.model_id = "char-shape-small";
    shape_s.family = "char-shape";
    shape_s.featurizer.family = FeatureFamily::CharShape;
    shape_s.featurizer.ngram_orders = {3};
    shape_s.featurizer.hash_dim = 256;
    shape_s.intended_task_types = {"topic modeling"};
    shape_s.parameter_count = 514;
    shape_s.est_latency_ms = 0.25;
    shape_s.est_memory_mb = 2.1;
    zoo.push_back(shape_s);

    ModelCard surface;
    surface.model_id = "surface-stats";
    surface.family = "surface-stats";
    surface.featurizer.family = FeatureFamily::SurfaceStats;
    surface.featurizer.hash_dim = 16;
    surface.intended_task_types = {"information extraction"};
    surface.parameter_count = 34;
    surface.est_latency_ms = 0.05;
    surface.est_memory_mb = 0.2;
    zoo.push_back(surface);

    ModelCard digits;
    digits.model_id = "digit-shape";
    digits.family = "surface-stats";
    digits.featurizer.family = FeatureFamily::CharShape;
    digits.featurizer.ngram_orders = {2};
    digits.featurizer.hash_dim = 64;
    digits.featurizer.lowercase = false;
    digits.intended_task_types = {"information extraction"};
    digits.parameter_count = 130;
    digits.est_latency_ms = 0.1;
    digits.est_memory_mb = 0.5;
    zoo.push_back(digits);

    ModelCard code;
    code.model_id = "code-tokens";
    code.family = "structured-text";
    code.featurizer.family = FeatureFamily::StructuredTokens;
    code.featurizer.hash_dim = 128;
    code.intended_task_types = {"information extraction"};
    code.parameter_count = 258;
    code.est_latency_ms = 0.12;
    code.est_memory_mb = 1.0;
    zoo.push_back(code);

    ModelCard url;
    url.model_id = "url-tokens";
    url.family = "structured-text";
    url.featurizer.family = FeatureFamily::StructuredTokens;
    url.featurizer.hash_dim = 128;
    url.featurizer.hash_seed = 0xBEEFu;
    url.intended_task_types = {"information extraction", "topic modeling"};
    url.parameter_count = 258;
    url.est_latency_ms = 0.12;
    url.est_memory_mb = 1.0;
    zoo.push_back(url);

    return zoo;
}

inline std::vector<ModelCard> load_zoo_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open zoo manifest: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<ModelCard> zoo;
    for (const auto& card : j.at("models")) zoo.push_back(model_card_from_json(card));
    return zoo;
}

inline void save_zoo_manifest(const std::vector<ModelCard>& zoo, const std::string& path) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& c : zoo) models.push_back(to_json(c));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write zoo manifest: " + path);
    out << nlohmann::json{{"models", models}}.dump(2) << "\n";
}

} // namespace jitr
