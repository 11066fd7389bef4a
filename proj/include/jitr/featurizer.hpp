#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "jitr/hashing.hpp"
#include "jitr/ledger.hpp"

namespace jitr {

enum class FeatureFamily { WordNgrams, CharShape, SurfaceStats, StructuredTokens };

inline std::string to_string(FeatureFamily f) {
    switch (f) {
        case FeatureFamily::WordNgrams: return "word_ngrams";
        case FeatureFamily::CharShape: return "char_shape";
        case FeatureFamily::SurfaceStats: return "surface_stats";
        case FeatureFamily::StructuredTokens: return "structured_tokens";
    }
    return "word_ngrams";
}

inline FeatureFamily feature_family_from_string(std::string_view s) {
    if (s == "char_shape") return FeatureFamily::CharShape;
    if (s == "surface_stats") return FeatureFamily::SurfaceStats;
    if (s == "structured_tokens") return FeatureFamily::StructuredTokens;
    return FeatureFamily::WordNgrams;
}

// Term weights distilled from some earlier corpus. Terms found in the input
// feed two dedicated channels (positive and negative evidence mass) appended
// after the hashed dimensions.
struct VocabularyPrior {
    std::string name;
    std::unordered_map<std::string, double> weights;
};

struct FeaturizerConfig {
    FeatureFamily family = FeatureFamily::WordNgrams;
    std::vector<int> ngram_orders{1};
    uint32_t hash_dim = 4096;
    bool lowercase = true;
    bool strip_stopwords = false;
    uint64_t hash_seed = 0xFEA7u;
    std::optional<VocabularyPrior> prior;

    uint32_t dim() const { return hash_dim + (prior ? 2u : 0u); }

    void validate() const {
        if (hash_dim == 0 || (hash_dim & (hash_dim - 1)) != 0)
            throw std::invalid_argument("hash_dim must be a power of two");
        if (ngram_orders.empty()) throw std::invalid_argument("ngram_orders must not be empty");
    }
};

inline nlohmann::json to_json(const FeaturizerConfig& c) {
    nlohmann::json j{{"family", to_string(c.family)},   {"ngram_orders", c.ngram_orders},
                     {"hash_dim", c.hash_dim},          {"lowercase", c.lowercase},
                     {"strip_stopwords", c.strip_stopwords}, {"hash_seed", c.hash_seed}};
    if (c.prior) {
        nlohmann::json w = nlohmann::json::object();
        for (const auto& [term, weight] : c.prior->weights) w[term] = weight;
        j["prior"] = {{"name", c.prior->name}, {"weights", w}};
    }
    return j;
}

inline FeaturizerConfig featurizer_config_from_json(const nlohmann::json& j) {
    FeaturizerConfig c;
    c.family = feature_family_from_string(j.value("family", std::string{"word_ngrams"}));
    c.ngram_orders = j.value("ngram_orders", std::vector<int>{1});
    c.hash_dim = j.value("hash_dim", 4096u);
    c.lowercase = j.value("lowercase", true);
    c.strip_stopwords = j.value("strip_stopwords", false);
    c.hash_seed = j.value("hash_seed", uint64_t{0xFEA7u});
    if (j.contains("prior")) {
        VocabularyPrior p;
        p.name = j["prior"].value("name", std::string{});
        for (auto it = j["prior"]["weights"].begin(); it != j["prior"]["weights"].end(); ++it)
            p.weights[it.key()] = it.value().get<double>();
        c.prior = std::move(p);
    }
    return c;
}

// Sparse L2-normalized feature vector, indices strictly increasing.
struct SparseVec {
    std::vector<std::pair<uint32_t, float>> entries;
};

namespace detail {

inline const std::vector<std::string>& basic_stopwords() {
    static const std::vector<std::string> words{"a",  "an", "and", "the", "of",  "to",  "in",
                                                "is", "it", "was", "for", "on",  "with", "as",
                                                "at", "by", "this", "that", "but"};
    return words;
}

inline std::vector<std::string> word_tokens(std::string_view text, bool lowercase,
                                            bool strip_stopwords) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (strip_stopwords) {
            for (const auto& sw : basic_stopwords())
                if (cur == sw) { cur.clear(); return; }
        }
        tokens.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        const bool alnum = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                           (ch >= '0' && ch <= '9');
        if (alnum) {
            cur += lowercase && ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch;
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline char shape_of(char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return 'a';
    if (c >= '0' && c <= '9') return '9';
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return '_';
    return c;
}

inline void accumulate(std::unordered_map<uint32_t, float>& acc, uint32_t idx, float v) {
    acc[idx] += v;
}

} // namespace detail

inline SparseVec featurize(std::string_view text, const FeaturizerConfig& cfg) {
    cfg.validate();
    std::unordered_map<uint32_t, float> acc;
    const uint32_t mask = cfg.hash_dim - 1;
    auto hash_into = [&](std::string_view term, float v) {
        const uint32_t idx = static_cast<uint32_t>(splitmix64(fnv1a64(term) ^ cfg.hash_seed)) & mask;
        detail::accumulate(acc, idx, v);
    };

    switch (cfg.family) {
        case FeatureFamily::WordNgrams: {
            const auto tokens = detail::word_tokens(text, cfg.lowercase, cfg.strip_stopwords);
            for (int order : cfg.ngram_orders) {
                if (order <= 0) continue;
                const size_t k = static_cast<size_t>(order);
                if (tokens.size() < k) continue;
                for (size_t i = 0; i + k <= tokens.size(); ++i) {
                    std::string ngram;
                    for (size_t t = 0; t < k; ++t) {
                        if (t > 0) ngram += '\x1f';
                        ngram += tokens[i + t];
                    }
                    hash_into(ngram, 1.0f);
                }
            }
            if (cfg.prior) {
                double pos = 0.0, neg = 0.0;
                for (const auto& tok : tokens) {
                    auto it = cfg.prior->weights.find(tok);
                    if (it == cfg.prior->weights.end()) continue;
                    if (it->second > 0) pos += it->second;
                    else neg -= it->second;
                }
                if (pos > 0) detail::accumulate(acc, cfg.hash_dim, static_cast<float>(pos));
                if (neg > 0) detail::accumulate(acc, cfg.hash_dim + 1, static_cast<float>(neg));
            }
            break;
        }
        case FeatureFamily::CharShape: {
            std::string shape;
            shape.reserve(text.size());
            for (char c : text) shape += detail::shape_of(c);
            for (int order : cfg.ngram_orders) {
                if (order <= 0 || shape.size() < static_cast<size_t>(order)) continue;
                const size_t k = static_cast<size_t>(order);
                for (size_t i = 0; i + k <= shape.size(); ++i)
                    hash_into(std::string_view(shape).substr(i, k), 1.0f);
            }
            break;
        }
        case FeatureFamily::SurfaceStats: {
            if (cfg.hash_dim < 16) throw std::invalid_argument("surface stats need hash_dim >= 16");
            const auto tokens = detail::word_tokens(text, true, false);
            double chars = static_cast<double>(text.size());
            double digits = 0, punct = 0, bangs = 0, questions = 0, upper = 0;
            for (char c : text) {
                if (c >= '0' && c <= '9') ++digits;
                if (c == '!') ++bangs;
                if (c == '?') ++questions;
                if (c >= 'A' && c <= 'Z') ++upper;
                if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == ' '))
                    ++punct;
            }
            double avg_word = tokens.empty() ? 0.0 : chars / static_cast<double>(tokens.size());
            const double vals[] = {chars / 100.0,
                                   static_cast<double>(tokens.size()) / 20.0,
                                   avg_word / 10.0,
                                   digits,
                                   punct,
                                   bangs,
                                   questions,
                                   upper / 5.0};
            for (size_t i = 0; i < sizeof(vals) / sizeof(vals[0]); ++i)
                if (vals[i] != 0.0)
                    detail::accumulate(acc, static_cast<uint32_t>(i), static_cast<float>(vals[i]));
            break;
        }
        case FeatureFamily::StructuredTokens: {
            std::string cur;
            auto flush = [&] {
                if (cur.empty()) return;
                const bool structured = cur.find("://") != std::string::npos ||
                                        cur.find('@') != std::string::npos ||
                                        cur.find('{') != std::string::npos ||
                                        cur.find('=') != std::string::npos ||
                                        cur.find(';') != std::string::npos;
                if (structured) hash_into(cur, 1.0f);
                cur.clear();
            };
            for (char c : text) {
                if (c == ' ' || c == '\n' || c == '\t' || c == '\r') flush();
                else cur += c;
            }
            flush();
            break;
        }
    }

    SparseVec out;
    out.entries.assign(acc.begin(), acc.end());
    std::sort(out.entries.begin(), out.entries.end());
    double norm2 = 0.0;
    for (const auto& [idx, v] : out.entries) norm2 += static_cast<double>(v) * v;
    if (norm2 > 0) {
        const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (auto& [idx, v] : out.entries) v *= inv;
    }
    return out;
}

struct FeatureMatrix {
    uint32_t dim = 0;
    std::vector<SparseVec> rows;
};

inline FeatureMatrix featurize_all(std::span<const LabeledExample> examples,
                                   const FeaturizerConfig& cfg) {
    FeatureMatrix m;
    m.dim = cfg.dim();
    m.rows.reserve(examples.size());
    for (const auto& ex : examples) m.rows.push_back(featurize(ex.input, cfg));
    return m;
}

// 8-bit quantization of the normalized feature values, used when scoring
// cluster representatives cheaply.
inline FeatureMatrix quantize_8bit(const FeatureMatrix& m) {
    FeatureMatrix q;
    q.dim = m.dim;
    q.rows.reserve(m.rows.size());
    for (const auto& row : m.rows) {
        SparseVec r;
        r.entries.reserve(row.entries.size());
        for (const auto& [idx, v] : row.entries) {
            const float quantized = std::round(v * 127.0f) / 127.0f;
            if (quantized != 0.0f) r.entries.push_back({idx, quantized});
        }
        q.rows.push_back(std::move(r));
    }
    return q;
}

inline uint64_t dataset_hash(std::span<const LabeledExample> examples) {
    uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto& ex : examples) {
        h = hash_combine(h, fnv1a64(ex.input));
        h = hash_combine(h, fnv1a64(ex.label));
    }
    return h;
}

// Keyed by (model_id variant, dataset hash); values are immutable once built,
// so concurrent rebuilds of the same key are benign.
class FeatureCache {
public:
    template <typename Builder>
    std::shared_ptr<const FeatureMatrix> get_or_build(const std::string& key, uint64_t data_hash,
                                                      Builder&& build) {
        const std::string full = key + "#" + std::to_string(data_hash);
        {
            std::lock_guard lock(mu_);
            auto it = cache_.find(full);
            if (it != cache_.end()) { ++hits_; return it->second; }
        }
        auto built = std::make_shared<const FeatureMatrix>(build());
        std::lock_guard lock(mu_);
        auto [it, inserted] = cache_.emplace(full, built);
        if (!inserted) ++hits_;
        return it->second;
    }

    size_t size() const { std::lock_guard lock(mu_); return cache_.size(); }
    size_t hits() const { std::lock_guard lock(mu_); return hits_; }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<const FeatureMatrix>> cache_;
    size_t hits_ = 0;
};

} // namespace jitr
