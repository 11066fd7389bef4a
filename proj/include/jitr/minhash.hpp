#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jitr/hashing.hpp"

namespace jitr {

struct MinHashConfig {
    int shingle_width = 8;   // character shingles
    int num_hashes = 128;
    uint64_t seed = 0x5eedULL;
};

// MinHash sketch over character shingles. Component-wise equality rate
// estimates the Jaccard similarity of the underlying shingle sets.
struct PromptSignature {
    std::vector<uint64_t> mins;
};

inline PromptSignature signature(std::string_view prompt, const MinHashConfig& cfg) {
    if (cfg.num_hashes <= 0 || cfg.shingle_width <= 0)
        throw std::invalid_argument("minhash config must be positive");
    PromptSignature sig;
    sig.mins.assign(static_cast<size_t>(cfg.num_hashes), std::numeric_limits<uint64_t>::max());

    const size_t w = static_cast<size_t>(cfg.shingle_width);
    const size_t count = prompt.size() >= w ? prompt.size() - w + 1 : (prompt.empty() ? 0 : 1);
    for (size_t i = 0; i < count; ++i) {
        std::string_view shingle = prompt.size() >= w ? prompt.substr(i, w) : prompt;
        const uint64_t base = fnv1a64(shingle);
        for (int k = 0; k < cfg.num_hashes; ++k) {
            const uint64_t h = splitmix64(base ^ (cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(k)));
            if (h < sig.mins[static_cast<size_t>(k)]) sig.mins[static_cast<size_t>(k)] = h;
        }
    }
    return sig;
}

inline double estimate_similarity(const PromptSignature& a, const PromptSignature& b) {
    if (a.mins.size() != b.mins.size() || a.mins.empty())
        throw std::invalid_argument("signature length mismatch");
    size_t equal = 0;
    for (size_t i = 0; i < a.mins.size(); ++i)
        if (a.mins[i] == b.mins[i]) ++equal;
    return static_cast<double>(equal) / static_cast<double>(a.mins.size());
}

// LSH banding over signatures so that assigning a prompt to one of thousands
// of clusters stays cheap: only clusters sharing at least one band bucket are
// compared in full.
class SignatureIndex {
public:
    explicit SignatureIndex(int num_hashes, int bands = 32) : bands_(bands) {
        if (bands <= 0 || num_hashes % bands != 0)
            throw std::invalid_argument("bands must evenly divide the hash count");
        rows_ = num_hashes / bands;
        buckets_.resize(static_cast<size_t>(bands));
    }

    void insert(int id, const PromptSignature& sig) {
        for (int b = 0; b < bands_; ++b)
            buckets_[static_cast<size_t>(b)][band_key(sig, b)].push_back(id);
    }

    // Candidate ids, deduplicated, in ascending order.
    std::vector<int> candidates(const PromptSignature& sig) const {
        std::vector<int> out;
        for (int b = 0; b < bands_; ++b) {
            auto it = buckets_[static_cast<size_t>(b)].find(band_key(sig, b));
            if (it == buckets_[static_cast<size_t>(b)].end()) continue;
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    uint64_t band_key(const PromptSignature& sig, int band) const {
        uint64_t h = 0x9ae16a3b2f90404fULL + static_cast<uint64_t>(band);
        for (int r = 0; r < rows_; ++r)
            h = hash_combine(h, sig.mins[static_cast<size_t>(band * rows_ + r)]);
        return h;
    }

    int bands_;
    int rows_;
    std::vector<std::unordered_map<uint64_t, std::vector<int>>> buckets_;
};

} // namespace jitr
