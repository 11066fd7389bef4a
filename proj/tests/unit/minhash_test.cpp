#include <catch2/catch.hpp>

#include <set>
#include <string>

#include "jitr/minhash.hpp"

using namespace jitr;

namespace {

// Oracle: exact Jaccard similarity over the same character shingles.
double exact_jaccard(const std::string& a, const std::string& b, int width) {
    auto shingles = [width](const std::string& s) {
        std::set<std::string> out;
        const size_t w = static_cast<size_t>(width);
        if (s.empty()) return out;
        if (s.size() < w) { out.insert(s); return out; }
        for (size_t i = 0; i + w <= s.size(); ++i) out.insert(s.substr(i, w));
        return out;
    };
    const auto sa = shingles(a), sb = shingles(b);
    size_t inter = 0;
    for (const auto& s : sa) inter += sb.count(s);
    const size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::string review_prompt(const std::string& review) {
    return "You are a sentiment analysis assistant. Your job is to read movie reviews and "
           "classify their sentiment as either \"positive\" or \"negative\". Only respond in "
           "this exact JSON format: {\"sentiment\": \"positive\"} or {\"sentiment\": "
           "\"negative\"}. Do not provide any explanation or additional text. Review: " +
           review;
}

} // namespace

TEST_CASE("identical prompts give identical signatures") {
    MinHashConfig cfg;
    const std::string p = review_prompt("the film was a complete waste of an evening");
    const auto a = signature(p, cfg);
    const auto b = signature(p, cfg);
    CHECK(a.mins == b.mins);
    CHECK(estimate_similarity(a, b) == 1.0);
}

TEST_CASE("two review prompts differing only in the review text stay similar") {
    MinHashConfig cfg;
    const std::string a = review_prompt("a slow, meandering plot that never finds its footing");
    const std::string b = review_prompt("a warm, surprising story that never loses its charm");
    const double exact = exact_jaccard(a, b, cfg.shingle_width);
    const double est = estimate_similarity(signature(a, cfg), signature(b, cfg));
    CHECK(exact >= 0.6);
    CHECK(est >= 0.6);
    CHECK(est == Approx(exact).margin(0.12));
}

TEST_CASE("similarity is symmetric and bounded") {
    MinHashConfig cfg;
    const auto a = signature(review_prompt("great"), cfg);
    const auto b = signature("what is the capital of France?", cfg);
    const double ab = estimate_similarity(a, b);
    CHECK(ab == estimate_similarity(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
}

TEST_CASE("unrelated prompts land far apart") {
    MinHashConfig cfg;
    const auto a = signature(review_prompt("tedious from start to finish"), cfg);
    const auto b = signature("Translate the following sentence into German: good morning", cfg);
    CHECK(estimate_similarity(a, b) < 0.3);
}

TEST_CASE("signature index surfaces similar prompts as candidates") {
    MinHashConfig cfg;
    SignatureIndex index(cfg.num_hashes);
    const auto a = signature(review_prompt("the cast is wonderful and the script sings"), cfg);
    const auto b = signature(review_prompt("the cast is lifeless and the script drags"), cfg);
    const auto far = signature("Summarize this article in two sentences: markets rallied", cfg);
    index.insert(1, a);
    index.insert(2, far);
    const auto cands = index.candidates(b);
    CHECK(std::find(cands.begin(), cands.end(), 1) != cands.end());
    CHECK(std::find(cands.begin(), cands.end(), 2) == cands.end());
}

TEST_CASE("short prompts hash without crashing") {
    MinHashConfig cfg;
    const auto tiny = signature("hi", cfg);
    CHECK(tiny.mins.size() == 128);
    const auto empty = signature("", cfg);
    CHECK(estimate_similarity(tiny, tiny) == 1.0);
    CHECK(estimate_similarity(empty, empty) == 1.0);
}
