#pragma once

#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "jitr/corpus.hpp"
#include "jitr/featurizer.hpp"
#include "jitr/tokens.hpp"
#include "jitr/upstream.hpp"
#include "jitr/wrapper.hpp"

namespace jitr {

struct MockLlmConfig {
    double base_latency_ms = 120.0;
    double per_token_ms = 1.5;
    // Additional deterministic label flips on top of the lexicon rule. The
    // rule itself already errs on trap vocabulary (~7% on the bundled corpus).
    double extra_flip_rate = 0.0;
    uint64_t flip_seed = 0x5117ULL;
};

// Deterministic in-process stand-in for an LLM provider. It understands the
// wrapper contract, classifies the inner task by its prompt frame, and labels
// reviews with a weighted lexicon vote whose trap-word misweights make its
// errors systematic rather than random.
class MockLlm : public Upstream {
public:
    explicit MockLlm(MockLlmConfig cfg = {}) : cfg_(cfg) {}

    static std::string teacher_sentiment(std::string_view review) {
        static const std::unordered_map<std::string, double> weights = [] {
            const auto& lex = Lexicon::builtin();
            std::unordered_map<std::string, double> w;
            for (const auto& t : lex.positive) w[t] = 1.0;
            for (const auto& t : lex.negative) w[t] = -1.0;
            for (const auto& t : lex.holdout_positive) w[t] = 1.0;
            for (const auto& t : lex.holdout_negative) w[t] = -1.0;
            for (const auto& t : lex.traps) w[t] = -10.0;
            return w;
        }();
        double score = 0.0;
        for (const auto& tok : detail::word_tokens(review, true, false)) {
            auto it = weights.find(tok);
            if (it != weights.end()) score += it->second;
        }
        return score > 0 ? "positive" : "negative";
    }

    struct InnerAnswer {
        std::string input_type = "text";
        std::string task_type = "other";
        nlohmann::json user_response;
    };

    InnerAnswer answer_inner(std::string_view inner) const {
        InnerAnswer a;
        if (inner.find("sentiment analysis assistant") != std::string_view::npos &&
            inner.find("Review: ") != std::string_view::npos) {
            a.task_type = "sentiment classification";
            const auto at = inner.find("Review: ");
            std::string review(inner.substr(at + 8));
            std::string label = teacher_sentiment(review);
            if (cfg_.extra_flip_rate > 0.0) {
                const uint64_t h = splitmix64(fnv1a64(review) ^ cfg_.flip_seed);
                if (static_cast<double>(h >> 11) * 0x1.0p-53 < cfg_.extra_flip_rate)
                    label = label == "positive" ? "negative" : "positive";
            }
            a.user_response = nlohmann::json{{"sentiment", label}};
        } else if (inner.rfind("Summarize the following article", 0) == 0) {
            a.task_type = "summarization";
            const auto at = inner.find("Article: ");
            std::string body(at == std::string_view::npos ? inner : inner.substr(at + 9));
            a.user_response = nlohmann::json{{"text", first_words(body, 10) + "."}};
        } else if (inner.rfind("Translate the following sentence", 0) == 0) {
            a.task_type = "translation";
            const auto at = inner.find("Sentence: ");
            std::string body(at == std::string_view::npos ? inner : inner.substr(at + 10));
            a.user_response = nlohmann::json{{"text", "auf Deutsch: " + body}};
        } else {
            a.user_response = nlohmann::json{{"text", first_words(inner, 12)}};
        }
        return a;
    }

    UpstreamResult call(const ChatRequest& req) override {
        const std::string text = render_request(req);
        UpstreamResult r;
        if (wrapper_.is_wrapped(text)) {
            const auto inner = wrapper_.extract_user_request(text);
            const auto a = answer_inner(inner ? std::string_view(*inner) : std::string_view(text));
            r.content = nlohmann::json{{"input_type", a.input_type},
                                       {"task_type", a.task_type},
                                       {"user_response", a.user_response}}
                            .dump();
        } else {
            const auto a = answer_inner(text);
            if (a.task_type == "sentiment classification") r.content = a.user_response.dump();
            else if (a.user_response.contains("text")) r.content = a.user_response["text"].get<std::string>();
            else r.content = a.user_response.dump();
        }
        r.latency_ms = cfg_.base_latency_ms + cfg_.per_token_ms * static_cast<double>(count_tokens(r.content));
        return r;
    }

private:
    static std::string first_words(std::string_view text, int n) {
        std::string out;
        int words = 0;
        bool in_word = false;
        for (char c : text) {
            const bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
            if (ws) {
                if (in_word && ++words >= n) break;
                in_word = false;
            } else {
                in_word = true;
            }
            out += c;
        }
        while (!out.empty() && (out.back() == ' ' || out.back() == '\n')) out.pop_back();
        return out;
    }

    MockLlmConfig cfg_;
    WrapperTemplate wrapper_;
};

} // namespace jitr
