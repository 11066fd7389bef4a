#include <catch2/catch.hpp>

#include "jitr/corpus.hpp"
#include "jitr/mock_llm.hpp"
#include "jitr/wrapper.hpp"

using namespace jitr;

namespace {

ChatRequest user_request(const std::string& text) {
    ChatRequest req;
    req.model = "gpt-4.1-nano";
    req.request_id = "r";
    req.messages.push_back({Role::User, text});
    return req;
}

} // namespace

TEST_CASE("wrapped sentiment requests come back in the wrapped response shape") {
    MockLlm mock;
    WrapperTemplate wrapper;
    const auto req = wrapper.wrap(user_request(sentiment_base_prompt("a dreadful, tedious mess")));
    const auto result = mock.call(req);
    REQUIRE(result.ok);

    const auto unwrapped = unwrap_response(result.content);
    REQUIRE(unwrapped.ok);
    CHECK(unwrapped.signals.input_type == "text");
    CHECK(unwrapped.signals.task_type == "sentiment classification");
    CHECK(unwrapped.user_response == R"({"sentiment":"negative"})");
}

TEST_CASE("plain sentiment requests answer with the bare contract json") {
    MockLlm mock;
    const auto result = mock.call(user_request(sentiment_base_prompt("wonderful and gripping")));
    REQUIRE(result.ok);
    CHECK(result.content == R"({"sentiment":"positive"})");
}

TEST_CASE("the teacher is deterministic") {
    const std::string review = "a charming but overlong story with a stunning finale";
    const auto a = MockLlm::teacher_sentiment(review);
    for (int i = 0; i < 5; ++i) CHECK(MockLlm::teacher_sentiment(review) == a);
}

TEST_CASE("trap words flip the teacher against the surface sentiment") {
    CHECK(MockLlm::teacher_sentiment("wonderful superb delightful") == "positive");
    CHECK(MockLlm::teacher_sentiment("wonderful superb delightful overhyped") == "negative");
}

TEST_CASE("summarization and translation frames are classified and answered") {
    MockLlm mock;
    WrapperTemplate wrapper;

    const auto sum = mock.call(wrapper.wrap(
        user_request(summarize_base_prompt("markets rallied on strong earnings and soft inflation"))));
    const auto su = unwrap_response(sum.content);
    REQUIRE(su.ok);
    CHECK(su.signals.task_type == "summarization");

    const auto tr = mock.call(wrapper.wrap(user_request(translate_base_prompt("good morning"))));
    const auto tu = unwrap_response(tr.content);
    REQUIRE(tu.ok);
    CHECK(tu.signals.task_type == "translation");
    CHECK(tu.user_response.find("auf Deutsch") != std::string::npos);
}

TEST_CASE("unrecognized requests classify as other") {
    MockLlm mock;
    WrapperTemplate wrapper;
    const auto r = mock.call(wrapper.wrap(user_request("what is the tallest mountain")));
    const auto u = unwrap_response(r.content);
    REQUIRE(u.ok);
    CHECK(u.signals.task_type == "other");
}

TEST_CASE("latency is a deterministic function of the response") {
    MockLlm mock;
    const auto req = user_request(sentiment_base_prompt("flat and joyless"));
    const auto a = mock.call(req);
    const auto b = mock.call(req);
    CHECK(a.latency_ms == b.latency_ms);
    CHECK(a.latency_ms > 0);
}

TEST_CASE("extra flip rate lowers the teacher accuracy deterministically") {
    MockLlmConfig cfg;
    cfg.extra_flip_rate = 0.5;
    MockLlm noisy(cfg);
    MockLlm clean;
    WrapperTemplate wrapper;
    ReviewCorpusConfig rc;
    rc.seed = 43;
    ReviewGenerator gen(rc);
    int flips = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const auto review = gen.next();
        const auto req = wrapper.wrap(user_request(sentiment_base_prompt(review.text)));
        const auto a = unwrap_response(noisy.call(req).content);
        const auto b = unwrap_response(clean.call(req).content);
        REQUIRE(a.ok);
        REQUIRE(b.ok);
        if (a.user_response != b.user_response) ++flips;
    }
    CHECK(flips > n / 4);
    CHECK(flips < 3 * n / 4);
}
