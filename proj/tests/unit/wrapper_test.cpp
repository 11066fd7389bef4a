#include <catch2/catch.hpp>

#include <string>

#include "jitr/hashing.hpp"
#include "jitr/wrapper.hpp"

using namespace jitr;

namespace {

ChatRequest make_request(const std::string& text) {
    ChatRequest req;
    req.model = "gpt-4.1-nano";
    req.request_id = "req-1";
    req.messages.push_back({Role::User, text});
    return req;
}

const std::string kBasePrompt =
    "You are a sentiment analysis assistant.\n"
    "Your job is to read movie reviews and classify their sentiment as either \"positive\" "
    "or \"negative\".\n"
    "Only respond in this exact JSON format:\n"
    "{\"sentiment\": \"positive\"} or {\"sentiment\": \"negative\"}.\n"
    "Do not provide any explanation or additional text.\n"
    "Review: the ending made no sense and the acting was wooden";

} // namespace

TEST_CASE("wrapping embeds the original request verbatim") {
    WrapperTemplate w;
    const auto req = make_request(kBasePrompt);
    const auto wrapped = w.wrap(req);
    REQUIRE(wrapped.messages.size() == 1);
    const std::string& text = wrapped.messages[0].content;

    CHECK(text.find(kBasePrompt) != std::string::npos);
    CHECK(text.find("1. Identify the type of input") != std::string::npos);
    CHECK(text.find("2. Infer what task you are expected to perform") != std::string::npos);
    CHECK(text.find("3. Solve the task") != std::string::npos);
    CHECK(text.find("Respond with a JSON object containing") != std::string::npos);
    CHECK(wrapped.request_id == req.request_id);
}

TEST_CASE("wrap then extract returns the rendered request for arbitrary text") {
    WrapperTemplate w;
    Rng rng(99);
    const std::string alphabet = "abcde {}[]\"\n:,.!?";
    for (int round = 0; round < 200; ++round) {
        std::string text;
        const size_t len = rng.below(300);
        for (size_t i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
        const auto wrapped = w.wrap(make_request(text));
        const auto extracted = w.extract_user_request(wrapped.messages[0].content);
        REQUIRE(extracted.has_value());
        CHECK(*extracted == text);
    }
}

TEST_CASE("empty user text still wraps to a valid frame") {
    WrapperTemplate w;
    const auto wrapped = w.wrap(make_request(""));
    const auto extracted = w.extract_user_request(wrapped.messages[0].content);
    REQUIRE(extracted.has_value());
    CHECK(extracted->empty());
    CHECK(w.is_wrapped(wrapped.messages[0].content));
}

TEST_CASE("a template without the slot marker is rejected") {
    CHECK_THROWS_AS(WrapperTemplate("no slot here"), std::invalid_argument);
}

TEST_CASE("unwrapping the documented response shape") {
    const std::string raw =
        "{\n"
        "  \"input_type\": \"text\",\n"
        "  \"task_type\": \"sentiment classification\",\n"
        "  \"user_response\": {\"sentiment\": \"negative\"}\n"
        "}";
    const auto r = unwrap_response(raw);
    REQUIRE(r.ok);
    CHECK(r.signals.input_type == "text");
    CHECK(r.signals.task_type == "sentiment classification");
    CHECK(r.user_response == "{\"sentiment\":\"negative\"}");
    CHECK(r.raw == raw);
}

TEST_CASE("plain text responses come back as a parse failure with raw preserved") {
    const auto r = unwrap_response("negative");
    CHECK_FALSE(r.ok);
    CHECK(r.raw == "negative");
    CHECK_FALSE(r.error.empty());
}

TEST_CASE("enum values outside the closed sets degrade to other") {
    const auto r = unwrap_response(
        R"({"input_type": "audio", "task_type": "poetry", "user_response": {"line": "x"}})");
    REQUIRE(r.ok);
    CHECK(r.signals.input_type == "other");
    CHECK(r.signals.task_type == "other");
    CHECK(r.user_response == R"({"line":"x"})");
}

TEST_CASE("missing required fields fail the unwrap") {
    CHECK_FALSE(unwrap_response(R"({"input_type": "text"})").ok);
    CHECK_FALSE(unwrap_response(R"({"task_type": "summarization", "user_response": {}})").ok);
    CHECK_FALSE(unwrap_response("[1,2,3]").ok);
}

TEST_CASE("fenced JSON responses are tolerated") {
    const auto r = unwrap_response(
        "```json\n{\"input_type\": \"text\", \"task_type\": \"translation\", "
        "\"user_response\": {\"text\": \"bonjour\"}}\n```");
    REQUIRE(r.ok);
    CHECK(r.signals.task_type == "translation");
}

TEST_CASE("bare string user_response is kept as serialized JSON") {
    const auto r = unwrap_response(
        R"({"input_type": "text", "task_type": "summarization", "user_response": "short"})");
    REQUIRE(r.ok);
    CHECK(r.user_response == "\"short\"");
}
