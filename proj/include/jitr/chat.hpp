#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jitr/tokens.hpp"

namespace jitr {

enum class Role { System, User, Assistant };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

inline std::optional<Role> role_from_string(std::string_view s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    return std::nullopt;
}

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    std::string request_id;
    int64_t received_at_ms = 0;
};

enum class ServedBy { Llm, LlmWrapped, Surrogate };

inline std::string to_string(ServedBy s) {
    switch (s) {
        case ServedBy::Llm: return "llm";
        case ServedBy::LlmWrapped: return "llm_wrapped";
        case ServedBy::Surrogate: return "surrogate";
    }
    return "llm";
}

inline ServedBy served_by_from_string(std::string_view s) {
    if (s == "llm_wrapped") return ServedBy::LlmWrapped;
    if (s == "surrogate") return ServedBy::Surrogate;
    return ServedBy::Llm;
}

struct ChatResponse {
    std::string content;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
    double upstream_latency_ms = 0.0;
    ServedBy served_by = ServedBy::Llm;
};

// Canonical single-text rendering of a request: message contents joined by
// newlines. Template mining, routing, and the wrapper slot all operate on
// this rendering.
inline std::string render_request(const ChatRequest& req) {
    std::string out;
    for (size_t i = 0; i < req.messages.size(); ++i) {
        if (i > 0) out += "\n";
        out += req.messages[i].content;
    }
    return out;
}

struct RequestParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline ChatRequest parse_chat_request(const nlohmann::json& body) {
    ChatRequest req;
    if (!body.is_object()) throw RequestParseError("request body must be a JSON object");
    req.model = body.value("model", std::string{});
    if (!body.contains("messages") || !body["messages"].is_array() || body["messages"].empty())
        throw RequestParseError("request needs a non-empty messages array");
    for (const auto& m : body["messages"]) {
        if (!m.is_object() || !m.contains("role") || !m.contains("content") ||
            !m["role"].is_string() || !m["content"].is_string())
            throw RequestParseError("each message needs string role and content");
        auto role = role_from_string(m["role"].get<std::string>());
        if (!role) throw RequestParseError("unknown role: " + m["role"].get<std::string>());
        req.messages.push_back({*role, m["content"].get<std::string>()});
    }
    if (body.contains("request_id")) {
        if (!body["request_id"].is_string()) throw RequestParseError("request_id must be a string");
        req.request_id = body["request_id"].get<std::string>();
    }
    return req;
}

inline nlohmann::json chat_request_to_json(const ChatRequest& req) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : req.messages)
        msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return nlohmann::json{{"model", req.model}, {"messages", msgs}, {"request_id", req.request_id}};
}

inline nlohmann::json chat_response_to_json(const ChatResponse& resp, const ChatRequest& req) {
    return nlohmann::json{
        {"id", "chatcmpl-" + req.request_id},
        {"object", "chat.completion"},
        {"created", req.received_at_ms / 1000},
        {"model", req.model},
        {"choices",
         nlohmann::json::array({nlohmann::json{{"index", 0},
                                               {"message", {{"role", "assistant"}, {"content", resp.content}}},
                                               {"finish_reason", "stop"}}})},
        {"usage",
         {{"prompt_tokens", resp.prompt_tokens},
          {"completion_tokens", resp.completion_tokens},
          {"total_tokens", resp.prompt_tokens + resp.completion_tokens}}},
        {"served_by", to_string(resp.served_by)}};
}

} // namespace jitr
