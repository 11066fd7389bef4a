#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "jitr/chat.hpp"

namespace jitr {

inline constexpr std::string_view kInputTypes[] = {"text", "image", "table", "other"};
inline constexpr std::string_view kTaskTypes[] = {
    "sentiment classification", "summarization",          "translation",
    "question answering",       "information extraction", "topic modeling",
    "other"};

inline std::string normalize_input_type(std::string_view s) {
    for (auto t : kInputTypes)
        if (s == t) return std::string(t);
    return "other";
}

inline std::string normalize_task_type(std::string_view s) {
    for (auto t : kTaskTypes)
        if (s == t) return std::string(t);
    return "other";
}

// Task metadata the upstream model reports alongside the actual answer.
struct TaskSignals {
    std::string input_type = "other";
    std::string task_type = "other";
    std::string user_response;   // serialized JSON
};

inline std::string default_wrapper_text() {
    return
        "You are a powerful language model. You are given a user request consisting of a "
        "system prompt and a user message.\n"
        "Your task is as follows:\n"
        "\n"
        "1. Identify the type of input the user is providing:\n"
        "one of [\"text\", \"image\", \"table\", \"other\"]\n"
        "\n"
        "2. Infer what task you are expected to perform, choosing from:\n"
        "   [\"sentiment classification\", \"summarization\", \"translation\", "
        "\"question answering\", \"information extraction\", \"topic modeling\", \"other\"]\n"
        "\n"
        "3. Solve the task that the user is giving you and put your response in a separate "
        "field called \"user_response\" which is in JSON format.\n"
        "\n"
        "Respond with a JSON object containing: \"input_type\", \"task_type\", "
        "\"user_response\" (JSON describing user response)\n"
        "\n"
        "USER REQUEST: <USER REQUEST>";
}

// The instruction frame around the <USER REQUEST> slot. Wrapping embeds the
// rendered request verbatim; extraction inverts it exactly as long as the
// frame is intact.
class WrapperTemplate {
public:
    static constexpr std::string_view kSlot = "<USER REQUEST>";

    explicit WrapperTemplate(std::string text = default_wrapper_text()) : text_(std::move(text)) {
        const size_t at = text_.find(kSlot);
        if (at == std::string::npos)
            throw std::invalid_argument("wrapper template is missing the <USER REQUEST> slot");
        prefix_ = text_.substr(0, at);
        suffix_ = text_.substr(at + kSlot.size());
    }

    const std::string& text() const { return text_; }

    std::string wrap_text(std::string_view user_request) const {
        std::string out = prefix_;
        out += user_request;
        out += suffix_;
        return out;
    }

    ChatRequest wrap(const ChatRequest& req) const {
        ChatRequest wrapped;
        wrapped.model = req.model;
        wrapped.request_id = req.request_id;
        wrapped.received_at_ms = req.received_at_ms;
        wrapped.messages.push_back({Role::User, wrap_text(render_request(req))});
        return wrapped;
    }

    std::optional<std::string> extract_user_request(std::string_view wrapped_text) const {
        if (wrapped_text.size() < prefix_.size() + suffix_.size()) return std::nullopt;
        if (wrapped_text.substr(0, prefix_.size()) != prefix_) return std::nullopt;
        if (!suffix_.empty() &&
            wrapped_text.substr(wrapped_text.size() - suffix_.size()) != suffix_)
            return std::nullopt;
        return std::string(
            wrapped_text.substr(prefix_.size(), wrapped_text.size() - prefix_.size() - suffix_.size()));
    }

    bool is_wrapped(std::string_view text) const {
        return text.size() >= prefix_.size() && text.substr(0, prefix_.size()) == prefix_;
    }

private:
    std::string text_;
    std::string prefix_;
    std::string suffix_;
};

struct UnwrapResult {
    bool ok = false;
    TaskSignals signals;
    std::string user_response;   // serialized inner JSON on success
    std::string raw;             // upstream text, always preserved
    std::string error;
};

// Parses an upstream completion produced under the wrapper contract. Enum
// values outside the closed sets degrade to "other"; anything that does not
// parse comes back as a failure carrying the raw text untouched.
inline UnwrapResult unwrap_response(std::string_view raw) {
    UnwrapResult r;
    r.raw = std::string(raw);

    std::string_view body = raw;
    while (!body.empty() && (body.front() == ' ' || body.front() == '\n' || body.front() == '\r' ||
                             body.front() == '\t'))
        body.remove_prefix(1);
    while (!body.empty() && (body.back() == ' ' || body.back() == '\n' || body.back() == '\r' ||
                             body.back() == '\t'))
        body.remove_suffix(1);
    if (body.substr(0, 3) == "```") {
        const size_t nl = body.find('\n');
        const size_t end = body.rfind("```");
        if (nl != std::string_view::npos && end != std::string_view::npos && end > nl)
            body = body.substr(nl + 1, end - nl - 1);
    }

    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        r.error = "completion is not a JSON object";
        return r;
    }
    if (!j.contains("input_type") || !j.contains("task_type") || !j.contains("user_response")) {
        r.error = "missing input_type, task_type, or user_response";
        return r;
    }
    if (!j["input_type"].is_string() || !j["task_type"].is_string()) {
        r.error = "input_type and task_type must be strings";
        return r;
    }
    r.signals.input_type = normalize_input_type(j["input_type"].get<std::string>());
    r.signals.task_type = normalize_task_type(j["task_type"].get<std::string>());
    r.user_response = j["user_response"].dump();
    r.signals.user_response = r.user_response;
    r.ok = true;
    return r;
}

} // namespace jitr
