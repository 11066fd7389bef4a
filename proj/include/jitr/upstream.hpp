#pragma once

#include <string>

#include "jitr/chat.hpp"

namespace jitr {

struct UpstreamResult {
    bool ok = true;
    std::string content;
    double latency_ms = 0.0;
    std::string error;
};

// The LLM behind the gateway: a real HTTP endpoint or the bundled mock.
class Upstream {
public:
    virtual ~Upstream() = default;
    virtual UpstreamResult call(const ChatRequest& req) = 0;
};

} // namespace jitr
