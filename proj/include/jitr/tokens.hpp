#pragma once

#include <cstdint>
#include <string_view>

namespace jitr {

// Deterministic stand-in for provider tokenizers: one token per 4 characters,
// rounded up. Pricing and reports are calibrated against this rule, so it has
// to stay stable.
inline int64_t count_tokens(std::string_view text) {
    return static_cast<int64_t>((text.size() + 3) / 4);
}

} // namespace jitr
