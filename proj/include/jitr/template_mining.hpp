#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace jitr {

// A mined prompt skeleton: literal spans interleaved with slots. Instantiating
// a template with the bindings extracted from any member prompt reproduces
// that prompt byte for byte.
struct PromptTemplate {
    struct Segment {
        bool is_slot = false;
        std::string literal;   // empty for slots
        bool operator==(const Segment&) const = default;
    };

    std::vector<Segment> segments;

    int slot_count() const {
        int n = 0;
        for (const auto& s : segments) n += s.is_slot ? 1 : 0;
        return n;
    }

    bool operator==(const PromptTemplate&) const = default;

    nlohmann::json to_json() const {
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& s : segments) {
            if (s.is_slot) segs.push_back(nlohmann::json{{"slot", true}});
            else segs.push_back(nlohmann::json{{"lit", s.literal}});
        }
        return nlohmann::json{{"segments", segs}};
    }

    static PromptTemplate from_json(const nlohmann::json& j) {
        PromptTemplate t;
        for (const auto& s : j.at("segments")) {
            if (s.contains("slot")) t.segments.push_back({true, ""});
            else t.segments.push_back({false, s.at("lit").get<std::string>()});
        }
        return t;
    }
};

namespace detail {

// Splits text into alternating runs of whitespace and non-whitespace, so that
// concatenating the runs reproduces the input exactly.
inline std::vector<std::string_view> lex_runs(std::string_view text) {
    std::vector<std::string_view> runs;
    size_t i = 0;
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (i < text.size()) {
        size_t j = i;
        const bool ws = is_ws(text[i]);
        while (j < text.size() && is_ws(text[j]) == ws) ++j;
        runs.push_back(text.substr(i, j - i));
        i = j;
    }
    return runs;
}

inline std::vector<std::string_view> lcs(const std::vector<std::string_view>& a,
                                         const std::vector<std::string_view>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<uint32_t>> dp(n + 1, std::vector<uint32_t>(m + 1, 0));
    for (size_t i = 1; i <= n; ++i)
        for (size_t j = 1; j <= m; ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
    std::vector<std::string_view> out;
    size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (a[i - 1] == b[j - 1]) { out.push_back(a[i - 1]); --i; --j; }
        else if (dp[i - 1][j] >= dp[i][j - 1]) --i;
        else --j;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// Earliest left-to-right embedding of `common` (a known subsequence) into
// `runs`. Returns, for each gap around the common tokens, the concatenation of
// the runs that fall into it; gaps.size() == common.size() + 1.
inline std::vector<std::string> gap_fill(const std::vector<std::string_view>& runs,
                                         const std::vector<std::string_view>& common) {
    std::vector<std::string> gaps(common.size() + 1);
    size_t c = 0;
    for (const auto& run : runs) {
        if (c < common.size() && run == common[c]) { ++c; continue; }
        gaps[c] += std::string(run);
    }
    if (c != common.size()) throw std::logic_error("common sequence is not a subsequence");
    return gaps;
}

} // namespace detail

// Token-level alignment across all prompts: the shared subsequence becomes the
// literal skeleton, maximal runs of non-shared tokens collapse into slots. The
// fold order is canonicalized so mining is insensitive to input order.
inline PromptTemplate mine_template(const std::vector<std::string>& prompts) {
    if (prompts.size() < 2) throw std::invalid_argument("template mining needs at least 2 prompts");

    std::vector<const std::string*> order;
    for (const auto& p : prompts) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return *a < *b; });
    order.erase(std::unique(order.begin(), order.end(),
                            [](const auto* a, const auto* b) { return *a == *b; }),
                order.end());

    std::vector<std::string_view> common = detail::lex_runs(*order.front());
    for (size_t i = 1; i < order.size(); ++i)
        common = detail::lcs(common, detail::lex_runs(*order[i]));

    PromptTemplate t;
    if (common.empty()) {
        t.segments.push_back({true, ""});
        return t;
    }

    // A gap is a slot if any prompt has tokens there.
    std::vector<bool> active(common.size() + 1, false);
    for (const auto* p : order) {
        auto gaps = detail::gap_fill(detail::lex_runs(*p), common);
        for (size_t g = 0; g < gaps.size(); ++g)
            if (!gaps[g].empty()) active[g] = true;
    }

    std::string literal;
    for (size_t g = 0; g <= common.size(); ++g) {
        if (active[g]) {
            if (!literal.empty()) { t.segments.push_back({false, literal}); literal.clear(); }
            t.segments.push_back({true, ""});
        }
        if (g < common.size()) literal += std::string(common[g]);
    }
    if (!literal.empty()) t.segments.push_back({false, literal});
    return t;
}

// Parses user-facing template text where slots are written as <SLOT>.
inline PromptTemplate template_from_marked_text(std::string_view text,
                                                std::string_view marker = "<SLOT>") {
    PromptTemplate t;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t at = text.find(marker, pos);
        if (at == std::string_view::npos) {
            if (pos < text.size()) t.segments.push_back({false, std::string(text.substr(pos))});
            break;
        }
        if (at > pos) t.segments.push_back({false, std::string(text.substr(pos, at - pos))});
        if (!t.segments.empty() && t.segments.back().is_slot)
            throw std::invalid_argument("template has two adjacent slots");
        t.segments.push_back({true, ""});
        pos = at + marker.size();
    }
    if (t.segments.empty()) throw std::invalid_argument("template text is empty");
    return t;
}

inline std::string template_to_marked_text(const PromptTemplate& t,
                                           std::string_view marker = "<SLOT>") {
    std::string out;
    for (const auto& seg : t.segments) out += seg.is_slot ? std::string(marker) : seg.literal;
    return out;
}

inline std::string instantiate(const PromptTemplate& t, const std::vector<std::string>& bindings) {
    std::string out;
    size_t slot = 0;
    for (const auto& seg : t.segments) {
        if (seg.is_slot) {
            if (slot >= bindings.size()) throw std::invalid_argument("not enough slot bindings");
            out += bindings[slot++];
        } else {
            out += seg.literal;
        }
    }
    return out;
}

// Greedy left-to-right match of a prompt against the template's literals; the
// final literal is anchored to the suffix. Returns the slot bindings when the
// prompt fits the skeleton, nullopt otherwise.
inline std::optional<std::vector<std::string>> match_template(const PromptTemplate& t,
                                                              std::string_view prompt) {
    std::vector<std::string> bindings;
    size_t pos = 0;
    for (size_t si = 0; si < t.segments.size(); ++si) {
        const auto& seg = t.segments[si];
        if (!seg.is_slot) {
            const bool first = si == 0;
            const bool last = si + 1 == t.segments.size();
            if (first) {
                if (prompt.substr(0, seg.literal.size()) != seg.literal) return std::nullopt;
                pos = seg.literal.size();
            } else if (last) {
                if (prompt.size() < pos + seg.literal.size()) return std::nullopt;
                const size_t at = prompt.size() - seg.literal.size();
                if (prompt.substr(at) != seg.literal) return std::nullopt;
                bindings.push_back(std::string(prompt.substr(pos, at - pos)));
                pos = prompt.size();
            } else {
                const size_t at = prompt.find(seg.literal, pos);
                if (at == std::string_view::npos) return std::nullopt;
                bindings.push_back(std::string(prompt.substr(pos, at - pos)));
                pos = at + seg.literal.size();
            }
        } else if (si + 1 == t.segments.size()) {
            bindings.push_back(std::string(prompt.substr(pos)));
            pos = prompt.size();
        }
        // Inner slots are captured when the following literal is located.
    }
    if (pos != prompt.size()) return std::nullopt;
    if (static_cast<int>(bindings.size()) != t.slot_count()) return std::nullopt;
    return bindings;
}

} // namespace jitr
