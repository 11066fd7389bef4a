#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitr/money.hpp"

namespace jitr {

struct UnknownModelError : std::runtime_error {
    explicit UnknownModelError(const std::string& model)
        : std::runtime_error("unknown model in pricing table: " + model) {}
};

// Per-token prices in picodollars. A price of $X per 1M tokens is exactly
// X * 1e6 picodollars per token, so 6-decimal price strings convert without
// loss.
struct ModelPrice {
    int64_t input_pico_per_token = 0;
    int64_t output_pico_per_token = 0;
};

class PricingTable {
public:
    void set(const std::string& model, std::string_view input_per_1m_usd,
             std::string_view output_per_1m_usd) {
        models_[model] = ModelPrice{per_token(input_per_1m_usd), per_token(output_per_1m_usd)};
    }

    const ModelPrice& get(const std::string& model) const {
        auto it = models_.find(model);
        if (it == models_.end()) throw UnknownModelError(model);
        return it->second;
    }

    bool contains(const std::string& model) const { return models_.count(model) > 0; }

    const std::map<std::string, ModelPrice>& all() const { return models_; }

    // August 2025 list prices per 1M tokens.
    static PricingTable builtin() {
        PricingTable t;
        t.set("gpt-4.1", "2.00", "8.00");
        t.set("gpt-4.1-nano", "0.10", "0.40");
        t.set("llama-405b-turbo", "3.50", "3.50");
        t.set("llama-8b", "0.20", "0.20");
        t.set("bert-80m", "0.01", "0.01");
        return t;
    }

private:
    static int64_t per_token(std::string_view usd_per_1m) {
        Money m = parse_usd(usd_per_1m);
        if (m.pico % 1'000'000LL != 0)
            throw std::invalid_argument("price needs more than 6 decimals per 1M tokens: " +
                                        std::string(usd_per_1m));
        return m.pico / 1'000'000LL;
    }

    std::map<std::string, ModelPrice> models_;
};

// Average traffic shape used for projections. Live reports use measured
// ledger statistics instead; these defaults exist for simulation and offers.
struct TrafficProfile {
    int64_t avg_input_tokens = 400;
    int64_t avg_output_tokens = 10;
    int64_t wrapper_input_overhead_tokens = 150;
    int64_t wrapper_output_overhead_tokens = 20;
    int64_t switch_index = 5000;      // requests served by the LLM (wrapped) before the swap
    Money dev_cost = parse_usd("4.00");

    void validate() const {
        if (avg_input_tokens < 0 || avg_output_tokens < 0 ||
            wrapper_input_overhead_tokens < 0 || wrapper_output_overhead_tokens < 0 ||
            switch_index < 0 || dev_cost.pico < 0)
            throw std::invalid_argument("traffic profile fields must be non-negative");
    }
};

inline Money request_cost(int64_t tokens_in, int64_t tokens_out, const std::string& model,
                          const PricingTable& pricing) {
    if (tokens_in < 0 || tokens_out < 0) throw std::invalid_argument("negative token count");
    const ModelPrice& p = pricing.get(model);
    return Money{tokens_in * p.input_pico_per_token + tokens_out * p.output_pico_per_token};
}

inline Money llm_cumulative(int64_t n, const TrafficProfile& profile, const std::string& llm_model,
                            const PricingTable& pricing) {
    if (n < 0) throw std::invalid_argument("negative request count");
    return request_cost(profile.avg_input_tokens, profile.avg_output_tokens, llm_model, pricing) * n;
}

// Three-part cost: wrapped identification traffic, a one-time development
// cost once the swap point is reached, then surrogate-priced traffic.
inline Money jitr_cumulative(int64_t n, const TrafficProfile& profile, const std::string& llm_model,
                             const std::string& surrogate_model, const PricingTable& pricing) {
    if (n < 0) throw std::invalid_argument("negative request count");
    const int64_t i = profile.switch_index;
    const int64_t wrapped = n < i ? n : i;
    const int64_t after = n > i ? n - i : 0;
    Money total = request_cost(profile.avg_input_tokens + profile.wrapper_input_overhead_tokens,
                               profile.avg_output_tokens + profile.wrapper_output_overhead_tokens,
                               llm_model, pricing) * wrapped;
    if (n >= i) total += profile.dev_cost;
    total += request_cost(profile.avg_input_tokens, profile.avg_output_tokens, surrogate_model,
                          pricing) * after;
    return total;
}

inline Money savings_at(int64_t n, const TrafficProfile& profile, const std::string& llm_model,
                        const std::string& surrogate_model, const PricingTable& pricing) {
    return llm_cumulative(n, profile, llm_model, pricing) -
           jitr_cumulative(n, profile, llm_model, surrogate_model, pricing);
}

// Smallest n with jitr_cumulative(n) strictly below llm_cumulative(n), or
// nullopt when the surrogate is not cheaper per request. Closed-form on
// integers; the curves only cross in the surrogate-priced region because the
// wrapped phase never undercuts the plain LLM.
inline std::optional<int64_t> break_even(const TrafficProfile& profile, const std::string& llm_model,
                                         const std::string& surrogate_model,
                                         const PricingTable& pricing) {
    profile.validate();
    const int64_t b = request_cost(profile.avg_input_tokens, profile.avg_output_tokens,
                                   llm_model, pricing).pico;
    const int64_t w = request_cost(profile.avg_input_tokens + profile.wrapper_input_overhead_tokens,
                                   profile.avg_output_tokens + profile.wrapper_output_overhead_tokens,
                                   llm_model, pricing).pico;
    const int64_t s = request_cost(profile.avg_input_tokens, profile.avg_output_tokens,
                                   surrogate_model, pricing).pico;
    if (s >= b) return std::nullopt;
    const int64_t i = profile.switch_index;
    // n*(b - s) > i*(w - s) + D
    const int64_t numerator = i * (w - s) + profile.dev_cost.pico;
    return numerator / (b - s) + 1;
}

// Throughput analogue of the cost decomposition, in seconds.
struct ThroughputModel {
    double llm_rate_items_per_s = 13.0;
    double surrogate_rate_items_per_s = 254.8;   // 19.6x the LLM rate
    double dev_time_s = 5967.0;
};

inline double llm_time_s(int64_t n, const ThroughputModel& tm) {
    return static_cast<double>(n) / tm.llm_rate_items_per_s;
}

inline double jitr_time_s(int64_t n, const ThroughputModel& tm, int64_t switch_index) {
    const int64_t before = n < switch_index ? n : switch_index;
    const int64_t after = n > switch_index ? n - switch_index : 0;
    double t = static_cast<double>(before) / tm.llm_rate_items_per_s;
    if (n >= switch_index) t += tm.dev_time_s;
    t += static_cast<double>(after) / tm.surrogate_rate_items_per_s;
    return t;
}

inline double speedup(int64_t n, const ThroughputModel& tm, int64_t switch_index) {
    return llm_time_s(n, tm) / jitr_time_s(n, tm, switch_index);
}

inline std::optional<int64_t> time_break_even(const ThroughputModel& tm, int64_t switch_index) {
    if (tm.surrogate_rate_items_per_s <= tm.llm_rate_items_per_s) return std::nullopt;
    const double delta = 1.0 / tm.llm_rate_items_per_s - 1.0 / tm.surrogate_rate_items_per_s;
    int64_t n = switch_index + static_cast<int64_t>(tm.dev_time_s / delta) + 1;
    // Settle float boundary cases by direct evaluation.
    while (n > 1 && jitr_time_s(n - 1, tm, switch_index) < llm_time_s(n - 1, tm)) --n;
    while (!(jitr_time_s(n, tm, switch_index) < llm_time_s(n, tm))) ++n;
    return n;
}

// Sampled cumulative curves plus the break-even point, ready for JSON/CSV.
struct CostReport {
    std::string llm_model;
    std::string surrogate_model;
    TrafficProfile profile;
    std::vector<int64_t> sample_points;
    std::vector<Money> llm_curve;
    std::vector<Money> jitr_curve;
    std::optional<int64_t> break_even_n;
    Money savings_at_1m;
};

inline CostReport build_cost_report(const TrafficProfile& profile, const std::string& llm_model,
                                    const std::string& surrogate_model, const PricingTable& pricing,
                                    std::vector<int64_t> sample_points) {
    CostReport r;
    r.llm_model = llm_model;
    r.surrogate_model = surrogate_model;
    r.profile = profile;
    r.sample_points = std::move(sample_points);
    for (int64_t n : r.sample_points) {
        r.llm_curve.push_back(llm_cumulative(n, profile, llm_model, pricing));
        r.jitr_curve.push_back(jitr_cumulative(n, profile, llm_model, surrogate_model, pricing));
    }
    r.break_even_n = break_even(profile, llm_model, surrogate_model, pricing);
    r.savings_at_1m = savings_at(1'000'000, profile, llm_model, surrogate_model, pricing);
    return r;
}

} // namespace jitr
