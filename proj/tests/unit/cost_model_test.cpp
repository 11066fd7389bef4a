#include <catch2/catch.hpp>

#include <optional>

#include "jitr/cost_model.hpp"
#include "jitr/hashing.hpp"

using namespace jitr;

namespace {

// Oracle: price the first n requests one by one, no closed forms.
Money jitr_brute(int64_t n, const TrafficProfile& p, const std::string& llm,
                 const std::string& surr, const PricingTable& pricing) {
    Money total;
    for (int64_t k = 1; k <= n; ++k) {
        if (k <= p.switch_index)
            total += request_cost(p.avg_input_tokens + p.wrapper_input_overhead_tokens,
                                  p.avg_output_tokens + p.wrapper_output_overhead_tokens, llm, pricing);
        else
            total += request_cost(p.avg_input_tokens, p.avg_output_tokens, surr, pricing);
    }
    if (n >= p.switch_index) total += p.dev_cost;
    return total;
}

std::optional<int64_t> break_even_brute(const TrafficProfile& p, const std::string& llm,
                                        const std::string& surr, const PricingTable& pricing,
                                        int64_t limit) {
    Money jitr_total, llm_total;
    const Money wrapped = request_cost(p.avg_input_tokens + p.wrapper_input_overhead_tokens,
                                       p.avg_output_tokens + p.wrapper_output_overhead_tokens, llm,
                                       pricing);
    const Money base = request_cost(p.avg_input_tokens, p.avg_output_tokens, llm, pricing);
    const Money surr_cost = request_cost(p.avg_input_tokens, p.avg_output_tokens, surr, pricing);
    for (int64_t n = 1; n <= limit; ++n) {
        jitr_total += n <= p.switch_index ? wrapped : surr_cost;
        llm_total += base;
        Money with_dev = jitr_total;
        if (n >= p.switch_index) with_dev += p.dev_cost;
        if (with_dev < llm_total) return n;
    }
    return std::nullopt;
}

TrafficProfile default_profile() { return TrafficProfile{}; }

} // namespace

TEST_CASE("request cost matches hand arithmetic on the builtin table") {
    const auto pricing = PricingTable::builtin();
    CHECK(request_cost(0, 0, "gpt-4.1", pricing) == Money::zero());
    CHECK(request_cost(400, 10, "gpt-4.1", pricing) == parse_usd("0.00088"));
    CHECK(request_cost(400, 10, "llama-405b-turbo", pricing) == parse_usd("0.001435"));
    CHECK(request_cost(400, 10, "gpt-4.1-nano", pricing) == parse_usd("0.000044"));
    CHECK(request_cost(400, 10, "bert-80m", pricing) == parse_usd("0.0000041"));
    CHECK_THROWS_WITH(request_cost(1, 1, "gpt-5", pricing),
                      Catch::Contains("gpt-5"));
}

TEST_CASE("jitr cumulative cost boundaries") {
    const auto pricing = PricingTable::builtin();
    const auto p = default_profile();
    CHECK(jitr_cumulative(0, p, "gpt-4.1-nano", "bert-80m", pricing) == Money::zero());

    // At exactly n = i: all requests wrapped, dev cost charged, no surrogate term.
    const Money at_switch = jitr_cumulative(p.switch_index, p, "gpt-4.1-nano", "bert-80m", pricing);
    const Money wrapped = request_cost(550, 30, "gpt-4.1-nano", pricing);
    CHECK(at_switch == wrapped * p.switch_index + p.dev_cost);

    // Frozen totals for the calibrated profile.
    CHECK(jitr_cumulative(1'000'000, p, "gpt-4.1-nano", "bert-80m", pricing) == parse_usd("8.4145"));
    CHECK(llm_cumulative(1'000'000, p, "gpt-4.1-nano", pricing) == parse_usd("44"));
    CHECK(savings_at(1'000'000, p, "gpt-4.1-nano", "bert-80m", pricing) == parse_usd("35.5855"));
}

TEST_CASE("break-even points for the calibrated profile") {
    const auto pricing = PricingTable::builtin();
    const auto p = default_profile();

    auto nano = break_even(p, "gpt-4.1-nano", "bert-80m", pricing);
    REQUIRE(nano.has_value());
    CHECK(*nano == 108'133);
    CHECK(*nano == *break_even_brute(p, "gpt-4.1-nano", "bert-80m", pricing, 200'000));

    auto llama = break_even(p, "llama-405b-turbo", "bert-80m", pricing);
    REQUIRE(llama.has_value());
    CHECK(*llama == 9'875);
    CHECK(*llama < 10'000);
    CHECK(*llama == *break_even_brute(p, "llama-405b-turbo", "bert-80m", pricing, 20'000));

    // The flat-rate decomposition puts the GPT-4.1 crossing at 12,193; verified
    // against the brute-force scan.
    auto gpt = break_even(p, "gpt-4.1", "bert-80m", pricing);
    REQUIRE(gpt.has_value());
    CHECK(*gpt == 12'193);
    CHECK(*gpt == *break_even_brute(p, "gpt-4.1", "bert-80m", pricing, 20'000));
}

TEST_CASE("no break-even when the surrogate is not cheaper") {
    const auto pricing = PricingTable::builtin();
    auto p = default_profile();
    CHECK(!break_even(p, "gpt-4.1-nano", "gpt-4.1-nano", pricing).has_value());
    CHECK(!break_even_brute(p, "gpt-4.1-nano", "gpt-4.1-nano", pricing, 50'000).has_value());
}

TEST_CASE("savings ratios for the large models") {
    const auto pricing = PricingTable::builtin();
    const auto p = default_profile();

    const double llama_llm = llm_cumulative(1'000'000, p, "llama-405b-turbo", pricing).usd();
    const double llama_jitr =
        jitr_cumulative(1'000'000, p, "llama-405b-turbo", "bert-80m", pricing).usd();
    const double llama_savings = savings_at(1'000'000, p, "llama-405b-turbo", "bert-80m", pricing).usd();
    CHECK(llama_savings >= 1278.0);
    CHECK(llama_savings <= 1562.0);
    CHECK(llama_llm / llama_jitr >= 70.0);
    CHECK(llama_llm / llama_jitr <= 95.0);

    const double gpt_llm = llm_cumulative(1'000'000, p, "gpt-4.1", pricing).usd();
    const double gpt_jitr = jitr_cumulative(1'000'000, p, "gpt-4.1", "bert-80m", pricing).usd();
    CHECK(gpt_llm / gpt_jitr >= 50.0);
    CHECK(gpt_llm / gpt_jitr <= 70.0);
}

TEST_CASE("cumulative curves are nondecreasing and piecewise linear with one kink") {
    const auto pricing = PricingTable::builtin();
    auto p = default_profile();
    p.switch_index = 100;

    Money prev = Money::zero();
    std::optional<int64_t> pre_step, post_step;
    for (int64_t n = 1; n <= 300; ++n) {
        const Money cur = jitr_cumulative(n, p, "gpt-4.1-nano", "bert-80m", pricing);
        const Money llm = llm_cumulative(n, p, "gpt-4.1-nano", pricing);
        CHECK(cur >= prev);
        CHECK(llm >= llm_cumulative(n - 1, p, "gpt-4.1-nano", pricing));
        const int64_t inc = (cur - prev).pico;
        if (n < p.switch_index) {
            if (!pre_step) pre_step = inc;
            CHECK(inc == *pre_step);
        } else if (n > p.switch_index) {
            if (!post_step) post_step = inc;
            CHECK(inc == *post_step);
        }
        prev = cur;
    }
    REQUIRE(pre_step);
    REQUIRE(post_step);
    CHECK(*pre_step != *post_step);
}

TEST_CASE("randomized profiles agree with brute-force summation") {
    const int kProfiles = 1000;
    Rng rng(0xC0575ULL);
    int break_evens_checked = 0;
    for (int t = 0; t < kProfiles; ++t) {
        const int64_t llm_in = 1 + static_cast<int64_t>(rng.below(500));
        const int64_t llm_out = 1 + static_cast<int64_t>(rng.below(500));
        const int64_t surr_in = static_cast<int64_t>(rng.below(llm_in));
        const int64_t surr_out = static_cast<int64_t>(rng.below(llm_out));
        PricingTable table;
        table.set("big", std::to_string(llm_in) + "." + std::to_string(rng.below(100)),
                  std::to_string(llm_out));
        table.set("small", std::to_string(surr_in), std::to_string(surr_out));

        TrafficProfile p;
        p.avg_input_tokens = static_cast<int64_t>(rng.below(800));
        p.avg_output_tokens = static_cast<int64_t>(rng.below(200));
        p.wrapper_input_overhead_tokens = static_cast<int64_t>(rng.below(300));
        p.wrapper_output_overhead_tokens = static_cast<int64_t>(rng.below(60));
        p.switch_index = static_cast<int64_t>(rng.below(2000));
        p.dev_cost = Money{static_cast<int64_t>(rng.below(10)) * Money::kPicoPerUsd};

        for (int64_t n : {int64_t{0}, int64_t{1}, p.switch_index, p.switch_index + 1,
                          p.switch_index + 997, int64_t{5000}}) {
            CHECK(jitr_cumulative(n, p, "big", "small", table) == jitr_brute(n, p, "big", "small", table));
            CHECK(savings_at(n, p, "big", "small", table) ==
                  llm_cumulative(n, p, "big", table) - jitr_cumulative(n, p, "big", "small", table));
        }

        const auto closed = break_even(p, "big", "small", table);
        const auto brute = break_even_brute(p, "big", "small", table, 30'000);
        if (closed && *closed <= 30'000) {
            REQUIRE(brute.has_value());
            CHECK(*closed == *brute);
            ++break_evens_checked;
        } else if (!closed) {
            CHECK(!brute.has_value());
        }
    }
    // Make sure the sweep actually exercised the interesting branch.
    CHECK(break_evens_checked > 200);
}

TEST_CASE("savings grow strictly past break-even when the surrogate is cheaper") {
    const auto pricing = PricingTable::builtin();
    const auto p = default_profile();
    const auto n_star = break_even(p, "gpt-4.1-nano", "bert-80m", pricing);
    REQUIRE(n_star);
    Money prev = savings_at(*n_star, p, "gpt-4.1-nano", "bert-80m", pricing);
    for (int64_t n = *n_star + 1; n < *n_star + 200; ++n) {
        const Money cur = savings_at(n, p, "gpt-4.1-nano", "bert-80m", pricing);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("the default traffic profile back-solves from the published targets") {
    // Oracle for the calibration: a profile is admissible when it lands every
    // published outcome at once (nano break-even ~1e5, 405B saving ~$1420 at
    // ~82x, GPT-4.1 at ~60x). The shipped default must be admissible, and the
    // targets must genuinely pin the profile down (most of the grid fails).
    const auto pricing = PricingTable::builtin();

    const auto admissible = [&](const TrafficProfile& p) {
        const auto be = break_even(p, "gpt-4.1-nano", "bert-80m", pricing);
        if (!be || *be < 80'000 || *be > 130'000) return false;
        const double savings405 =
            savings_at(1'000'000, p, "llama-405b-turbo", "bert-80m", pricing).usd();
        if (savings405 < 1278.0 || savings405 > 1562.0) return false;
        const double ratio405 = llm_cumulative(1'000'000, p, "llama-405b-turbo", pricing).usd() /
                                jitr_cumulative(1'000'000, p, "llama-405b-turbo", "bert-80m", pricing).usd();
        if (ratio405 < 70.0 || ratio405 > 95.0) return false;
        const double ratio_gpt = llm_cumulative(1'000'000, p, "gpt-4.1", pricing).usd() /
                                 jitr_cumulative(1'000'000, p, "gpt-4.1", "bert-80m", pricing).usd();
        return ratio_gpt >= 50.0 && ratio_gpt <= 70.0;
    };

    TrafficProfile defaults;
    CHECK(admissible(defaults));

    int grid = 0, feasible = 0;
    for (int64_t in = 100; in <= 800; in += 50)
        for (int64_t out = 5; out <= 60; out += 5)
            for (int64_t win = 50; win <= 300; win += 50)
                for (int64_t wout = 10; wout <= 50; wout += 20) {
                    TrafficProfile p;
                    p.avg_input_tokens = in;
                    p.avg_output_tokens = out;
                    p.wrapper_input_overhead_tokens = win;
                    p.wrapper_output_overhead_tokens = wout;
                    ++grid;
                    if (admissible(p)) ++feasible;
                }
    CHECK(feasible > 0);
    CHECK(feasible < grid / 5);
}

TEST_CASE("throughput model break-even and speedup growth") {
    ThroughputModel tm;
    CHECK(tm.surrogate_rate_items_per_s == Approx(19.6 * 13.0));

    const auto be = time_break_even(tm, 5000);
    REQUIRE(be.has_value());
    CHECK(*be == 86'742);
    CHECK(*be < 100'000);
    CHECK(jitr_time_s(*be, tm, 5000) < llm_time_s(*be, tm));
    CHECK(jitr_time_s(*be - 1, tm, 5000) >= llm_time_s(*be - 1, tm));

    CHECK(speedup(1'000'000, tm, 5000) == Approx(7.5).margin(0.01));
    CHECK(speedup(2'000'000, tm, 5000) > 10.0);
    CHECK(speedup(2'000'000, tm, 5000) > speedup(1'000'000, tm, 5000));

    ThroughputModel slow = tm;
    slow.surrogate_rate_items_per_s = tm.llm_rate_items_per_s;
    CHECK(!time_break_even(slow, 5000).has_value());
}

TEST_CASE("cost report samples are recomputable") {
    const auto pricing = PricingTable::builtin();
    const auto p = default_profile();
    const auto report = build_cost_report(p, "gpt-4.1-nano", "bert-80m", pricing,
                                          {0, 1000, 5000, 100'000, 1'000'000});
    REQUIRE(report.sample_points.size() == 5);
    for (size_t k = 0; k < report.sample_points.size(); ++k) {
        const int64_t n = report.sample_points[k];
        CHECK(report.llm_curve[k] == llm_cumulative(n, p, "gpt-4.1-nano", pricing));
        CHECK(report.jitr_curve[k] == jitr_cumulative(n, p, "gpt-4.1-nano", "bert-80m", pricing));
    }
    CHECK(report.break_even_n == break_even(p, "gpt-4.1-nano", "bert-80m", pricing));
    CHECK(report.savings_at_1m == parse_usd("35.5855"));
}
