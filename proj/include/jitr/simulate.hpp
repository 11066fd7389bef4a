#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jitr/corpus.hpp"
#include "jitr/engine.hpp"

namespace jitr {

// Outcome of replaying a trace through the full pipeline against the mock
// upstream: cumulative cost/time curves for the gateway versus an LLM-only
// baseline, projected break-even points, and end-of-run quality numbers.
// Everything here is a pure function of (trace, config), so the serialized
// report is byte-stable.
struct SimulationReport {
    int64_t requests = 0;
    std::optional<int64_t> switch_at;          // 1-based request index of the first surrogate answer
    std::vector<int64_t> curve_points;
    std::vector<int64_t> llm_cost_pico;        // baseline: every request at LLM prices, unwrapped
    std::vector<int64_t> jitr_cost_pico;       // what the gateway actually spent
    std::vector<double> llm_time_curve;
    std::vector<double> jitr_time_curve;
    std::optional<int64_t> cost_break_even;    // projection from the config profile at the observed switch
    std::optional<int64_t> time_break_even;
    Money actual_llm_cost_at_end;
    Money actual_jitr_cost_at_end;
    double accuracy_vs_truth_overall = 0.0;    // client-visible label vs trace ground truth
    double accuracy_vs_truth_surrogate = 0.0;  // surrogate-served slice only
    double probe_agreement = 0.0;              // drift probes at end of run
    int64_t parse_failures = 0;
    std::vector<CandidateScore> ranking;
    std::string search_winner;
    std::string task_id;
    std::string final_state;

    nlohmann::json to_json() const {
        nlohmann::json points = nlohmann::json::array();
        for (size_t i = 0; i < curve_points.size(); ++i)
            points.push_back(nlohmann::json{{"n", curve_points[i]},
                                            {"llm_cost_pico", llm_cost_pico[i]},
                                            {"jitr_cost_pico", jitr_cost_pico[i]},
                                            {"llm_cost_usd", format_usd(Money{llm_cost_pico[i]})},
                                            {"jitr_cost_usd", format_usd(Money{jitr_cost_pico[i]})},
                                            {"llm_time_s", llm_time_curve[i]},
                                            {"jitr_time_s", jitr_time_curve[i]}});
        nlohmann::json rj = nlohmann::json::array();
        for (const auto& s : ranking)
            rj.push_back(nlohmann::json{{"model_id", s.model_id},
                                        {"proxy_accuracy", s.proxy_accuracy},
                                        {"stage", s.stage}});
        nlohmann::json j{{"requests", requests},
                         {"curve", points},
                         {"actual_llm_cost_usd", format_usd(actual_llm_cost_at_end)},
                         {"actual_jitr_cost_usd", format_usd(actual_jitr_cost_at_end)},
                         {"actual_llm_cost_pico", actual_llm_cost_at_end.pico},
                         {"actual_jitr_cost_pico", actual_jitr_cost_at_end.pico},
                         {"accuracy_vs_truth_overall", accuracy_vs_truth_overall},
                         {"accuracy_vs_truth_surrogate", accuracy_vs_truth_surrogate},
                         {"probe_agreement", probe_agreement},
                         {"parse_failures", parse_failures},
                         {"ranking", rj},
                         {"search_winner", search_winner},
                         {"task_id", task_id},
                         {"final_state", final_state}};
        j["switch_at"] = switch_at ? nlohmann::json(*switch_at) : nlohmann::json(nullptr);
        j["cost_break_even"] = cost_break_even ? nlohmann::json(*cost_break_even) : nlohmann::json(nullptr);
        j["time_break_even"] = time_break_even ? nlohmann::json(*time_break_even) : nlohmann::json(nullptr);
        return j;
    }

    std::string curves_csv() const {
        std::string out = "n,llm_cost_usd,jitr_cost_usd,llm_time_s,jitr_time_s\n";
        for (size_t i = 0; i < curve_points.size(); ++i) {
            out += std::to_string(curve_points[i]) + "," +
                   format_usd(Money{llm_cost_pico[i]}).substr(1) + "," +
                   format_usd(Money{jitr_cost_pico[i]}).substr(1) + "," +
                   std::to_string(llm_time_curve[i]) + "," + std::to_string(jitr_time_curve[i]) + "\n";
        }
        return out;
    }
};

// Replays a trace through the pipeline. The gateway's spend is priced from
// what actually went over the wire (wrapped calls, surrogate answers, drift
// probes); the baseline prices the same traffic as plain LLM calls.
inline SimulationReport simulate(const std::vector<TraceItem>& trace, const Config& cfg) {
    Engine engine(cfg);
    SimulationReport report;
    report.requests = static_cast<int64_t>(trace.size());

    const auto& pricing = cfg.pricing;
    const ModelPrice llm_price = pricing.get(cfg.llm_model);
    const ModelPrice surr_price = pricing.get(cfg.surrogate_model);

    int64_t llm_cum = 0, jitr_cum = 0;
    int64_t truth_total = 0, truth_hits = 0;
    int64_t truth_surr_total = 0, truth_surr_hits = 0;

    const int64_t stride = std::max<int64_t>(1, report.requests / 200);

    for (size_t i = 0; i < trace.size(); ++i) {
        ChatRequest req;
        req.model = cfg.llm_model;
        req.request_id = "sim-" + std::to_string(i + 1);
        req.received_at_ms = trace[i].timestamp_ms;
        req.messages.push_back({Role::User, trace[i].prompt});
        const auto resp = engine.handle_completion(req);
        engine.pump();

        const LedgerEvent* trace_ev = nullptr;
        for (auto it = engine.ledger().events().rbegin(); it != engine.ledger().events().rend(); ++it)
            if (it->kind == "trace") { trace_ev = &*it; break; }
        const TraceEvent t = trace_event_from_json(trace_ev->data);

        // Baseline: this request as a plain LLM call.
        llm_cum += t.unwrapped_prompt_tokens * llm_price.input_pico_per_token +
                   t.unwrapped_completion_tokens * llm_price.output_pico_per_token;

        // Actual spend on this request.
        switch (t.served_by) {
            case ServedBy::Llm:
            case ServedBy::LlmWrapped:
                jitr_cum += t.prompt_tokens * llm_price.input_pico_per_token +
                            t.completion_tokens * llm_price.output_pico_per_token;
                break;
            case ServedBy::Surrogate:
                jitr_cum += t.unwrapped_prompt_tokens * surr_price.input_pico_per_token +
                            t.unwrapped_completion_tokens * surr_price.output_pico_per_token;
                if (!report.switch_at) {
                    report.switch_at = static_cast<int64_t>(i + 1);
                    jitr_cum += cfg.profile.dev_cost.pico;
                }
                if (t.probe)
                    jitr_cum += t.unwrapped_prompt_tokens * llm_price.input_pico_per_token +
                                t.probe_llm_completion_tokens.value_or(t.unwrapped_completion_tokens) *
                                    llm_price.output_pico_per_token;
                break;
        }

        if (trace[i].ground_truth) {
            std::optional<std::string> answer = t.label;
            if (!answer && t.signals) {
                // Pre-promotion events: the label key is not bound yet.
                answer = parse_label(t.signals->user_response, "sentiment");
            }
            if (!answer) {
                const auto parsed = nlohmann::json::parse(resp.content, nullptr, false);
                if (parsed.is_object() && parsed.contains("sentiment") && parsed["sentiment"].is_string())
                    answer = parsed["sentiment"].get<std::string>();
            }
            if (answer) {
                ++truth_total;
                if (*answer == *trace[i].ground_truth) ++truth_hits;
                if (t.served_by == ServedBy::Surrogate) {
                    ++truth_surr_total;
                    if (*answer == *trace[i].ground_truth) ++truth_surr_hits;
                }
            }
        }
        if (t.parse_failure) ++report.parse_failures;

        const int64_t n = static_cast<int64_t>(i + 1);
        if (n % stride == 0 || n == report.requests) {
            report.curve_points.push_back(n);
            report.llm_cost_pico.push_back(llm_cum);
            report.jitr_cost_pico.push_back(jitr_cum);
            report.llm_time_curve.push_back(llm_time_s(n, cfg.throughput));
            report.jitr_time_curve.push_back(
                jitr_time_s(n, cfg.throughput, report.switch_at.value_or(report.requests + 1)));
        }
    }

    report.actual_llm_cost_at_end = Money{llm_cum};
    report.actual_jitr_cost_at_end = Money{jitr_cum};
    report.accuracy_vs_truth_overall =
        truth_total ? static_cast<double>(truth_hits) / static_cast<double>(truth_total) : 0.0;
    report.accuracy_vs_truth_surrogate =
        truth_surr_total ? static_cast<double>(truth_surr_hits) / static_cast<double>(truth_surr_total)
                         : 0.0;

    // Projections: the config profile's token shape at the observed switch
    // point, recomputable from the cost model alone.
    if (report.switch_at) {
        TrafficProfile projected = cfg.profile;
        projected.switch_index = *report.switch_at - 1;
        report.cost_break_even = break_even(projected, cfg.llm_model, cfg.surrogate_model, pricing);
        report.time_break_even = time_break_even(cfg.throughput, *report.switch_at - 1);
    }

    // Report on the busiest task (by surrogate traffic, then by volume).
    const TaskRecordState* primary = nullptr;
    for (const auto& [id, task] : engine.state().tasks()) {
        if (!primary ||
            std::pair(task.stats.surrogate_served, task.stats.member_count) >
                std::pair(primary->stats.surrogate_served, primary->stats.member_count))
            primary = &task;
    }
    if (primary) {
        report.task_id = primary->task_id;
        report.final_state = to_string(primary->state);
        report.ranking = primary->ranking;
        report.search_winner = primary->search_winner;
        report.probe_agreement = primary->probe_window.report().agreement;
    }
    return report;
}

inline void write_simulation_report(const SimulationReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/report.json", std::ios::binary);
        out << report.to_json().dump(2) << "\n";
    }
    {
        std::ofstream out(dir + "/curves.csv", std::ios::binary);
        out << report.curves_csv();
    }
}

// One row per model-development strategy: what it cost in wall time and what
// it bought in accuracy, measured on a shared held-out test set against both
// the recorded LLM labels and the generator's ground truth.
struct DevStrategyResult {
    std::string name;
    std::string model_id;
    int64_t train_examples = 0;
    double wall_time_s = 0.0;
    double llm_label_accuracy = 0.0;
    double ground_truth_accuracy = 0.0;
};

struct DevComparison {
    std::vector<DevStrategyResult> rows;

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows)
            out.push_back(nlohmann::json{{"strategy", r.name},
                                         {"model_id", r.model_id},
                                         {"train_examples", r.train_examples},
                                         {"wall_time_s", r.wall_time_s},
                                         {"llm_label_accuracy", r.llm_label_accuracy},
                                         {"ground_truth_accuracy", r.ground_truth_accuracy}});
        return out;
    }

    const DevStrategyResult& row(const std::string& name) const {
        for (const auto& r : rows)
            if (r.name == name) return r;
        throw std::out_of_range("no strategy row: " + name);
    }
};

struct DevCompareConfig {
    int64_t train_examples = 5000;
    int64_t search_examples = 500;
    int64_t test_examples = 2000;
    uint64_t seed = 20250801;
};

// Accuracy as a function of training-set size, for judging how much labeled
// traffic a task needs before its surrogate stabilizes.
struct LearningCurvePoint {
    int64_t examples = 0;
    double validation_accuracy = 0.0;   // against the upstream's labels
    double ground_truth_accuracy = 0.0;
    int epochs_run = 0;
};

inline std::vector<LearningCurvePoint> learning_curve(const ModelCard& card, const Config& cfg,
                                                      const std::vector<int64_t>& sizes,
                                                      uint64_t seed) {
    ReviewCorpusConfig rc;
    rc.seed = seed;
    ReviewGenerator gen(rc);
    auto teacher_labeled = [&](int64_t n, std::vector<std::string>* truth) {
        std::vector<LabeledExample> out;
        for (int64_t i = 0; i < n; ++i) {
            const auto r = gen.next();
            out.push_back({r.text, MockLlm::teacher_sentiment(r.text)});
            if (truth) truth->push_back(r.label);
        }
        return out;
    };
    const auto val = teacher_labeled(500, nullptr);
    std::vector<std::string> truth;
    const auto test = teacher_labeled(1000, &truth);

    FeatureCache cache;
    std::vector<LearningCurvePoint> out;
    for (int64_t n : sizes) {
        const auto train = teacher_labeled(n, nullptr);
        const auto artifact = train_surrogate(card, train, val, cfg.train, cache,
                                              "curve-" + std::to_string(n), 0);
        LearningCurvePoint p;
        p.examples = n;
        p.validation_accuracy = artifact.metrics.validation_accuracy;
        p.epochs_run = artifact.metrics.epochs_run;
        int64_t hits = 0;
        for (size_t i = 0; i < test.size(); ++i)
            if (artifact.predict(test[i].input).first == truth[i]) ++hits;
        p.ground_truth_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
        out.push_back(p);
    }
    return out;
}

// Four ways to produce a surrogate, all trained on upstream-labeled data:
//   baseline  – fine-tune the generic base card on the full training pool
//   s-naive   – fine-tune every zoo card on the full pool, keep the best
//   s-500     – search on the search split, fine-tune the winner on that split
//   s-5000    – search on the search split, fine-tune the winner on the pool
inline DevComparison compare_dev_strategies(const std::vector<ModelCard>& zoo, const Config& cfg,
                                            const DevCompareConfig& dc) {
    ReviewCorpusConfig rc;
    rc.seed = dc.seed;
    ReviewGenerator gen(rc);

    auto teacher_labeled = [&](int64_t n, std::vector<std::string>* truth) {
        std::vector<LabeledExample> out;
        for (int64_t i = 0; i < n; ++i) {
            const auto r = gen.next();
            out.push_back({r.text, MockLlm::teacher_sentiment(r.text)});
            if (truth) truth->push_back(r.label);
        }
        return out;
    };

    const auto pool = teacher_labeled(dc.train_examples, nullptr);
    const auto search_split = teacher_labeled(dc.search_examples, nullptr);
    std::vector<std::string> test_truth;
    const auto test = teacher_labeled(dc.test_examples, &test_truth);

    auto split_pool = [&](std::span<const LabeledExample> from) {
        const size_t val = std::max<size_t>(1, from.size() / 10);
        return std::pair{std::vector<LabeledExample>(from.begin(), from.end() - static_cast<long>(val)),
                         std::vector<LabeledExample>(from.end() - static_cast<long>(val), from.end())};
    };

    auto evaluate = [&](const SurrogateArtifact& artifact) {
        int64_t llm_hits = 0, truth_hits = 0;
        for (size_t i = 0; i < test.size(); ++i) {
            const auto [label, conf] = artifact.predict(test[i].input);
            if (label == test[i].label) ++llm_hits;
            if (label == test_truth[i]) ++truth_hits;
        }
        return std::pair{static_cast<double>(llm_hits) / static_cast<double>(test.size()),
                         static_cast<double>(truth_hits) / static_cast<double>(test.size())};
    };

    auto card_by_id = [&](const std::string& id) -> const ModelCard& {
        for (const auto& c : zoo)
            if (c.model_id == id) return c;
        throw std::runtime_error("zoo misses card " + id);
    };

    DevComparison out;

    {   // baseline: generic base card on the full pool
        FeatureCache cache;
        const auto t0 = std::chrono::steady_clock::now();
        const auto [tr, val] = split_pool(pool);
        const auto artifact = train_surrogate(card_by_id("bow-base"), tr, val, cfg.train, cache,
                                              "dev-baseline", 0);
        DevStrategyResult r;
        r.name = "baseline";
        r.model_id = "bow-base";
        r.train_examples = static_cast<int64_t>(pool.size());
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::tie(r.llm_label_accuracy, r.ground_truth_accuracy) = evaluate(artifact);
        out.rows.push_back(r);
    }

    {   // s-naive: fully fine-tune every card, keep the best validation score
        FeatureCache cache;
        const auto t0 = std::chrono::steady_clock::now();
        const auto [tr, val] = split_pool(pool);
        std::optional<SurrogateArtifact> best;
        for (const auto& card : zoo) {
            const auto artifact =
                train_surrogate(card, tr, val, cfg.train, cache, "dev-naive-" + card.model_id, 0);
            if (!best || artifact.metrics.validation_accuracy > best->metrics.validation_accuracy)
                best = artifact;
        }
        DevStrategyResult r;
        r.name = "s-naive";
        r.model_id = best->base_model_id;
        r.train_examples = static_cast<int64_t>(pool.size());
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::tie(r.llm_label_accuracy, r.ground_truth_accuracy) = evaluate(*best);
        out.rows.push_back(r);
    }

    const auto run_search_strategy = [&](const std::string& name,
                                         std::span<const LabeledExample> finetune_pool) {
        FeatureCache cache;
        const auto t0 = std::chrono::steady_clock::now();
        const auto ranking = rank(zoo, search_split, cfg.search, cache);
        const auto [tr, val] = split_pool(finetune_pool);
        const auto artifact = train_surrogate(card_by_id(ranking.front().model_id), tr, val,
                                              cfg.train, cache, "dev-" + name, 0);
        DevStrategyResult r;
        r.name = name;
        r.model_id = ranking.front().model_id;
        r.train_examples = static_cast<int64_t>(finetune_pool.size());
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::tie(r.llm_label_accuracy, r.ground_truth_accuracy) = evaluate(artifact);
        out.rows.push_back(r);
    };

    run_search_strategy("s-500", search_split);
    run_search_strategy("s-5000", pool);
    return out;
}

} // namespace jitr
