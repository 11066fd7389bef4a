#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "jitr/chat.hpp"
#include "jitr/config.hpp"
#include "jitr/cost_model.hpp"
#include "jitr/ledger.hpp"
#include "jitr/minhash.hpp"
#include "jitr/mock_llm.hpp"
#include "jitr/model_zoo.hpp"
#include "jitr/monitor.hpp"
#include "jitr/surrogate.hpp"
#include "jitr/template_mining.hpp"
#include "jitr/tokens.hpp"
#include "jitr/upstream.hpp"
#include "jitr/wrapper.hpp"

namespace jitr {

struct UpstreamFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Traffic statistics for one cluster/task, accumulated purely from ledger
// events so that replay rebuilds them bit for bit.
struct StatAccum {
    int64_t member_count = 0;
    int64_t labeled_count = 0;       // events whose wrapped response parsed
    std::map<std::string, int64_t> task_type_votes;
    std::map<std::string, int64_t> input_type_votes;
    int64_t wrapped_served = 0, llm_served = 0, surrogate_served = 0;
    int64_t parse_failures = 0, upstream_failures = 0;
    int64_t sum_wrapped_in = 0, sum_wrapped_out = 0;         // wrapped events, actual tokens
    int64_t sum_unwrapped_in_w = 0, sum_unwrapped_out_w = 0; // wrapped events, estimates
    int64_t sum_unwrapped_in_p = 0, sum_unwrapped_out_p = 0; // plain llm events
    double sum_llm_latency_ms = 0.0;
    double sum_surrogate_latency_ms = 0.0;
    int64_t first_ts = 0, last_ts = 0;
    std::vector<uint64_t> trace_offsets;

    void add(const TraceEvent& t, uint64_t offset) {
        ++member_count;
        trace_offsets.push_back(offset);
        if (first_ts == 0) first_ts = t.timestamp_ms;
        last_ts = t.timestamp_ms;
        if (t.signals) {
            ++task_type_votes[t.signals->task_type];
            ++input_type_votes[t.signals->input_type];
            if (!t.parse_failure) ++labeled_count;
        }
        if (t.parse_failure) ++parse_failures;
        if (t.upstream_failure) ++upstream_failures;
        switch (t.served_by) {
            case ServedBy::LlmWrapped:
                ++wrapped_served;
                sum_wrapped_in += t.prompt_tokens;
                sum_wrapped_out += t.completion_tokens;
                sum_unwrapped_in_w += t.unwrapped_prompt_tokens;
                sum_unwrapped_out_w += t.unwrapped_completion_tokens;
                sum_llm_latency_ms += t.latency_ms;
                break;
            case ServedBy::Llm:
                ++llm_served;
                sum_unwrapped_in_p += t.unwrapped_prompt_tokens;
                sum_unwrapped_out_p += t.unwrapped_completion_tokens;
                sum_llm_latency_ms += t.latency_ms;
                break;
            case ServedBy::Surrogate:
                ++surrogate_served;
                sum_surrogate_latency_ms += t.latency_ms;
                break;
        }
    }

    std::string majority_task_type() const {
        std::string best = "other";
        int64_t best_n = -1;
        for (const auto& [type, n] : task_type_votes)
            if (n > best_n) { best = type; best_n = n; }
        return best;
    }

    std::string majority_input_type() const {
        std::string best = "other";
        int64_t best_n = -1;
        for (const auto& [type, n] : input_type_votes)
            if (n > best_n) { best = type; best_n = n; }
        return best;
    }

    double requests_per_hour() const {
        if (member_count < 2 || last_ts <= first_ts) return 0.0;
        return static_cast<double>(member_count - 1) * 3'600'000.0 /
               static_cast<double>(last_ts - first_ts);
    }
};

struct TaskRecordState {
    std::string task_id;
    int cluster_id = -1;
    PromptTemplate tmpl;
    std::string label_key;
    LifecycleState state = LifecycleState::Detecting;
    StatAccum stats;
    int64_t collect_target = 0;
    std::string artifact_id;
    SurrogateMetrics artifact_metrics;
    std::vector<CandidateScore> ranking;
    std::string search_winner;
    AgreementWindow shadow_window;
    AgreementWindow probe_window;
    int64_t deployed_at_offset = -1;
    int trained_count = 0;

    TaskRecordState(const MonitorSettings& m, int64_t target)
        : collect_target(target), shadow_window(m.window), probe_window(m.drift_window) {}
};

// Event-sourced view of the whole system. Both the live engine and offline
// replay funnel every ledger event through apply(), which is what makes the
// replay-equality guarantee hold by construction.
class SystemState {
public:
    SystemState(const MonitorSettings& monitor, const CollectConfig& collect)
        : monitor_(monitor), collect_(collect) {}

    void apply(const LedgerEvent& e) {
        ++total_events_;
        if (e.kind == "trace") apply_trace(e);
        else if (e.kind == "task") apply_task(e);
        else if (e.kind == "transition") apply_transition(e);
        else if (e.kind == "search") apply_search(e);
        else if (e.kind == "artifact") apply_artifact(e);
        else if (e.kind == "offer") offers_[e.data.at("offer_id").get<std::string>()] = offer_from_json(e.data);
        else if (e.kind == "offer_update")
            offers_.at(e.data.at("offer_id").get<std::string>()).status =
                offer_status_from_string(e.data.at("status").get<std::string>());
    }

    const std::map<std::string, TaskRecordState>& tasks() const { return tasks_; }
    std::map<std::string, TaskRecordState>& tasks() { return tasks_; }
    const std::map<std::string, Offer>& offers() const { return offers_; }
    std::map<std::string, Offer>& offers() { return offers_; }
    const std::map<std::string, std::string>& routing() const { return routing_; }
    const std::map<int, std::string>& cluster_to_task() const { return cluster_to_task_; }
    const std::map<int, StatAccum>& cluster_accum() const { return cluster_accum_; }
    int64_t total_events() const { return total_events_; }

    // Canonical summary used to compare a live run against its replay.
    nlohmann::json fingerprint() const {
        nlohmann::json tasks = nlohmann::json::array();
        for (const auto& [id, t] : tasks_) {
            tasks.push_back(nlohmann::json{
                {"task_id", id},
                {"cluster_id", t.cluster_id},
                {"state", to_string(t.state)},
                {"template", t.tmpl.to_json()},
                {"label_key", t.label_key},
                {"member_count", t.stats.member_count},
                {"labeled_count", t.stats.labeled_count},
                {"task_type", t.stats.majority_task_type()},
                {"input_type", t.stats.majority_input_type()},
                {"task_type_votes", t.stats.task_type_votes},
                {"wrapped_served", t.stats.wrapped_served},
                {"llm_served", t.stats.llm_served},
                {"surrogate_served", t.stats.surrogate_served},
                {"parse_failures", t.stats.parse_failures},
                {"sum_wrapped_in", t.stats.sum_wrapped_in},
                {"sum_wrapped_out", t.stats.sum_wrapped_out},
                {"collect_target", t.collect_target},
                {"artifact_id", t.artifact_id},
                {"search_winner", t.search_winner},
                {"trained_count", t.trained_count},
                {"shadow_observed", t.shadow_window.observed()},
                {"probe_observed", t.probe_window.observed()},
            });
        }
        nlohmann::json offers = nlohmann::json::array();
        for (const auto& [id, o] : offers_) offers.push_back(to_json(o));
        return nlohmann::json{{"tasks", tasks},
                              {"offers", offers},
                              {"routing", routing_},
                              {"total_events", total_events_}};
    }

    // The ordered lifecycle transitions per task, for exact sequence checks.
    static std::vector<std::pair<std::string, std::string>> transition_sequence(
        const std::vector<LedgerEvent>& events) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& e : events)
            if (e.kind == "transition")
                out.push_back({e.data.at("task_id").get<std::string>(),
                               e.data.at("to").get<std::string>()});
        return out;
    }

private:
    void apply_trace(const LedgerEvent& e) {
        const TraceEvent t = trace_event_from_json(e.data);
        if (!t.task_id.empty()) {
            auto it = tasks_.find(t.task_id);
            if (it == tasks_.end()) return;
            auto& task = it->second;
            task.stats.add(t, e.offset);
            if (t.shadow_label && t.label)
                task.shadow_window.add(*t.shadow_label == *t.label,
                                       t.shadow_latency_ms.value_or(0.0), t.latency_ms);
            if (t.probe && t.probe_llm_label && t.label)
                task.probe_window.add(*t.probe_llm_label == *t.label, t.latency_ms,
                                      t.probe_llm_latency_ms.value_or(0.0));
        } else if (t.cluster_id >= 0) {
            auto [it, inserted] = cluster_accum_.try_emplace(t.cluster_id);
            it->second.add(t, e.offset);
        }
    }

    void apply_task(const LedgerEvent& e) {
        const std::string task_id = e.data.at("task_id").get<std::string>();
        const int cluster_id = e.data.at("cluster_id").get<int>();
        TaskRecordState task(monitor_, collect_.target_examples);
        task.task_id = task_id;
        task.cluster_id = cluster_id;
        task.tmpl = PromptTemplate::from_json(e.data.at("template"));
        task.label_key = e.data.value("label_key", std::string{});
        auto accum = cluster_accum_.find(cluster_id);
        if (accum != cluster_accum_.end()) {
            task.stats = std::move(accum->second);
            cluster_accum_.erase(accum);
        }
        // Pre-declared tasks carry their type; detected ones vote via signals.
        if (e.data.contains("task_type"))
            ++task.stats.task_type_votes[e.data["task_type"].get<std::string>()];
        cluster_to_task_[cluster_id] = task_id;
        tasks_.emplace(task_id, std::move(task));
    }

    void apply_transition(const LedgerEvent& e) {
        const std::string task_id = e.data.at("task_id").get<std::string>();
        auto& task = tasks_.at(task_id);
        const auto from = task.state;
        task.state = lifecycle_from_string(e.data.at("to").get<std::string>());
        switch (task.state) {
            case LifecycleState::Shadow:
                task.shadow_window.clear();
                break;
            case LifecycleState::Deployed:
                routing_[task_id] = e.data.value("artifact_id", task.artifact_id);
                task.probe_window.clear();
                task.deployed_at_offset = static_cast<int64_t>(e.offset);
                break;
            case LifecycleState::Degraded:
            case LifecycleState::Abandoned:
                routing_.erase(task_id);
                break;
            case LifecycleState::Collecting:
                if (from == LifecycleState::Shadow || from == LifecycleState::RolledBack) {
                    task.collect_target = task.stats.labeled_count + collect_.target_examples / 2;
                    task.shadow_window.clear();
                }
                break;
            default:
                break;
        }
    }

    void apply_search(const LedgerEvent& e) {
        auto& task = tasks_.at(e.data.at("task_id").get<std::string>());
        task.ranking.clear();
        for (const auto& s : e.data.at("ranking")) {
            CandidateScore cs;
            cs.model_id = s.at("model_id").get<std::string>();
            cs.proxy_accuracy = s.at("proxy_accuracy").get<double>();
            cs.stage = s.value("stage", std::string{});
            cs.score_time_s = s.value("score_time_s", 0.0);
            task.ranking.push_back(std::move(cs));
        }
        task.search_winner = e.data.at("winner").get<std::string>();
    }

    void apply_artifact(const LedgerEvent& e) {
        auto& task = tasks_.at(e.data.at("task_id").get<std::string>());
        task.artifact_id = e.data.at("artifact_id").get<std::string>();
        task.artifact_metrics.validation_accuracy = e.data.value("validation_accuracy", 0.0);
        task.artifact_metrics.teacher_agreement = e.data.value("teacher_agreement", 0.0);
        task.artifact_metrics.epochs_run = e.data.value("epochs_run", 0);
        task.artifact_metrics.best_epoch = e.data.value("best_epoch", 0);
        ++task.trained_count;
    }

    MonitorSettings monitor_;
    CollectConfig collect_;
    std::map<std::string, TaskRecordState> tasks_;
    std::map<int, StatAccum> cluster_accum_;
    std::map<int, std::string> cluster_to_task_;
    std::map<std::string, Offer> offers_;
    std::map<std::string, std::string> routing_;   // task_id -> artifact_id
    int64_t total_events_ = 0;
};

// The gateway core: routes requests to the upstream LLM or a deployed
// surrogate, mines recurring tasks from the traffic, drives the lifecycle,
// and keeps the ledger as the single source of truth.
class Engine {
public:
    struct HttpReply {
        int status = 200;
        nlohmann::json body;
    };

    explicit Engine(Config cfg, std::unique_ptr<Upstream> upstream = nullptr)
        : cfg_(std::move(cfg)),
          state_(cfg_.monitor, cfg_.collect),
          index_(cfg_.miner.minhash.num_hashes, cfg_.miner.bands),
          zoo_(cfg_.load_zoo()) {
        if (upstream) {
            upstream_ = std::move(upstream);
        } else if (cfg_.upstream.mode == "mock") {
            upstream_ = std::make_unique<MockLlm>(cfg_.upstream.mock);
        } else {
            throw std::runtime_error("no upstream provided for mode '" + cfg_.upstream.mode + "'");
        }
        if (!cfg_.ledger_path.empty()) {
            std::vector<LedgerEvent> existing;
            if (std::filesystem::exists(cfg_.ledger_path))
                existing = Ledger::read_file(cfg_.ledger_path);
            ledger_ = Ledger::open_existing(cfg_.ledger_path, std::move(existing));
            bootstrap();
        }
    }

    const Config& config() const { return cfg_; }
    const SystemState& state() const { return state_; }
    const Ledger& ledger() const { return ledger_; }
    FeatureCache& feature_cache() { return feature_cache_; }
    const std::vector<ModelCard>& zoo() const { return zoo_; }

    // HTTP-shaped entry point. Never throws: protocol errors become error
    // bodies with the right status.
    HttpReply handle_http(const nlohmann::json& body, int64_t now_ms) {
        ChatRequest req;
        try {
            req = parse_chat_request(body);
        } catch (const RequestParseError& e) {
            return {400, error_body(e.what(), "invalid_request_error")};
        }
        if (req.received_at_ms == 0) req.received_at_ms = now_ms;
        try {
            const ChatResponse resp = handle_completion(req);
            return {200, chat_response_to_json(resp, req)};
        } catch (const RequestParseError& e) {
            return {400, error_body(e.what(), "invalid_request_error")};
        } catch (const UpstreamFailureError& e) {
            return {502, error_body(e.what(), "upstream_error")};
        } catch (const std::exception& e) {
            return {500, error_body(e.what(), "internal_error")};
        }
    }

    // Core request path. The trace event is appended before the response is
    // returned to the caller. A missing request_id is assigned in place so
    // the caller can echo it. Engine state stays behind the mutex, but
    // upstream calls run outside it so one slow LLM round trip does not
    // serialize the gateway.
    ChatResponse handle_completion(ChatRequest& req) {
        std::unique_lock lock(mu_);
        if (req.messages.empty()) throw RequestParseError("request needs at least one message");
        if (req.request_id.empty()) req.request_id = "req-" + std::to_string(request_seq_);
        ++request_seq_;
        if (!seen_request_ids_.insert(req.request_id).second)
            throw RequestParseError("duplicate request_id: " + req.request_id);
        if (req.received_at_ms == 0) req.received_at_ms = last_ts_ + 1;
        last_ts_ = std::max(last_ts_, req.received_at_ms);

        const std::string rendered = render_request(req);

        // Deployed surrogate route?
        for (const auto& [task_id, route] : routes_) {
            auto bindings = match_template(route.tmpl, rendered);
            if (!bindings) continue;
            const Route snapshot = route;   // immutable artifact behind shared_ptr
            return serve_surrogate(lock, req, rendered, task_id, snapshot, *bindings);
        }
        return serve_llm(lock, req, rendered);
    }

    // Runs any due background stages (search, training) inline. The simulator
    // calls this after every request; the server calls it from a worker loop.
    void pump() {
        std::lock_guard lock(mu_);
        for (auto& [task_id, task] : state_.tasks()) {
            if (task.state == LifecycleState::Searching) run_search(task);
            if (task.state == LifecycleState::Training) run_training(task);
        }
    }

    std::vector<Offer> offers() const {
        std::lock_guard lock(mu_);
        std::vector<Offer> out;
        for (const auto& [id, o] : state_.offers()) out.push_back(o);
        return out;
    }

    struct OfferDecisionError : std::runtime_error {
        using std::runtime_error::runtime_error;
    };

    void decide_offer(const std::string& offer_id, bool accept) {
        std::lock_guard lock(mu_);
        auto it = state_.offers().find(offer_id);
        if (it == state_.offers().end())
            throw OfferDecisionError("unknown offer: " + offer_id);
        if (it->second.status != OfferStatus::Pending)
            throw OfferDecisionError("offer " + offer_id + " is " + to_string(it->second.status));
        const std::string task_id = it->second.task_id;
        append("offer_update",
               nlohmann::json{{"offer_id", offer_id}, {"status", accept ? "accepted" : "rejected"}});
        auto& task = state_.tasks().at(task_id);
        if (accept) {
            transition(task, TaskEvent::OfferAccepted,
                       nlohmann::json{{"artifact_id", task.artifact_id}});
            rebuild_routes();
        } else {
            transition(task, TaskEvent::OfferRejected);
        }
    }

    struct RegisterResult {
        std::string task_id;
        bool merged_with_existing = false;
    };

    // Pre-declares a task instead of waiting for detection. A registration
    // whose template equals an existing task's merges with it; otherwise the
    // task starts collecting immediately.
    RegisterResult register_task(const PromptTemplate& tmpl, const std::string& task_type,
                                 const std::string& label_key) {
        std::lock_guard lock(mu_);
        for (const auto& [id, task] : state_.tasks())
            if (task.tmpl == tmpl) return {id, true};

        const std::string skeleton = template_to_marked_text(tmpl, "");
        const auto sig = signature(skeleton, cfg_.miner.minhash);
        Cluster& cluster = assign_cluster(skeleton, sig);
        if (!cluster.task_id.empty()) return {cluster.task_id, true};
        cluster.type_votes[task_type] += cfg_.miner.min_cluster_size;

        const std::string task_id = make_task_id();
        cluster.task_id = task_id;
        append("task", nlohmann::json{{"task_id", task_id},
                                      {"cluster_id", cluster.id},
                                      {"template", tmpl.to_json()},
                                      {"label_key", label_key},
                                      {"task_type", task_type},
                                      {"registered", true}});
        auto& task = state_.tasks().at(task_id);
        transition(task, TaskEvent::RecurrenceConfirmed);
        return {task_id, false};
    }

    nlohmann::json fingerprint() const {
        std::lock_guard lock(mu_);
        return state_.fingerprint();
    }

    void flush() {
        std::lock_guard lock(mu_);
        ledger_.flush();
    }

    static SystemState replay(const std::vector<LedgerEvent>& events, const Config& cfg) {
        SystemState s(cfg.monitor, cfg.collect);
        for (const auto& e : events) s.apply(e);
        return s;
    }

    // Measured traffic profile for a task, used by offers and live reports.
    TrafficProfile measured_profile(const TaskRecordState& task) const {
        TrafficProfile p = cfg_.profile;
        const int64_t llm_events = task.stats.wrapped_served + task.stats.llm_served;
        if (llm_events > 0) {
            p.avg_input_tokens =
                (task.stats.sum_unwrapped_in_w + task.stats.sum_unwrapped_in_p) / llm_events;
            p.avg_output_tokens =
                (task.stats.sum_unwrapped_out_w + task.stats.sum_unwrapped_out_p) / llm_events;
        }
        if (task.stats.wrapped_served > 0) {
            p.wrapper_input_overhead_tokens =
                (task.stats.sum_wrapped_in - task.stats.sum_unwrapped_in_w) / task.stats.wrapped_served;
            p.wrapper_output_overhead_tokens =
                std::max<int64_t>(0, (task.stats.sum_wrapped_out - task.stats.sum_unwrapped_out_w) /
                                         task.stats.wrapped_served);
            p.switch_index = task.stats.wrapped_served + task.stats.llm_served;
        }
        return p;
    }

private:
    struct Route {
        PromptTemplate tmpl;
        std::string label_key;
        std::shared_ptr<const SurrogateArtifact> artifact;
        double latency_ms = 1.0;
    };

    // Assignment compares against several member signatures, not just the
    // founder: the max over probes washes out MinHash estimation noise that
    // would otherwise split one task across sibling clusters.
    struct Cluster {
        int id = -1;
        std::vector<PromptSignature> probes;
        int64_t count = 0;
        std::vector<std::string> buffer;
        std::vector<std::string> response_samples;
        std::map<std::string, int64_t> type_votes;
        std::string task_id;

        static constexpr int kMaxProbes = 4;
        static constexpr int kProbeEvery = 8;
    };

    static nlohmann::json error_body(const std::string& message, const std::string& type) {
        return nlohmann::json{{"error", {{"message", message}, {"type", type}}}};
    }

    uint64_t append(const std::string& kind, nlohmann::json data) {
        const uint64_t off = ledger_.append(kind, last_ts_, std::move(data));
        state_.apply(ledger_.events().back());
        return off;
    }

    void transition(TaskRecordState& task, TaskEvent event, nlohmann::json extra = {}) {
        const LifecycleState to = advance(task.state, event);
        nlohmann::json data{{"task_id", task.task_id},
                            {"from", to_string(task.state)},
                            {"to", to_string(to)},
                            {"event", to_string(event)}};
        for (auto it = extra.begin(); it != extra.end(); ++it) data[it.key()] = it.value();
        append("transition", std::move(data));
    }

    ChatResponse serve_surrogate(std::unique_lock<std::mutex>& lock, const ChatRequest& req,
                                 const std::string& rendered, const std::string& task_id,
                                 const Route& route, const std::vector<std::string>& bindings) {
        std::string input;
        for (size_t i = 0; i < bindings.size(); ++i) {
            if (i > 0) input += "\n";
            input += bindings[i];
        }
        const auto [label, confidence] = route.artifact->predict(input);
        (void)confidence;
        const std::string content =
            route.label_key.empty() ? nlohmann::json(label).dump()
                                    : nlohmann::json{{route.label_key, label}}.dump();

        TraceEvent t;
        t.request_id = req.request_id;
        t.task_id = task_id;
        t.cluster_id = state_.tasks().at(task_id).cluster_id;
        t.prompt = cfg_.store_raw_text ? rendered : std::string{};
        t.response = cfg_.store_raw_text ? content : std::string{};
        t.label = label;
        t.served_by = ServedBy::Surrogate;
        t.prompt_tokens = count_tokens(rendered);
        t.completion_tokens = count_tokens(content);
        t.unwrapped_prompt_tokens = t.prompt_tokens;
        t.unwrapped_completion_tokens = t.completion_tokens;
        t.latency_ms = route.latency_ms;
        t.timestamp_ms = req.received_at_ms;

        // Drift probe: every k-th surrogate-served request also goes to the
        // LLM, invisibly to the client and outside the engine lock.
        bool probe_due = false;
        if (cfg_.monitor.probe_fraction > 0.0) {
            const int64_t every =
                std::max<int64_t>(1, std::llround(1.0 / cfg_.monitor.probe_fraction));
            probe_due = state_.tasks().at(task_id).stats.surrogate_served % every == 0;
        }
        if (probe_due) {
            lock.unlock();
            const auto r = upstream_->call(req);
            lock.lock();
            if (r.ok) {
                t.probe = true;
                t.probe_llm_label = parse_label(r.content, route.label_key);
                t.probe_llm_latency_ms = r.latency_ms;
                t.probe_llm_completion_tokens = count_tokens(r.content);
            }
        }

        append("trace", to_json(t));

        auto& task = state_.tasks().at(task_id);
        if (task.state == LifecycleState::Deployed && task.probe_window.full() &&
            task.probe_window.report().agreement < cfg_.monitor.tau_drift) {
            transition(task, TaskEvent::DriftDetected,
                       nlohmann::json{{"probe_agreement", task.probe_window.report().agreement}});
            transition(task, TaskEvent::RollbackDone);
            transition(task, TaskEvent::ResumeCollecting);
            rebuild_routes();
        }

        ChatResponse resp;
        resp.content = content;
        resp.prompt_tokens = t.prompt_tokens;
        resp.completion_tokens = t.completion_tokens;
        resp.upstream_latency_ms = route.latency_ms;
        resp.served_by = ServedBy::Surrogate;
        return resp;
    }

    ChatResponse serve_llm(std::unique_lock<std::mutex>& lock, const ChatRequest& req,
                           const std::string& rendered) {
        const PromptSignature sig = signature(rendered, cfg_.miner.minhash);
        const int cluster_id = assign_cluster(rendered, sig).id;
        {
            Cluster& cluster = clusters_[static_cast<size_t>(cluster_id)];
            TaskRecordState* task =
                cluster.task_id.empty() ? nullptr : &state_.tasks().at(cluster.task_id);
            const bool wrap = cfg_.identify &&
                              (!task || task->state != LifecycleState::Abandoned) &&
                              sample_gate(cluster);

            ChatRequest outbound = wrap ? wrapper_.wrap(req) : req;
            const std::string outbound_text = render_request(outbound);

            lock.unlock();
            const auto r = upstream_->call(outbound);
            lock.lock();

            // Clusters may have merged while the upstream call was in flight.
            Cluster& cluster_now = clusters_[static_cast<size_t>(cluster_root(cluster_id))];
            TaskRecordState* task_now =
                cluster_now.task_id.empty() ? nullptr : &state_.tasks().at(cluster_now.task_id);

            TraceEvent t;
            t.request_id = req.request_id;
            t.cluster_id = cluster_now.id;
            t.task_id = cluster_now.task_id;
            t.prompt = cfg_.store_raw_text ? rendered : std::string{};
            t.wrapped = wrap;
            t.served_by = wrap ? ServedBy::LlmWrapped : ServedBy::Llm;
            t.prompt_tokens = count_tokens(outbound_text);
            t.unwrapped_prompt_tokens = count_tokens(rendered);
            t.latency_ms = r.latency_ms;
            t.timestamp_ms = req.received_at_ms;

            if (!r.ok) {
                t.upstream_failure = true;
                append("trace", to_json(t));
                throw UpstreamFailureError("upstream call failed: " + r.error);
            }

            std::string content = r.content;
            t.completion_tokens = count_tokens(r.content);
            if (wrap) {
                const auto u = unwrap_response(r.content);
                if (u.ok) {
                    content = u.user_response;
                    t.signals = u.signals;
                    cluster_vote(cluster_now, u.signals);
                    if (task_now) t.label = parse_label(u.user_response, task_now->label_key);
                } else {
                    t.parse_failure = true;   // raw text forwarded, excluded from training
                }
            }
            t.unwrapped_completion_tokens = count_tokens(content);
            t.response = cfg_.store_raw_text ? content : std::string{};

            // Shadow scoring: invisible surrogate prediction next to the LLM
            // answer.
            if (task_now && task_now->state == LifecycleState::Shadow && t.label) {
                auto art = artifacts_.find(task_now->artifact_id);
                if (art != artifacts_.end()) {
                    std::string input = rendered;
                    if (auto bindings = match_template(task_now->tmpl, rendered)) {
                        input.clear();
                        for (size_t i = 0; i < bindings->size(); ++i) {
                            if (i > 0) input += "\n";
                            input += (*bindings)[i];
                        }
                    }
                    t.shadow_label = art->second->predict(input).first;
                    t.shadow_latency_ms = surrogate_latency(art->second->base_model_id);
                }
            }

            append("trace", to_json(t));
            if (!cluster_now.task_id.empty()) task_now = &state_.tasks().at(cluster_now.task_id);
            run_lifecycle_checks(cluster_now, task_now);

            ChatResponse resp;
            resp.content = content;
            resp.prompt_tokens = t.prompt_tokens;
            resp.completion_tokens = t.completion_tokens;
            resp.upstream_latency_ms = r.latency_ms;
            resp.served_by = t.served_by;
            return resp;
        }
    }

    bool sample_gate(Cluster& cluster) {
        if (cfg_.collect.sample_rate >= 1.0) return true;
        if (cfg_.collect.sample_rate <= 0.0) return false;
        const double rate = cfg_.collect.sample_rate;
        const auto crossed = [&](int64_t n) { return std::floor(static_cast<double>(n) * rate); };
        return crossed(cluster.count) > crossed(cluster.count - 1);
    }

    int cluster_root(int id) const {
        while (redirect_[static_cast<size_t>(id)] != id) id = redirect_[static_cast<size_t>(id)];
        return id;
    }

    // A prompt that clears the threshold for several clusters is evidence
    // that they are the same task split by sketch noise: the losers merge
    // into the best match and redirect future lookups.
    Cluster& assign_cluster(const std::string& rendered, const PromptSignature& sig) {
        std::vector<int> roots;
        for (int cand : index_.candidates(sig)) roots.push_back(cluster_root(cand));
        std::sort(roots.begin(), roots.end());
        roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

        std::vector<std::pair<double, int>> qualified;
        for (int root : roots) {
            double sim = 0.0;
            for (const auto& probe : clusters_[static_cast<size_t>(root)].probes)
                sim = std::max(sim, estimate_similarity(sig, probe));
            if (sim >= cfg_.miner.similarity_threshold) qualified.push_back({sim, root});
        }
        std::sort(qualified.begin(), qualified.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });

        int best = -1;
        if (!qualified.empty()) {
            best = qualified[0].second;
            for (size_t k = 1; k < qualified.size(); ++k) merge_cluster(qualified[k].second, best);
        } else {
            best = static_cast<int>(clusters_.size());
            Cluster c;
            c.id = best;
            c.probes.push_back(sig);
            index_.insert(best, sig);
            clusters_.push_back(std::move(c));
            redirect_.push_back(best);
        }

        Cluster& cluster = clusters_[static_cast<size_t>(best)];
        ++cluster.count;
        if (static_cast<int>(cluster.probes.size()) < Cluster::kMaxProbes &&
            cluster.count % Cluster::kProbeEvery == 0) {
            cluster.probes.push_back(sig);
            index_.insert(cluster.id, sig);
        }
        if (static_cast<int>(cluster.buffer.size()) < cfg_.miner.template_buffer)
            cluster.buffer.push_back(rendered);
        return cluster;
    }

    void merge_cluster(int loser_id, int winner_id) {
        Cluster& loser = clusters_[static_cast<size_t>(loser_id)];
        Cluster& winner = clusters_[static_cast<size_t>(winner_id)];
        // Two promoted tasks cannot be merged retroactively; leave them be.
        if (!loser.task_id.empty() && !winner.task_id.empty()) return;
        if (!loser.task_id.empty()) winner.task_id = loser.task_id;
        winner.count += loser.count;
        for (auto& p : loser.buffer)
            if (static_cast<int>(winner.buffer.size()) < cfg_.miner.template_buffer)
                winner.buffer.push_back(std::move(p));
        for (auto& r : loser.response_samples)
            if (static_cast<int>(winner.response_samples.size()) < cfg_.miner.template_buffer)
                winner.response_samples.push_back(std::move(r));
        for (const auto& [type, n] : loser.type_votes) winner.type_votes[type] += n;
        for (auto& probe : loser.probes)
            if (static_cast<int>(winner.probes.size()) < Cluster::kMaxProbes)
                winner.probes.push_back(std::move(probe));
        loser = Cluster{};
        loser.id = loser_id;
        redirect_[static_cast<size_t>(loser_id)] = winner_id;
    }

    void cluster_vote(Cluster& cluster, const TaskSignals& signals) {
        ++cluster.type_votes[signals.task_type];
        if (static_cast<int>(cluster.response_samples.size()) < cfg_.miner.template_buffer)
            cluster.response_samples.push_back(signals.user_response);
    }

    void run_lifecycle_checks(Cluster& cluster, TaskRecordState* task) {
        if (!task) {
            maybe_promote(cluster);
            return;
        }
        if (task->state == LifecycleState::Collecting &&
            task->stats.labeled_count >= task->collect_target) {
            transition(*task, TaskEvent::DatasetReady);
        } else if (task->state == LifecycleState::Shadow && task->shadow_window.full()) {
            const auto report = task->shadow_window.report();
            if (report.agreement >= cfg_.monitor.tau) {
                if (dwell_ok(*task)) {
                    transition(*task, TaskEvent::AgreementMet,
                               nlohmann::json{{"agreement", report.agreement}});
                    create_offer(*task, report);
                }
            } else {
                transition(*task, TaskEvent::AgreementLow,
                           nlohmann::json{{"agreement", report.agreement}});
            }
        }
    }

    bool dwell_ok(const TaskRecordState& task) const {
        if (task.deployed_at_offset < 0) return true;
        return state_.total_events() - task.deployed_at_offset >= cfg_.monitor.min_dwell_requests;
    }

    void maybe_promote(Cluster& cluster) {
        if (cluster.count < cfg_.miner.min_cluster_size) return;
        std::string majority = "other";
        int64_t best = -1;
        for (const auto& [type, n] : cluster.type_votes)
            if (n > best) { majority = type; best = n; }
        if (majority == "other") return;
        if (cluster.buffer.size() < 2) return;

        PromptTemplate tmpl = mine_template(cluster.buffer);
        for (const auto& p : cluster.buffer) {
            auto bindings = match_template(tmpl, p);
            if (!bindings || instantiate(tmpl, *bindings) != p) return;   // wait for more data
        }
        const auto key = infer_label_key(cluster.response_samples);

        const std::string task_id = make_task_id();
        cluster.task_id = task_id;
        append("task", nlohmann::json{{"task_id", task_id},
                                      {"cluster_id", cluster.id},
                                      {"template", tmpl.to_json()},
                                      {"label_key", key.value_or(std::string{})}});
        auto& task = state_.tasks().at(task_id);
        transition(task, TaskEvent::RecurrenceConfirmed);
    }

    std::string make_task_id() {
        ++task_seq_;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "task-%04d", task_seq_);
        return buf;
    }

    std::vector<TraceEvent> task_events(const TaskRecordState& task) const {
        std::vector<TraceEvent> out;
        out.reserve(task.stats.trace_offsets.size());
        for (uint64_t off : task.stats.trace_offsets)
            out.push_back(trace_event_from_json(ledger_.events()[off].data));
        return out;
    }

    void run_search(TaskRecordState& task) {
        const auto events = task_events(task);
        const auto split = export_dataset(events, task.tmpl, task.label_key, Split::Search, cfg_.split);
        if (split.examples.size() < 2) return;
        std::vector<CandidateScore> ranking;
        try {
            ranking = rank(zoo_, split.examples, cfg_.search, feature_cache_);
        } catch (const SingleClassError&) {
            return;   // keep collecting; the split will widen
        }
        nlohmann::json rj = nlohmann::json::array();
        for (const auto& s : ranking)
            rj.push_back(nlohmann::json{{"model_id", s.model_id},
                                        {"proxy_accuracy", s.proxy_accuracy},
                                        {"stage", s.stage},
                                        {"score_time_s", s.score_time_s}});
        append("search", nlohmann::json{{"task_id", task.task_id},
                                        {"ranking", rj},
                                        {"winner", ranking.front().model_id}});
        transition(task, TaskEvent::RankingReady);
    }

    void run_training(TaskRecordState& task) {
        const auto events = task_events(task);
        TrainingSets sets;
        try {
            sets = build_training_set(events, task.tmpl, task.label_key,
                                      static_cast<size_t>(cfg_.collect.min_train_examples),
                                      cfg_.split);
        } catch (const NotEnoughDataError& e) {
            std::cerr << "[jitr] training deferred for " << task.task_id << ": " << e.what() << "\n";
            return;
        }
        const ModelCard* card = nullptr;
        for (const auto& c : zoo_)
            if (c.model_id == task.search_winner) card = &c;
        if (!card) return;

        const std::string artifact_id =
            "srg-" + task.task_id + "-" + std::to_string(task.trained_count + 1);
        SurrogateArtifact artifact;
        try {
            artifact = train_surrogate(*card, sets.train, sets.validation, cfg_.train,
                                       feature_cache_, artifact_id, last_ts_);
        } catch (const TrainingDivergedError& e) {
            std::cerr << "[jitr] training diverged for " << task.task_id << ": " << e.what() << "\n";
            return;
        }
        std::string path;
        if (!cfg_.artifacts_dir.empty()) {
            std::filesystem::create_directories(cfg_.artifacts_dir);
            path = cfg_.artifacts_dir + "/" + artifact_id + ".surrogate";
            artifact.save(path);
        }
        artifacts_[artifact_id] = std::make_shared<const SurrogateArtifact>(std::move(artifact));
        append("artifact",
               nlohmann::json{{"task_id", task.task_id},
                              {"artifact_id", artifact_id},
                              {"base_model_id", card->model_id},
                              {"path", path},
                              {"validation_accuracy",
                               artifacts_[artifact_id]->metrics.validation_accuracy},
                              {"teacher_agreement", artifacts_[artifact_id]->metrics.teacher_agreement},
                              {"epochs_run", artifacts_[artifact_id]->metrics.epochs_run},
                              {"best_epoch", artifacts_[artifact_id]->metrics.best_epoch},
                              {"dropped_rows", sets.dropped}});
        transition(task, TaskEvent::ArtifactReady);
    }

    void create_offer(TaskRecordState& task, const AgreementReport& report) {
        const int64_t llm_events = task.stats.wrapped_served + task.stats.llm_served;
        if (llm_events == 0) {
            std::cerr << "[jitr] offer deferred for " << task.task_id << ": no measured traffic\n";
            return;
        }
        const TrafficProfile measured = measured_profile(task);
        Offer offer;
        ++offer_seq_;
        offer.offer_id = "offer-" + std::to_string(offer_seq_);
        offer.task_id = task.task_id;
        offer.current_model = cfg_.llm_model;
        const auto art = artifacts_.find(task.artifact_id);
        offer.surrogate_description =
            cfg_.surrogate_model + (art != artifacts_.end() ? " (" + art->second->base_model_id + ")" : "");
        offer.savings_per_1m =
            savings_at(1'000'000, measured, cfg_.llm_model, cfg_.surrogate_model, cfg_.pricing);
        offer.agreement = report.agreement;
        offer.text = offer_text(offer.current_model, offer.surrogate_description, offer.savings_per_1m);
        offer.created_at_ms = last_ts_;
        append("offer", to_json(offer));

        if (cfg_.monitor.auto_approve) {
            append("offer_update",
                   nlohmann::json{{"offer_id", offer.offer_id}, {"status", "accepted"}});
            transition(task, TaskEvent::OfferAccepted,
                       nlohmann::json{{"artifact_id", task.artifact_id}});
            rebuild_routes();
        }
    }

    double surrogate_latency(const std::string& base_model_id) const {
        for (const auto& c : zoo_)
            if (c.model_id == base_model_id) return c.est_latency_ms;
        return cfg_.surrogate_latency_ms;
    }

    void rebuild_routes() {
        routes_.clear();
        for (const auto& [task_id, artifact_id] : state_.routing()) {
            const auto& task = state_.tasks().at(task_id);
            auto art = artifacts_.find(artifact_id);
            if (art == artifacts_.end()) {
                if (!cfg_.artifacts_dir.empty()) {
                    const std::string path = cfg_.artifacts_dir + "/" + artifact_id + ".surrogate";
                    if (std::filesystem::exists(path)) {
                        artifacts_[artifact_id] =
                            std::make_shared<const SurrogateArtifact>(SurrogateArtifact::load(path));
                        art = artifacts_.find(artifact_id);
                    }
                }
                if (art == artifacts_.end()) {
                    std::cerr << "[jitr] warning: artifact " << artifact_id
                              << " unavailable, task " << task_id << " not routed\n";
                    continue;
                }
            }
            Route route;
            route.tmpl = task.tmpl;
            route.label_key = task.label_key;
            route.artifact = art->second;
            route.latency_ms = surrogate_latency(art->second->base_model_id);
            routes_[task_id] = std::move(route);
        }
    }

    // Rebuild live-only structures (miner clusters, request ids, routing)
    // from the previously persisted events already loaded into the ledger.
    void bootstrap() {
        for (const auto& e : ledger_.events()) {
            state_.apply(e);
            if (e.kind != "trace") continue;
            const TraceEvent t = trace_event_from_json(e.data);
            seen_request_ids_.insert(t.request_id);
            last_ts_ = std::max(last_ts_, t.timestamp_ms);
            if (!t.prompt.empty() && t.served_by != ServedBy::Surrogate) {
                const auto sig = signature(t.prompt, cfg_.miner.minhash);
                auto& cluster = assign_cluster(t.prompt, sig);
                if (t.signals) cluster_vote(cluster, *t.signals);
            }
        }
        // Reconnect clusters to their tasks.
        for (const auto& [cluster_id, task_id] : state_.cluster_to_task())
            if (cluster_id >= 0 && cluster_id < static_cast<int>(clusters_.size()))
                clusters_[static_cast<size_t>(cluster_id)].task_id = task_id;
        request_seq_ = static_cast<int64_t>(ledger_.events().size()) + 1;
        task_seq_ = static_cast<int>(state_.tasks().size());
        offer_seq_ = static_cast<int>(state_.offers().size());
        rebuild_routes();
    }

    Config cfg_;
    std::unique_ptr<Upstream> upstream_;
    Ledger ledger_;
    SystemState state_;
    WrapperTemplate wrapper_;
    SignatureIndex index_;
    std::vector<Cluster> clusters_;
    std::vector<int> redirect_;
    std::vector<ModelCard> zoo_;
    std::map<std::string, Route> routes_;
    std::map<std::string, std::shared_ptr<const SurrogateArtifact>> artifacts_;
    FeatureCache feature_cache_;
    std::unordered_set<std::string> seen_request_ids_;
    int64_t request_seq_ = 1;
    int task_seq_ = 0;
    int offer_seq_ = 0;
    int64_t last_ts_ = 0;
    mutable std::mutex mu_;
};

} // namespace jitr
