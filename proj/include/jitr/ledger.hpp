#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jitr/chat.hpp"
#include "jitr/hashing.hpp"
#include "jitr/template_mining.hpp"
#include "jitr/wrapper.hpp"

namespace jitr {

// One intercepted request/response pair. `prompt` is the rendered (unwrapped)
// user request; token counts cover what the upstream actually saw, with
// unwrapped estimates logged alongside so the cost model can price both views.
struct TraceEvent {
    std::string request_id;
    int cluster_id = -1;
    std::string task_id;
    std::string prompt;
    std::string response;
    std::optional<std::string> label;
    std::optional<TaskSignals> signals;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
    int64_t unwrapped_prompt_tokens = 0;
    int64_t unwrapped_completion_tokens = 0;
    bool wrapped = false;
    ServedBy served_by = ServedBy::Llm;
    double latency_ms = 0.0;
    int64_t timestamp_ms = 0;
    bool parse_failure = false;
    bool upstream_failure = false;
    bool probe = false;
    std::optional<std::string> probe_llm_label;
    std::optional<double> probe_llm_latency_ms;
    std::optional<int64_t> probe_llm_completion_tokens;
    std::optional<std::string> shadow_label;
    std::optional<double> shadow_latency_ms;
};

inline nlohmann::json to_json(const TraceEvent& e) {
    nlohmann::json j{{"request_id", e.request_id},
                     {"cluster_id", e.cluster_id},
                     {"prompt", e.prompt},
                     {"response", e.response},
                     {"prompt_tokens", e.prompt_tokens},
                     {"completion_tokens", e.completion_tokens},
                     {"unwrapped_prompt_tokens", e.unwrapped_prompt_tokens},
                     {"unwrapped_completion_tokens", e.unwrapped_completion_tokens},
                     {"wrapped", e.wrapped},
                     {"served_by", to_string(e.served_by)},
                     {"latency_ms", e.latency_ms},
                     {"timestamp_ms", e.timestamp_ms}};
    if (!e.task_id.empty()) j["task_id"] = e.task_id;
    if (e.label) j["label"] = *e.label;
    if (e.signals)
        j["signals"] = {{"input_type", e.signals->input_type},
                        {"task_type", e.signals->task_type},
                        {"user_response", e.signals->user_response}};
    if (e.parse_failure) j["parse_failure"] = true;
    if (e.upstream_failure) j["upstream_failure"] = true;
    if (e.probe) j["probe"] = true;
    if (e.probe_llm_label) j["probe_llm_label"] = *e.probe_llm_label;
    if (e.probe_llm_latency_ms) j["probe_llm_latency_ms"] = *e.probe_llm_latency_ms;
    if (e.probe_llm_completion_tokens) j["probe_llm_completion_tokens"] = *e.probe_llm_completion_tokens;
    if (e.shadow_label) j["shadow_label"] = *e.shadow_label;
    if (e.shadow_latency_ms) j["shadow_latency_ms"] = *e.shadow_latency_ms;
    return j;
}

inline TraceEvent trace_event_from_json(const nlohmann::json& j) {
    TraceEvent e;
    e.request_id = j.at("request_id").get<std::string>();
    e.cluster_id = j.value("cluster_id", -1);
    e.task_id = j.value("task_id", std::string{});
    e.prompt = j.value("prompt", std::string{});
    e.response = j.value("response", std::string{});
    if (j.contains("label")) e.label = j["label"].get<std::string>();
    if (j.contains("signals")) {
        TaskSignals s;
        s.input_type = j["signals"].value("input_type", std::string{"other"});
        s.task_type = j["signals"].value("task_type", std::string{"other"});
        s.user_response = j["signals"].value("user_response", std::string{});
        e.signals = s;
    }
    e.prompt_tokens = j.value("prompt_tokens", int64_t{0});
    e.completion_tokens = j.value("completion_tokens", int64_t{0});
    e.unwrapped_prompt_tokens = j.value("unwrapped_prompt_tokens", int64_t{0});
    e.unwrapped_completion_tokens = j.value("unwrapped_completion_tokens", int64_t{0});
    e.wrapped = j.value("wrapped", false);
    e.served_by = served_by_from_string(j.value("served_by", std::string{"llm"}));
    e.latency_ms = j.value("latency_ms", 0.0);
    e.timestamp_ms = j.value("timestamp_ms", int64_t{0});
    e.parse_failure = j.value("parse_failure", false);
    e.upstream_failure = j.value("upstream_failure", false);
    e.probe = j.value("probe", false);
    if (j.contains("probe_llm_label")) e.probe_llm_label = j["probe_llm_label"].get<std::string>();
    if (j.contains("probe_llm_latency_ms")) e.probe_llm_latency_ms = j["probe_llm_latency_ms"].get<double>();
    if (j.contains("probe_llm_completion_tokens"))
        e.probe_llm_completion_tokens = j["probe_llm_completion_tokens"].get<int64_t>();
    if (j.contains("shadow_label")) e.shadow_label = j["shadow_label"].get<std::string>();
    if (j.contains("shadow_latency_ms")) e.shadow_latency_ms = j["shadow_latency_ms"].get<double>();
    return e;
}

// Envelope for everything the system persists: traffic, task definitions,
// lifecycle transitions, search results, offers, and artifacts.
struct LedgerEvent {
    uint64_t offset = 0;
    std::string kind;   // trace | task | transition | search | offer | offer_update | artifact
    int64_t timestamp_ms = 0;
    nlohmann::json data;
};

struct CorruptLedgerError : std::runtime_error {
    uint64_t valid_events;
    explicit CorruptLedgerError(uint64_t n)
        : std::runtime_error("ledger corrupt after " + std::to_string(n) + " events"),
          valid_events(n) {}
};

class LedgerSink {
public:
    virtual ~LedgerSink() = default;
    virtual bool write_line(const std::string& line) = 0;
    virtual void flush() {}
};

class FileLedgerSink : public LedgerSink {
public:
    explicit FileLedgerSink(const std::string& path) : out_(path, std::ios::app | std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open ledger file: " + path);
    }
    bool write_line(const std::string& line) override {
        out_ << line;
        out_.flush();
        return static_cast<bool>(out_);
    }
    void flush() override { out_.flush(); }

private:
    std::ofstream out_;
};

// Append-only store with strictly increasing offsets. Lines are
// length-prefixed JSON ("<len> <json>\n") so truncation and corruption are
// detectable on replay. A failed write is buffered and retried on the next
// append instead of failing the request path.
class Ledger {
public:
    Ledger() = default;

    explicit Ledger(std::unique_ptr<LedgerSink> sink) : sink_(std::move(sink)) {}

    static Ledger open(const std::string& path) {
        Ledger l(std::make_unique<FileLedgerSink>(path));
        return l;
    }

    // Continues an existing ledger file: prior events stay readable through
    // events() and offsets keep counting from where the file left off.
    static Ledger open_existing(const std::string& path, std::vector<LedgerEvent> existing) {
        Ledger l(std::make_unique<FileLedgerSink>(path));
        l.next_offset_ = existing.size();
        l.events_ = std::move(existing);
        return l;
    }

    uint64_t append(const std::string& kind, int64_t timestamp_ms, nlohmann::json data) {
        LedgerEvent e;
        e.offset = next_offset_++;
        e.kind = kind;
        e.timestamp_ms = timestamp_ms;
        e.data = std::move(data);
        if (sink_) {
            pending_.push_back(encode(e));
            drain_pending();
        }
        events_.push_back(std::move(e));
        return events_.back().offset;
    }

    const std::vector<LedgerEvent>& events() const { return events_; }
    uint64_t size() const { return next_offset_; }
    int write_failures() const { return write_failures_; }

    void flush() {
        drain_pending();
        if (sink_) sink_->flush();
    }

    static std::string encode(const LedgerEvent& e) {
        nlohmann::json j{{"offset", e.offset}, {"kind", e.kind}, {"ts", e.timestamp_ms}, {"data", e.data}};
        std::string body = j.dump();
        return std::to_string(body.size()) + " " + body + "\n";
    }

    static std::vector<LedgerEvent> read_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open ledger file: " + path);
        std::vector<LedgerEvent> out;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t sp = line.find(' ');
            if (sp == std::string::npos) throw CorruptLedgerError(out.size());
            size_t len = 0;
            for (size_t i = 0; i < sp; ++i) {
                if (line[i] < '0' || line[i] > '9') throw CorruptLedgerError(out.size());
                len = len * 10 + static_cast<size_t>(line[i] - '0');
            }
            const std::string body = line.substr(sp + 1);
            if (body.size() != len) throw CorruptLedgerError(out.size());
            nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
            if (j.is_discarded()) throw CorruptLedgerError(out.size());
            LedgerEvent e;
            e.offset = j.at("offset").get<uint64_t>();
            e.kind = j.at("kind").get<std::string>();
            e.timestamp_ms = j.at("ts").get<int64_t>();
            e.data = j.at("data");
            if (e.offset != out.size()) throw CorruptLedgerError(out.size());
            out.push_back(std::move(e));
        }
        return out;
    }

private:
    void drain_pending() {
        while (!pending_.empty()) {
            if (!sink_->write_line(pending_.front())) {
                ++write_failures_;
                std::cerr << "[jitr] warning: ledger write failed, buffering "
                          << pending_.size() << " event(s) for retry\n";
                return;
            }
            pending_.erase(pending_.begin());
        }
    }

    std::unique_ptr<LedgerSink> sink_;
    std::vector<std::string> pending_;
    std::vector<LedgerEvent> events_;
    uint64_t next_offset_ = 0;
    int write_failures_ = 0;
};

struct LabeledExample {
    std::string input;
    std::string label;
};

enum class Split { Train, Search, Validation };

struct SplitConfig {
    double train = 0.8;
    double search = 0.1;
    double validation = 0.1;
    uint64_t seed = 33;
};

// Extracts the label carried by a wrapped response, given the task's output
// key ("sentiment" for the review contract). An empty key accepts a bare JSON
// string as the label itself.
inline std::optional<std::string> parse_label(std::string_view user_response,
                                              const std::string& key) {
    nlohmann::json j = nlohmann::json::parse(user_response, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    if (key.empty()) {
        if (j.is_string()) return j.get<std::string>();
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains(key)) return std::nullopt;
    const auto& v = j[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
    if (v.is_boolean()) return v.get<bool>() ? std::string{"true"} : std::string{"false"};
    return std::nullopt;
}

// Picks the label key by scanning parsed responses: the most frequent
// object key whose values are scalar. Returns empty when responses are bare
// strings.
inline std::optional<std::string> infer_label_key(const std::vector<std::string>& user_responses) {
    std::map<std::string, int> key_votes;
    int bare_strings = 0;
    int parsed = 0;
    for (const auto& ur : user_responses) {
        nlohmann::json j = nlohmann::json::parse(ur, nullptr, false);
        if (j.is_discarded()) continue;
        ++parsed;
        if (j.is_string()) { ++bare_strings; continue; }
        if (!j.is_object()) continue;
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.value().is_string() || it.value().is_number() || it.value().is_boolean())
                ++key_votes[it.key()];
    }
    if (parsed == 0) return std::nullopt;
    if (!key_votes.empty()) {
        auto best = key_votes.begin();
        for (auto it = key_votes.begin(); it != key_votes.end(); ++it)
            if (it->second > best->second) best = it;
        return best->first;
    }
    if (bare_strings > 0) return std::string{};
    return std::nullopt;
}

struct DatasetSplit {
    std::vector<LabeledExample> examples;
    int skipped_unparseable = 0;
};

// Deterministic seeded shuffle, then contiguous partition by the configured
// fractions. The slot bindings become the model input when the template
// matches; otherwise the raw prompt body is used.
inline DatasetSplit export_dataset(const std::vector<TraceEvent>& task_events,
                                   const std::optional<PromptTemplate>& tmpl,
                                   const std::string& label_key, Split split,
                                   const SplitConfig& cfg) {
    DatasetSplit out;
    std::vector<LabeledExample> all;
    for (const auto& e : task_events) {
        if (e.parse_failure || e.upstream_failure) { ++out.skipped_unparseable; continue; }
        std::optional<std::string> label = e.label;
        if (!label && e.signals) label = parse_label(e.signals->user_response, label_key);
        if (!label) { ++out.skipped_unparseable; continue; }
        std::string input = e.prompt;
        if (tmpl) {
            if (auto bindings = match_template(*tmpl, e.prompt)) {
                input.clear();
                for (size_t i = 0; i < bindings->size(); ++i) {
                    if (i > 0) input += "\n";
                    input += (*bindings)[i];
                }
            }
        }
        all.push_back({std::move(input), std::move(*label)});
    }

    std::vector<size_t> idx(all.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(cfg.seed);
    rng.shuffle(idx);

    const size_t n = all.size();
    const size_t b1 = static_cast<size_t>(static_cast<double>(n) * cfg.train);
    const size_t b2 = static_cast<size_t>(static_cast<double>(n) * (cfg.train + cfg.search));
    size_t lo = 0, hi = n;
    switch (split) {
        case Split::Train: lo = 0; hi = b1; break;
        case Split::Search: lo = b1; hi = b2; break;
        case Split::Validation: lo = b2; hi = n; break;
    }
    for (size_t k = lo; k < hi; ++k) out.examples.push_back(all[idx[k]]);
    return out;
}

} // namespace jitr
