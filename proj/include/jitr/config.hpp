#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "jitr/cost_model.hpp"
#include "jitr/ledger.hpp"
#include "jitr/linear_model.hpp"
#include "jitr/minhash.hpp"
#include "jitr/mock_llm.hpp"
#include "jitr/model_zoo.hpp"
#include "jitr/surrogate.hpp"

namespace jitr {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct UpstreamConfig {
    std::string mode = "mock";   // mock | http
    std::string url;
    std::string api_key;
    MockLlmConfig mock;
};

struct MinerConfig {
    MinHashConfig minhash;                  // shingle width 8, 128 hashes
    double similarity_threshold = 0.6;
    int min_cluster_size = 20;
    int bands = 32;
    int template_buffer = 24;               // prompts retained per cluster for mining
};

struct CollectConfig {
    double sample_rate = 1.0;               // fraction of eligible requests wrapped
    int target_examples = 5000;             // labeled examples before search starts
    int min_train_examples = 500;
};

struct MonitorSettings {
    int window = 500;                       // shadow comparison window W
    double tau = 0.95;                      // agreement needed to offer
    double tau_drift = 0.90;                // probe agreement below this degrades
    double probe_fraction = 0.01;
    int drift_window = 500;                 // probes aggregated for the drift check
    bool auto_approve = false;
    int64_t min_dwell_requests = 2000;      // earliest re-offer after a deployment
};

struct Config {
    ServerConfig server;
    UpstreamConfig upstream;
    std::string ledger_path;                // empty = in-memory only
    std::string artifacts_dir;              // empty = artifacts kept in memory only
    bool store_raw_text = true;             // privacy knob: false blanks prompt/response text at rest
    PricingTable pricing = PricingTable::builtin();
    TrafficProfile profile;
    ThroughputModel throughput;
    MinerConfig miner;
    CollectConfig collect;
    SplitConfig split;
    MonitorSettings monitor;
    SearchSettings search;
    TrainConfig train;
    std::string llm_model = "gpt-4.1-nano";
    std::string surrogate_model = "bert-80m";
    std::string zoo_manifest;               // empty = bundled zoo
    bool identify = true;                   // wrap not-yet-replaced traffic
    double surrogate_latency_ms = 1.0;      // fallback when the card has no estimate

    std::vector<ModelCard> load_zoo() const {
        return zoo_manifest.empty() ? builtin_zoo() : load_zoo_manifest(zoo_manifest);
    }

    static Config from_json(const nlohmann::json& j);
    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("config parse error in " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

inline Config Config::from_json(const nlohmann::json& j) {
    Config c;
    if (j.contains("server")) {
        c.server.host = j["server"].value("host", c.server.host);
        c.server.port = j["server"].value("port", c.server.port);
    }
    if (j.contains("upstream")) {
        const auto& u = j["upstream"];
        c.upstream.mode = u.value("mode", c.upstream.mode);
        c.upstream.url = u.value("url", c.upstream.url);
        c.upstream.api_key = u.value("api_key", c.upstream.api_key);
        if (u.contains("mock")) {
            c.upstream.mock.base_latency_ms = u["mock"].value("base_latency_ms", 120.0);
            c.upstream.mock.per_token_ms = u["mock"].value("per_token_ms", 1.5);
            c.upstream.mock.extra_flip_rate = u["mock"].value("extra_flip_rate", 0.0);
            c.upstream.mock.flip_seed = u["mock"].value("flip_seed", uint64_t{0x5117ULL});
        }
        if (c.upstream.mode != "mock" && c.upstream.mode != "http")
            throw std::runtime_error("upstream.mode must be 'mock' or 'http'");
    }
    c.ledger_path = j.value("ledger_path", std::string{});
    c.artifacts_dir = j.value("artifacts_dir", std::string{});
    c.store_raw_text = j.value("store_raw_text", true);
    if (j.contains("pricing")) {
        PricingTable t;
        for (auto it = j["pricing"].begin(); it != j["pricing"].end(); ++it)
            t.set(it.key(), it.value().at("input").get<std::string>(),
                  it.value().at("output").get<std::string>());
        c.pricing = t;
    }
    if (j.contains("profile")) {
        const auto& p = j["profile"];
        c.profile.avg_input_tokens = p.value("avg_input_tokens", c.profile.avg_input_tokens);
        c.profile.avg_output_tokens = p.value("avg_output_tokens", c.profile.avg_output_tokens);
        c.profile.wrapper_input_overhead_tokens =
            p.value("wrapper_input_overhead_tokens", c.profile.wrapper_input_overhead_tokens);
        c.profile.wrapper_output_overhead_tokens =
            p.value("wrapper_output_overhead_tokens", c.profile.wrapper_output_overhead_tokens);
        c.profile.switch_index = p.value("switch_index", c.profile.switch_index);
        if (p.contains("dev_cost_usd")) c.profile.dev_cost = parse_usd(p["dev_cost_usd"].get<std::string>());
        c.profile.validate();
    }
    if (j.contains("throughput")) {
        const auto& t = j["throughput"];
        c.throughput.llm_rate_items_per_s = t.value("llm_rate_items_per_s", 13.0);
        c.throughput.surrogate_rate_items_per_s = t.value("surrogate_rate_items_per_s", 254.8);
        c.throughput.dev_time_s = t.value("dev_time_s", 5967.0);
    }
    if (j.contains("miner")) {
        const auto& m = j["miner"];
        c.miner.minhash.shingle_width = m.value("shingle_width", 8);
        c.miner.minhash.num_hashes = m.value("num_hashes", 128);
        c.miner.minhash.seed = m.value("seed", uint64_t{0x5eedULL});
        c.miner.similarity_threshold = m.value("similarity_threshold", 0.6);
        c.miner.min_cluster_size = m.value("min_cluster_size", 20);
        c.miner.bands = m.value("bands", 32);
        c.miner.template_buffer = m.value("template_buffer", 24);
    }
    if (j.contains("collect")) {
        const auto& col = j["collect"];
        c.collect.sample_rate = col.value("sample_rate", 1.0);
        c.collect.target_examples = col.value("target_examples", 5000);
        c.collect.min_train_examples = col.value("min_train_examples", 500);
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        c.split.train = s.value("train", 0.8);
        c.split.search = s.value("search", 0.1);
        c.split.validation = s.value("validation", 0.1);
        c.split.seed = s.value("seed", uint64_t{33});
    }
    if (j.contains("monitor")) {
        const auto& m = j["monitor"];
        c.monitor.window = m.value("window", 500);
        c.monitor.tau = m.value("tau", 0.95);
        c.monitor.tau_drift = m.value("tau_drift", 0.90);
        c.monitor.probe_fraction = m.value("probe_fraction", 0.01);
        c.monitor.drift_window = m.value("drift_window", 500);
        c.monitor.auto_approve = m.value("auto_approve", false);
        c.monitor.min_dwell_requests = m.value("min_dwell_requests", int64_t{2000});
        if (c.monitor.probe_fraction == 0.0)
            std::cerr << "[jitr] warning: probe_fraction is 0, drift detection is inert\n";
    }
    if (j.contains("search")) {
        const auto& s = j["search"];
        c.search.proxy_epochs = s.value("proxy_epochs", 3);
        c.search.holdout_fraction = s.value("holdout_fraction", 0.3);
        c.search.reduced_precision_representatives = s.value("reduced_precision", true);
        c.search.seed = s.value("seed", uint64_t{71});
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train.max_epochs = t.value("max_epochs", 40);
        c.train.learning_rate = t.value("learning_rate", 0.5);
        c.train.lr_decay = t.value("lr_decay", 0.1);
        c.train.batch_size = t.value("batch_size", 8);
        c.train.patience = t.value("patience", 5);
        c.train.seed = t.value("seed", uint64_t{101});
        c.train.validate();
    }
    c.llm_model = j.value("llm_model", c.llm_model);
    c.surrogate_model = j.value("surrogate_model", c.surrogate_model);
    c.zoo_manifest = j.value("zoo_manifest", std::string{});
    c.identify = j.value("identify", true);
    c.surrogate_latency_ms = j.value("surrogate_latency_ms", 1.0);
    if (!c.pricing.contains(c.llm_model)) throw UnknownModelError(c.llm_model);
    if (!c.pricing.contains(c.surrogate_model)) throw UnknownModelError(c.surrogate_model);
    return c;
}

} // namespace jitr
