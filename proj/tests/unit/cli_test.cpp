#include <catch2/catch.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "jitr/corpus.hpp"
#include "jitr/cost_model.hpp"
#include "jitr/engine.hpp"
#include "jitr/money.hpp"

using namespace jitr;

namespace {

std::string binary_path() {
    const char* env = std::getenv("JITRCTL_BIN");
    if (env) return env;
    return "./tools/jitrctl";   // cmake build tree default
}

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = binary_path() + " " + args + " 2>/dev/null";
    std::array<char, 4096> buf{};
    RunResult r{-1, ""};
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("report costs --json matches the cost model exactly") {
    const auto r = run_cli("report costs --json --llm llama-405b-turbo");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);

    const auto pricing = PricingTable::builtin();
    TrafficProfile profile;
    CHECK(j["break_even"] ==
          *break_even(profile, "llama-405b-turbo", "bert-80m", pricing));
    CHECK(j["savings_at_1m_pico"] ==
          savings_at(1'000'000, profile, "llama-405b-turbo", "bert-80m", pricing).pico);
    for (const auto& point : j["curve"]) {
        const int64_t n = point["n"].get<int64_t>();
        CHECK(point["llm_pico"] == llm_cumulative(n, profile, "llama-405b-turbo", pricing).pico);
        CHECK(point["jitr_pico"] ==
              jitr_cumulative(n, profile, "llama-405b-turbo", "bert-80m", pricing).pico);
    }
}

TEST_CASE("report time --json matches the throughput model") {
    const auto r = run_cli("report time --json");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    ThroughputModel tm;
    CHECK(j["break_even"] == *time_break_even(tm, 5000));
    CHECK(j["speedup_at_1m"].get<double>() == Approx(speedup(1'000'000, tm, 5000)));
}

TEST_CASE("tasks list on an empty ledger prints an empty table and exits 0") {
    const auto dir = temp_dir("jitr_cli_empty");
    const auto ledger_path = (dir / "ledger.jsonl").string();
    {
        auto l = Ledger::open(ledger_path);
        l.flush();
    }
    const auto config_path = (dir / "config.json").string();
    std::ofstream(config_path) << nlohmann::json{{"ledger_path", ledger_path}}.dump();

    const auto r = run_cli("--config " + config_path + " tasks list");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("TASK") != std::string::npos);

    const auto rj = run_cli("--config " + config_path + " --json tasks list");
    CHECK(rj.exit_code == 0);
    CHECK(nlohmann::json::parse(rj.out).empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("unknown ids exit nonzero with a message") {
    const auto dir = temp_dir("jitr_cli_unknown");
    const auto ledger_path = (dir / "ledger.jsonl").string();
    {
        auto l = Ledger::open(ledger_path);
        l.flush();
    }
    const auto config_path = (dir / "config.json").string();
    std::ofstream(config_path) << nlohmann::json{{"ledger_path", ledger_path}}.dump();

    CHECK(run_cli("--config " + config_path + " tasks show task-9999").exit_code == 1);
    CHECK(run_cli("--config " + config_path + " offers accept offer-404").exit_code == 1);
    CHECK(run_cli("--config " + config_path + " export --task task-1 --out /tmp/x.jsonl").exit_code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bad arguments exit with the usage error code") {
    CHECK(run_cli("gen-trace --kind nope --out /tmp/x.jsonl").exit_code == 1);
    CHECK(run_cli("no-such-command").exit_code == 1);
    CHECK(run_cli("report costs --llm not-a-model").exit_code == 1);
}

TEST_CASE("gen-trace, simulate, offers, and export run end to end through the binary") {
    const auto dir = temp_dir("jitr_cli_e2e");
    const auto trace_path = (dir / "trace.jsonl").string();
    const auto ledger_path = (dir / "ledger.jsonl").string();
    const auto config_path = (dir / "config.json").string();

    const nlohmann::json config{
        {"ledger_path", ledger_path},
        {"artifacts_dir", (dir / "artifacts").string()},
        {"miner", {{"min_cluster_size", 10}}},
        {"collect", {{"target_examples", 150}, {"min_train_examples", 40}}},
        {"split", {{"train", 0.7}, {"search", 0.2}, {"validation", 0.1}}},
        {"monitor",
         {{"window", 40}, {"tau", 0.90}, {"tau_drift", 0.80}, {"drift_window", 30},
          {"probe_fraction", 0.1}, {"min_dwell_requests", 0}}},
        {"train", {{"max_epochs", 12}}}};
    std::ofstream(config_path) << config.dump(2);

    auto r = run_cli("gen-trace --kind sentiment --count 450 --seed 9 --out " + trace_path);
    REQUIRE(r.exit_code == 0);

    // Simulation with a ledger configured: the ledger persists the run.
    r = run_cli("--config " + config_path + " --json simulate --trace " + trace_path + " --out " +
                (dir / "sim").string());
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["requests"] == 450);
    CHECK(std::filesystem::exists(dir / "sim" / "report.json"));
    CHECK(std::filesystem::exists(dir / "sim" / "curves.csv"));

    // The persisted ledger is inspectable.
    r = run_cli("--config " + config_path + " --json tasks list");
    REQUIRE(r.exit_code == 0);
    const auto tasks = nlohmann::json::parse(r.out);
    REQUIRE_FALSE(tasks.empty());
    const std::string task_id = tasks[0]["task_id"].get<std::string>();

    r = run_cli("--config " + config_path + " tasks show " + task_id);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("template") != std::string::npos);

    // Offers were auto-created during the sim lifecycle; decide one.
    r = run_cli("--config " + config_path + " --json offers list");
    REQUIRE(r.exit_code == 0);
    const auto offers = nlohmann::json::parse(r.out);
    REQUIRE_FALSE(offers.empty());
    const std::string offer_id = offers[0]["offer_id"].get<std::string>();
    const std::string status = offers[0]["status"].get<std::string>();

    if (status == "pending") {
        r = run_cli("--config " + config_path + " offers accept " + offer_id);
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("routing switch event appended") != std::string::npos);
    }

    // Export a split and check the JSONL shape.
    const auto export_path = (dir / "train.jsonl").string();
    r = run_cli("--config " + config_path + " export --task " + task_id +
                " --split train --out " + export_path);
    REQUIRE(r.exit_code == 0);
    std::ifstream in(export_path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("input"));
        CHECK(j.contains("label"));
        ++lines;
    }
    CHECK(lines > 50);
    std::filesystem::remove_all(dir);
}

TEST_CASE("simulate aborts on malformed traces with a user error") {
    const auto dir = temp_dir("jitr_cli_badtrace");
    const auto trace_path = (dir / "bad.jsonl").string();
    std::ofstream(trace_path) << "{\"prompt\": \"ok\"}\nnot json\n";
    const auto r = run_cli("simulate --trace " + trace_path);
    CHECK(r.exit_code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("simulate is byte-deterministic through the binary") {
    const auto dir = temp_dir("jitr_cli_determinism");
    const auto trace_path = (dir / "trace.jsonl").string();
    REQUIRE(run_cli("gen-trace --kind sentiment --count 300 --seed 21 --out " + trace_path)
                .exit_code == 0);
    const nlohmann::json config{
        {"miner", {{"min_cluster_size", 10}}},
        {"collect", {{"target_examples", 120}, {"min_train_examples", 40}}},
        {"split", {{"train", 0.7}, {"search", 0.2}, {"validation", 0.1}}},
        {"monitor",
         {{"window", 30}, {"tau", 0.90}, {"tau_drift", 0.80}, {"drift_window", 30},
          {"probe_fraction", 0.1}, {"min_dwell_requests", 0}, {"auto_approve", true}}},
        {"train", {{"max_epochs", 10}}}};
    const auto config_path = (dir / "config.json").string();
    std::ofstream(config_path) << config.dump(2);

    const auto a = run_cli("--config " + config_path + " --json simulate --trace " + trace_path);
    const auto b = run_cli("--config " + config_path + " --json simulate --trace " + trace_path);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.out == b.out);
    std::filesystem::remove_all(dir);
}
