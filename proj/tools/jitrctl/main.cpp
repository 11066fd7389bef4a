#include <csignal>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jitr/config.hpp"
#include "jitr/corpus.hpp"
#include "jitr/cost_model.hpp"
#include "jitr/engine.hpp"
#include "jitr/gateway.hpp"
#include "jitr/simulate.hpp"

using namespace jitr;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Config load_config(const std::string& path) {
    if (path.empty()) return Config{};
    return Config::load(path);
}

std::vector<LedgerEvent> read_ledger(const Config& cfg) {
    if (cfg.ledger_path.empty())
        throw CliError("this command needs a ledger; set ledger_path in the config file");
    if (!std::filesystem::exists(cfg.ledger_path))
        throw CliError("ledger file does not exist: " + cfg.ledger_path);
    return Ledger::read_file(cfg.ledger_path);
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) return;
    std::vector<size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            std::cout << row[c];
            if (c + 1 < row.size()) std::cout << std::string(width[c] - row[c].size() + 2, ' ');
        }
        std::cout << "\n";
    }
}

std::string fmt_double(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

int cmd_tasks_list(const Config& cfg, bool json_out) {
    const auto state = Engine::replay(read_ledger(cfg), cfg);
    if (json_out) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [id, t] : state.tasks())
            out.push_back(nlohmann::json{{"task_id", id},
                                         {"state", to_string(t.state)},
                                         {"task_type", t.stats.majority_task_type()},
                                         {"input_type", t.stats.majority_input_type()},
                                         {"members", t.stats.member_count},
                                         {"labeled", t.stats.labeled_count},
                                         {"requests_per_hour", t.stats.requests_per_hour()},
                                         {"slots", t.tmpl.slot_count()},
                                         {"search_winner", t.search_winner},
                                         {"artifact_id", t.artifact_id}});
        std::cout << out.dump(2) << "\n";
        return kOk;
    }
    std::vector<std::vector<std::string>> rows{
        {"TASK", "STATE", "TYPE", "MEMBERS", "LABELED", "REQ/H", "WINNER", "ARTIFACT"}};
    for (const auto& [id, t] : state.tasks())
        rows.push_back({id, to_string(t.state), t.stats.majority_task_type(),
                        std::to_string(t.stats.member_count), std::to_string(t.stats.labeled_count),
                        fmt_double(t.stats.requests_per_hour(), 1), t.search_winner, t.artifact_id});
    print_table(rows);
    return kOk;
}

int cmd_tasks_show(const Config& cfg, const std::string& task_id, bool json_out) {
    const auto state = Engine::replay(read_ledger(cfg), cfg);
    const auto it = state.tasks().find(task_id);
    if (it == state.tasks().end()) throw CliError("unknown task: " + task_id);
    const auto& t = it->second;

    std::string skeleton;
    for (const auto& seg : t.tmpl.segments) skeleton += seg.is_slot ? "<SLOT>" : seg.literal;

    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& s : t.ranking)
        ranking.push_back(nlohmann::json{
            {"model_id", s.model_id}, {"proxy_accuracy", s.proxy_accuracy}, {"stage", s.stage}});
    const nlohmann::json out{{"task_id", task_id},
                             {"state", to_string(t.state)},
                             {"cluster_id", t.cluster_id},
                             {"task_type", t.stats.majority_task_type()},
                             {"input_type", t.stats.majority_input_type()},
                             {"label_key", t.label_key},
                             {"template", skeleton},
                             {"members", t.stats.member_count},
                             {"labeled", t.stats.labeled_count},
                             {"wrapped_served", t.stats.wrapped_served},
                             {"surrogate_served", t.stats.surrogate_served},
                             {"parse_failures", t.stats.parse_failures},
                             {"requests_per_hour", t.stats.requests_per_hour()},
                             {"collect_target", t.collect_target},
                             {"search_winner", t.search_winner},
                             {"artifact_id", t.artifact_id},
                             {"ranking", ranking}};
    if (json_out) {
        std::cout << out.dump(2) << "\n";
    } else {
        for (const auto& [k, v] : out.items())
            if (k != "ranking") std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
        if (!t.ranking.empty()) {
            std::cout << "ranking:\n";
            for (const auto& s : t.ranking)
                std::cout << "  " << s.model_id << "  " << fmt_double(s.proxy_accuracy) << "  ("
                          << s.stage << ")\n";
        }
    }
    return kOk;
}

int cmd_offers_list(const Config& cfg, bool json_out) {
    const auto state = Engine::replay(read_ledger(cfg), cfg);
    if (json_out) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [id, o] : state.offers()) out.push_back(to_json(o));
        std::cout << out.dump(2) << "\n";
        return kOk;
    }
    std::vector<std::vector<std::string>> rows{
        {"OFFER", "TASK", "STATUS", "AGREEMENT", "SAVINGS/1M"}};
    for (const auto& [id, o] : state.offers())
        rows.push_back({id, o.task_id, to_string(o.status), fmt_double(o.agreement),
                        format_usd(o.savings_per_1m, 2)});
    print_table(rows);
    for (const auto& [id, o] : state.offers())
        if (o.status == OfferStatus::Pending) std::cout << "\n" << id << ": " << o.text << "\n";
    return kOk;
}

int cmd_offers_decide(const Config& cfg, const std::string& offer_id, bool accept) {
    Engine engine(cfg);   // bootstraps from the ledger file
    try {
        engine.decide_offer(offer_id, accept);
    } catch (const Engine::OfferDecisionError& e) {
        throw CliError(e.what());
    }
    engine.flush();
    std::cout << "offer " << offer_id << (accept ? " accepted" : " rejected")
              << "; routing switch event appended\n";
    return kOk;
}

int cmd_report_costs(const Config& cfg, const std::string& llm, const std::string& surrogate,
                     bool json_out) {
    const std::string llm_model = llm.empty() ? cfg.llm_model : llm;
    const std::string surrogate_model = surrogate.empty() ? cfg.surrogate_model : surrogate;
    const std::vector<int64_t> samples{0,      1'000,   5'000,    10'000,   50'000,
                                       100'000, 500'000, 1'000'000, 2'000'000};
    const auto report = build_cost_report(cfg.profile, llm_model, surrogate_model, cfg.pricing, samples);

    const Money llm_1m = llm_cumulative(1'000'000, cfg.profile, llm_model, cfg.pricing);
    const Money jitr_1m =
        jitr_cumulative(1'000'000, cfg.profile, llm_model, surrogate_model, cfg.pricing);
    const double ratio = jitr_1m.pico > 0 ? llm_1m.usd() / jitr_1m.usd() : 0.0;

    if (json_out) {
        nlohmann::json curve = nlohmann::json::array();
        for (size_t i = 0; i < report.sample_points.size(); ++i)
            curve.push_back(nlohmann::json{{"n", report.sample_points[i]},
                                           {"llm_pico", report.llm_curve[i].pico},
                                           {"jitr_pico", report.jitr_curve[i].pico},
                                           {"llm_usd", format_usd(report.llm_curve[i])},
                                           {"jitr_usd", format_usd(report.jitr_curve[i])}});
        nlohmann::json out{{"llm_model", llm_model},
                           {"surrogate_model", surrogate_model},
                           {"profile",
                            {{"avg_input_tokens", cfg.profile.avg_input_tokens},
                             {"avg_output_tokens", cfg.profile.avg_output_tokens},
                             {"wrapper_input_overhead_tokens", cfg.profile.wrapper_input_overhead_tokens},
                             {"wrapper_output_overhead_tokens", cfg.profile.wrapper_output_overhead_tokens},
                             {"switch_index", cfg.profile.switch_index},
                             {"dev_cost_usd", format_usd(cfg.profile.dev_cost)}}},
                           {"curve", curve},
                           {"savings_at_1m_pico", report.savings_at_1m.pico},
                           {"savings_at_1m_usd", format_usd(report.savings_at_1m)},
                           {"cost_ratio_at_1m", ratio}};
        out["break_even"] =
            report.break_even_n ? nlohmann::json(*report.break_even_n) : nlohmann::json(nullptr);
        std::cout << out.dump(2) << "\n";
        return kOk;
    }

    std::cout << "cost report: " << llm_model << " -> " << surrogate_model << "\n";
    std::vector<std::vector<std::string>> rows{{"N", "LLM", "GATEWAY", "SAVINGS"}};
    for (size_t i = 0; i < report.sample_points.size(); ++i)
        rows.push_back({std::to_string(report.sample_points[i]),
                        format_usd(report.llm_curve[i], 2), format_usd(report.jitr_curve[i], 2),
                        format_usd(report.llm_curve[i] - report.jitr_curve[i], 2)});
    print_table(rows);
    if (report.break_even_n)
        std::cout << "break-even: " << *report.break_even_n << " requests\n";
    else
        std::cout << "break-even: never (surrogate not cheaper per request)\n";
    std::cout << "savings at 1M requests: " << format_usd(report.savings_at_1m, 2) << " ("
              << fmt_double(ratio, 1) << "x cheaper)\n";
    return kOk;
}

int cmd_tasks_register(const Config& cfg, const std::string& template_file,
                       const std::string& task_type, const std::string& label_key) {
    std::ifstream in(template_file, std::ios::binary);
    if (!in) throw CliError("cannot open template file: " + template_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    PromptTemplate tmpl;
    try {
        tmpl = template_from_marked_text(text);
    } catch (const std::invalid_argument& e) {
        throw CliError(e.what());
    }
    Engine engine(cfg);
    const auto result = engine.register_task(tmpl, normalize_task_type(task_type), label_key);
    engine.flush();
    if (result.merged_with_existing)
        std::cout << "template matches existing task " << result.task_id << "; merged\n";
    else
        std::cout << "registered " << result.task_id << " (" << tmpl.slot_count()
                  << " slot(s)), now collecting\n";
    return kOk;
}

int cmd_report_learning_curve(const Config& cfg, const std::string& model_id,
                              std::vector<int64_t> sizes, uint64_t seed, bool json_out) {
    if (sizes.empty()) sizes = {500, 1000, 2000, 5000};
    const auto zoo = cfg.load_zoo();
    const ModelCard* card = nullptr;
    for (const auto& c : zoo)
        if (c.model_id == (model_id.empty() ? "snt-lex-large" : model_id)) card = &c;
    if (!card) throw CliError("unknown model card: " + model_id);

    const auto curve = learning_curve(*card, cfg, sizes, seed);
    if (json_out) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& p : curve)
            out.push_back(nlohmann::json{{"examples", p.examples},
                                         {"validation_accuracy", p.validation_accuracy},
                                         {"ground_truth_accuracy", p.ground_truth_accuracy},
                                         {"epochs_run", p.epochs_run}});
        std::cout << out.dump(2) << "\n";
        return kOk;
    }
    std::vector<std::vector<std::string>> rows{{"EXAMPLES", "ACC(LLM)", "ACC(TRUTH)", "EPOCHS"}};
    for (const auto& p : curve)
        rows.push_back({std::to_string(p.examples), fmt_double(p.validation_accuracy),
                        fmt_double(p.ground_truth_accuracy), std::to_string(p.epochs_run)});
    print_table(rows);
    return kOk;
}

int cmd_report_time(const Config& cfg, bool json_out) {
    const auto be = time_break_even(cfg.throughput, cfg.profile.switch_index);
    const double s1 = speedup(1'000'000, cfg.throughput, cfg.profile.switch_index);
    const double s2 = speedup(2'000'000, cfg.throughput, cfg.profile.switch_index);
    if (json_out) {
        nlohmann::json out{{"llm_rate_items_per_s", cfg.throughput.llm_rate_items_per_s},
                           {"surrogate_rate_items_per_s", cfg.throughput.surrogate_rate_items_per_s},
                           {"dev_time_s", cfg.throughput.dev_time_s},
                           {"switch_index", cfg.profile.switch_index},
                           {"speedup_at_1m", s1},
                           {"speedup_at_2m", s2}};
        out["break_even"] = be ? nlohmann::json(*be) : nlohmann::json(nullptr);
        std::cout << out.dump(2) << "\n";
        return kOk;
    }
    std::cout << "throughput: llm " << cfg.throughput.llm_rate_items_per_s << " items/s, surrogate "
              << cfg.throughput.surrogate_rate_items_per_s << " items/s, dev time "
              << cfg.throughput.dev_time_s << " s\n";
    if (be) std::cout << "time break-even: " << *be << " requests\n";
    else std::cout << "time break-even: never (surrogate not faster)\n";
    std::cout << "speedup at 1M: " << fmt_double(s1, 2) << "x, at 2M: " << fmt_double(s2, 2) << "x\n";
    return kOk;
}

int cmd_export(const Config& cfg, const std::string& task_id, const std::string& split_name,
               const std::string& out_path) {
    Split split;
    if (split_name == "train") split = Split::Train;
    else if (split_name == "search") split = Split::Search;
    else if (split_name == "validation") split = Split::Validation;
    else throw CliError("split must be train, search, or validation");

    const auto events = read_ledger(cfg);
    const auto state = Engine::replay(events, cfg);
    const auto it = state.tasks().find(task_id);
    if (it == state.tasks().end()) throw CliError("unknown task: " + task_id);
    const auto& task = it->second;

    std::vector<TraceEvent> task_events;
    for (uint64_t off : task.stats.trace_offsets)
        task_events.push_back(trace_event_from_json(events[off].data));
    const auto dataset = export_dataset(task_events, task.tmpl, task.label_key, split, cfg.split);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw CliError("cannot write " + out_path);
    for (const auto& ex : dataset.examples)
        out << nlohmann::json{{"input", ex.input}, {"label", ex.label}}.dump() << "\n";
    std::cout << "wrote " << dataset.examples.size() << " examples to " << out_path << " ("
              << dataset.skipped_unparseable << " unparseable rows skipped)\n";
    return kOk;
}

int cmd_simulate(const Config& cfg, const std::string& trace_path, const std::string& out_dir,
                 bool json_out) {
    std::vector<TraceItem> trace;
    try {
        trace = read_trace_jsonl(trace_path);
    } catch (const TraceParseError& e) {
        throw CliError(e.what());
    }
    const auto report = simulate(trace, cfg);
    if (!out_dir.empty()) write_simulation_report(report, out_dir);
    if (json_out) {
        std::cout << report.to_json().dump(2) << "\n";
        return kOk;
    }
    std::cout << "simulated " << report.requests << " requests\n";
    if (report.switch_at) std::cout << "switched to surrogate at request " << *report.switch_at << "\n";
    else std::cout << "never switched to a surrogate\n";
    std::cout << "final state: " << report.final_state << " (winner " << report.search_winner << ")\n";
    std::cout << "actual spend: gateway " << format_usd(report.actual_jitr_cost_at_end, 4)
              << " vs llm-only " << format_usd(report.actual_llm_cost_at_end, 4) << "\n";
    if (report.cost_break_even)
        std::cout << "projected cost break-even: " << *report.cost_break_even << " requests\n";
    if (report.time_break_even)
        std::cout << "projected time break-even: " << *report.time_break_even << " requests\n";
    std::cout << "accuracy vs ground truth: " << fmt_double(report.accuracy_vs_truth_overall)
              << " (surrogate slice: " << fmt_double(report.accuracy_vs_truth_surrogate) << ")\n";
    if (!out_dir.empty()) std::cout << "report written to " << out_dir << "\n";
    return kOk;
}

int cmd_compare_dev(const Config& cfg, const DevCompareConfig& dc, const std::string& out_dir,
                    bool json_out) {
    const auto cmp = compare_dev_strategies(cfg.load_zoo(), cfg, dc);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir + "/compare-dev.json", std::ios::binary);
        out << cmp.to_json().dump(2) << "\n";
    }
    if (json_out) {
        std::cout << cmp.to_json().dump(2) << "\n";
        return kOk;
    }
    std::vector<std::vector<std::string>> rows{
        {"STRATEGY", "MODEL", "EXAMPLES", "WALL(S)", "ACC(LLM)", "ACC(TRUTH)"}};
    for (const auto& r : cmp.rows)
        rows.push_back({r.name, r.model_id, std::to_string(r.train_examples),
                        fmt_double(r.wall_time_s, 2), fmt_double(r.llm_label_accuracy),
                        fmt_double(r.ground_truth_accuracy)});
    print_table(rows);
    return kOk;
}

int cmd_gen_trace(const std::string& kind, int64_t count, const std::string& out_path,
                  uint64_t seed, int64_t drift_at, double drift_fraction) {
    TraceGenConfig tg;
    tg.seed = seed;
    tg.drift_at = drift_at;
    tg.drift_fraction = drift_fraction;
    std::vector<TraceItem> trace;
    if (kind == "sentiment") trace = generate_sentiment_trace(count, tg);
    else if (kind == "mixed") trace = generate_mixed_trace(count, tg);
    else throw CliError("kind must be sentiment or mixed");
    write_trace_jsonl(trace, out_path);
    std::cout << "wrote " << trace.size() << " requests to " << out_path << "\n";
    return kOk;
}

int cmd_serve(const Config& cfg, const std::string& host_override, int port_override) {
    Engine engine(cfg);
    HttpGateway gateway(engine);
    const std::string host = host_override.empty() ? cfg.server.host : host_override;
    const int port = port_override >= 0 ? port_override : cfg.server.port;
    const int bound = gateway.start(host, port);
    std::cout << "gateway listening on http://" << host << ":" << bound << "\n";
    std::cout << "upstream mode: " << cfg.upstream.mode << ", llm model: " << cfg.llm_model << "\n";

    static std::atomic_bool stop{false};
    std::signal(SIGINT, [](int) { stop = true; });
    std::signal(SIGTERM, [](int) { stop = true; });
    while (!stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        engine.pump();
    }
    gateway.stop();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"just-in-time model replacement gateway and tooling"};
    app.require_subcommand(1);

    std::string config_path;
    bool json_out = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_flag("--json", json_out, "machine-readable output");

    auto* serve = app.add_subcommand("serve", "run the HTTP gateway");
    std::string serve_host;
    int serve_port = -1;
    serve->add_option("--host", serve_host, "bind host (overrides config)");
    serve->add_option("--port", serve_port, "bind port (overrides config)");

    auto* tasks = app.add_subcommand("tasks", "inspect detected tasks");
    auto* tasks_list = tasks->add_subcommand("list", "list tasks");
    auto* tasks_show = tasks->add_subcommand("show", "show one task");
    std::string show_task_id;
    tasks_show->add_option("task_id", show_task_id, "task id")->required();
    auto* tasks_register = tasks->add_subcommand("register", "pre-declare a task from a template");
    std::string reg_template_file, reg_task_type, reg_label_key;
    tasks_register->add_option("--template-file", reg_template_file,
                               "text file with <SLOT> markers")->required();
    tasks_register->add_option("--task-type", reg_task_type, "task type")->required();
    tasks_register->add_option("--label-key", reg_label_key, "response key carrying the label");

    auto* offers = app.add_subcommand("offers", "inspect and decide replacement offers");
    auto* offers_list = offers->add_subcommand("list", "list offers");
    auto* offers_accept = offers->add_subcommand("accept", "accept a pending offer");
    auto* offers_reject = offers->add_subcommand("reject", "reject a pending offer");
    std::string offer_id;
    offers_accept->add_option("offer_id", offer_id, "offer id")->required();
    offers_reject->add_option("offer_id", offer_id, "offer id")->required();

    auto* report = app.add_subcommand("report", "cost and throughput projections");
    auto* report_costs = report->add_subcommand("costs", "token cost projection");
    std::string report_llm, report_surrogate;
    report_costs->add_option("--llm,--model", report_llm, "LLM model name");
    report_costs->add_option("--surrogate", report_surrogate, "surrogate model name");
    auto* report_time = report->add_subcommand("time", "throughput projection");
    auto* report_curve = report->add_subcommand("learning-curve", "accuracy vs training examples");
    std::string curve_model;
    std::vector<int64_t> curve_sizes;
    uint64_t curve_seed = 424242;
    report_curve->add_option("--model", curve_model, "zoo card to train");
    report_curve->add_option("--sizes", curve_sizes, "training set sizes")->delimiter(',');
    report_curve->add_option("--seed", curve_seed, "corpus seed");

    auto* exp = app.add_subcommand("export", "export a task dataset as JSONL");
    std::string export_task, export_split = "train", export_out;
    exp->add_option("--task", export_task, "task id")->required();
    exp->add_option("--split", export_split, "train|search|validation");
    exp->add_option("--out", export_out, "output file")->required();

    auto* sim = app.add_subcommand("simulate", "replay a trace through the pipeline");
    std::string sim_trace, sim_out;
    sim->add_option("--trace", sim_trace, "trace JSONL file")->required();
    sim->add_option("--out", sim_out, "report output directory");

    auto* cmp = app.add_subcommand("compare-dev", "compare model development strategies");
    DevCompareConfig dev_cfg;
    std::string cmp_out;
    cmp->add_option("--train-examples", dev_cfg.train_examples, "training pool size");
    cmp->add_option("--search-examples", dev_cfg.search_examples, "search split size");
    cmp->add_option("--test-examples", dev_cfg.test_examples, "test set size");
    cmp->add_option("--seed", dev_cfg.seed, "corpus seed");
    cmp->add_option("--out", cmp_out, "report output directory");

    auto* gen = app.add_subcommand("gen-trace", "generate a bundled trace file");
    std::string gen_kind = "sentiment", gen_out;
    int64_t gen_count = 8000, gen_drift_at = -1;
    double gen_drift_fraction = 0.3;
    uint64_t gen_seed = 1234;
    gen->add_option("--kind", gen_kind, "sentiment|mixed");
    gen->add_option("--count", gen_count, "number of requests");
    gen->add_option("--out", gen_out, "output file")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--drift-at", gen_drift_at, "request index where drift starts (-1 = never)");
    gen->add_option("--drift-fraction", gen_drift_fraction, "fraction of drifted requests");

    // Let the global --config/--json flags appear after any subcommand.
    const std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
        for (auto* sub : cmd->get_subcommands({})) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUserError;
    }

    try {
        const Config cfg = load_config(config_path);
        if (*serve) return cmd_serve(cfg, serve_host, serve_port);
        if (*tasks_list) return cmd_tasks_list(cfg, json_out);
        if (*tasks_show) return cmd_tasks_show(cfg, show_task_id, json_out);
        if (*tasks_register) return cmd_tasks_register(cfg, reg_template_file, reg_task_type, reg_label_key);
        if (*offers_list) return cmd_offers_list(cfg, json_out);
        if (*offers_accept) return cmd_offers_decide(cfg, offer_id, true);
        if (*offers_reject) return cmd_offers_decide(cfg, offer_id, false);
        if (*report_costs) return cmd_report_costs(cfg, report_llm, report_surrogate, json_out);
        if (*report_time) return cmd_report_time(cfg, json_out);
        if (*report_curve)
            return cmd_report_learning_curve(cfg, curve_model, curve_sizes, curve_seed, json_out);
        if (*exp) return cmd_export(cfg, export_task, export_split, export_out);
        if (*sim) return cmd_simulate(cfg, sim_trace, sim_out, json_out);
        if (*cmp) return cmd_compare_dev(cfg, dev_cfg, cmp_out, json_out);
        if (*gen) return cmd_gen_trace(gen_kind, gen_count, gen_out, gen_seed, gen_drift_at,
                                       gen_drift_fraction);
        std::cerr << "no subcommand selected\n";
        return kUserError;
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const UnknownModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
}
