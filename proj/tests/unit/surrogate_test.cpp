#include <catch2/catch.hpp>

#include <filesystem>

#include "jitr/corpus.hpp"
#include "jitr/mock_llm.hpp"
#include "jitr/surrogate.hpp"

using namespace jitr;

namespace {

std::vector<LabeledExample> teacher_labeled(int n, uint64_t seed) {
    ReviewCorpusConfig cfg;
    cfg.seed = seed;
    ReviewGenerator gen(cfg);
    std::vector<LabeledExample> out;
    for (int i = 0; i < n; ++i) {
        const auto r = gen.next();
        out.push_back({r.text, MockLlm::teacher_sentiment(r.text)});
    }
    return out;
}

const ModelCard& winner_card() {
    static const auto zoo = builtin_zoo();
    for (const auto& c : zoo)
        if (c.model_id == "snt-lex-large") return c;
    throw std::runtime_error("zoo misses snt-lex-large");
}

std::vector<TraceEvent> labeled_trace_events(int n, uint64_t seed) {
    ReviewCorpusConfig cfg;
    cfg.seed = seed;
    ReviewGenerator gen(cfg);
    std::vector<TraceEvent> events;
    for (int i = 0; i < n; ++i) {
        const auto r = gen.next();
        TraceEvent e;
        e.request_id = "req-" + std::to_string(i);
        e.task_id = "task-0001";
        e.prompt = sentiment_base_prompt(r.text);
        TaskSignals s;
        s.input_type = "text";
        s.task_type = "sentiment classification";
        s.user_response = std::string{"{\"sentiment\":\""} + MockLlm::teacher_sentiment(r.text) + "\"}";
        e.signals = s;
        e.wrapped = true;
        e.served_by = ServedBy::LlmWrapped;
        e.timestamp_ms = i;
        events.push_back(std::move(e));
    }
    return events;
}

} // namespace

TEST_CASE("training set construction parses labels through the task schema") {
    auto events = labeled_trace_events(100, 7);
    events[10].signals->user_response = "not json at all";
    events[20].parse_failure = true;
    const auto tmpl = mine_template({events[0].prompt, events[1].prompt});
    SplitConfig split;

    const auto sets = build_training_set(events, tmpl, "sentiment", 10, split);
    CHECK(sets.train.size() + sets.validation.size() <= 98);
    CHECK(sets.dropped == 2);
    for (const auto& ex : sets.train) {
        CHECK((ex.label == "positive" || ex.label == "negative"));
        CHECK(ex.input.find("sentiment analysis assistant") == std::string::npos);
    }
}

TEST_CASE("too little data raises a typed error") {
    auto events = labeled_trace_events(30, 8);
    try {
        build_training_set(events, std::nullopt, "sentiment", 500, SplitConfig{});
        FAIL("expected NotEnoughDataError");
    } catch (const NotEnoughDataError& e) {
        CHECK(e.need == 500);
        CHECK(e.have <= 30);
    }
}

TEST_CASE("label noise against ground truth sits near the teacher error rate") {
    ReviewCorpusConfig cfg;
    cfg.seed = 99;
    ReviewGenerator gen(cfg);
    int noisy = 0;
    const int n = 5000;
    for (int i = 0; i < n; ++i) {
        const auto r = gen.next();
        if (MockLlm::teacher_sentiment(r.text) != r.label) ++noisy;
    }
    const double noise = static_cast<double>(noisy) / n;
    CHECK(noise >= 0.05);
    CHECK(noise <= 0.09);
}

TEST_CASE("surrogate training is deterministic under a fixed seed") {
    const auto train = teacher_labeled(400, 100);
    const auto val = teacher_labeled(120, 101);
    FeatureCache cache;
    TrainConfig cfg;
    cfg.max_epochs = 8;
    const auto a = train_surrogate(winner_card(), train, val, cfg, cache, "srg-1", 1000);
    const auto b = train_surrogate(winner_card(), train, val, cfg, cache, "srg-1", 1000);
    CHECK(a.model.weights() == b.model.weights());
    CHECK(a.metrics.validation_accuracy == b.metrics.validation_accuracy);
}

TEST_CASE("validation accuracy at 5000 examples stays within trend of the 500 run") {
    FeatureCache cache;
    TrainConfig cfg;
    const auto val = teacher_labeled(800, 202);

    const auto small = train_surrogate(winner_card(), teacher_labeled(500, 201), val, cfg, cache,
                                       "srg-500", 0);
    const auto large = train_surrogate(winner_card(), teacher_labeled(5000, 203), val, cfg, cache,
                                       "srg-5000", 0);
    CHECK(large.metrics.validation_accuracy >= small.metrics.validation_accuracy - 0.01);
    CHECK(small.metrics.validation_accuracy >= 0.85);
    CHECK(large.metrics.teacher_agreement >= 0.9);
    CHECK(small.metrics.epochs_run <= cfg.max_epochs);
}

TEST_CASE("prediction returns labels from the map with confidence in range") {
    const auto train = teacher_labeled(600, 301);
    const auto val = teacher_labeled(200, 302);
    FeatureCache cache;
    const auto artifact = train_surrogate(winner_card(), train, val, TrainConfig{}, cache, "srg-2", 0);

    const auto [label, conf] = artifact.predict("a wonderful, gripping, superb film");
    CHECK(label == "positive");
    CHECK(conf >= 0.0);
    CHECK(conf <= 1.0);

    const auto again = artifact.predict("a wonderful, gripping, superb film");
    CHECK(again.first == label);
    CHECK(again.second == conf);

    const auto [empty_label, empty_conf] = artifact.predict("");
    CHECK((empty_label == "positive" || empty_label == "negative"));
    CHECK(empty_conf < 0.95);
}

TEST_CASE("artifacts survive a save/load round trip bit for bit") {
    const auto train = teacher_labeled(300, 401);
    const auto val = teacher_labeled(100, 402);
    FeatureCache cache;
    TrainConfig cfg;
    cfg.max_epochs = 6;
    const auto artifact =
        train_surrogate(winner_card(), train, val, cfg, cache, "srg-persist", 1234);

    const auto path = (std::filesystem::temp_directory_path() / "jitr_artifact.bin").string();
    artifact.save(path);
    const auto back = SurrogateArtifact::load(path);
    CHECK(back.artifact_id == artifact.artifact_id);
    CHECK(back.base_model_id == artifact.base_model_id);
    CHECK(back.label_map == artifact.label_map);
    CHECK(back.model.weights() == artifact.model.weights());
    CHECK(back.model.bias() == artifact.model.bias());
    CHECK(back.metrics.validation_accuracy == artifact.metrics.validation_accuracy);
    CHECK(back.trained_on_hash == artifact.trained_on_hash);

    const std::string probe = "sharp, satisfying, and warm";
    CHECK(back.predict(probe) == artifact.predict(probe));
    std::filesystem::remove(path);
}

TEST_CASE("label map covers every label in the training set") {
    auto train = teacher_labeled(200, 501);
    train.push_back({"unhinged rant about everything", "mixed"});
    const auto val = teacher_labeled(80, 502);
    FeatureCache cache;
    TrainConfig cfg;
    cfg.max_epochs = 3;
    const auto artifact = train_surrogate(winner_card(), train, val, cfg, cache, "srg-3", 0);
    REQUIRE(artifact.label_map.size() == 3);
    bool has_mixed = false;
    for (const auto& l : artifact.label_map) has_mixed = has_mixed || l == "mixed";
    CHECK(has_mixed);
}

TEST_CASE("invalid train configs are rejected") {
    TrainConfig bad;
    bad.max_epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.patience = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
