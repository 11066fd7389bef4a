#include <catch2/catch.hpp>

#include <algorithm>
#include <string>
#include <vector>

#include "jitr/hashing.hpp"
#include "jitr/template_mining.hpp"

using namespace jitr;

namespace {

void check_round_trip(const PromptTemplate& t, const std::vector<std::string>& prompts) {
    for (const auto& p : prompts) {
        auto bindings = match_template(t, p);
        REQUIRE(bindings.has_value());
        CHECK(instantiate(t, *bindings) == p);
    }
}

} // namespace

TEST_CASE("single varying token becomes one slot") {
    const std::vector<std::string> prompts{"Review: A", "Review: B"};
    const auto t = mine_template(prompts);
    REQUIRE(t.segments.size() == 2);
    CHECK_FALSE(t.segments[0].is_slot);
    CHECK(t.segments[0].literal == "Review: ");
    CHECK(t.segments[1].is_slot);
    CHECK(t.slot_count() == 1);
    check_round_trip(t, prompts);
}

TEST_CASE("identical prompts mine to a zero-slot template") {
    const std::vector<std::string> prompts{"same exact text", "same exact text"};
    const auto t = mine_template(prompts);
    CHECK(t.slot_count() == 0);
    REQUIRE(t.segments.size() == 1);
    CHECK(t.segments[0].literal == "same exact text");
    check_round_trip(t, prompts);
}

TEST_CASE("two disjoint varying regions become two slots with literals preserved") {
    const std::vector<std::string> prompts{
        "Head alpha Mid xray Tail",
        "Head bravo Mid yankee Tail",
        "Head charlie Mid zulu Tail",
    };
    const auto t = mine_template(prompts);
    CHECK(t.slot_count() == 2);
    std::string literals;
    for (const auto& s : t.segments)
        if (!s.is_slot) literals += "[" + s.literal + "]";
    CHECK(literals == "[Head ][ Mid ][ Tail]");
    check_round_trip(t, prompts);
}

TEST_CASE("mining is insensitive to prompt order") {
    std::vector<std::string> prompts{
        "Classify the sentiment of: the movie dragged on forever",
        "Classify the sentiment of: an instant classic",
        "Classify the sentiment of: barely watchable",
        "Classify the sentiment of: sharp and funny throughout",
    };
    const auto base = mine_template(prompts);
    std::vector<std::string> shuffled = prompts;
    Rng rng(404);
    for (int round = 0; round < 6; ++round) {
        rng.shuffle(shuffled);
        CHECK(mine_template(shuffled) == base);
    }
    check_round_trip(base, prompts);
}

TEST_CASE("no common subsequence degenerates to a single slot") {
    const std::vector<std::string> prompts{"abcdef", "uvwxyz"};
    const auto t = mine_template(prompts);
    REQUIRE(t.segments.size() == 1);
    CHECK(t.segments[0].is_slot);
    check_round_trip(t, prompts);
}

TEST_CASE("mining requires at least two prompts") {
    CHECK_THROWS_AS(mine_template({"only one"}), std::invalid_argument);
}

TEST_CASE("slots never sit adjacent and segments alternate") {
    const std::vector<std::string> prompts{
        "Translate from English to French: the weather is lovely today",
        "Translate from German to Spanish: the trains run on time",
        "Translate from Dutch to Italian: the museum closes early",
    };
    const auto t = mine_template(prompts);
    for (size_t i = 1; i < t.segments.size(); ++i)
        CHECK_FALSE((t.segments[i].is_slot && t.segments[i - 1].is_slot));
    check_round_trip(t, prompts);
}

TEST_CASE("round-trip holds for randomly generated template instantiations") {
    Rng rng(20240707);
    const std::vector<std::string> literal_words{"Given", "the", "following", "input", "produce",
                                                 "answer", "as", "JSON", "field", "value"};
    const std::vector<std::string> binding_words{"apricot", "bicycle", "cormorant", "dune",
                                                 "ember", "fjord", "glacier", "harbor"};
    for (int round = 0; round < 50; ++round) {
        // Random skeleton: literal (slot literal)* with words that never occur in bindings.
        const int slots = 1 + static_cast<int>(rng.below(3));
        std::vector<std::string> skeleton;
        for (int s = 0; s <= slots; ++s) {
            std::string lit;
            const int words = 1 + static_cast<int>(rng.below(3));
            for (int w = 0; w < words; ++w) {
                if (!lit.empty()) lit += " ";
                lit += literal_words[rng.below(literal_words.size())];
            }
            skeleton.push_back(lit);
        }
        std::vector<std::string> prompts;
        for (int p = 0; p < 4; ++p) {
            std::string text = skeleton[0];
            for (int s = 0; s < slots; ++s) {
                const int words = 1 + static_cast<int>(rng.below(4));
                std::string binding;
                for (int w = 0; w < words; ++w) {
                    if (w > 0) binding += " ";
                    binding += binding_words[rng.below(binding_words.size())];
                }
                text += " " + binding + " " + skeleton[static_cast<size_t>(s) + 1];
            }
            prompts.push_back(text);
        }
        const auto t = mine_template(prompts);
        check_round_trip(t, prompts);
    }
}

TEST_CASE("template json round-trips") {
    const std::vector<std::string> prompts{"Review: A", "Review: B"};
    const auto t = mine_template(prompts);
    const auto back = PromptTemplate::from_json(t.to_json());
    CHECK(back == t);
}

TEST_CASE("match rejects prompts that do not fit the skeleton") {
    const auto t = mine_template({"Review: A", "Review: B"});
    CHECK_FALSE(match_template(t, "Summarize: something").has_value());
    CHECK(match_template(t, "Review: anything at all").has_value());
}
