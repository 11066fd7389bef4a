#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jitr/hashing.hpp"

namespace jitr {

// Vocabulary backing the bundled review generator and the mock upstream's
// labeling rule. The trap section holds words the upstream systematically
// misreads (it scores them as strong negative evidence although they appear
// in positive reviews), which caps its accuracy below ground truth in a way a
// trained student can imitate. The holdout sections are reserved for drift
// scenarios: the generator never touches them unless asked, while the
// upstream knows them all along.
struct Lexicon {
    std::vector<std::string> positive;
    std::vector<std::string> negative;
    std::vector<std::string> traps;
    std::vector<std::string> holdout_positive;
    std::vector<std::string> holdout_negative;
    std::vector<std::string> fillers;

    static const Lexicon& builtin() {
        static const Lexicon lex = [] {
            Lexicon l;
            l.positive = {
                "wonderful", "superb",    "delightful", "gripping",  "charming",  "masterful",
                "heartfelt", "stunning",  "riveting",   "brilliant", "hilarious", "touching",
                "inventive", "memorable", "engaging",   "beautiful", "sharp",     "satisfying",
                "fresh",     "excellent", "captivating", "elegant",  "vivid",     "thrilling",
                "graceful",  "absorbing", "rewarding",  "lively",    "polished",  "magnetic",
                "joyous",    "radiant",   "assured",    "soulful",   "crisp",     "tender",
                "luminous",  "winning",   "rich",       "playful",   "confident", "spirited",
                "sparkling", "warm",      "honest",     "inspired",  "nimble",    "buoyant",
                "immersive", "rousing",   "sublime",    "stylish",   "breathtaking", "irresistible",
                "enchanting", "perceptive", "exuberant", "marvelous", "dazzling", "resonant"};
            l.negative = {
                "dreadful",  "tedious",    "clumsy",    "lifeless",   "grating",   "bloated",
                "shallow",   "incoherent", "stale",     "wooden",     "plodding",  "sloppy",
                "forgettable", "dull",     "messy",     "hollow",     "awkward",   "tiresome",
                "labored",   "terrible",   "listless",  "aimless",    "contrived", "leaden",
                "muddled",   "flat",       "clunky",    "joyless",    "strained",  "lazy",
                "limp",      "overlong",   "dismal",    "lurid",      "garbled",   "inert",
                "trite",     "soggy",      "frantic",   "charmless",  "ponderous", "sluggish",
                "vapid",     "grim",       "insipid",   "disjointed", "murky",     "abysmal",
                "irritating", "monotonous", "painful",  "uninspired", "formulaic", "unbearable",
                "cringeworthy", "derivative", "overwrought", "lackluster", "meandering", "hackneyed"};
            l.traps = {"overhyped",  "pretentious", "saccharine", "melodramatic", "indulgent",
                       "sentimental", "chaotic",    "bizarre",    "unsettling",   "slowburn",
                       "divisive",   "bleak"};
            l.holdout_positive = {"transcendent", "virtuosic", "revelatory", "spellbinding",
                                  "effervescent", "sumptuous", "incandescent", "beguiling",
                                  "triumphant",   "ravishing", "intoxicating", "majestic",
                                  "exquisite",    "glorious",  "magnificent",  "arresting"};
            l.holdout_negative = {"execrable",  "interminable", "lamentable", "insufferable",
                                  "atrocious",  "deplorable",   "abominable", "excruciating",
                                  "calamitous", "woeful",       "dire",       "ghastly",
                                  "wretched",   "appalling",    "horrendous", "ruinous"};
            l.fillers = {
                "movie",   "film",     "plot",    "story",    "acting",   "cast",     "scene",
                "scenes",  "script",   "dialogue", "pacing",  "ending",   "beginning", "middle",
                "camera",  "lighting", "music",   "score",    "sound",    "effects",  "director",
                "actor",   "actress",  "lead",    "supporting", "role",   "character", "characters",
                "premise", "setting",  "tone",    "mood",     "theme",    "edit",     "editing",
                "sequel",  "franchise", "budget", "runtime",  "minutes",  "hour",     "night",
                "weekend", "theater",  "screen",  "audience", "crowd",    "review",   "critic",
                "opening", "finale",   "act",     "montage",  "flashback", "twist",   "reveal",
                "villain", "hero",     "romance", "drama",    "comedy",   "thriller", "horror",
                "western", "documentary", "animation", "costume", "design", "visuals", "world",
                "journey", "arc",      "subplot", "narration", "voice",   "chemistry", "duo",
                "trio",    "ensemble", "performance", "performances", "moment", "moments", "idea",
                "ideas",   "concept",  "execution", "craft",  "style",    "substance", "texture",
                "detail",  "details",  "frame",   "shot",     "shots",    "cut",      "cuts",
                "take",    "takes",    "angle",   "angles",   "color",    "palette",  "contrast",
                "depth",   "focus",    "blur",    "grain",    "print",    "reel",     "projection",
                "booth",   "lobby",    "ticket",  "seat",     "row",      "aisle",    "snack",
                "popcorn", "trailer",  "poster",  "marketing", "release", "premiere", "festival",
                "award",   "awards",   "season",  "year",     "decade",   "era",      "genre",
                "homage",  "reference", "callback", "parody", "satire",   "remake",   "adaptation",
                "novel",   "book",     "page",    "chapter",  "writer",   "writing",  "producer",
                "studio",  "crew",     "stunt",   "stunts",   "action",   "chase",    "fight",
                "battle",  "quiet",    "loud",    "long",     "short",    "early",    "late",
                "first",   "second",   "third",   "final",    "new",      "old",      "young",
                "modern",  "classic",  "original", "familiar", "strange", "simple",   "complex",
                "small",   "big",      "huge",    "tiny",     "dark",     "light",    "heavy",
                "soft",    "hard",     "fast",    "slow",     "high",     "low",      "full",
                "empty",   "open",     "closed",  "inner",    "outer",    "whole",    "half"};
            return l;
        }();
        return lex;
    }
};

struct LabeledReview {
    std::string text;
    std::string label;   // ground truth: "positive" | "negative"
};

// Review length is capped so that the varying text stays a small fraction of
// the prompt: clustering relies on the shared instruction frame dominating
// the shingle sets.
struct ReviewCorpusConfig {
    uint64_t seed = 1234;
    int min_words = 6;
    int max_words = 10;
    double sentiment_words_min = 2;
    double sentiment_words_max = 4;
    double opposite_word_rate = 0.12;       // one stray opposite-class word
    double trap_rate_in_positive = 0.14;    // ~7% of all reviews overall
    double drift_fraction = 0.0;            // reviews drawn from the holdout vocabulary
    double bang_rate_negative = 0.22;       // stylistic punctuation signal
    double bang_rate_positive = 0.10;
};

// Deterministic review stream. Ground truth is decided first; the word
// mixture guarantees the true-class sentiment words always outnumber strays,
// so a full-lexicon vote recovers the label exactly.
class ReviewGenerator {
public:
    explicit ReviewGenerator(const ReviewCorpusConfig& cfg)
        : cfg_(cfg), rng_(cfg.seed), lex_(Lexicon::builtin()) {}

    LabeledReview next() {
        const bool positive = rng_.chance(0.5);
        const bool drifted = cfg_.drift_fraction > 0 && rng_.chance(cfg_.drift_fraction);

        const int total = cfg_.min_words +
                          static_cast<int>(rng_.below(static_cast<uint64_t>(cfg_.max_words - cfg_.min_words + 1)));
        const int sentiment_lo = static_cast<int>(cfg_.sentiment_words_min);
        const int sentiment_hi = static_cast<int>(cfg_.sentiment_words_max);
        const int sentiment_n =
            sentiment_lo + static_cast<int>(rng_.below(static_cast<uint64_t>(sentiment_hi - sentiment_lo + 1)));

        std::vector<std::string> words;
        const auto& own = drifted ? (positive ? lex_.holdout_positive : lex_.holdout_negative)
                                  : (positive ? lex_.positive : lex_.negative);
        const auto& opposite = positive ? lex_.negative : lex_.positive;
        for (int k = 0; k < sentiment_n; ++k) words.push_back(rng_.pick(own));
        if (!drifted && rng_.chance(cfg_.opposite_word_rate)) words.push_back(rng_.pick(opposite));
        if (!drifted && positive && rng_.chance(cfg_.trap_rate_in_positive))
            words.push_back(rng_.pick(lex_.traps));
        while (static_cast<int>(words.size()) < total) words.push_back(rng_.pick(lex_.fillers));
        rng_.shuffle(words);

        // Assemble 1-3 sentences with a mild class-dependent punctuation style.
        const int sentences = 1 + static_cast<int>(rng_.below(3));
        const double bang_rate = positive ? cfg_.bang_rate_positive : cfg_.bang_rate_negative;
        std::string text;
        size_t w = 0;
        for (int s = 0; s < sentences && w < words.size(); ++s) {
            const size_t remaining = words.size() - w;
            const size_t len = s + 1 == sentences
                                   ? remaining
                                   : std::max<size_t>(1, remaining / static_cast<size_t>(sentences - s));
            std::string sentence;
            for (size_t k = 0; k < len && w < words.size(); ++k, ++w) {
                if (k > 0) sentence += " ";
                sentence += words[w];
            }
            if (!sentence.empty() && sentence[0] >= 'a' && sentence[0] <= 'z')
                sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
            sentence += rng_.chance(bang_rate) ? "!" : ".";
            if (!text.empty()) text += " ";
            text += sentence;
        }

        return {text, positive ? "positive" : "negative"};
    }

private:
    ReviewCorpusConfig cfg_;
    Rng rng_;
    const Lexicon& lex_;
};

// The review-classification prompt the gateway sees; its only varying region
// is the review text.
inline std::string sentiment_base_prompt(const std::string& review) {
    return "You are a sentiment analysis assistant. Your job is to read movie reviews and "
           "classify their sentiment as either \"positive\" or \"negative\". Only respond in "
           "this exact JSON format: {\"sentiment\": \"positive\"} or {\"sentiment\": "
           "\"negative\"}. Do not provide any explanation or additional text. Review: " +
           review;
}

inline std::string summarize_base_prompt(const std::string& article) {
    return "Summarize the following article in exactly one sentence. You are a careful news "
           "editor: keep the subject and the key outcome, drop every qualifier, opinion, and "
           "example. Respond with the summary text only, no preamble, no quotation marks, no "
           "trailing commentary, and never repeat the article verbatim. Article: " + article;
}

inline std::string translate_base_prompt(const std::string& sentence) {
    return "Translate the following sentence from English to German. You are a professional "
           "translator: preserve the register and the word order where German grammar allows "
           "it, prefer everyday vocabulary over formal terms, and respond with the translation "
           "only, without notes, alternatives, or quotation marks. Sentence: " + sentence;
}

struct TraceItem {
    int64_t timestamp_ms = 0;
    std::string prompt;
    std::optional<std::string> ground_truth;
};

struct TraceGenConfig {
    uint64_t seed = 1234;
    int64_t start_timestamp_ms = 1'755'000'000'000LL;
    int64_t inter_arrival_ms = 800;
    double drift_fraction = 0.0;   // applied from drift_at onward
    int64_t drift_at = -1;         // request index where the distribution shifts; -1 = never
};

// Single-task stream of review prompts, with ground truth carried alongside
// for simulation scoring.
inline std::vector<TraceItem> generate_sentiment_trace(int64_t count, const TraceGenConfig& cfg) {
    std::vector<TraceItem> out;
    out.reserve(static_cast<size_t>(count));
    ReviewCorpusConfig pre;
    pre.seed = cfg.seed;
    ReviewCorpusConfig post = pre;
    post.seed = splitmix64(cfg.seed);
    post.drift_fraction = cfg.drift_fraction;
    ReviewGenerator before(pre), after(post);
    for (int64_t i = 0; i < count; ++i) {
        const bool drifted = cfg.drift_at >= 0 && i >= cfg.drift_at;
        const auto review = drifted ? after.next() : before.next();
        TraceItem item;
        item.timestamp_ms = cfg.start_timestamp_ms + i * cfg.inter_arrival_ms;
        item.prompt = sentiment_base_prompt(review.text);
        item.ground_truth = review.label;
        out.push_back(std::move(item));
    }
    return out;
}

// Interleaved stream over three templated tasks plus unstructured chatter.
inline std::vector<TraceItem> generate_mixed_trace(int64_t count, const TraceGenConfig& cfg) {
    std::vector<TraceItem> out;
    out.reserve(static_cast<size_t>(count));
    ReviewCorpusConfig rc;
    rc.seed = cfg.seed;
    ReviewGenerator reviews(rc);
    Rng rng(splitmix64(cfg.seed + 1));
    const auto& lex = Lexicon::builtin();

    auto filler_text = [&](int lo, int hi) {
        const int n = lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
        std::string s;
        for (int k = 0; k < n; ++k) {
            if (k > 0) s += " ";
            s += rng.pick(lex.fillers);
        }
        return s;
    };

    for (int64_t i = 0; i < count; ++i) {
        TraceItem item;
        item.timestamp_ms = cfg.start_timestamp_ms + i * cfg.inter_arrival_ms;
        const double roll = rng.uniform();
        if (roll < 0.45) {
            const auto review = reviews.next();
            item.prompt = sentiment_base_prompt(review.text);
            item.ground_truth = review.label;
        } else if (roll < 0.70) {
            item.prompt = summarize_base_prompt(filler_text(8, 14));
        } else if (roll < 0.90) {
            item.prompt = translate_base_prompt(filler_text(4, 8));
        } else {
            // Chatter: structureless one-off requests.
            item.prompt = filler_text(5, 15) + "?";
        }
        out.push_back(std::move(item));
    }
    return out;
}

inline void write_trace_jsonl(const std::vector<TraceItem>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    for (const auto& item : trace) {
        nlohmann::json j{{"timestamp", item.timestamp_ms}, {"prompt", item.prompt}};
        if (item.ground_truth) j["ground_truth_label"] = *item.ground_truth;
        out << j.dump() << "\n";
    }
}

struct TraceParseError : std::runtime_error {
    int64_t line;
    TraceParseError(int64_t line_no, const std::string& why)
        : std::runtime_error("trace line " + std::to_string(line_no) + ": " + why), line(line_no) {}
};

inline std::vector<TraceItem> read_trace_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::vector<TraceItem> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw TraceParseError(line_no, "not a JSON object");
        if (!j.contains("prompt") || !j["prompt"].is_string())
            throw TraceParseError(line_no, "missing prompt");
        TraceItem item;
        item.timestamp_ms = j.value("timestamp", int64_t{0});
        item.prompt = j["prompt"].get<std::string>();
        if (j.contains("ground_truth_label"))
            item.ground_truth = j["ground_truth_label"].get<std::string>();
        out.push_back(std::move(item));
    }
    return out;
}

} // namespace jitr
