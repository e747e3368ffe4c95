#include "support/synth_corpus.hpp"

#include "gan2vec/rng.hpp"

namespace testsup {

using gan2vec::Corpus;
using gan2vec::Rng;
using gan2vec::Tokens;

namespace {

const std::vector<std::string> kSubjects = {"i",  "you",   "we",      "they",   "he",     "she",
                                            "it", "staff", "drivers", "guests", "locals", "kids"};
const std::vector<std::string> kVerbs = {
    "want", "need",  "like",  "see",   "have",  "find",  "take",  "get",
    "book", "change", "bring", "sell",  "rent",  "call",  "check", "carry",
    "miss", "share",  "keep",  "watch", "clean", "fix",   "pack",  "order"};
const std::vector<std::string> kNouns = {
    "ticket",   "room",   "bus",    "train",  "phone",  "map",     "bag",    "key",
    "coffee",   "doctor", "hotel",  "flight", "money",  "passport", "taxi",   "menu",
    "window",   "seat",   "card",   "tour",   "guide",  "letter",  "garden", "market",
    "station",  "bridge", "museum", "bank",   "shop",   "river",   "street", "school",
    "lamp",     "boat",   "park",   "tower"};
const std::vector<std::string> kAdjs = {"good",  "late",  "small", "ready", "open",
                                        "cheap", "busy",  "free",  "clean", "quiet",
                                        "close", "early", "full",  "new",   "old",
                                        "warm",  "cold",  "fast",  "slow",  "nice"};

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

}  // namespace

Corpus desk_corpus(int n_sentences, std::uint64_t seed, double question_ratio) {
    Rng rng(seed, "desk_corpus");
    Corpus corpus;
    for (int i = 0; i < n_sentences; ++i) {
        Tokens s;
        if (rng.uniform() < question_ratio) {
            switch (rng.uniform_int(0, 5)) {
                case 0: s = {"do", pick(kSubjects, rng), pick(kVerbs, rng), pick(kNouns, rng), "?"}; break;
                case 1: s = {"where", "is", "the", pick(kNouns, rng), "?"}; break;
                case 2: s = {"can", pick(kSubjects, rng), pick(kVerbs, rng), pick(kNouns, rng), "?"}; break;
                case 3: s = {"is", "the", pick(kNouns, rng), pick(kAdjs, rng), "?"}; break;
                case 4: s = {"will", pick(kSubjects, rng), pick(kVerbs, rng), pick(kNouns, rng), "?"}; break;
                default: s = {"why", "is", pick(kNouns, rng), pick(kAdjs, rng), "?"}; break;
            }
        } else {
            switch (rng.uniform_int(0, 5)) {
                case 0: s = {pick(kSubjects, rng), pick(kVerbs, rng), "the", pick(kNouns, rng), "."}; break;
                case 1: s = {"the", pick(kNouns, rng), "is", pick(kAdjs, rng), "."}; break;
                case 2: s = {pick(kSubjects, rng), "will", pick(kVerbs, rng), pick(kNouns, rng), "."}; break;
                case 3: s = {pick(kSubjects, rng), pick(kVerbs, rng), "a", pick(kNouns, rng), "."}; break;
                case 4: s = {"the", pick(kNouns, rng), "was", pick(kAdjs, rng), "."}; break;
                default: s = {pick(kSubjects, rng), "had", "a", pick(kNouns, rng), "."}; break;
            }
        }
        corpus.sentences.push_back(std::move(s));
    }
    return corpus;
}

PairedCorpus paired_corpus(int n_sentences, std::uint64_t seed) {
    Rng rng(seed, "paired_corpus");
    PairedCorpus out;
    std::vector<std::string> left, right;
    for (int i = 0; i < 8; ++i) {
        out.designed.emplace_back("hot" + std::to_string(i), "mate" + std::to_string(i));
        left.push_back("left" + std::to_string(i));
        right.push_back("right" + std::to_string(i));
    }
    for (int i = 0; i < 20; ++i) out.fillers.push_back("filler" + std::to_string(i));

    for (int i = 0; i < n_sentences; ++i) {
        const std::size_t p = static_cast<std::size_t>(rng.uniform_int(0, 7));
        const auto& [hot, mate] = out.designed[p];
        // Half the sentences carry the pair adjacently inside its anchor
        // frame; the rest show each member alone in the same frame. Touching
        // each other makes the pair co-occur; sharing the frame makes their
        // context distributions match, which is what the input vectors encode.
        Tokens s;
        const std::int64_t form = rng.uniform_int(0, 3);
        if (form <= 1) {
            s = {left[p], form == 0 ? hot : mate, form == 0 ? mate : hot, right[p],
                 pick(out.fillers, rng)};
        } else {
            s = {pick(out.fillers, rng), left[p], form == 2 ? hot : mate, right[p],
                 pick(out.fillers, rng)};
        }
        out.corpus.sentences.push_back(std::move(s));
    }
    return out;
}

}  // namespace testsup
