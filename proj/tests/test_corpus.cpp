#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "gan2vec/corpus.hpp"

using namespace gan2vec;

namespace {

Corpus make(std::vector<Tokens> sentences) {
    Corpus c;
    c.sentences = std::move(sentences);
    return c;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content, const std::string& name) : path(name) {
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("whitespace tokenizer splits on blanks only") {
    CHECK(tokenize("what 's the problem ?", TokenizerMode::whitespace) ==
          Tokens{"what", "'s", "the", "problem", "?"});
    CHECK(tokenize("  padded\t line ", TokenizerMode::whitespace) == Tokens{"padded", "line"});
    CHECK(tokenize("", TokenizerMode::whitespace).empty());
    // No splitting inside glued-together punctuation.
    CHECK(tokenize("don't", TokenizerMode::whitespace) == Tokens{"don't"});
}

TEST_CASE("treebank tokenizer separates punctuation and contractions") {
    CHECK(tokenize("don't stop", TokenizerMode::treebank) == Tokens{"do", "n't", "stop"});
    CHECK(tokenize("hello, world.", TokenizerMode::treebank) ==
          Tokens{"hello", ",", "world", "."});
    CHECK(tokenize("is it yours?", TokenizerMode::treebank) == Tokens{"is", "it", "yours", "?"});
    CHECK(tokenize("(yes)!", TokenizerMode::treebank) == Tokens{"(", "yes", ")", "!"});
    CHECK(tokenize("it's Bob's", TokenizerMode::treebank) == Tokens{"it", "'s", "Bob", "'s"});
    CHECK(tokenize("we'll they're I've I'd", TokenizerMode::treebank) ==
          Tokens{"we", "'ll", "they", "'re", "I", "'ve", "I", "'d"});
    // Already-spaced text passes through unchanged.
    CHECK(tokenize("what 's the problem ?", TokenizerMode::treebank) ==
          Tokens{"what", "'s", "the", "problem", "?"});
    // Sentence-internal periods (abbreviations) stay attached; final one splits.
    CHECK(tokenize("u.s. markets rose.", TokenizerMode::treebank) ==
          Tokens{"u.s.", "markets", "rose", "."});
}

TEST_CASE("load_corpus reads one sentence per line") {
    TempFile f("the cat sat\nthe dog ran\n\n", "tmp_corpus_basic.txt");
    Corpus c = load_corpus(f.path, TokenizerMode::whitespace);
    REQUIRE(c.sentences.size() == 3);
    CHECK(c.sentences[0] == Tokens{"the", "cat", "sat"});
    CHECK(c.sentences[2].empty());
    CHECK_FALSE(c.labels.has_value());

    CHECK_THROWS_AS(load_corpus("definitely_missing_file.txt", TokenizerMode::whitespace),
                    IoError);
    TempFile empty("", "tmp_corpus_empty.txt");
    CHECK_THROWS_AS(load_corpus(empty.path, TokenizerMode::whitespace), CorpusError);
}

TEST_CASE("boundary tokens wrap every sentence exactly once") {
    Corpus c = make({{"hi", "there"}, {}});
    add_boundary_tokens(c);
    CHECK(c.sentences[0] == Tokens{"<s>", "hi", "there", "</s>"});
    CHECK(c.sentences[1] == Tokens{"<s>", "</s>"});
    CHECK_THROWS_AS(add_boundary_tokens(c), CorpusError);
}

TEST_CASE("length policy drop discards short and truncates long") {
    Corpus c = make({{"a", "b", "c", "d"}, {"x"}, {"p", "q", "r"}});
    label_by_question_mark(c);
    apply_length_policy(c, 3, LengthMode::drop);
    REQUIRE(c.sentences.size() == 2);
    CHECK(c.sentences[0] == Tokens{"a", "b", "c"});
    CHECK(c.sentences[1] == Tokens{"p", "q", "r"});
    CHECK(c.labels->size() == 2);  // labels track the dropped row

    Corpus all_short = make({{"x"}, {"y"}});
    CHECK_THROWS_AS(apply_length_policy(all_short, 5, LengthMode::drop), CorpusError);
    CHECK_THROWS_AS(apply_length_policy(all_short, 0, LengthMode::drop), ConfigError);
}

TEST_CASE("length policy pad fills with the pad token") {
    Corpus c = make({{"a"}, {"b", "c", "d", "e"}});
    apply_length_policy(c, 3, LengthMode::pad, ",");
    CHECK(c.sentences[0] == Tokens{"a", ",", ","});
    CHECK(c.sentences[1] == Tokens{"b", "c", "d"});
    for (const auto& s : c.sentences) CHECK(s.size() == 3);
}

TEST_CASE("question mark labeling") {
    Corpus c = make({{"how", "are", "you", "?"}, {"fine", "."}, {"?"}, {}});
    label_by_question_mark(c);
    CHECK(*c.labels == std::vector<int>{1, 0, 1, 0});
    CHECK(c.label_names == std::vector<std::string>{"sentence", "question"});
}

TEST_CASE("balance_labels subsamples the majority class deterministically") {
    Corpus c;
    for (int i = 0; i < 1000; ++i) c.sentences.push_back({"s" + std::to_string(i), "."});
    for (int i = 0; i < 600; ++i) c.sentences.push_back({"q" + std::to_string(i), "?"});
    label_by_question_mark(c);

    Rng rng(123);
    balance_labels(c, rng);
    CHECK(c.sentences.size() == 1200);
    int q = 0;
    for (int l : *c.labels) q += l;
    CHECK(q == 600);

    // Deterministic: same seed, same survivors.
    Corpus c2;
    for (int i = 0; i < 1000; ++i) c2.sentences.push_back({"s" + std::to_string(i), "."});
    for (int i = 0; i < 600; ++i) c2.sentences.push_back({"q" + std::to_string(i), "?"});
    label_by_question_mark(c2);
    Rng rng2(123);
    balance_labels(c2, rng2);
    CHECK(c.sentences == c2.sentences);

    Corpus single = make({{"a", "?"}, {"b", "?"}});
    label_by_question_mark(single);
    Rng rng3(1);
    CHECK_THROWS_AS(balance_labels(single, rng3), CorpusError);
}

TEST_CASE("substitute_unknown replaces out-of-vocabulary tokens") {
    Corpus c = make({{"the", "zyzzyx", "sat"}, {"zyzzyx", "zyzzyx"}});
    std::unordered_set<std::string> vocab = {"the", "sat", "<unk>"};
    CHECK(substitute_unknown(c, vocab) == 3);
    CHECK(c.sentences[0] == Tokens{"the", "<unk>", "sat"});
    CHECK(c.sentences[1] == Tokens{"<unk>", "<unk>"});
    CHECK(substitute_unknown(c, vocab) == 0);  // idempotent once mapped
}

TEST_CASE("epoch_minibatches shuffles, chunks, and drops the remainder") {
    Rng rng(7);
    auto batches = epoch_minibatches(105, 10, rng);
    CHECK(batches.size() == 10);
    std::set<std::int64_t> seen;
    for (const auto& b : batches) {
        CHECK(b.size() == 10);
        for (auto i : b) {
            CHECK(i >= 0);
            CHECK(i < 105);
            CHECK(seen.insert(i).second);  // no index twice in one epoch
        }
    }

    // Same seed reproduces the epoch; the next epoch differs.
    Rng r1(42), r2(42);
    auto e1 = epoch_minibatches(50, 5, r1);
    auto e2 = epoch_minibatches(50, 5, r2);
    CHECK(e1 == e2);
    auto e1b = epoch_minibatches(50, 5, r1);
    CHECK(e1 != e1b);

    Rng r3(1);
    CHECK(epoch_minibatches(10, 10, r3).size() == 1);
    CHECK_THROWS_AS(epoch_minibatches(9, 10, r3), CorpusError);
    CHECK_THROWS_AS(epoch_minibatches(10, 0, r3), ConfigError);
}
