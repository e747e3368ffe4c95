#include "gan2vec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

namespace gan2vec {

namespace {

Tokens split_whitespace(const std::string& line) {
    Tokens out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(std::move(tok));
    return out;
}

// Penn-Treebank-style splitting, applied as an ordered substitution pipeline
// before a whitespace split. Covers the common cases: punctuation becomes
// its own token, contraction suffixes (n't, 's, 'll, ...) detach from their
// stem. Quote characters are separated but not transcribed to `` / ''.
std::string treebank_prepare(const std::string& line) {
    static const std::vector<std::pair<std::regex, std::string>> rules = {
        {std::regex(R"(\.\.\.)"), " ... "},
        {std::regex(R"(([,;:@#$%&]))"), " $1 "},
        {std::regex(R"(([^\.])(\.)([\]\)}>"']*)\s*$)"), "$1 $2$3"},
        {std::regex(R"(([?!]))"), " $1 "},
        {std::regex(R"(([\]\[\(\)\{\}<>]))"), " $1 "},
        {std::regex(R"(("))"), " $1 "},
        {std::regex(R"(([A-Za-z])(n't)\b)"), "$1 $2"},
        {std::regex(R"(([A-Za-z])('s|'m|'d|'ll|'re|'ve)\b)"), "$1 $2"},
        {std::regex(R"((s)(')(\s|$))"), "$1 $2$3"},
    };
    std::string s = line;
    for (const auto& [re, repl] : rules) s = std::regex_replace(s, re, repl);
    return s;
}

}  // namespace

Tokens tokenize(const std::string& line, TokenizerMode mode) {
    if (mode == TokenizerMode::whitespace) return split_whitespace(line);
    return split_whitespace(treebank_prepare(line));
}

Corpus load_corpus(const std::string& path, TokenizerMode mode) {
    std::ifstream in(path);
    if (!in) throw IoError("load_corpus: cannot open " + path);
    Corpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        corpus.sentences.push_back(tokenize(line, mode));
    }
    if (corpus.sentences.empty()) throw CorpusError("load_corpus: " + path + " is empty");
    return corpus;
}

void add_boundary_tokens(Corpus& corpus, const std::string& start, const std::string& end) {
    for (const auto& s : corpus.sentences)
        if (!s.empty() && (s.front() == start || s.back() == end))
            throw CorpusError("add_boundary_tokens: sentence already carries boundary markers");
    for (auto& s : corpus.sentences) {
        Tokens wrapped;
        wrapped.reserve(s.size() + 2);
        wrapped.push_back(start);
        wrapped.insert(wrapped.end(), s.begin(), s.end());
        wrapped.push_back(end);
        s = std::move(wrapped);
    }
}

void apply_length_policy(Corpus& corpus, std::int64_t target_len, LengthMode mode,
                         const std::string& pad_token) {
    if (target_len < 1)
        throw ConfigError("apply_length_policy: target length must be >= 1, got " +
                          std::to_string(target_len));
    const std::size_t L = static_cast<std::size_t>(target_len);
    std::vector<Tokens> kept;
    std::vector<int> kept_labels;
    const bool labeled = corpus.labels.has_value();
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        Tokens s = corpus.sentences[i];
        if (s.size() < L) {
            if (mode == LengthMode::drop) continue;
            s.resize(L, pad_token);
        } else if (s.size() > L) {
            s.resize(L);
        }
        kept.push_back(std::move(s));
        if (labeled) kept_labels.push_back((*corpus.labels)[i]);
    }
    if (kept.empty())
        throw CorpusError("apply_length_policy: no sentence reaches length " +
                          std::to_string(target_len));
    corpus.sentences = std::move(kept);
    if (labeled) corpus.labels = std::move(kept_labels);
}

void label_by_question_mark(Corpus& corpus) {
    std::vector<int> labels;
    labels.reserve(corpus.sentences.size());
    for (const auto& s : corpus.sentences) {
        const bool q = std::find(s.begin(), s.end(), "?") != s.end();
        labels.push_back(q ? 1 : 0);
    }
    corpus.labels = std::move(labels);
    corpus.label_names = {"sentence", "question"};
}

void balance_labels(Corpus& corpus, Rng& rng) {
    if (!corpus.labels) throw ConfigError("balance_labels: corpus has no labels");
    std::vector<std::size_t> idx0, idx1;
    for (std::size_t i = 0; i < corpus.labels->size(); ++i)
        ((*corpus.labels)[i] == 0 ? idx0 : idx1).push_back(i);
    if (idx0.empty() || idx1.empty())
        throw CorpusError("balance_labels: both classes must be present (got " +
                          std::to_string(idx0.size()) + " / " + std::to_string(idx1.size()) +
                          ")");
    auto& majority = idx0.size() > idx1.size() ? idx0 : idx1;
    const std::size_t target = std::min(idx0.size(), idx1.size());
    std::shuffle(majority.begin(), majority.end(), rng.engine());
    majority.resize(target);

    std::vector<std::size_t> keep;
    keep.reserve(2 * target);
    keep.insert(keep.end(), idx0.begin(), idx0.end());
    keep.insert(keep.end(), idx1.begin(), idx1.end());
    std::sort(keep.begin(), keep.end());

    std::vector<Tokens> sentences;
    std::vector<int> labels;
    for (std::size_t i : keep) {
        sentences.push_back(std::move(corpus.sentences[i]));
        labels.push_back((*corpus.labels)[i]);
    }
    corpus.sentences = std::move(sentences);
    corpus.labels = std::move(labels);
}

std::int64_t substitute_unknown(Corpus& corpus, const std::unordered_set<std::string>& vocab,
                                const std::string& unk_token) {
    std::int64_t replaced = 0;
    for (auto& s : corpus.sentences)
        for (auto& tok : s)
            if (!vocab.count(tok)) {
                tok = unk_token;
                ++replaced;
            }
    return replaced;
}

std::vector<std::vector<std::int64_t>> epoch_minibatches(std::int64_t corpus_size,
                                                         std::int64_t batch_size, Rng& rng) {
    if (batch_size < 1)
        throw ConfigError("epoch_minibatches: batch size must be >= 1, got " +
                          std::to_string(batch_size));
    if (batch_size > corpus_size)
        throw CorpusError("epoch_minibatches: batch size " + std::to_string(batch_size) +
                          " exceeds corpus size " + std::to_string(corpus_size));
    std::vector<std::int64_t> perm(static_cast<std::size_t>(corpus_size));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<std::vector<std::int64_t>> batches;
    for (std::int64_t at = 0; at + batch_size <= corpus_size; at += batch_size)
        batches.emplace_back(perm.begin() + at, perm.begin() + at + batch_size);
    return batches;
}

}  // namespace gan2vec
