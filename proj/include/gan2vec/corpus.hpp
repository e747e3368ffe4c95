#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "gan2vec/bleu.hpp"  // Tokens
#include "gan2vec/errors.hpp"
#include "gan2vec/rng.hpp"

namespace gan2vec {

enum class TokenizerMode { whitespace, treebank };
enum class LengthMode { drop, pad };

// Sentence collection plus optional per-sentence class labels. All the
// mutating passes below keep labels aligned with sentences.
struct Corpus {
    std::vector<Tokens> sentences;
    std::optional<std::vector<int>> labels;
    std::vector<std::string> label_names;
};

Tokens tokenize(const std::string& line, TokenizerMode mode);

// One sentence per line. Empty lines become empty sentences; a file with no
// lines at all is a corpus error, an unreadable path an I/O error.
Corpus load_corpus(const std::string& path, TokenizerMode mode);

// Wraps every sentence as [start, tokens..., end]. Applying it twice is
// almost always a pipeline bug, so sentences already carrying the markers
// are rejected.
void add_boundary_tokens(Corpus& corpus, const std::string& start = "<s>",
                         const std::string& end = "</s>");

// Forces every sentence to exactly target_len tokens. drop: discard shorter
// sentences, truncate longer ones. pad: append pad_token to shorter ones,
// truncate longer ones. Dropping everything is a corpus error.
void apply_length_policy(Corpus& corpus, std::int64_t target_len, LengthMode mode,
                         const std::string& pad_token = ",");

// Labels each sentence 1 ("question") if it contains a "?" token, else
// 0 ("sentence").
void label_by_question_mark(Corpus& corpus);

// Subsamples the majority class (without replacement) down to the minority
// size for an exact 50-50 split. Relative order of kept sentences is
// preserved. Requires both labels to be present.
void balance_labels(Corpus& corpus, Rng& rng);

// Replaces out-of-vocabulary tokens with unk_token; returns how many were
// replaced.
std::int64_t substitute_unknown(Corpus& corpus, const std::unordered_set<std::string>& vocab,
                                const std::string& unk_token = "<unk>");

// One epoch of shuffled minibatch index lists; a trailing partial batch is
// dropped so every batch has exactly batch_size members.
std::vector<std::vector<std::int64_t>> epoch_minibatches(std::int64_t corpus_size,
                                                         std::int64_t batch_size, Rng& rng);

}  // namespace gan2vec
