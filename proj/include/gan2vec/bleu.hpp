#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gan2vec/errors.hpp"

namespace gan2vec {

using Tokens = std::vector<std::string>;

enum class Smoothing { none, epsilon };

// Conventions, fixed across the whole toolkit:
//  * p_i is the clipped (max count over references) i-gram precision.
//  * A candidate with no i-grams for some i <= max_n scores 0 outright.
//  * smoothing == none: any zero p_i zeroes the score.
//    smoothing == epsilon: a zero i-gram match count is replaced by 1e-9
//    before dividing, so near-misses stay comparable instead of all tying at 0.
//  * Brevity penalty uses the reference length closest to the candidate's
//    (ties -> shorter reference); 1 when the candidate is at least that long,
//    exp(1 - r/c) otherwise. An empty candidate scores 0.
struct BleuReport {
    double score = 0.0;
    std::vector<double> precisions;  // p_1 .. p_max_n
    double brevity_penalty = 0.0;
    std::int64_t candidate_len = 0;
    std::int64_t reference_len = 0;  // the closest reference length
};

BleuReport sentence_bleu_report(const Tokens& candidate, const std::vector<Tokens>& references,
                                int max_n, Smoothing smoothing);

double sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n,
                     Smoothing smoothing);

// Mean of per-sentence scores, every candidate judged against the same
// reference set.
double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   int max_n, Smoothing smoothing);

// Leave-one-out: each sentence scored against all the others, averaged.
// Low values mean diverse output; identical sentences give exactly 1.
double self_bleu(const std::vector<Tokens>& sentences, int max_n,
                 Smoothing smoothing = Smoothing::none);

}  // namespace gan2vec
