#include "gan2vec/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gan2vec {

namespace {

constexpr double kEpsilonMatch = 1e-9;

using Gram = std::vector<std::string>;

std::map<Gram, std::int64_t> count_ngrams(const Tokens& toks, int n) {
    std::map<Gram, std::int64_t> counts;
    const std::int64_t len = static_cast<std::int64_t>(toks.size());
    for (std::int64_t i = 0; i + n <= len; ++i)
        counts[Gram(toks.begin() + i, toks.begin() + i + n)] += 1;
    return counts;
}

std::int64_t closest_reference_length(std::int64_t cand_len,
                                      const std::vector<Tokens>& references) {
    std::int64_t best = static_cast<std::int64_t>(references[0].size());
    for (const auto& ref : references) {
        const std::int64_t len = static_cast<std::int64_t>(ref.size());
        const std::int64_t d = std::llabs(len - cand_len);
        const std::int64_t bd = std::llabs(best - cand_len);
        if (d < bd || (d == bd && len < best)) best = len;
    }
    return best;
}

}  // namespace

BleuReport sentence_bleu_report(const Tokens& candidate, const std::vector<Tokens>& references,
                                int max_n, Smoothing smoothing) {
    if (max_n < 1) throw ProtocolError("sentence_bleu: max_n must be >= 1");
    if (references.empty()) throw ProtocolError("sentence_bleu: empty reference set");

    BleuReport report;
    report.candidate_len = static_cast<std::int64_t>(candidate.size());
    report.precisions.assign(max_n, 0.0);
    if (candidate.empty()) return report;

    report.reference_len = closest_reference_length(report.candidate_len, references);
    report.brevity_penalty =
        (report.candidate_len >= report.reference_len)
            ? 1.0
            : std::exp(1.0 - static_cast<double>(report.reference_len) / report.candidate_len);

    double log_sum = 0.0;
    bool zero = false;
    for (int n = 1; n <= max_n; ++n) {
        const auto cand_counts = count_ngrams(candidate, n);
        std::int64_t total = 0;
        for (const auto& [gram, c] : cand_counts) total += c;
        if (total == 0) {
            // No i-grams at this order: the geometric mean is undefined, so
            // the sentence scores 0 with or without smoothing.
            report.score = 0.0;
            return report;
        }

        std::map<Gram, std::int64_t> clipped;
        for (const auto& ref : references)
            for (const auto& [gram, c] : count_ngrams(ref, n)) {
                auto& slot = clipped[gram];
                slot = std::max(slot, c);
            }

        double matched = 0.0;
        for (const auto& [gram, c] : cand_counts) {
            auto it = clipped.find(gram);
            if (it != clipped.end()) matched += static_cast<double>(std::min(c, it->second));
        }
        report.precisions[n - 1] = matched / static_cast<double>(total);
        if (matched == 0.0) {
            if (smoothing == Smoothing::none) {
                zero = true;
                continue;
            }
            matched = kEpsilonMatch;
        }
        log_sum += std::log(matched / static_cast<double>(total)) / max_n;
    }
    report.score = zero ? 0.0 : report.brevity_penalty * std::exp(log_sum);
    return report;
}

double sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n,
                     Smoothing smoothing) {
    return sentence_bleu_report(candidate, references, max_n, smoothing).score;
}

double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   int max_n, Smoothing smoothing) {
    if (candidates.empty()) throw ProtocolError("corpus_bleu: no candidates");
    double sum = 0.0;
    for (const auto& cand : candidates) sum += sentence_bleu(cand, references, max_n, smoothing);
    return sum / static_cast<double>(candidates.size());
}

double self_bleu(const std::vector<Tokens>& sentences, int max_n, Smoothing smoothing) {
    if (sentences.size() < 2)
        throw ProtocolError("self_bleu: needs at least 2 sentences, got " +
                            std::to_string(sentences.size()));
    std::vector<Tokens> rest(sentences.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        rest.clear();
        for (std::size_t j = 0; j < sentences.size(); ++j)
            if (j != i) rest.push_back(sentences[j]);
        sum += sentence_bleu(sentences[i], rest, max_n, smoothing);
    }
    return sum / static_cast<double>(sentences.size());
}

}  // namespace gan2vec
