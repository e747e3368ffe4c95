#include "support/bleu_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

namespace testsup {

namespace {

// n-grams as '\x1f'-joined strings; input tokens never contain control chars.
std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& toks, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key = toks[i];
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += toks[i + j];
        }
        counts[key] += 1;
    }
    return counts;
}

}  // namespace

double oracle_sentence_bleu(const std::vector<std::string>& candidate,
                            const std::vector<std::vector<std::string>>& references, int max_n,
                            bool epsilon_smoothing) {
    if (candidate.empty() || references.empty()) return 0.0;

    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto cand = ngram_counts(candidate, n);
        long total = 0;
        for (auto& [k, c] : cand) total += c;
        if (total == 0) return 0.0;  // candidate too short for this order

        std::unordered_map<std::string, int> best;
        for (auto& ref : references)
            for (auto& [k, c] : ngram_counts(ref, n)) best[k] = std::max(best[k], c);

        double matched = 0.0;
        for (auto& [k, c] : cand) {
            auto it = best.find(k);
            if (it != best.end()) matched += std::min(c, it->second);
        }
        if (matched == 0.0) {
            if (!epsilon_smoothing) return 0.0;
            matched = 1e-9;
        }
        log_sum += std::log(matched / static_cast<double>(total)) / max_n;
    }

    // Closest reference length, shorter on ties.
    long c = static_cast<long>(candidate.size());
    long r = static_cast<long>(references[0].size());
    for (auto& ref : references) {
        long len = static_cast<long>(ref.size());
        if (std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r))
            r = len;
    }
    double bp = (c >= r) ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
    return bp * std::exp(log_sum);
}

double oracle_corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                          const std::vector<std::vector<std::string>>& references, int max_n,
                          bool epsilon_smoothing) {
    double sum = 0.0;
    for (auto& cand : candidates)
        sum += oracle_sentence_bleu(cand, references, max_n, epsilon_smoothing);
    return sum / static_cast<double>(candidates.size());
}

double oracle_self_bleu(const std::vector<std::vector<std::string>>& sentences, int max_n,
                        bool epsilon_smoothing) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        std::vector<std::vector<std::string>> rest;
        for (std::size_t j = 0; j < sentences.size(); ++j)
            if (j != i) rest.push_back(sentences[j]);
        sum += oracle_sentence_bleu(sentences[i], rest, max_n, epsilon_smoothing);
    }
    return sum / static_cast<double>(sentences.size());
}

}  // namespace testsup
