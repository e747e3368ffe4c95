#pragma once

#include <string>
#include <vector>

// Brute-force BLEU written independently of the library (string-keyed
// counting, no shared helpers) so agreement between the two is evidence
// rather than tautology. Same conventions: clipped precisions, uniform
// weights, closest-length brevity penalty (ties -> shorter), zero score on
// any zero precision unless epsilon smoothing substitutes 1e-9 matches.
namespace testsup {

double oracle_sentence_bleu(const std::vector<std::string>& candidate,
                            const std::vector<std::vector<std::string>>& references, int max_n,
                            bool epsilon_smoothing);

double oracle_corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                          const std::vector<std::vector<std::string>>& references, int max_n,
                          bool epsilon_smoothing);

double oracle_self_bleu(const std::vector<std::vector<std::string>>& sentences, int max_n,
                        bool epsilon_smoothing);

}  // namespace testsup
