#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gan2vec/corpus.hpp"
#include "gan2vec/errors.hpp"

namespace gan2vec {

struct W2vConfig {
    std::int64_t dim = 64;
    std::int64_t window = 5;
    std::int64_t negatives = 5;
    std::int64_t epochs = 5;
    double lr = 0.025;
    std::int64_t min_count = 1;
    std::uint64_t seed = 1;
};

// Vocabulary plus one dense vector per word (row-major V x dim). Row norms
// are cached for nearest-neighbor queries.
class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    EmbeddingTable(std::vector<std::string> vocab, std::vector<double> data, std::int64_t dim);

    std::int64_t size() const { return static_cast<std::int64_t>(vocab_.size()); }
    std::int64_t dim() const { return dim_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::vector<double>& data() const { return data_; }

    bool contains(const std::string& word) const { return index_.count(word) != 0; }
    std::int64_t index_of(const std::string& word) const;  // LookupError when absent
    const double* row(std::int64_t i) const { return data_.data() + i * dim_; }
    const std::string& word(std::int64_t i) const { return vocab_[static_cast<std::size_t>(i)]; }
    double row_norm(std::int64_t i) const { return norms_[static_cast<std::size_t>(i)]; }

  private:
    std::vector<std::string> vocab_;
    std::vector<double> data_;
    std::int64_t dim_ = 0;
    std::unordered_map<std::string, std::int64_t> index_;
    std::vector<double> norms_;
};

// One embedded sentence: row t is the vector of token t.
struct SentenceMatrix {
    std::int64_t len = 0;
    std::int64_t dim = 0;
    std::vector<double> data;

    const double* row(std::int64_t t) const { return data.data() + t * dim; }
};

// Deterministic single-threaded skip-gram with negative sampling. Vocabulary
// is ordered by count (descending), ties by first occurrence; negatives come
// from the unigram distribution raised to 3/4.
EmbeddingTable train_word2vec(const Corpus& corpus, const W2vConfig& cfg);

SentenceMatrix embed_sentence(const EmbeddingTable& table, const Tokens& sentence);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);
double cosine_similarity(const double* a, const double* b, std::int64_t n);

// Exhaustive max-cosine scan; ties resolve to the lowest vocabulary index.
// A zero query (or zero table row meeting it) has no defined angle: the
// query being zero is an error, zero rows are skipped.
std::pair<std::string, double> nearest_word(const EmbeddingTable& table, const double* query);
std::pair<std::string, double> nearest_word(const EmbeddingTable& table,
                                            const std::vector<double>& query);

// Rows decoded independently; returns the words and their cosines.
std::pair<Tokens, std::vector<double>> decode_matrix(const EmbeddingTable& table,
                                                     const SentenceMatrix& matrix);

// Text format: header "V dim", then one "word v1 .. v_dim" line per word,
// printed with 17 significant digits so values round-trip exactly.
void save_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_table(const std::string& path);

}  // namespace gan2vec
