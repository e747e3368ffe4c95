#include "gan2vec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace gan2vec {

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab, std::vector<double> data,
                               std::int64_t dim)
    : vocab_(std::move(vocab)), data_(std::move(data)), dim_(dim) {
    if (dim_ < 1) throw ConfigError("EmbeddingTable: dimension must be >= 1");
    if (data_.size() != vocab_.size() * static_cast<std::size_t>(dim_))
        throw DimensionError("EmbeddingTable: data size does not match vocab x dim");
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (!index_.emplace(vocab_[i], static_cast<std::int64_t>(i)).second)
            throw ConfigError("EmbeddingTable: duplicate word '" + vocab_[i] + "'");
    }
    norms_.resize(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        double s = 0.0;
        const double* r = row(static_cast<std::int64_t>(i));
        for (std::int64_t j = 0; j < dim_; ++j) s += r[j] * r[j];
        norms_[i] = std::sqrt(s);
    }
}

std::int64_t EmbeddingTable::index_of(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw LookupError("embedding: unknown word '" + word + "'");
    return it->second;
}

EmbeddingTable train_word2vec(const Corpus& corpus, const W2vConfig& cfg) {
    if (cfg.dim < 1 || cfg.window < 1 || cfg.negatives < 0 || cfg.epochs < 1 ||
        cfg.min_count < 1 || cfg.lr <= 0.0)
        throw ConfigError("train_word2vec: invalid hyperparameter");

    // Vocabulary: count desc, first occurrence breaks ties.
    std::unordered_map<std::string, std::int64_t> counts;
    std::unordered_map<std::string, std::int64_t> first_seen;
    std::int64_t pos = 0;
    for (const auto& s : corpus.sentences)
        for (const auto& tok : s) {
            if (counts[tok]++ == 0) first_seen[tok] = pos;
            ++pos;
        }
    std::vector<std::string> vocab;
    for (const auto& [w, c] : counts)
        if (c >= cfg.min_count) vocab.push_back(w);
    std::sort(vocab.begin(), vocab.end(), [&](const std::string& a, const std::string& b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return first_seen[a] < first_seen[b];
    });
    const std::int64_t V = static_cast<std::int64_t>(vocab.size());
    if (V < 2) throw CorpusError("train_word2vec: vocabulary has fewer than 2 words");
    std::unordered_map<std::string, std::int64_t> index;
    for (std::int64_t i = 0; i < V; ++i) index[vocab[i]] = i;

    // Sentences as index sequences, out-of-vocabulary tokens dropped.
    std::vector<std::vector<std::int64_t>> encoded;
    std::int64_t total_words = 0;
    for (const auto& s : corpus.sentences) {
        std::vector<std::int64_t> e;
        for (const auto& tok : s) {
            auto it = index.find(tok);
            if (it != index.end()) e.push_back(it->second);
        }
        total_words += static_cast<std::int64_t>(e.size());
        encoded.push_back(std::move(e));
    }
    if (total_words == 0) throw CorpusError("train_word2vec: no in-vocabulary tokens");

    const std::int64_t n = cfg.dim;
    Rng rng(cfg.seed, "word2vec");
    std::vector<double> syn0(static_cast<std::size_t>(V * n));
    for (auto& v : syn0) v = rng.uniform(-0.5 / n, 0.5 / n);
    std::vector<double> syn1(static_cast<std::size_t>(V * n), 0.0);

    // Negative sampling from unigram^(3/4).
    std::vector<double> weights(static_cast<std::size_t>(V));
    for (std::int64_t i = 0; i < V; ++i)
        weights[i] = std::pow(static_cast<double>(counts[vocab[i]]), 0.75);
    std::discrete_distribution<std::int64_t> noise(weights.begin(), weights.end());

    const double total_steps = static_cast<double>(cfg.epochs) * total_words + 1.0;
    std::int64_t words_done = 0;
    std::vector<double> neu1e(static_cast<std::size_t>(n));
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& sent : encoded) {
            const std::int64_t len = static_cast<std::int64_t>(sent.size());
            for (std::int64_t c = 0; c < len; ++c) {
                const double lr = std::max(cfg.lr * (1.0 - words_done / total_steps),
                                           cfg.lr * 1e-4);
                ++words_done;
                const std::int64_t center = sent[c];
                const std::int64_t half = rng.uniform_int(1, cfg.window);
                for (std::int64_t off = -half; off <= half; ++off) {
                    if (off == 0) continue;
                    const std::int64_t p = c + off;
                    if (p < 0 || p >= len) continue;
                    const std::int64_t ctx = sent[p];
                    double* in = syn0.data() + ctx * n;
                    std::fill(neu1e.begin(), neu1e.end(), 0.0);
                    for (std::int64_t neg = 0; neg <= cfg.negatives; ++neg) {
                        std::int64_t target;
                        double label;
                        if (neg == 0) {
                            target = center;
                            label = 1.0;
                        } else {
                            target = noise(rng.engine());
                            if (target == center) continue;
                            label = 0.0;
                        }
                        double* out = syn1.data() + target * n;
                        double f = 0.0;
                        for (std::int64_t j = 0; j < n; ++j) f += in[j] * out[j];
                        const double sigma = 1.0 / (1.0 + std::exp(-f));
                        const double g = (label - sigma) * lr;
                        for (std::int64_t j = 0; j < n; ++j) {
                            neu1e[j] += g * out[j];
                            out[j] += g * in[j];
                        }
                    }
                    for (std::int64_t j = 0; j < n; ++j) in[j] += neu1e[j];
                }
            }
        }
    }
    return EmbeddingTable(std::move(vocab), std::move(syn0), n);
}

SentenceMatrix embed_sentence(const EmbeddingTable& table, const Tokens& sentence) {
    SentenceMatrix m;
    m.len = static_cast<std::int64_t>(sentence.size());
    m.dim = table.dim();
    m.data.resize(static_cast<std::size_t>(m.len * m.dim));
    for (std::int64_t t = 0; t < m.len; ++t) {
        const double* r = table.row(table.index_of(sentence[static_cast<std::size_t>(t)]));
        std::copy(r, r + m.dim, m.data.begin() + t * m.dim);
    }
    return m;
}

double cosine_similarity(const double* a, const double* b, std::int64_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw LookupError("cosine_similarity: undefined for a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimensionError("cosine_similarity: length mismatch " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    return cosine_similarity(a.data(), b.data(), static_cast<std::int64_t>(a.size()));
}

std::pair<std::string, double> nearest_word(const EmbeddingTable& table, const double* query) {
    if (table.size() == 0) throw LookupError("nearest_word: empty table");
    double qn = 0.0;
    for (std::int64_t j = 0; j < table.dim(); ++j) qn += query[j] * query[j];
    if (qn == 0.0) throw LookupError("nearest_word: zero query vector");
    qn = std::sqrt(qn);

    std::int64_t best = -1;
    double best_sim = -2.0;
    for (std::int64_t i = 0; i < table.size(); ++i) {
        const double rn = table.row_norm(i);
        if (rn == 0.0) continue;  // a zero row has no angle to anything
        const double* r = table.row(i);
        double dot = 0.0;
        for (std::int64_t j = 0; j < table.dim(); ++j) dot += r[j] * query[j];
        const double sim = dot / (rn * qn);
        if (sim > best_sim) {  // strict: ties keep the lowest index
            best_sim = sim;
            best = i;
        }
    }
    if (best < 0) throw LookupError("nearest_word: table has only zero rows");
    return {table.word(best), best_sim};
}

std::pair<std::string, double> nearest_word(const EmbeddingTable& table,
                                            const std::vector<double>& query) {
    if (static_cast<std::int64_t>(query.size()) != table.dim())
        throw DimensionError("nearest_word: query dim " + std::to_string(query.size()) +
                             " vs table dim " + std::to_string(table.dim()));
    return nearest_word(table, query.data());
}

std::pair<Tokens, std::vector<double>> decode_matrix(const EmbeddingTable& table,
                                                     const SentenceMatrix& matrix) {
    if (matrix.dim != table.dim())
        throw DimensionError("decode_matrix: matrix dim " + std::to_string(matrix.dim) +
                             " vs table dim " + std::to_string(table.dim()));
    Tokens words;
    std::vector<double> sims;
    for (std::int64_t t = 0; t < matrix.len; ++t) {
        auto [w, s] = nearest_word(table, matrix.row(t));
        words.push_back(std::move(w));
        sims.push_back(s);
    }
    return {std::move(words), std::move(sims)};
}

void save_table(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_table: cannot write " + path);
    out << table.size() << " " << table.dim() << "\n";
    char buf[64];
    for (std::int64_t i = 0; i < table.size(); ++i) {
        out << table.word(i);
        const double* r = table.row(i);
        for (std::int64_t j = 0; j < table.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), " %.17g", r[j]);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("save_table: write failed for " + path);
}

EmbeddingTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_table: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("load_table: missing header", 1);
    std::istringstream header(line);
    std::int64_t V = 0, dim = 0;
    if (!(header >> V >> dim) || V < 1 || dim < 1)
        throw ParseError("load_table: malformed header '" + line + "'", 1);

    std::vector<std::string> vocab;
    std::vector<double> data;
    vocab.reserve(static_cast<std::size_t>(V));
    data.reserve(static_cast<std::size_t>(V * dim));
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string word;
        is >> word;
        for (std::int64_t j = 0; j < dim; ++j) {
            double v;
            if (!(is >> v))
                throw ParseError("load_table: expected " + std::to_string(dim) +
                                     " values for '" + word + "'",
                                 line_no);
            data.push_back(v);
        }
        double extra;
        if (is >> extra)
            throw ParseError("load_table: too many values for '" + word + "'", line_no);
        vocab.push_back(std::move(word));
    }
    if (static_cast<std::int64_t>(vocab.size()) != V)
        throw ParseError("load_table: header promised " + std::to_string(V) + " words, found " +
                             std::to_string(vocab.size()),
                         line_no);
    try {
        return EmbeddingTable(std::move(vocab), std::move(data), dim);
    } catch (const ConfigError& e) {
        throw ParseError(std::string("load_table: ") + e.what(), line_no);
    }
}

}  // namespace gan2vec
