#pragma once

#include <stdexcept>
#include <string>

namespace gan2vec {

// Shape/contract violations in tensor ops.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corpus loading/validation failures (empty corpus, vocab too small, ...).
struct CorpusError : std::runtime_error {
    explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-vocabulary lookups and zero-vector similarity queries.
struct LookupError : std::runtime_error {
    explicit LookupError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external files (embedding tables, logs); carries a line number.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, long line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    long line_number;
};

// Invalid configuration values or mode mismatches.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint version mismatch or corruption.
struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric protocol violations (e.g. self-BLEU on fewer than 2 sentences).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (NaN loss); carries the diagnostic dump path.
struct TrainAbort : std::runtime_error {
    TrainAbort(const std::string& msg, std::string dump)
        : std::runtime_error(msg), dump_path(std::move(dump)) {}
    std::string dump_path;
};

}  // namespace gan2vec
