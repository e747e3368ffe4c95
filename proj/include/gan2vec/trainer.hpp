#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gan2vec/adam.hpp"
#include "gan2vec/corpus.hpp"
#include "gan2vec/embedding.hpp"
#include "gan2vec/gan.hpp"

namespace gan2vec {

// One record per training iteration: n_critic discriminator updates (d_loss
// is their mean) followed by one generator update.
struct IterationRecord {
    std::int64_t iteration = 0;  // strictly increasing, survives resume
    std::int64_t epoch = 0;
    std::string loss_kind;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double wall_ms = 0.0;
};

// Per-epoch telemetry: mean nearest-neighbor cosine at every sentence
// position, plus a few decoded sample sentences.
struct EpochRecord {
    std::int64_t epoch = 0;
    std::vector<double> cosine_by_position;  // index 0 = first word
    std::vector<std::string> samples;        // tokens joined with single spaces
};

struct TrainingLog {
    std::vector<IterationRecord> iterations;
    std::vector<EpochRecord> epochs;
};

// JSON-lines rendering: one object per line, {"kind":"iteration",...} or
// {"kind":"epoch",...}. Wall times vary between otherwise identical runs, so
// comparisons use include_wall=false.
std::string log_to_jsonl(const TrainingLog& log, bool include_wall = true);
void write_log_jsonl(const TrainingLog& log, const std::string& path);
// Plot-ready "iteration,d_loss,g_loss" lines with a header row.
void write_loss_csv(const TrainingLog& log, const std::string& path);

// n generated sentence matrices, {n, 1, L, dim}, produced in bounded chunks
// with inference-mode normalization and no graph. Noise comes from a stream
// seeded only by `seed`, so equal seeds give equal matrices. Conditional
// generators require a label; others forbid one.
Tensor sample_matrices(Generator& g, std::int64_t n, std::optional<std::int64_t> label,
                       std::uint64_t seed);

// The matrices above with each row decoded to its nearest vocabulary word.
std::vector<Tokens> sample_sentences(Generator& g, const EmbeddingTable& table, std::int64_t n,
                                     std::optional<std::int64_t> label, std::uint64_t seed);

// A generator rebuilt from a checkpoint, without the training corpus the
// full TrainRun needs. Reads the config, the generator parameter block, and
// the normalization statistics; discriminator and optimizer state are
// structurally validated but discarded.
struct GeneratorSnapshot {
    GanConfig config;
    std::int64_t iterations_done = 0;
    std::int64_t epochs_done = 0;
    Generator generator;
};
GeneratorSnapshot load_generator(const std::string& path);

// Mean decode cosine at each requested 1-based position across n_samples
// generated sentences. The first overload takes any matrix source (called
// once with n_samples, must return {n_samples, 1, L, dim}); the second
// samples from a generator the same way sample_sentences does.
std::vector<double> track_cosine_by_position(
    const std::function<Tensor(std::int64_t)>& sample_matrices, const EmbeddingTable& table,
    std::int64_t n_samples, const std::vector<std::int64_t>& positions);
std::vector<double> track_cosine_by_position(Generator& g, const EmbeddingTable& table,
                                             std::int64_t n_samples,
                                             const std::vector<std::int64_t>& positions,
                                             std::uint64_t seed,
                                             std::optional<std::int64_t> label = {});

// Owns one adversarial run: networks, optimizers, the embedded corpus, and
// the deterministic RNG streams. Sentences are embedded once up front; every
// one must have exactly sentence_len tokens from the table's vocabulary.
//
// Conditional runs take their labels from the corpus; fake batches reuse the
// real batch's labels during D updates and draw labels from the empirical
// distribution during G updates. Epoch telemetry tracks class 0.
class TrainRun {
  public:
    TrainRun(GanConfig cfg, const EmbeddingTable& table, const Corpus& corpus,
             std::string checkpoint_dir = "", std::int64_t checkpoint_every = 0);

    // D-only warmup (the generator provides fakes but is never updated).
    // Runs at most once per run; train() triggers it implicitly.
    void pretrain_discriminator(std::int64_t iters);

    // Pretrains if needed, then loops epochs until config().epochs (or
    // stop_after_epoch, when >= 0, for deliberate interruption). Returns the
    // records produced by THIS call; counters persist across calls.
    // A non-finite d/g loss dumps the offending batch and throws TrainAbort.
    TrainingLog train(std::int64_t stop_after_epoch = -1);

    Generator& generator() { return *g_; }
    Discriminator& discriminator() { return *d_; }
    const EmbeddingTable& table() const { return table_; }
    const GanConfig& config() const { return cfg_; }
    std::int64_t iterations_done() const { return iterations_done_; }
    std::int64_t epochs_done() const { return epochs_done_; }
    bool pretrain_done() const { return pretrain_done_; }

    // Most recent update losses, kept as graph roots for inspection.
    const Tensor& last_d_loss() const { return last_d_loss_; }
    const Tensor& last_g_loss() const { return last_g_loss_; }

    // Versioned binary snapshot: config, counters, RNG stream, parameters,
    // normalization statistics, optimizer moments. load_checkpoint rebuilds
    // against the same table/corpus; corrupt or truncated files raise
    // CheckpointError.
    void save_checkpoint(const std::string& path) const;
    static TrainRun load_checkpoint(const std::string& path, const EmbeddingTable& table,
                                    const Corpus& corpus, std::string checkpoint_dir = "",
                                    std::int64_t checkpoint_every = 0);

  private:
    friend struct CheckpointCodec;

    Tensor real_batch(const std::vector<std::int64_t>& indices) const;
    std::vector<std::int64_t> batch_labels(const std::vector<std::int64_t>& indices) const;
    double d_step(const std::vector<std::int64_t>& indices);
    double g_step();
    void abort_with_dump(const std::string& what, double value,
                         const std::vector<std::int64_t>& indices);
    EpochRecord epoch_telemetry();

    GanConfig cfg_;
    const EmbeddingTable& table_;
    const Corpus& corpus_;
    std::string checkpoint_dir_;
    std::int64_t checkpoint_every_ = 0;

    std::vector<double> embedded_;       // N x L x n, row-major
    std::vector<std::int64_t> labels_;   // empty unless conditional
    std::int64_t n_sentences_ = 0;

    std::unique_ptr<Generator> g_;
    std::unique_ptr<Discriminator> d_;
    std::unique_ptr<AdamOptimizer> opt_g_;
    std::unique_ptr<AdamOptimizer> opt_d_;
    Rng rng_train_;

    std::int64_t iterations_done_ = 0;
    std::int64_t epochs_done_ = 0;
    bool pretrain_done_ = false;
    Tensor last_d_loss_;
    Tensor last_g_loss_;
};

}  // namespace gan2vec
