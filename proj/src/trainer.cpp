#include "gan2vec/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "gan2vec/log.hpp"

namespace gan2vec {

namespace {

constexpr std::int64_t kSampleChunk = 256;   // generation batch bound
constexpr std::int64_t kTelemetryCount = 128;  // sentences behind each epoch's cosine row
constexpr std::int64_t kEpochSamples = 4;      // decoded sentences logged per epoch

std::string join_tokens(const Tokens& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Shared by sampling and telemetry: n forwards in bounded chunks, inference
// normalization, no graph. Drawing chunk noise sequentially from one stream
// yields the same values as one monolithic draw, so chunking is invisible.
Tensor generate_matrices(Generator& g, std::int64_t n, const std::vector<std::int64_t>& labels,
                         std::uint64_t seed) {
    const GanConfig& cfg = g.config();
    Rng rng(seed, "sample");
    NoGradGuard no_grad;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n * cfg.sentence_len * cfg.embed_dim));
    for (std::int64_t start = 0; start < n; start += kSampleChunk) {
        const std::int64_t b = std::min(kSampleChunk, n - start);
        Tensor z = Tensor::randn({b, cfg.noise_dim}, rng);
        std::vector<std::int64_t> chunk_labels;
        if (!labels.empty())
            chunk_labels.assign(labels.begin() + start, labels.begin() + start + b);
        Tensor mats = g.forward(z, chunk_labels, BnMode::infer);
        out.insert(out.end(), mats.values().begin(), mats.values().end());
    }
    return Tensor::from_values({n, 1, cfg.sentence_len, cfg.embed_dim}, std::move(out));
}

std::vector<std::int64_t> label_vector(const GanConfig& cfg, std::optional<std::int64_t> label,
                                       std::int64_t n, const char* who) {
    if (cfg.conditional && !label)
        throw ConfigError(std::string(who) + ": conditional generator needs a label");
    if (!cfg.conditional && label)
        throw ConfigError(std::string(who) + ": label given to an unconditional generator");
    if (!label) return {};
    return std::vector<std::int64_t>(static_cast<std::size_t>(n), *label);
}

}  // namespace

Tensor sample_matrices(Generator& g, std::int64_t n, std::optional<std::int64_t> label,
                       std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_matrices: n must be >= 1");
    return generate_matrices(g, n, label_vector(g.config(), label, n, "sample_matrices"), seed);
}

std::vector<Tokens> sample_sentences(Generator& g, const EmbeddingTable& table, std::int64_t n,
                                     std::optional<std::int64_t> label, std::uint64_t seed) {
    const GanConfig& cfg = g.config();
    if (table.dim() != cfg.embed_dim)
        throw DimensionError("sample_sentences: table dim " + std::to_string(table.dim()) +
                             " vs generator dim " + std::to_string(cfg.embed_dim));
    Tensor mats = sample_matrices(g, n, label, seed);
    const std::int64_t L = cfg.sentence_len, dim = cfg.embed_dim;
    std::vector<Tokens> out;
    out.reserve(static_cast<std::size_t>(n));
    SentenceMatrix m;
    m.len = L;
    m.dim = dim;
    for (std::int64_t i = 0; i < n; ++i) {
        const double* base = mats.values().data() + i * L * dim;
        m.data.assign(base, base + L * dim);
        out.push_back(decode_matrix(table, m).first);
    }
    return out;
}

std::vector<double> track_cosine_by_position(
    const std::function<Tensor(std::int64_t)>& sample_matrices, const EmbeddingTable& table,
    std::int64_t n_samples, const std::vector<std::int64_t>& positions) {
    if (n_samples < 1) throw ConfigError("track_cosine_by_position: n_samples must be >= 1");
    Tensor mats = sample_matrices(n_samples);
    if (mats.ndim() != 4 || mats.dim(0) != n_samples || mats.dim(1) != 1 ||
        mats.dim(3) != table.dim())
        throw DimensionError("track_cosine_by_position: expected {" +
                             std::to_string(n_samples) + ", 1, L, " +
                             std::to_string(table.dim()) + "}, got " + shape_str(mats.shape()));
    const std::int64_t L = mats.dim(2), dim = mats.dim(3);
    for (std::int64_t p : positions)
        if (p < 1 || p > L)
            throw ConfigError("track_cosine_by_position: position " + std::to_string(p) +
                              " outside [1, " + std::to_string(L) + "]");

    std::vector<double> sums(positions.size(), 0.0);
    for (std::int64_t i = 0; i < n_samples; ++i) {
        const double* base = mats.values().data() + i * L * dim;
        for (std::size_t j = 0; j < positions.size(); ++j) {
            const double* row = base + (positions[j] - 1) * dim;
            sums[j] += nearest_word(table, row).second;
        }
    }
    for (double& s : sums) s /= static_cast<double>(n_samples);
    return sums;
}

std::vector<double> track_cosine_by_position(Generator& g, const EmbeddingTable& table,
                                             std::int64_t n_samples,
                                             const std::vector<std::int64_t>& positions,
                                             std::uint64_t seed,
                                             std::optional<std::int64_t> label) {
    std::vector<std::int64_t> labels =
        label_vector(g.config(), label, n_samples, "track_cosine_by_position");
    return track_cosine_by_position(
        [&](std::int64_t n) { return generate_matrices(g, n, labels, seed); }, table, n_samples,
        positions);
}

TrainRun::TrainRun(GanConfig cfg, const EmbeddingTable& table, const Corpus& corpus,
                   std::string checkpoint_dir, std::int64_t checkpoint_every)
    : cfg_(std::move(cfg)),
      table_(table),
      corpus_(corpus),
      checkpoint_dir_(std::move(checkpoint_dir)),
      checkpoint_every_(checkpoint_every),
      rng_train_(cfg_.seed, "train") {
    cfg_.validate();
    if (table_.dim() != cfg_.embed_dim)
        throw ConfigError("TrainRun: table dim " + std::to_string(table_.dim()) +
                          " does not match embed_dim " + std::to_string(cfg_.embed_dim));
    n_sentences_ = static_cast<std::int64_t>(corpus_.sentences.size());
    if (n_sentences_ == 0) throw CorpusError("TrainRun: empty corpus");
    if (cfg_.batch_size > n_sentences_)
        throw CorpusError("TrainRun: batch_size " + std::to_string(cfg_.batch_size) +
                          " exceeds corpus size " + std::to_string(n_sentences_));
    if (cfg_.conditional) {
        if (!corpus_.labels)
            throw ConfigError("TrainRun: conditional config but the corpus has no labels");
        for (int label : *corpus_.labels)
            if (label < 0 || label >= cfg_.n_classes)
                throw ConfigError("TrainRun: corpus label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(cfg_.n_classes) + ")");
        labels_.assign(corpus_.labels->begin(), corpus_.labels->end());
    }

    const std::int64_t L = cfg_.sentence_len, dim = cfg_.embed_dim;
    embedded_.resize(static_cast<std::size_t>(n_sentences_ * L * dim));
    for (std::int64_t i = 0; i < n_sentences_; ++i) {
        const Tokens& sent = corpus_.sentences[static_cast<std::size_t>(i)];
        if (static_cast<std::int64_t>(sent.size()) != L)
            throw CorpusError("TrainRun: sentence " + std::to_string(i) + " has " +
                              std::to_string(sent.size()) + " tokens, config wants " +
                              std::to_string(L));
        SentenceMatrix m = embed_sentence(table_, sent);
        std::memcpy(embedded_.data() + i * L * dim, m.data.data(),
                    static_cast<std::size_t>(L * dim) * sizeof(double));
    }

    Rng init(cfg_.seed, "init");
    g_ = std::make_unique<Generator>(cfg_, init);
    d_ = std::make_unique<Discriminator>(cfg_, init);
    AdamConfig adam{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8};
    auto tensors_of = [](const std::vector<NamedParam>& named) {
        std::vector<Tensor> ts;
        ts.reserve(named.size());
        for (const auto& p : named) ts.push_back(p.tensor);
        return ts;
    };
    opt_g_ = std::make_unique<AdamOptimizer>(tensors_of(g_->params()), adam);
    opt_d_ = std::make_unique<AdamOptimizer>(tensors_of(d_->params()), adam);
}

Tensor TrainRun::real_batch(const std::vector<std::int64_t>& indices) const {
    const std::int64_t B = static_cast<std::int64_t>(indices.size());
    const std::int64_t block = cfg_.sentence_len * cfg_.embed_dim;
    std::vector<double> data(static_cast<std::size_t>(B * block));
    for (std::int64_t b = 0; b < B; ++b)
        std::memcpy(data.data() + b * block,
                    embedded_.data() + indices[static_cast<std::size_t>(b)] * block,
                    static_cast<std::size_t>(block) * sizeof(double));
    return Tensor::from_values({B, 1, cfg_.sentence_len, cfg_.embed_dim}, std::move(data));
}

std::vector<std::int64_t> TrainRun::batch_labels(const std::vector<std::int64_t>& indices) const {
    if (!cfg_.conditional) return {};
    std::vector<std::int64_t> out;
    out.reserve(indices.size());
    for (std::int64_t i : indices) out.push_back(labels_[static_cast<std::size_t>(i)]);
    return out;
}

double TrainRun::d_step(const std::vector<std::int64_t>& indices) {
    const std::int64_t B = static_cast<std::int64_t>(indices.size());
    Tensor real = real_batch(indices);
    // Fake batches reuse the real batch's labels, so gradient-penalty pairs
    // interpolate within a class.
    std::vector<std::int64_t> labels = batch_labels(indices);
    Tensor z = Tensor::randn({B, cfg_.noise_dim}, rng_train_);
    Tensor fake;
    {
        // D updates never differentiate through G, so skip building its graph.
        NoGradGuard no_grad;
        fake = g_->forward(z, labels, BnMode::train);
    }

    // Separate forward passes: real and fake are never mixed in one batch.
    Tensor scores_real = d_->forward(real, labels);
    Tensor scores_fake = d_->forward(fake, labels);
    Tensor d_loss;
    switch (cfg_.loss_kind) {
        case LossKind::original:
            d_loss = loss_original(scores_real, scores_fake, cfg_.smooth_real, cfg_.smooth_fake)
                         .first;
            break;
        case LossKind::wgan_clip:
            d_loss = loss_critic(scores_real, scores_fake).first;
            break;
        case LossKind::wgan_gp:
            d_loss = add(loss_critic(scores_real, scores_fake).first,
                         gradient_penalty(*d_, real, fake, cfg_.lambda_gp, rng_train_, labels));
            break;
    }
    const double value = d_loss.scalar_value();
    if (!std::isfinite(value)) abort_with_dump("d_loss", value, indices);

    opt_d_->zero_grad();
    backward(d_loss, opt_d_->params());
    opt_d_->step();
    if (cfg_.loss_kind == LossKind::wgan_clip) clip_weights(*d_, cfg_.clip_c);
    last_d_loss_ = d_loss;
    return value;
}

double TrainRun::g_step() {
    const std::int64_t B = cfg_.batch_size;
    std::vector<std::int64_t> labels;
    if (cfg_.conditional) {
        // Draw labels from the empirical class distribution.
        labels.reserve(static_cast<std::size_t>(B));
        for (std::int64_t i = 0; i < B; ++i)
            labels.push_back(
                labels_[static_cast<std::size_t>(rng_train_.uniform_int(0, n_sentences_ - 1))]);
    }
    Tensor z = Tensor::randn({B, cfg_.noise_dim}, rng_train_);
    Tensor fake = g_->forward(z, labels, BnMode::train);
    Tensor scores = d_->forward(fake, labels);
    // Non-saturating objective: push fakes toward the real target. For the
    // Wasserstein modes the generator ascends the critic's score, expressed
    // here as descending its negation.
    Tensor g_loss = (cfg_.loss_kind == LossKind::original)
                        ? mean_all(softplus(neg(scores)))
                        : neg(mean_all(scores));
    const double value = g_loss.scalar_value();
    if (!std::isfinite(value)) abort_with_dump("g_loss", value, {});

    opt_g_->zero_grad();
    backward(g_loss, opt_g_->params());
    opt_g_->step();
    last_g_loss_ = g_loss;
    return value;
}

void TrainRun::abort_with_dump(const std::string& what, double value,
                               const std::vector<std::int64_t>& indices) {
    const std::string dir = checkpoint_dir_.empty() ? std::string(".") : checkpoint_dir_;
    const std::string path = dir + "/nan_dump_iter" + std::to_string(iterations_done_) + ".txt";
    std::ofstream out(path);
    out << "non-finite " << what << " = " << value << "\n";
    out << "iteration " << iterations_done_ << ", epoch " << epochs_done_ << ", loss_kind "
        << loss_kind_name(cfg_.loss_kind) << "\n";
    if (indices.empty()) {
        out << "generator step: batch was noise-driven, no corpus rows involved\n";
    } else {
        out << "corpus rows in the offending batch:\n";
        for (std::int64_t i : indices) {
            out << "  [" << i << "]";
            for (const auto& tok : corpus_.sentences[static_cast<std::size_t>(i)])
                out << ' ' << tok;
            out << "\n";
        }
    }
    out.flush();
    log_error("aborting: non-finite " + what + ", diagnostics in " + path);
    throw TrainAbort("non-finite " + what + " at iteration " + std::to_string(iterations_done_),
                     path);
}

void TrainRun::pretrain_discriminator(std::int64_t iters) {
    if (iters < 0) throw ConfigError("pretrain_discriminator: iters must be >= 0");
    if (pretrain_done_) return;
    for (std::int64_t it = 0; it < iters; ++it) {
        std::vector<std::int64_t> indices(static_cast<std::size_t>(cfg_.batch_size));
        for (auto& i : indices) i = rng_train_.uniform_int(0, n_sentences_ - 1);
        d_step(indices);
    }
    pretrain_done_ = true;
}

EpochRecord TrainRun::epoch_telemetry() {
    EpochRecord rec;
    rec.epoch = epochs_done_;
    const std::uint64_t seed =
        derive_seed(cfg_.seed, "telemetry") + static_cast<std::uint64_t>(epochs_done_);
    std::optional<std::int64_t> label;
    if (cfg_.conditional) label = 0;  // telemetry follows one class for comparability
    std::vector<std::int64_t> positions(static_cast<std::size_t>(cfg_.sentence_len));
    for (std::int64_t p = 0; p < cfg_.sentence_len; ++p) positions[static_cast<std::size_t>(p)] =
        p + 1;
    rec.cosine_by_position =
        track_cosine_by_position(*g_, table_, kTelemetryCount, positions, seed, label);
    for (const Tokens& t : sample_sentences(*g_, table_, kEpochSamples, label, seed))
        rec.samples.push_back(join_tokens(t));
    return rec;
}

TrainingLog TrainRun::train(std::int64_t stop_after_epoch) {
    TrainingLog log;
    if (!pretrain_done_) pretrain_discriminator(cfg_.pretrain_iters);
    const std::int64_t target =
        stop_after_epoch >= 0 ? std::min(stop_after_epoch, cfg_.epochs) : cfg_.epochs;
    while (epochs_done_ < target) {
        auto batches = epoch_minibatches(n_sentences_, cfg_.batch_size, rng_train_);
        const std::int64_t iters =
            static_cast<std::int64_t>(batches.size()) / cfg_.n_critic;
        std::size_t next_batch = 0;
        for (std::int64_t it = 0; it < iters; ++it) {
            const auto start = std::chrono::steady_clock::now();
            double d_sum = 0.0;
            for (std::int64_t c = 0; c < cfg_.n_critic; ++c)
                d_sum += d_step(batches[next_batch++]);
            const double g_value = g_step();
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          start)
                    .count();
            log.iterations.push_back({iterations_done_, epochs_done_,
                                      loss_kind_name(cfg_.loss_kind),
                                      d_sum / static_cast<double>(cfg_.n_critic), g_value,
                                      wall_ms});
            ++iterations_done_;
        }
        log.epochs.push_back(epoch_telemetry());
        ++epochs_done_;
        if (!checkpoint_dir_.empty() && checkpoint_every_ > 0 &&
            epochs_done_ % checkpoint_every_ == 0) {
            char name[48];
            std::snprintf(name, sizeof(name), "/ckpt_epoch_%04lld",
                          static_cast<long long>(epochs_done_));
            save_checkpoint(checkpoint_dir_ + name + ".bin");
        }
        log_info("epoch " + std::to_string(epochs_done_) + "/" + std::to_string(cfg_.epochs) +
                 " done (" + std::to_string(iterations_done_) + " iterations)");
    }
    if (!checkpoint_dir_.empty() && epochs_done_ == cfg_.epochs)
        save_checkpoint(checkpoint_dir_ + "/ckpt_final.bin");
    return log;
}

std::string log_to_jsonl(const TrainingLog& log, bool include_wall) {
    std::string out;
    for (const auto& r : log.iterations) {
        nlohmann::json j{{"kind", "iteration"}, {"iteration", r.iteration},
                         {"epoch", r.epoch},   {"loss_kind", r.loss_kind},
                         {"d_loss", r.d_loss}, {"g_loss", r.g_loss}};
        if (include_wall) j["wall_ms"] = r.wall_ms;
        out += j.dump();
        out += '\n';
    }
    for (const auto& e : log.epochs) {
        nlohmann::json j{{"kind", "epoch"},
                         {"epoch", e.epoch},
                         {"cosine_by_position", e.cosine_by_position},
                         {"samples", e.samples}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_log_jsonl(const TrainingLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_log_jsonl: cannot write " + path);
    out << log_to_jsonl(log);
    if (!out) throw IoError("write_log_jsonl: write failed for " + path);
}

void write_loss_csv(const TrainingLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_loss_csv: cannot write " + path);
    out << "iteration,d_loss,g_loss\n";
    char buf[80];
    for (const auto& r : log.iterations) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                      static_cast<long long>(r.iteration), r.d_loss, r.g_loss);
        out << buf;
    }
    if (!out) throw IoError("write_loss_csv: write failed for " + path);
}

}  // namespace gan2vec
