#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gan2vec/trainer.hpp"

namespace gan2vec {

namespace {

// Raw host-order scalars behind length-prefixed fields. Checkpoints are
// consumed on the machine that wrote them, so no byte-order translation.
constexpr char kMagic[8] = {'G', '2', 'V', 'C', 'K', '0', '0', '1'};

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw CheckpointError("checkpoint truncated");
}

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, &v, 1); }
void put_u64(std::ostream& out, std::uint64_t v) { put_bytes(out, &v, 8); }
void put_i64(std::ostream& out, std::int64_t v) { put_bytes(out, &v, 8); }
void put_f64(std::ostream& out, double v) { put_bytes(out, &v, 8); }

std::uint8_t get_u8(std::istream& in) {
    std::uint8_t v;
    get_bytes(in, &v, 1);
    return v;
}
std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v;
    get_bytes(in, &v, 8);
    return v;
}
std::int64_t get_i64(std::istream& in) {
    std::int64_t v;
    get_bytes(in, &v, 8);
    return v;
}
double get_f64(std::istream& in) {
    double v;
    get_bytes(in, &v, 8);
    return v;
}

void put_str(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    put_bytes(out, s.data(), s.size());
}

std::string get_str(std::istream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1u << 26)) throw CheckpointError("checkpoint string length implausible");
    std::string s(n, '\0');
    get_bytes(in, s.data(), n);
    return s;
}

void put_f64_vec(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    put_bytes(out, v.data(), v.size() * sizeof(double));
}

std::vector<double> get_f64_vec(std::istream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1u << 28)) throw CheckpointError("checkpoint vector length implausible");
    std::vector<double> v(n);
    get_bytes(in, v.data(), n * sizeof(double));
    return v;
}

void put_config(std::ostream& out, const GanConfig& c) {
    put_u8(out, static_cast<std::uint8_t>(c.loss_kind));
    put_f64(out, c.lr);
    put_f64(out, c.beta1);
    put_f64(out, c.beta2);
    put_f64(out, c.lambda_gp);
    put_f64(out, c.clip_c);
    put_f64(out, c.smooth_real);
    put_f64(out, c.smooth_fake);
    put_i64(out, c.pretrain_iters);
    put_i64(out, c.epochs);
    put_i64(out, c.n_critic);
    put_i64(out, c.batch_size);
    put_i64(out, c.sentence_len);
    put_i64(out, c.embed_dim);
    put_u8(out, c.conditional ? 1 : 0);
    put_i64(out, c.n_classes);
    put_u64(out, c.seed);
    put_i64(out, c.noise_dim);
    put_i64(out, c.base_channels);
    put_f64(out, c.leaky_slope);
    put_u8(out, c.batch_norm ? 1 : 0);
}

GanConfig get_config(std::istream& in) {
    GanConfig c;
    const std::uint8_t kind = get_u8(in);
    if (kind > 2) throw CheckpointError("checkpoint has unknown loss kind");
    c.loss_kind = static_cast<LossKind>(kind);
    c.lr = get_f64(in);
    c.beta1 = get_f64(in);
    c.beta2 = get_f64(in);
    c.lambda_gp = get_f64(in);
    c.clip_c = get_f64(in);
    c.smooth_real = get_f64(in);
    c.smooth_fake = get_f64(in);
    c.pretrain_iters = get_i64(in);
    c.epochs = get_i64(in);
    c.n_critic = get_i64(in);
    c.batch_size = get_i64(in);
    c.sentence_len = get_i64(in);
    c.embed_dim = get_i64(in);
    c.conditional = get_u8(in) != 0;
    c.n_classes = get_i64(in);
    c.seed = get_u64(in);
    c.noise_dim = get_i64(in);
    c.base_channels = get_i64(in);
    c.leaky_slope = get_f64(in);
    c.batch_norm = get_u8(in) != 0;
    return c;
}

void put_params(std::ostream& out, const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
        put_str(out, p.name);
        const Shape& shape = p.tensor.shape();
        put_u64(out, shape.size());
        for (std::int64_t d : shape) put_i64(out, d);
        put_f64_vec(out, p.tensor.values());
    }
}

void get_params(std::istream& in, const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
        const std::string name = get_str(in);
        if (name != p.name)
            throw CheckpointError("checkpoint parameter order mismatch: expected " + p.name +
                                  ", found " + name);
        Shape shape(get_u64(in));
        for (auto& d : shape) d = get_i64(in);
        if (shape != p.tensor.shape())
            throw CheckpointError("checkpoint shape mismatch for " + p.name);
        std::vector<double> values = get_f64_vec(in);
        if (values.size() != p.tensor.values().size())
            throw CheckpointError("checkpoint value count mismatch for " + p.name);
        // NamedParam holds a shared handle, so this writes the live tensor.
        Tensor t = p.tensor;
        t.mutable_values() = std::move(values);
    }
}

void put_adam(std::ostream& out, const AdamOptimizer& opt) {
    put_u64(out, opt.states().size());
    for (const AdamState& s : opt.states()) {
        put_i64(out, s.t);
        put_f64_vec(out, s.m);
        put_f64_vec(out, s.v);
    }
}

void get_adam(std::istream& in, AdamOptimizer& opt) {
    const std::uint64_t count = get_u64(in);
    if (count != opt.states().size())
        throw CheckpointError("checkpoint optimizer state count mismatch");
    for (AdamState& s : opt.states()) {
        s.t = get_i64(in);
        s.m = get_f64_vec(in);
        s.v = get_f64_vec(in);
    }
}

}  // namespace

// Friend of TrainRun; keeps field-by-field layout knowledge in one place.
struct CheckpointCodec {
    static void save(const TrainRun& run, std::ostream& out) {
        put_bytes(out, kMagic, sizeof(kMagic));
        put_config(out, run.cfg_);
        put_i64(out, run.iterations_done_);
        put_i64(out, run.epochs_done_);
        put_u8(out, run.pretrain_done_ ? 1 : 0);
        put_str(out, run.rng_train_.save_state());
        std::vector<NamedParam> params = run.g_->params();
        for (const auto& p : run.d_->params()) params.push_back(p);
        put_u64(out, params.size());
        put_params(out, params);
        if (run.cfg_.batch_norm) {
            put_f64_vec(out, run.g_->bn().stats.mean);
            put_f64_vec(out, run.g_->bn().stats.var);
        }
        put_adam(out, *run.opt_g_);
        put_adam(out, *run.opt_d_);
    }

    static TrainRun load(std::istream& in, const EmbeddingTable& table, const Corpus& corpus,
                         std::string checkpoint_dir, std::int64_t checkpoint_every) {
        char magic[sizeof(kMagic)];
        get_bytes(in, magic, sizeof(magic));
        if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
            throw CheckpointError("not a checkpoint file (bad magic)");
        GanConfig cfg = get_config(in);

        // Rebuild the run from scratch, then overwrite every piece of
        // mutable state the file carries.
        TrainRun run(cfg, table, corpus, std::move(checkpoint_dir), checkpoint_every);
        run.iterations_done_ = get_i64(in);
        run.epochs_done_ = get_i64(in);
        run.pretrain_done_ = get_u8(in) != 0;
        run.rng_train_.load_state(get_str(in));

        std::vector<NamedParam> params = run.g_->params();
        for (const auto& p : run.d_->params()) params.push_back(p);
        if (get_u64(in) != params.size())
            throw CheckpointError("checkpoint parameter count mismatch");
        get_params(in, params);
        if (run.cfg_.batch_norm) {
            BatchNormStats& stats = run.g_->bn().stats;
            stats.mean = get_f64_vec(in);
            stats.var = get_f64_vec(in);
            const std::size_t want = static_cast<std::size_t>(run.cfg_.base_channels);
            if (!stats.mean.empty() &&
                (stats.mean.size() != want || stats.var.size() != want))
                throw CheckpointError("checkpoint normalization stats have wrong width");
        }
        get_adam(in, *run.opt_g_);
        get_adam(in, *run.opt_d_);
        if (in.peek() != std::char_traits<char>::eof())
            throw CheckpointError("checkpoint has trailing bytes");
        return run;
    }
};

GeneratorSnapshot load_generator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_generator: cannot open " + path);
    char magic[sizeof(kMagic)];
    get_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a checkpoint file (bad magic)");
    GanConfig cfg = get_config(in);
    cfg.validate();
    const std::int64_t iterations = get_i64(in);
    const std::int64_t epochs = get_i64(in);
    get_u8(in);     // pretrain flag: training-only state
    get_str(in);    // rng stream: training-only state

    Rng init(cfg.seed, "init");
    Generator g(cfg, init);
    std::vector<NamedParam> g_params = g.params();
    const std::uint64_t count = get_u64(in);
    if (count < g_params.size())
        throw CheckpointError("checkpoint parameter count mismatch");
    get_params(in, g_params);
    // The discriminator block: validate the structure, drop the values.
    for (std::uint64_t i = g_params.size(); i < count; ++i) {
        get_str(in);
        const std::uint64_t ndim = get_u64(in);
        for (std::uint64_t d = 0; d < ndim; ++d) get_i64(in);
        get_f64_vec(in);
    }
    if (cfg.batch_norm) {
        g.bn().stats.mean = get_f64_vec(in);
        g.bn().stats.var = get_f64_vec(in);
    }
    return GeneratorSnapshot{cfg, iterations, epochs, std::move(g)};
}

void TrainRun::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot write " + path);
    CheckpointCodec::save(*this, out);
    out.flush();
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

TrainRun TrainRun::load_checkpoint(const std::string& path, const EmbeddingTable& table,
                                   const Corpus& corpus, std::string checkpoint_dir,
                                   std::int64_t checkpoint_every) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    return CheckpointCodec::load(in, table, corpus, std::move(checkpoint_dir), checkpoint_every);
}

}  // namespace gan2vec
