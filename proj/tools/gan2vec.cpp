// gan2vec: train word embeddings, train the adversarial generator over them,
// sample sentences, and score them. Subcommands: embed, train, sample, eval,
// curves. Config files and manifests are flat key=value text; flags override
// file values. Exit codes: 0 success, 1 I/O or runtime failure, 2 validation.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "gan2vec/bleu.hpp"
#include "gan2vec/corpus.hpp"
#include "gan2vec/embedding.hpp"
#include "gan2vec/errors.hpp"
#include "gan2vec/gan.hpp"
#include "gan2vec/log.hpp"
#include "gan2vec/trainer.hpp"

using namespace gan2vec;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---- key=value config files -----------------------------------------------

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line has no '='", lineno);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("config line has an empty key", lineno);
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
            throw ParseError("duplicate config key '" + key + "'", lineno);
    }
    return kv;
}

void write_kv_file(const std::map<std::string, std::string>& kv, const std::string& path,
                   const std::string& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path);
    out << "# " << header << "\n";
    for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
    if (!out) throw IoError("manifest write failed for " + path);
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    }
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_i64(std::int64_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

TokenizerMode parse_tokenizer(const std::string& value) {
    if (value == "whitespace") return TokenizerMode::whitespace;
    if (value == "treebank") return TokenizerMode::treebank;
    throw ConfigError("tokenizer must be whitespace or treebank, got '" + value + "'");
}

LengthMode parse_length_mode(const std::string& value) {
    if (value == "drop") return LengthMode::drop;
    if (value == "pad") return LengthMode::pad;
    throw ConfigError("length_mode must be drop or pad, got '" + value + "'");
}

// The spec'd flag spelling uses hyphens; the library names use underscores.
std::string normalize_loss_name(std::string name) {
    for (char& c : name)
        if (c == '-') c = '_';
    return name;
}

// ---- train configuration ----------------------------------------------------

// Everything a training run depends on, file paths included. The manifest is
// exactly this, fully resolved; re-running `train --config manifest.cfg`
// reproduces the run bit for bit.
struct TrainSpec {
    std::string corpus;
    std::string embedding;
    std::string out_dir;
    GanConfig gan;
    std::string embed_dim_key;  // empty = derive from the embedding file
    std::string tokenizer = "whitespace";
    bool boundary = true;
    std::string start_token = "<s>";
    std::string end_token = "</s>";
    std::string length_mode = "drop";
    std::string pad_token = ",";
    bool balance = true;
    std::string unk_token = "<unk>";
    std::int64_t checkpoint_every = 0;
};

std::map<std::string, std::string> train_spec_to_map(const TrainSpec& s) {
    std::map<std::string, std::string> kv;
    kv["corpus"] = s.corpus;
    kv["embedding"] = s.embedding;
    kv["out_dir"] = s.out_dir;
    kv["loss"] = loss_kind_name(s.gan.loss_kind);
    kv["lr"] = fmt_f64(s.gan.lr);
    kv["beta1"] = fmt_f64(s.gan.beta1);
    kv["beta2"] = fmt_f64(s.gan.beta2);
    kv["lambda_gp"] = fmt_f64(s.gan.lambda_gp);
    kv["clip_c"] = fmt_f64(s.gan.clip_c);
    kv["smooth_real"] = fmt_f64(s.gan.smooth_real);
    kv["smooth_fake"] = fmt_f64(s.gan.smooth_fake);
    kv["pretrain_iters"] = fmt_i64(s.gan.pretrain_iters);
    kv["epochs"] = fmt_i64(s.gan.epochs);
    kv["n_critic"] = fmt_i64(s.gan.n_critic);
    kv["batch_size"] = fmt_i64(s.gan.batch_size);
    kv["sentence_len"] = fmt_i64(s.gan.sentence_len);
    kv["embed_dim"] = s.embed_dim_key;
    kv["conditional"] = fmt_bool(s.gan.conditional);
    kv["n_classes"] = fmt_i64(s.gan.n_classes);
    kv["seed"] = std::to_string(s.gan.seed);
    kv["noise_dim"] = fmt_i64(s.gan.noise_dim);
    kv["base_channels"] = fmt_i64(s.gan.base_channels);
    kv["leaky_slope"] = fmt_f64(s.gan.leaky_slope);
    kv["batch_norm"] = fmt_bool(s.gan.batch_norm);
    kv["tokenizer"] = s.tokenizer;
    kv["boundary"] = fmt_bool(s.boundary);
    kv["start_token"] = s.start_token;
    kv["end_token"] = s.end_token;
    kv["length_mode"] = s.length_mode;
    kv["pad_token"] = s.pad_token;
    kv["balance"] = fmt_bool(s.balance);
    kv["unk_token"] = s.unk_token;
    kv["checkpoint_every"] = fmt_i64(s.checkpoint_every);
    kv["version"] = kVersion;
    return kv;
}

TrainSpec train_spec_from_map(const std::map<std::string, std::string>& kv) {
    TrainSpec s;
    for (const auto& [key, value] : kv) {
        if (key == "corpus") s.corpus = value;
        else if (key == "embedding") s.embedding = value;
        else if (key == "out_dir") s.out_dir = value;
        else if (key == "loss") s.gan.loss_kind = parse_loss_kind(normalize_loss_name(value));
        else if (key == "lr") s.gan.lr = parse_f64(key, value);
        else if (key == "beta1") s.gan.beta1 = parse_f64(key, value);
        else if (key == "beta2") s.gan.beta2 = parse_f64(key, value);
        else if (key == "lambda_gp") s.gan.lambda_gp = parse_f64(key, value);
        else if (key == "clip_c") s.gan.clip_c = parse_f64(key, value);
        else if (key == "smooth_real") s.gan.smooth_real = parse_f64(key, value);
        else if (key == "smooth_fake") s.gan.smooth_fake = parse_f64(key, value);
        else if (key == "pretrain_iters") s.gan.pretrain_iters = parse_i64(key, value);
        else if (key == "epochs") s.gan.epochs = parse_i64(key, value);
        else if (key == "n_critic") s.gan.n_critic = parse_i64(key, value);
        else if (key == "batch_size") s.gan.batch_size = parse_i64(key, value);
        else if (key == "sentence_len") s.gan.sentence_len = parse_i64(key, value);
        else if (key == "embed_dim") s.embed_dim_key = value;
        else if (key == "conditional") s.gan.conditional = parse_bool(key, value);
        else if (key == "n_classes") s.gan.n_classes = parse_i64(key, value);
        else if (key == "seed") s.gan.seed = parse_u64(key, value);
        else if (key == "noise_dim") s.gan.noise_dim = parse_i64(key, value);
        else if (key == "base_channels") s.gan.base_channels = parse_i64(key, value);
        else if (key == "leaky_slope") s.gan.leaky_slope = parse_f64(key, value);
        else if (key == "batch_norm") s.gan.batch_norm = parse_bool(key, value);
        else if (key == "tokenizer") {
            parse_tokenizer(value);  // validate eagerly
            s.tokenizer = value;
        }
        else if (key == "boundary") s.boundary = parse_bool(key, value);
        else if (key == "start_token") s.start_token = value;
        else if (key == "end_token") s.end_token = value;
        else if (key == "length_mode") {
            parse_length_mode(value);  // validate eagerly
            s.length_mode = value;
        }
        else if (key == "pad_token") s.pad_token = value;
        else if (key == "balance") s.balance = parse_bool(key, value);
        else if (key == "unk_token") s.unk_token = value;
        else if (key == "checkpoint_every") s.checkpoint_every = parse_i64(key, value);
        else if (key == "version") { /* recorded for provenance, not consumed */ }
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return s;
}

// defaults <- config file <- flags, rightmost wins.
std::map<std::string, std::string> merge_config(
    const std::map<std::string, std::string>& defaults, const std::string& config_path,
    const std::map<std::string, std::string>& flags) {
    std::map<std::string, std::string> merged = defaults;
    if (!config_path.empty()) {
        for (const auto& [key, value] : read_kv_file(config_path)) {
            if (!defaults.count(key)) throw ConfigError("unknown config key '" + key + "'");
            merged[key] = value;
        }
    }
    for (const auto& [key, value] : flags) merged[key] = value;
    return merged;
}

std::unordered_set<std::string> vocab_set(const EmbeddingTable& table) {
    return {table.vocab().begin(), table.vocab().end()};
}

std::string join_tokens(const Tokens& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// ---- embed ------------------------------------------------------------------

struct EmbedArgs {
    std::string config_path;
    std::map<std::string, std::string> flags;
};

std::map<std::string, std::string> embed_defaults() {
    W2vConfig w;
    std::map<std::string, std::string> kv;
    kv["corpus"] = "";
    kv["out"] = "";
    kv["dim"] = fmt_i64(w.dim);
    kv["window"] = fmt_i64(w.window);
    kv["negatives"] = fmt_i64(w.negatives);
    kv["epochs"] = fmt_i64(w.epochs);
    kv["lr"] = fmt_f64(w.lr);
    kv["min_count"] = fmt_i64(w.min_count);
    kv["seed"] = std::to_string(w.seed);
    kv["tokenizer"] = "whitespace";
    kv["boundary"] = "true";
    kv["start_token"] = "<s>";
    kv["end_token"] = "</s>";
    kv["version"] = kVersion;
    return kv;
}

int cmd_embed(const EmbedArgs& args) {
    auto kv = merge_config(embed_defaults(), args.config_path, args.flags);
    kv["version"] = kVersion;
    if (kv["corpus"].empty()) throw ConfigError("embed: a corpus path is required");
    if (kv["out"].empty()) throw ConfigError("embed: an output path is required");

    W2vConfig w;
    w.dim = parse_i64("dim", kv["dim"]);
    w.window = parse_i64("window", kv["window"]);
    w.negatives = parse_i64("negatives", kv["negatives"]);
    w.epochs = parse_i64("epochs", kv["epochs"]);
    w.lr = parse_f64("lr", kv["lr"]);
    w.min_count = parse_i64("min_count", kv["min_count"]);
    w.seed = parse_u64("seed", kv["seed"]);

    Corpus corpus = load_corpus(kv["corpus"], parse_tokenizer(kv["tokenizer"]));
    if (parse_bool("boundary", kv["boundary"]))
        add_boundary_tokens(corpus, kv["start_token"], kv["end_token"]);

    EmbeddingTable table = train_word2vec(corpus, w);
    save_table(table, kv["out"]);
    write_kv_file(kv, kv["out"] + ".manifest", "gan2vec embed manifest");

    std::int64_t tokens = 0;
    for (const Tokens& s : corpus.sentences) tokens += static_cast<std::int64_t>(s.size());
    std::cout << "vocab=" << table.size() << " dim=" << table.dim() << " tokens=" << tokens
              << "\n";
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::map<std::string, std::string> flags;
    bool n_critic_given = false;
};

int cmd_train(const TrainArgs& args) {
    auto kv = merge_config(train_spec_to_map(TrainSpec{}), args.config_path, args.flags);
    kv["version"] = kVersion;
    const bool n_critic_resolved =
        args.n_critic_given ||
        (!args.config_path.empty() && read_kv_file(args.config_path).count("n_critic"));

    TrainSpec spec = train_spec_from_map(kv);
    if (spec.corpus.empty()) throw ConfigError("train: a corpus path is required");
    if (spec.embedding.empty()) throw ConfigError("train: an embedding path is required");
    if (spec.out_dir.empty()) throw ConfigError("train: an output directory is required");
    if (!n_critic_resolved) spec.gan.apply_loss_defaults();

    EmbeddingTable table = load_table(spec.embedding);
    if (!spec.embed_dim_key.empty() &&
        parse_i64("embed_dim", spec.embed_dim_key) != table.dim())
        throw ConfigError("train: config says embed_dim=" + spec.embed_dim_key + " but " +
                          spec.embedding + " has dimension " + std::to_string(table.dim()));
    spec.gan.embed_dim = table.dim();
    spec.gan.validate();

    // Pipeline order: boundaries first, then labels (so truncation cannot
    // erase a sentence's question mark after it was judged), then the length
    // policy, class balancing, and out-of-vocabulary substitution.
    Corpus corpus = load_corpus(spec.corpus, parse_tokenizer(spec.tokenizer));
    if (spec.boundary) add_boundary_tokens(corpus, spec.start_token, spec.end_token);
    if (spec.gan.conditional) label_by_question_mark(corpus);
    apply_length_policy(corpus, spec.gan.sentence_len, parse_length_mode(spec.length_mode),
                        spec.pad_token);
    if (spec.gan.conditional && spec.balance) {
        Rng balance_rng(spec.gan.seed, "balance");
        balance_labels(corpus, balance_rng);
    }
    const std::int64_t replaced = substitute_unknown(corpus, vocab_set(table), spec.unk_token);
    if (replaced > 0) {
        if (!table.contains(spec.unk_token))
            throw ConfigError("train: corpus has " + std::to_string(replaced) +
                              " out-of-vocabulary tokens but '" + spec.unk_token +
                              "' is not in the embedding vocabulary");
        log_info("replaced " + std::to_string(replaced) + " out-of-vocabulary tokens with " +
                 spec.unk_token);
    }
    log_info("corpus ready: " + std::to_string(corpus.sentences.size()) + " sentences of length " +
             std::to_string(spec.gan.sentence_len));

    std::filesystem::create_directories(spec.out_dir);
    // The manifest is written before training starts and is itself a valid
    // --config file; embed_dim is recorded fully resolved.
    auto manifest = train_spec_to_map(spec);
    manifest["embed_dim"] = fmt_i64(spec.gan.embed_dim);
    write_kv_file(manifest, spec.out_dir + "/manifest.cfg", "gan2vec train manifest");

    TrainRun run(spec.gan, table, corpus, spec.out_dir, spec.checkpoint_every);
    TrainingLog log = run.train();

    write_log_jsonl(log, spec.out_dir + "/log.jsonl");
    write_loss_csv(log, spec.out_dir + "/loss.csv");
    std::ofstream samples(spec.out_dir + "/samples.txt");
    if (!samples) throw IoError("cannot write " + spec.out_dir + "/samples.txt");
    for (const EpochRecord& e : log.epochs)
        for (const std::string& s : e.samples) samples << s << "\n";
    samples.close();

    std::cout << "trained " << run.epochs_done() << " epochs, " << run.iterations_done()
              << " iterations";
    if (!log.iterations.empty())
        std::cout << "; final d_loss=" << log.iterations.back().d_loss
                  << " g_loss=" << log.iterations.back().g_loss;
    std::cout << "; outputs in " << spec.out_dir << "\n";
    return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
    std::string checkpoint;
    std::string embedding;
    std::int64_t count = 10;
    std::string label;  // empty, "question", "sentence", or an integer
    std::uint64_t seed = 1;
    std::string out_path;
    bool with_similarity = false;
};

std::optional<std::int64_t> parse_label(const std::string& label) {
    if (label.empty()) return std::nullopt;
    // The question-mark labeler's class names, then raw ids.
    if (label == "sentence") return 0;
    if (label == "question") return 1;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(label, &used);
        if (used != label.size()) throw std::invalid_argument(label);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("--label expects 'question', 'sentence', or a class id, got '" +
                          label + "'");
    }
}

int cmd_sample(const SampleArgs& args) {
    GeneratorSnapshot snap = load_generator(args.checkpoint);
    EmbeddingTable table = load_table(args.embedding);
    if (table.dim() != snap.config.embed_dim)
        throw ConfigError("sample: embedding dimension " + std::to_string(table.dim()) +
                          " does not match the checkpoint's " +
                          std::to_string(snap.config.embed_dim));
    const std::optional<std::int64_t> label = parse_label(args.label);

    std::ofstream file;
    if (!args.out_path.empty()) {
        file.open(args.out_path);
        if (!file) throw IoError("cannot write " + args.out_path);
    }
    std::ostream& out = args.out_path.empty() ? std::cout : file;

    if (!args.with_similarity) {
        for (const Tokens& s : sample_sentences(snap.generator, table, args.count, label,
                                                args.seed))
            out << join_tokens(s) << "\n";
    } else {
        Tensor mats = sample_matrices(snap.generator, args.count, label, args.seed);
        const std::int64_t L = snap.config.sentence_len, dim = snap.config.embed_dim;
        SentenceMatrix m;
        m.len = L;
        m.dim = dim;
        for (std::int64_t i = 0; i < args.count; ++i) {
            const double* base = mats.values().data() + i * L * dim;
            m.data.assign(base, base + L * dim);
            auto [tokens, sims] = decode_matrix(table, m);
            out << join_tokens(tokens) << "\t";
            for (std::size_t p = 0; p < sims.size(); ++p) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), "%.4f", sims[p]);
                out << (p ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("sample: write failed");
    return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
    std::string candidates;
    std::string references;
    int bleu_n = 2;
    bool use_self_bleu = false;
    std::string smoothing = "none";
    std::string tokenizer = "whitespace";
    std::string out_path;
};

int cmd_eval(const EvalArgs& args) {
    const TokenizerMode tok = parse_tokenizer(args.tokenizer);
    Smoothing smoothing;
    if (args.smoothing == "none") smoothing = Smoothing::none;
    else if (args.smoothing == "epsilon") smoothing = Smoothing::epsilon;
    else throw ConfigError("--smoothing must be none or epsilon, got '" + args.smoothing + "'");
    if (args.bleu_n < 1) throw ConfigError("--bleu-n must be >= 1");

    const std::vector<Tokens> candidates = load_corpus(args.candidates, tok).sentences;

    nlohmann::json protocol{{"smoothing", args.smoothing},
                            {"tokenizer", args.tokenizer},
                            {"candidate_count", candidates.size()}};
    double score = 0.0;
    std::string metric;
    if (args.use_self_bleu) {
        metric = "self_bleu";
        score = self_bleu(candidates, args.bleu_n, smoothing);
        // Leave-one-out: every sentence is judged against all the others.
        protocol["reference_count"] = candidates.size() - 1;
    } else {
        metric = "bleu";
        if (args.references.empty())
            throw ConfigError("eval: --references is required unless --self-bleu is given");
        const std::vector<Tokens> references = load_corpus(args.references, tok).sentences;
        score = corpus_bleu(candidates, references, args.bleu_n, smoothing);
        protocol["reference_count"] = references.size();
    }

    nlohmann::json report{
        {"metric", metric}, {"n", args.bleu_n}, {"score", score}, {"protocol", protocol}};
    const std::string text = report.dump() + "\n";
    std::cout << text;
    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path);
        if (!out) throw IoError("cannot write " + args.out_path);
        out << text;
        if (!out) throw IoError("eval: write failed for " + args.out_path);
    }
    return 0;
}

// ---- curves -------------------------------------------------------------------

struct CurvesArgs {
    std::string log_path;
    std::string loss_out;
    std::string cosine_out;
};

int cmd_curves(const CurvesArgs& args) {
    std::ifstream in(args.log_path);
    if (!in) throw IoError("cannot open log " + args.log_path);

    TrainingLog log;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad log line: ") + e.what(), lineno);
        }
        try {
            const std::string kind = j.at("kind");
            if (kind == "iteration") {
                IterationRecord r;
                r.iteration = j.at("iteration");
                r.d_loss = j.at("d_loss");
                r.g_loss = j.at("g_loss");
                log.iterations.push_back(r);
            } else if (kind == "epoch") {
                EpochRecord r;
                r.epoch = j.at("epoch");
                r.cosine_by_position = j.at("cosine_by_position").get<std::vector<double>>();
                log.epochs.push_back(r);
            } else {
                throw ParseError("unknown record kind '" + kind + "'", lineno);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad log record: ") + e.what(), lineno);
        }
    }

    write_loss_csv(log, args.loss_out);

    std::ofstream out(args.cosine_out);
    if (!out) throw IoError("cannot write " + args.cosine_out);
    out << "epoch";
    if (!log.epochs.empty()) {
        const std::size_t width = log.epochs.front().cosine_by_position.size();
        for (std::size_t p = 1; p <= width; ++p) out << ",pos" << p;
        out << "\n";
        for (const EpochRecord& e : log.epochs) {
            if (e.cosine_by_position.size() != width)
                throw ConfigError("log epochs disagree on position count");
            out << e.epoch;
            for (double c : e.cosine_by_position) out << ',' << fmt_f64(c);
            out << "\n";
        }
    } else {
        out << "\n";
    }
    if (!out) throw IoError("curves: write failed for " + args.cosine_out);
    return 0;
}

// ---- flag plumbing -------------------------------------------------------------

// Records a flag's final value into the override map only when the user
// actually passed it, so config-file values survive untouched flags.
template <typename T, typename Format>
void capture(std::vector<std::function<void()>>& hooks, CLI::Option* opt,
             std::map<std::string, std::string>& flags, const std::string& key, const T& var,
             Format format) {
    hooks.push_back([opt, &flags, key, &var, format] {
        if (opt->count() > 0) flags[key] = format(var);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial sentence generation over word embeddings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::vector<std::function<void()>> hooks;
    auto str_id = [](const std::string& s) { return s; };
    auto int_fmt = [](const std::int64_t& v) { return fmt_i64(v); };
    auto uint_fmt = [](const std::uint64_t& v) { return std::to_string(v); };
    auto f64_fmt = [](const double& v) { return fmt_f64(v); };
    auto bool_fmt = [](const bool& v) { return fmt_bool(v); };

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "train word embeddings on a corpus");
    EmbedArgs embed_args;
    embed->add_option("--config", embed_args.config_path, "key=value config file");
    {
        std::map<std::string, std::string>& flags = embed_args.flags;
        static std::string corpus, out, tokenizer, start_token, end_token;
        static std::int64_t dim = 64, window = 5, negatives = 5, epochs = 5, min_count = 1;
        static double lr = 0.025;
        static std::uint64_t seed = 1;
        static bool boundary = true;
        capture(hooks, embed->add_option("--corpus", corpus, "training text, one sentence per line"),
                flags, "corpus", corpus, str_id);
        capture(hooks, embed->add_option("--out", out, "embedding file to write"), flags, "out",
                out, str_id);
        capture(hooks, embed->add_option("--dim", dim, "embedding width"), flags, "dim", dim,
                int_fmt);
        capture(hooks, embed->add_option("--window", window, "context window"), flags, "window",
                window, int_fmt);
        capture(hooks, embed->add_option("--negatives", negatives, "negative samples per pair"),
                flags, "negatives", negatives, int_fmt);
        capture(hooks, embed->add_option("--epochs", epochs, "passes over the corpus"), flags,
                "epochs", epochs, int_fmt);
        capture(hooks, embed->add_option("--min-count", min_count, "discard rarer words"), flags,
                "min_count", min_count, int_fmt);
        capture(hooks, embed->add_option("--lr", lr, "initial learning rate"), flags, "lr", lr,
                f64_fmt);
        capture(hooks, embed->add_option("--seed", seed, "random seed"), flags, "seed", seed,
                uint_fmt);
        capture(hooks,
                embed->add_option("--tokenizer", tokenizer, "whitespace or treebank"), flags,
                "tokenizer", tokenizer, str_id);
        capture(hooks, embed->add_flag("--boundary,!--no-boundary", boundary,
                                       "wrap sentences in boundary markers"),
                flags, "boundary", boundary, bool_fmt);
        capture(hooks, embed->add_option("--start-token", start_token, "sentence start marker"),
                flags, "start_token", start_token, str_id);
        capture(hooks, embed->add_option("--end-token", end_token, "sentence end marker"), flags,
                "end_token", end_token, str_id);
    }

    // ---- train ----
    auto* train = app.add_subcommand("train", "train the adversarial generator");
    TrainArgs train_args;
    train->add_option("--config", train_args.config_path, "key=value config file");
    CLI::Option* n_critic_opt = nullptr;
    {
        std::map<std::string, std::string>& flags = train_args.flags;
        static std::string corpus, embedding, out_dir, loss, tokenizer, start_token, end_token,
            length_mode, pad_token, unk_token;
        static std::int64_t pretrain_iters = 50, epochs = 100, n_critic = 1, batch_size = 64,
                            sentence_len = 7, embed_dim = 64, n_classes = 2, noise_dim = 100,
                            base_channels = 64, checkpoint_every = 0;
        static double lr = 1e-4, beta1 = 0.5, beta2 = 0.999, lambda_gp = 10.0, clip_c = 0.01,
                      smooth_real = 0.9, smooth_fake = 0.1, leaky_slope = 0.2;
        static std::uint64_t seed = 1;
        static bool conditional = false, batch_norm = false, boundary = true, balance = true;
        capture(hooks, train->add_option("--corpus", corpus, "training text"), flags, "corpus",
                corpus, str_id);
        capture(hooks, train->add_option("--embedding", embedding, "embedding file from 'embed'"),
                flags, "embedding", embedding, str_id);
        capture(hooks, train->add_option("--out-dir", out_dir, "run directory for all outputs"),
                flags, "out_dir", out_dir, str_id);
        capture(hooks,
                train->add_option("--loss", loss, "original, wgan-clip, or wgan-gp"), flags,
                "loss", loss, str_id);
        capture(hooks, train->add_option("--lr", lr, "Adam learning rate"), flags, "lr", lr,
                f64_fmt);
        capture(hooks, train->add_option("--beta1", beta1, "Adam beta1"), flags, "beta1", beta1,
                f64_fmt);
        capture(hooks, train->add_option("--beta2", beta2, "Adam beta2"), flags, "beta2", beta2,
                f64_fmt);
        capture(hooks, train->add_option("--lambda-gp", lambda_gp, "gradient-penalty weight"),
                flags, "lambda_gp", lambda_gp, f64_fmt);
        capture(hooks, train->add_option("--clip-c", clip_c, "weight-clipping bound"), flags,
                "clip_c", clip_c, f64_fmt);
        capture(hooks, train->add_option("--smooth-real", smooth_real, "real-label target"),
                flags, "smooth_real", smooth_real, f64_fmt);
        capture(hooks, train->add_option("--smooth-fake", smooth_fake, "fake-label target"),
                flags, "smooth_fake", smooth_fake, f64_fmt);
        capture(hooks,
                train->add_option("--pretrain-iters", pretrain_iters, "discriminator warmup"),
                flags, "pretrain_iters", pretrain_iters, int_fmt);
        capture(hooks, train->add_option("--epochs", epochs, "training epochs"), flags, "epochs",
                epochs, int_fmt);
        n_critic_opt = train->add_option("--n-critic", n_critic, "D updates per G update");
        capture(hooks, n_critic_opt, flags, "n_critic", n_critic, int_fmt);
        capture(hooks, train->add_option("--batch-size", batch_size, "minibatch size"), flags,
                "batch_size", batch_size, int_fmt);
        capture(hooks, train->add_option("--sentence-len", sentence_len, "tokens per sentence"),
                flags, "sentence_len", sentence_len, int_fmt);
        capture(hooks,
                train->add_option("--embed-dim", embed_dim,
                                  "expected embedding width (checked against the file)"),
                flags, "embed_dim", embed_dim, int_fmt);
        capture(hooks,
                train->add_flag("--conditional,!--no-conditional", conditional,
                                "condition on question/sentence labels"),
                flags, "conditional", conditional, bool_fmt);
        capture(hooks, train->add_option("--n-classes", n_classes, "label classes"), flags,
                "n_classes", n_classes, int_fmt);
        capture(hooks, train->add_option("--seed", seed, "master random seed"), flags, "seed",
                seed, uint_fmt);
        capture(hooks, train->add_option("--noise-dim", noise_dim, "generator noise width"),
                flags, "noise_dim", noise_dim, int_fmt);
        capture(hooks,
                train->add_option("--base-channels", base_channels, "first conv width"), flags,
                "base_channels", base_channels, int_fmt);
        capture(hooks, train->add_option("--leaky-slope", leaky_slope, "LeakyReLU slope"), flags,
                "leaky_slope", leaky_slope, f64_fmt);
        capture(hooks,
                train->add_flag("--batch-norm-g,!--no-batch-norm-g", batch_norm,
                                "batch norm after the generator's first deconv"),
                flags, "batch_norm", batch_norm, bool_fmt);
        capture(hooks, train->add_option("--tokenizer", tokenizer, "whitespace or treebank"),
                flags, "tokenizer", tokenizer, str_id);
        capture(hooks,
                train->add_flag("--boundary,!--no-boundary", boundary,
                                "wrap sentences in boundary markers"),
                flags, "boundary", boundary, bool_fmt);
        capture(hooks, train->add_option("--start-token", start_token, "sentence start marker"),
                flags, "start_token", start_token, str_id);
        capture(hooks, train->add_option("--end-token", end_token, "sentence end marker"), flags,
                "end_token", end_token, str_id);
        capture(hooks,
                train->add_option("--length-mode", length_mode, "drop or pad to sentence-len"),
                flags, "length_mode", length_mode, str_id);
        capture(hooks, train->add_option("--pad-token", pad_token, "padding token"), flags,
                "pad_token", pad_token, str_id);
        capture(hooks,
                train->add_flag("--balance,!--no-balance", balance,
                                "subsample the majority class (conditional runs)"),
                flags, "balance", balance, bool_fmt);
        capture(hooks, train->add_option("--unk-token", unk_token, "out-of-vocabulary stand-in"),
                flags, "unk_token", unk_token, str_id);
        capture(hooks,
                train->add_option("--checkpoint-every", checkpoint_every,
                                  "checkpoint cadence in epochs (0 = final only)"),
                flags, "checkpoint_every", checkpoint_every, int_fmt);
    }

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "decode sentences from a checkpoint");
    SampleArgs sample_args;
    sample->add_option("--checkpoint", sample_args.checkpoint, "checkpoint file")->required();
    sample->add_option("--embedding", sample_args.embedding, "embedding file for decoding")
        ->required();
    sample->add_option("-n,--count", sample_args.count, "sentences to generate");
    sample->add_option("--label", sample_args.label,
                       "class for conditional checkpoints: question, sentence, or an id");
    sample->add_option("--seed", sample_args.seed, "sampling seed");
    sample->add_option("--out", sample_args.out_path, "write here instead of stdout");
    sample->add_flag("--with-similarity", sample_args.with_similarity,
                     "append per-position decode cosine values");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "score generated sentences");
    EvalArgs eval_args;
    eval->add_option("--candidates", eval_args.candidates, "sentences to score")->required();
    eval->add_option("--references", eval_args.references, "reference corpus");
    eval->add_option("--bleu-n", eval_args.bleu_n, "max n-gram order");
    eval->add_flag("--self-bleu", eval_args.use_self_bleu,
                   "leave-one-out diversity instead of reference BLEU");
    eval->add_option("--smoothing", eval_args.smoothing, "none or epsilon");
    eval->add_option("--tokenizer", eval_args.tokenizer, "whitespace or treebank");
    eval->add_option("--out", eval_args.out_path, "also write the JSON report here");

    // ---- curves ----
    auto* curves = app.add_subcommand("curves", "export plot-ready CSVs from a JSONL log");
    CurvesArgs curves_args;
    curves->add_option("--log", curves_args.log_path, "log.jsonl from a training run")
        ->required();
    curves->add_option("--out", curves_args.loss_out, "loss CSV to write")->required();
    curves->add_option("--cosine-out", curves_args.cosine_out,
                       "per-epoch cosine-by-position CSV to write")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return 2;
    }
    for (const auto& hook : hooks) hook();
    train_args.n_critic_given = n_critic_opt->count() > 0;

    try {
        if (app.got_subcommand(embed)) return cmd_embed(embed_args);
        if (app.got_subcommand(train)) return cmd_train(train_args);
        if (app.got_subcommand(sample)) return cmd_sample(sample_args);
        if (app.got_subcommand(eval)) return cmd_eval(eval_args);
        if (app.got_subcommand(curves)) return cmd_curves(curves_args);
    } catch (const ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const CorpusError& e) {
        log_error(e.what());
        return 2;
    } catch (const ParseError& e) {
        log_error(e.what());
        return 2;
    } catch (const DimensionError& e) {
        log_error(e.what());
        return 2;
    } catch (const LookupError& e) {
        log_error(e.what());
        return 2;
    } catch (const ProtocolError& e) {
        log_error(e.what());
        return 2;
    } catch (const TrainAbort& e) {
        log_error(std::string(e.what()) + " (diagnostics: " + e.dump_path + ")");
        return 1;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
    return 0;
}
