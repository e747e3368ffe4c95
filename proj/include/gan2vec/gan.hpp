#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gan2vec/errors.hpp"
#include "gan2vec/nn.hpp"
#include "gan2vec/rng.hpp"
#include "gan2vec/tensor.hpp"

namespace gan2vec {

enum class LossKind { original, wgan_clip, wgan_gp };

LossKind parse_loss_kind(const std::string& name);  // ConfigError on unknown name
const char* loss_kind_name(LossKind kind);

// Every constant a run depends on. validate() rejects inconsistent values;
// apply_loss_defaults() fills the per-objective critic-step count.
struct GanConfig {
    LossKind loss_kind = LossKind::original;
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda_gp = 10.0;   // gradient-penalty weight
    double clip_c = 0.01;      // wgan_clip clamp bound
    double smooth_real = 0.9;  // original-loss targets
    double smooth_fake = 0.1;
    std::int64_t pretrain_iters = 50;  // D-only warmup minibatches
    std::int64_t epochs = 100;
    std::int64_t n_critic = 1;  // D updates per G update
    std::int64_t batch_size = 64;
    std::int64_t sentence_len = 7;  // L: rows of a generated matrix
    std::int64_t embed_dim = 64;    // n: embedding width, must be a multiple of 4
    bool conditional = false;
    std::int64_t n_classes = 2;
    std::uint64_t seed = 1;
    std::int64_t noise_dim = 100;
    std::int64_t base_channels = 64;  // first conv width; all layers scale from it
    double leaky_slope = 0.2;
    bool batch_norm = false;  // normalize after the generator's first deconv

    void apply_loss_defaults();  // n_critic: 5 for the wgan modes, 1 for original
    void validate() const;       // ConfigError naming the offending field
};

// Upsampling arithmetic for the generator: a 2 x (n/4) seed map is doubled
// twice, and the second deconv's height kernel absorbs the target length.
// Both deconvs use stride 2; width always runs kernel 4, padding 1.
struct ShapePlan {
    std::int64_t seed_h = 2;
    std::int64_t seed_w = 0;  // embed_dim / 4
    std::int64_t mid_h = 4;
    std::int64_t mid_w = 0;  // embed_dim / 2
    std::int64_t d2_kh = 0;  // second deconv height kernel
    std::int64_t d2_ph = 0;  // second deconv height padding

    // DimensionError when no kernel produces the requested output size
    // (needs sentence_len >= 5 and embed_dim a positive multiple of 4).
    static ShapePlan solve(std::int64_t sentence_len, std::int64_t embed_dim);
};

// Appends the label encoding to axis 1: a one-hot block for {B, F} feature
// vectors, one constant plane per class for {B, C, H, W} maps (all-ones on
// the matching class, zeros elsewhere).
Tensor condition_inject(const Tensor& features, const std::vector<std::int64_t>& labels,
                        std::int64_t n_classes);

// Noise -> fc -> seed map -> two fractionally-strided convs -> {B, 1, L, n}.
// LeakyReLU after the fc and first deconv; the output layer is linear, since
// embedding vectors are unnormalized. In conditional mode the one-hot label
// joins the noise vector and every deconv input as constant planes.
class Generator {
  public:
    Generator(const GanConfig& cfg, Rng& rng);

    // z: {B, noise_dim}; labels required iff the config is conditional.
    // Non-const because train-mode batch norm updates its running stats.
    Tensor forward(const Tensor& z, const std::vector<std::int64_t>& labels = {},
                   BnMode mode = BnMode::train);

    std::vector<NamedParam> params() const;
    const GanConfig& config() const { return cfg_; }
    const ShapePlan& plan() const { return plan_; }
    BatchNormLayer& bn() { return bn_; }
    const BatchNormLayer& bn() const { return bn_; }

  private:
    GanConfig cfg_;
    ShapePlan plan_;
    std::int64_t seed_channels_ = 0;
    LinearLayer fc_;
    ConvT2dLayer deconv1_;
    ConvT2dLayer deconv2_;
    BatchNormLayer bn_;
};

// Two strided convs, then a fully-connected map to one unbounded score per
// sample (no sigmoid: the original-loss path applies it inside the loss).
// Conditional mode appends label planes to each conv input and the one-hot
// to the flattened features.
class Discriminator {
  public:
    Discriminator(const GanConfig& cfg, Rng& rng);

    // x: {B, 1, L, n} -> scores {B}.
    Tensor forward(const Tensor& x, const std::vector<std::int64_t>& labels = {}) const;

    std::vector<NamedParam> params() const;
    const GanConfig& config() const { return cfg_; }

  private:
    GanConfig cfg_;
    Conv2dLayer conv1_;
    Conv2dLayer conv2_;
    LinearLayer fc_;
    std::int64_t flat_dim_ = 0;
};

// Label-smoothed non-saturating GAN loss on raw scores. Returns
// (d_loss, g_loss): d_loss = mean BCE(real, smooth_real) + mean BCE(fake,
// smooth_fake); g_loss = mean BCE(fake, 1). Callers keep real and fake
// scores from separate forward passes.
std::pair<Tensor, Tensor> loss_original(const Tensor& scores_real, const Tensor& scores_fake,
                                        double smooth_real = 0.9, double smooth_fake = 0.1);

// Wasserstein surrogate. Returns (d_loss, g_loss): the critic maximizes
// mean(real) - mean(fake), so d_loss is the negation; g_loss = -mean(fake).
std::pair<Tensor, Tensor> loss_critic(const Tensor& scores_real, const Tensor& scores_fake);

// lambda * mean((||grad_xhat score||_2 - 1)^2) where xhat mixes each
// real/fake pair at a per-sample Uniform[0,1] coefficient drawn from rng.
// The result stays differentiable w.r.t. the scorer's parameters.
Tensor gradient_penalty(const std::function<Tensor(const Tensor&)>& scorer,
                        const Tensor& real_batch, const Tensor& fake_batch, double lambda_gp,
                        Rng& rng);
Tensor gradient_penalty(const Discriminator& d, const Tensor& real_batch,
                        const Tensor& fake_batch, double lambda_gp, Rng& rng,
                        const std::vector<std::int64_t>& labels = {});

// Clamps every parameter to [-c, c] in place (the wgan_clip rule).
void clip_weights(std::vector<NamedParam>& params, double c);
void clip_weights(Discriminator& d, double c);

}  // namespace gan2vec
