#include "gan2vec/gan.hpp"

#include <cmath>

namespace gan2vec {

namespace {

void config_fail(const std::string& what) { throw ConfigError("GanConfig: " + what); }

// floor((size + 2*pad - kernel) / stride) + 1, the conv output rule.
std::int64_t conv_out(std::int64_t size, std::int64_t kernel, std::int64_t stride,
                      std::int64_t pad) {
    return (size + 2 * pad - kernel) / stride + 1;
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
    if (name == "original") return LossKind::original;
    if (name == "wgan_clip") return LossKind::wgan_clip;
    if (name == "wgan_gp") return LossKind::wgan_gp;
    throw ConfigError("unknown loss kind '" + name +
                      "' (expected original, wgan_clip, or wgan_gp)");
}

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::original: return "original";
        case LossKind::wgan_clip: return "wgan_clip";
        case LossKind::wgan_gp: return "wgan_gp";
    }
    return "unknown";
}

void GanConfig::apply_loss_defaults() {
    n_critic = (loss_kind == LossKind::original) ? 1 : 5;
}

void GanConfig::validate() const {
    if (lr <= 0.0) config_fail("lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0) config_fail("beta1 must lie in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0) config_fail("beta2 must lie in [0, 1)");
    if (lambda_gp < 0.0) config_fail("lambda_gp must be >= 0");
    if (clip_c <= 0.0) config_fail("clip_c must be positive");
    if (smooth_fake < 0.0 || smooth_fake >= smooth_real || smooth_real > 1.0)
        config_fail("smoothing targets need 0 <= smooth_fake < smooth_real <= 1");
    if (pretrain_iters < 0) config_fail("pretrain_iters must be >= 0");
    if (epochs < 0) config_fail("epochs must be >= 0");
    if (n_critic < 1) config_fail("n_critic must be >= 1");
    if (batch_size < 1) config_fail("batch_size must be >= 1");
    if (batch_norm && batch_size < 2) config_fail("batch_norm needs batch_size >= 2");
    if (sentence_len < 5) config_fail("sentence_len must be >= 5");
    if (embed_dim < 4 || embed_dim % 4 != 0)
        config_fail("embed_dim must be a positive multiple of 4");
    if (n_classes < 2 && conditional) config_fail("conditional mode needs n_classes >= 2");
    if (noise_dim < 1) config_fail("noise_dim must be >= 1");
    if (base_channels < 1) config_fail("base_channels must be >= 1");
    if (leaky_slope < 0.0 || leaky_slope >= 1.0) config_fail("leaky_slope must lie in [0, 1)");
}

ShapePlan ShapePlan::solve(std::int64_t sentence_len, std::int64_t embed_dim) {
    if (embed_dim < 4 || embed_dim % 4 != 0)
        throw DimensionError("ShapePlan: embed_dim must be a positive multiple of 4, got " +
                             std::to_string(embed_dim));
    if (sentence_len < 5)
        throw DimensionError("ShapePlan: sentence_len must be >= 5, got " +
                             std::to_string(sentence_len));
    ShapePlan plan;
    plan.seed_w = embed_dim / 4;
    plan.mid_w = embed_dim / 2;
    // Height: (mid_h - 1)*2 - 2*ph + kh must equal sentence_len, and the
    // matching conv must floor back to mid_h. Short outputs keep padding 1;
    // from length 10 up the kernel alone covers the span.
    if (sentence_len < 10) {
        plan.d2_ph = 1;
        plan.d2_kh = sentence_len - 4;
    } else {
        plan.d2_ph = 0;
        plan.d2_kh = sentence_len - 6;
    }
    return plan;
}

Tensor condition_inject(const Tensor& features, const std::vector<std::int64_t>& labels,
                        std::int64_t n_classes) {
    if (n_classes < 1) throw ConfigError("condition_inject: n_classes must be >= 1");
    if (features.ndim() != 2 && features.ndim() != 4)
        throw DimensionError("condition_inject: expects {B, F} or {B, C, H, W}, got " +
                             shape_str(features.shape()));
    const std::int64_t B = features.dim(0);
    if (static_cast<std::int64_t>(labels.size()) != B)
        throw DimensionError("condition_inject: " + std::to_string(labels.size()) +
                             " labels for batch of " + std::to_string(B));
    for (std::int64_t id : labels)
        if (id < 0 || id >= n_classes)
            throw LookupError("condition_inject: label " + std::to_string(id) +
                              " outside [0, " + std::to_string(n_classes) + ")");

    Shape block_shape;
    std::int64_t plane = 1;
    if (features.ndim() == 2) {
        block_shape = {B, n_classes};
    } else {
        plane = features.dim(2) * features.dim(3);
        block_shape = {B, n_classes, features.dim(2), features.dim(3)};
    }
    std::vector<double> block(static_cast<std::size_t>(B * n_classes * plane), 0.0);
    for (std::int64_t b = 0; b < B; ++b) {
        double* base = block.data() + (b * n_classes + labels[static_cast<std::size_t>(b)]) * plane;
        std::fill(base, base + plane, 1.0);
    }
    return concat_axis1({features, Tensor::from_values(block_shape, std::move(block))});
}

Generator::Generator(const GanConfig& cfg, Rng& rng)
    : cfg_(cfg),
      plan_((cfg.validate(), ShapePlan::solve(cfg.sentence_len, cfg.embed_dim))),
      seed_channels_(2 * cfg.base_channels),
      fc_(cfg.noise_dim + (cfg.conditional ? cfg.n_classes : 0),
          seed_channels_ * plan_.seed_h * plan_.seed_w, rng),
      deconv1_(seed_channels_ + (cfg.conditional ? cfg.n_classes : 0), cfg.base_channels,
               {4, 4}, {2, 2}, {1, 1}, plan_.mid_h, plan_.mid_w, rng),
      deconv2_(cfg.base_channels + (cfg.conditional ? cfg.n_classes : 0), 1,
               {plan_.d2_kh, 4}, {2, 2}, {plan_.d2_ph, 1}, cfg.sentence_len, cfg.embed_dim,
               rng),
      bn_(cfg.base_channels) {}

Tensor Generator::forward(const Tensor& z, const std::vector<std::int64_t>& labels,
                          BnMode mode) {
    if (z.ndim() != 2 || z.dim(1) != cfg_.noise_dim)
        throw DimensionError("Generator: noise must be {B, " + std::to_string(cfg_.noise_dim) +
                             "}, got " + shape_str(z.shape()));
    if (cfg_.conditional == labels.empty())
        throw ConfigError(cfg_.conditional
                              ? "Generator: conditional config but no labels given"
                              : "Generator: labels given to an unconditional config");
    const std::int64_t B = z.dim(0);

    Tensor x = cfg_.conditional ? condition_inject(z, labels, cfg_.n_classes) : z;
    x = leaky_relu(fc_.forward(x), cfg_.leaky_slope);
    x = reshape(x, {B, seed_channels_, plan_.seed_h, plan_.seed_w});
    if (cfg_.conditional) x = condition_inject(x, labels, cfg_.n_classes);
    x = deconv1_.forward(x);
    if (cfg_.batch_norm) x = bn_.forward(x, mode);
    x = leaky_relu(x, cfg_.leaky_slope);
    if (cfg_.conditional) x = condition_inject(x, labels, cfg_.n_classes);
    return deconv2_.forward(x);
}

std::vector<NamedParam> Generator::params() const {
    std::vector<NamedParam> out;
    fc_.append_params("g.fc", out);
    deconv1_.append_params("g.deconv1", out);
    deconv2_.append_params("g.deconv2", out);
    if (cfg_.batch_norm) bn_.append_params("g.bn", out);
    return out;
}

Discriminator::Discriminator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const std::int64_t K = cfg.conditional ? cfg.n_classes : 0;
    conv1_ = Conv2dLayer(1 + K, cfg.base_channels, {4, 4}, {2, 2}, {1, 1}, rng);
    conv2_ = Conv2dLayer(cfg.base_channels + K, 2 * cfg.base_channels, {4, 4}, {2, 2}, {1, 1},
                         rng);
    const std::int64_t h1 = conv_out(cfg.sentence_len, 4, 2, 1);
    const std::int64_t w1 = conv_out(cfg.embed_dim, 4, 2, 1);
    const std::int64_t h2 = conv_out(h1, 4, 2, 1);
    const std::int64_t w2 = conv_out(w1, 4, 2, 1);
    flat_dim_ = 2 * cfg.base_channels * h2 * w2;
    fc_ = LinearLayer(flat_dim_ + K, 1, rng);
}

Tensor Discriminator::forward(const Tensor& x, const std::vector<std::int64_t>& labels) const {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.sentence_len ||
        x.dim(3) != cfg_.embed_dim)
        throw DimensionError("Discriminator: input must be {B, 1, " +
                             std::to_string(cfg_.sentence_len) + ", " +
                             std::to_string(cfg_.embed_dim) + "}, got " +
                             shape_str(x.shape()));
    if (cfg_.conditional == labels.empty())
        throw ConfigError(cfg_.conditional
                              ? "Discriminator: conditional config but no labels given"
                              : "Discriminator: labels given to an unconditional config");
    const std::int64_t B = x.dim(0);

    Tensor h = cfg_.conditional ? condition_inject(x, labels, cfg_.n_classes) : x;
    h = leaky_relu(conv1_.forward(h), cfg_.leaky_slope);
    if (cfg_.conditional) h = condition_inject(h, labels, cfg_.n_classes);
    h = leaky_relu(conv2_.forward(h), cfg_.leaky_slope);
    h = reshape(h, {B, flat_dim_});
    if (cfg_.conditional) h = condition_inject(h, labels, cfg_.n_classes);
    return reshape(fc_.forward(h), {B});
}

std::vector<NamedParam> Discriminator::params() const {
    std::vector<NamedParam> out;
    conv1_.append_params("d.conv1", out);
    conv2_.append_params("d.conv2", out);
    fc_.append_params("d.fc", out);
    return out;
}

namespace {

// Mean over the batch of t*softplus(-s) + (1-t)*softplus(s): binary cross
// entropy on raw scores, safe at any magnitude.
Tensor bce_mean(const Tensor& scores, double target) {
    Tensor toward_one = scale(softplus(neg(scores)), target);
    Tensor toward_zero = scale(softplus(scores), 1.0 - target);
    return mean_all(add(toward_one, toward_zero));
}

}  // namespace

std::pair<Tensor, Tensor> loss_original(const Tensor& scores_real, const Tensor& scores_fake,
                                        double smooth_real, double smooth_fake) {
    Tensor d_loss = add(bce_mean(scores_real, smooth_real), bce_mean(scores_fake, smooth_fake));
    Tensor g_loss = bce_mean(scores_fake, 1.0);
    return {d_loss, g_loss};
}

std::pair<Tensor, Tensor> loss_critic(const Tensor& scores_real, const Tensor& scores_fake) {
    Tensor d_loss = sub(mean_all(scores_fake), mean_all(scores_real));
    Tensor g_loss = neg(mean_all(scores_fake));
    return {d_loss, g_loss};
}

Tensor gradient_penalty(const std::function<Tensor(const Tensor&)>& scorer,
                        const Tensor& real_batch, const Tensor& fake_batch, double lambda_gp,
                        Rng& rng) {
    if (real_batch.shape() != fake_batch.shape())
        throw DimensionError("gradient_penalty: real " + shape_str(real_batch.shape()) +
                             " vs fake " + shape_str(fake_batch.shape()));
    const std::int64_t B = real_batch.dim(0);
    Shape eps_shape(static_cast<std::size_t>(real_batch.ndim()), 1);
    eps_shape[0] = B;
    std::vector<double> eps(static_cast<std::size_t>(B));
    for (auto& e : eps) e = rng.uniform();
    Tensor eps_b = broadcast_to(Tensor::from_values(eps_shape, eps), real_batch.shape());
    Tensor one_minus = broadcast_to(
        Tensor::from_values(eps_shape, [&] {
            std::vector<double> v(static_cast<std::size_t>(B));
            for (std::int64_t b = 0; b < B; ++b) v[static_cast<std::size_t>(b)] =
                1.0 - eps[static_cast<std::size_t>(b)];
            return v;
        }()),
        real_batch.shape());
    Tensor mixed = add(mul(eps_b, real_batch.detach()), mul(one_minus, fake_batch.detach()));

    Tensor norms = input_gradient_norm(scorer, mixed);
    Tensor deviation = shift(norms, -1.0);
    return scale(mean_all(mul(deviation, deviation)), lambda_gp);
}

Tensor gradient_penalty(const Discriminator& d, const Tensor& real_batch,
                        const Tensor& fake_batch, double lambda_gp, Rng& rng,
                        const std::vector<std::int64_t>& labels) {
    return gradient_penalty([&](const Tensor& x) { return d.forward(x, labels); }, real_batch,
                            fake_batch, lambda_gp, rng);
}

void clip_weights(std::vector<NamedParam>& params, double c) {
    if (c <= 0.0) throw ConfigError("clip_weights: bound must be positive");
    for (auto& p : params)
        for (double& v : p.tensor.mutable_values()) v = std::clamp(v, -c, c);
}

void clip_weights(Discriminator& d, double c) {
    auto params = d.params();
    clip_weights(params, c);
}

}  // namespace gan2vec
