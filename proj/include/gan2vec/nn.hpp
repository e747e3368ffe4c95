#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gan2vec/rng.hpp"
#include "gan2vec/tensor.hpp"

namespace gan2vec {

// Parameter with a stable name for checkpoints and diagnostics.
struct NamedParam {
    std::string name;
    Tensor tensor;
};

// All layers initialize weights from N(0, 0.02) and biases to zero.
inline constexpr double kWeightInitStd = 0.02;

struct LinearLayer {
    Tensor w;  // {in, out}
    Tensor b;  // {out}

    LinearLayer() = default;
    LinearLayer(std::int64_t in, std::int64_t out, Rng& rng)
        : w(Tensor::randn({in, out}, rng, 0.0, kWeightInitStd, true)),
          b(Tensor::zeros({out}, true)) {}

    Tensor forward(const Tensor& x) const { return fully_connected(x, w, b); }

    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

struct Conv2dLayer {
    Tensor k;  // {out_ch, in_ch, kh, kw}
    Tensor b;  // {out_ch}
    Extent stride;
    Extent pad;

    Conv2dLayer() = default;
    Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, Extent kernel, Extent stride_,
                Extent pad_, Rng& rng)
        : k(Tensor::randn({out_ch, in_ch, kernel.h, kernel.w}, rng, 0.0, kWeightInitStd, true)),
          b(Tensor::zeros({out_ch}, true)),
          stride(stride_),
          pad(pad_) {}

    Tensor forward(const Tensor& x) const {
        Tensor y = conv2d(x, k, stride, pad);
        return add(y, broadcast_to(reshape(b, {1, b.dim(0), 1, 1}), y.shape()));
    }

    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
        out.push_back({prefix + ".k", k});
        out.push_back({prefix + ".b", b});
    }
};

// Fractionally-strided (transposed) convolution. The kernel's leading dim
// contracts with the layer's input channels, matching conv_transpose2d.
struct ConvT2dLayer {
    Tensor k;  // {in_ch, out_ch, kh, kw}
    Tensor b;  // {out_ch}
    Extent stride;
    Extent pad;
    std::int64_t out_h = 0;
    std::int64_t out_w = 0;

    ConvT2dLayer() = default;
    ConvT2dLayer(std::int64_t in_ch, std::int64_t out_ch, Extent kernel, Extent stride_,
                 Extent pad_, std::int64_t oh, std::int64_t ow, Rng& rng)
        : k(Tensor::randn({in_ch, out_ch, kernel.h, kernel.w}, rng, 0.0, kWeightInitStd, true)),
          b(Tensor::zeros({out_ch}, true)),
          stride(stride_),
          pad(pad_),
          out_h(oh),
          out_w(ow) {}

    Tensor forward(const Tensor& x) const {
        Tensor y = conv_transpose2d(x, k, stride, pad, out_h, out_w);
        return add(y, broadcast_to(reshape(b, {1, b.dim(0), 1, 1}), y.shape()));
    }

    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
        out.push_back({prefix + ".k", k});
        out.push_back({prefix + ".b", b});
    }
};

struct BatchNormLayer {
    Tensor gamma;  // {C}
    Tensor beta;   // {C}
    BatchNormStats stats;
    double eps = 1e-5;
    double momentum = 0.1;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::int64_t channels)
        : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)) {}

    Tensor forward(const Tensor& x, BnMode mode) {
        return batch_norm(x, gamma, beta, eps, mode, stats, momentum);
    }

    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

}  // namespace gan2vec
