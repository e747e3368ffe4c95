#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gan2vec/errors.hpp"
#include "gan2vec/rng.hpp"

namespace gan2vec {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_size(const Shape& s);

// Height/width pair for strides, paddings and kernel extents.
struct Extent {
    std::int64_t h = 1;
    std::int64_t w = 1;
};

class Tensor;

namespace detail {

struct TensorImpl;

// Builds the gradient flowing to inputs[input_index], given the upstream
// gradient and the node itself. Implemented with public tensor ops so the
// returned value is itself a graph node whenever recording is enabled —
// that is what makes gradients differentiable (double backprop).
using VjpFn = std::function<Tensor(const Tensor& upstream, const std::vector<Tensor>& inputs,
                                   const Tensor& self, std::size_t input_index)>;

}  // namespace detail

// Dense double-precision tensor. Copying a Tensor is cheap (shared handle).
// Every construction — leaf or op result — gets a strictly increasing node
// id, so creation order is a valid topological order of any value's history.
class Tensor {
  public:
    Tensor() = default;

    static Tensor scalar(double v, bool tracked = false);
    static Tensor zeros(const Shape& shape, bool tracked = false);
    static Tensor full(const Shape& shape, double v, bool tracked = false);
    static Tensor from_values(const Shape& shape, std::vector<double> values,
                              bool tracked = false);
    static Tensor randn(const Shape& shape, Rng& rng, double mean = 0.0, double stddev = 1.0,
                        bool tracked = false);
    static Tensor uniform(const Shape& shape, Rng& rng, double lo, double hi,
                          bool tracked = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::int64_t size() const;
    std::int64_t ndim() const;
    std::int64_t dim(std::size_t i) const;
    const std::vector<double>& values() const;
    // In-place access for leaf updates (optimizer steps, weight clipping).
    // Must never be called on a tensor that other graph nodes depend on.
    std::vector<double>& mutable_values();
    double scalar_value() const;  // requires size() == 1
    bool all_finite() const;

    bool tracked() const;
    // Untracked copy of the values; cuts the graph.
    Tensor detach() const;

    // Accumulated gradient (leaves only; populated by backward()).
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();
    void accumulate_grad(const std::vector<double>& g);

    // Graph introspection.
    std::uint64_t node_id() const;
    const std::string& op_name() const;
    const std::vector<Tensor>& inputs() const;

    detail::TensorImpl* impl() const { return impl_.get(); }

    // Internal: create an op node. Used by the op implementations.
    static Tensor make_node(Shape shape, std::vector<double> values, std::string op,
                            std::vector<Tensor> inputs, detail::VjpFn vjp);

  private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    bool tracked = false;
    std::uint64_t id = 0;
    std::string op;               // empty for leaves
    std::vector<Tensor> inputs;   // empty for leaves
    VjpFn vjp;
    std::unique_ptr<std::vector<double>> grad;
};

}  // namespace detail

// While recording is off, ops produce plain untracked values and store no
// graph edges. First-order backward runs its own vjps under this guard;
// gradient(..., create_graph=true) leaves recording on instead.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

bool grad_recording();

// Ordered record of the tracked nodes feeding a root: ascending creation id,
// which is guaranteed to place every node after all of its inputs.
struct Tape {
    std::vector<Tensor> nodes;
    static Tape of(const Tensor& root);
};

// ---- elementwise / structural ops -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);   // same shape
Tensor sub(const Tensor& a, const Tensor& b);   // same shape
Tensor mul(const Tensor& a, const Tensor& b);   // same shape
Tensor divide(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor shift(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1 + e^x), computed overflow-safe
Tensor leaky_relu(const Tensor& a, double slope);

Tensor matmul(const Tensor& a, const Tensor& b);  // 2-D only
Tensor transpose(const Tensor& a);                // 2-D only
Tensor reshape(const Tensor& a, const Shape& shape);

// Numpy-style broadcast (trailing alignment; source dims must be 1 or equal).
// sum_to is the exact adjoint: it reduces over the broadcast dimensions.
Tensor broadcast_to(const Tensor& a, const Shape& shape);
Tensor sum_to(const Tensor& a, const Shape& shape);
Tensor sum_all(const Tensor& a);   // -> shape {1}
Tensor mean_all(const Tensor& a);  // -> shape {1}

// Concatenate along axis 1 (feature axis of B×F, channel axis of B×C×H×W).
Tensor concat_axis1(const std::vector<Tensor>& parts);
Tensor slice_axis1(const Tensor& a, std::int64_t start, std::int64_t len);

// ---- spatial ops -----------------------------------------------------------

// x: {B, C_in, H, W}, k: {C_out, C_in, kh, kw}. No implicit bias.
// Output spatial size: floor((H + 2*pad - kh) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& k, Extent stride, Extent pad);

// Exact adjoint of conv2d: maps {B, C_out, H', W'} back to {B, C_in, out_h, out_w}.
// out_h/out_w are explicit because stride floors away sizes; they must be a
// valid conv2d input size for the given output size, stride and padding.
Tensor conv_transpose2d(const Tensor& y, const Tensor& k, Extent stride, Extent pad,
                        std::int64_t out_h, std::int64_t out_w);

// x: {B, F}, w: {F, O}, b: {O}. Returns x·w + b (row-broadcast bias).
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- batch norm -------------------------------------------------------------

enum class BnMode { train, infer };

// Running statistics owned by the caller (the layer); plain buffers, not on
// the graph. Updated only in train mode.
struct BatchNormStats {
    std::vector<double> mean;
    std::vector<double> var;
};

// Per-channel batch norm over {B, C, H, W} with learned gamma/beta of shape
// {C}. Train mode normalizes with biased batch statistics and refreshes the
// running buffers; infer mode uses the running buffers as constants.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  BnMode mode, BatchNormStats& running, double momentum);

// ---- autodiff ---------------------------------------------------------------

// Accumulates d(loss)/d(leaf) into every tracked leaf reachable from loss
// (or only the given leaves). loss must be a tracked size-1 tensor.
void backward(const Tensor& loss);
void backward(const Tensor& loss, const std::vector<Tensor>& wrt);

// Gradient of a scalar w.r.t. one tracked tensor, returned as a value rather
// than accumulated. With create_graph the returned tensor is itself a graph
// node, so it can be differentiated again.
Tensor gradient(const Tensor& out, const Tensor& wrt, bool create_graph);

// Per-sample L2 norm of d(sum(net(x)))/dx for a batch x of shape {B, ...}.
// Valid whenever net scores each sample independently of the others (no
// cross-sample coupling), which holds for all networks built here. The
// result (shape {B}) stays differentiable w.r.t. the network parameters,
// which is what a gradient penalty needs. eps guards the sqrt at zero.
Tensor input_gradient_norm(const std::function<Tensor(const Tensor&)>& net, const Tensor& x,
                           double eps = 1e-12);

void zero_grads(const std::vector<Tensor>& params);

}  // namespace gan2vec
