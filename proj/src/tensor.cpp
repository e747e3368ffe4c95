#include "gan2vec/tensor.hpp"

#include <algorithm>
#include <cblas.h>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace gan2vec {

namespace {

thread_local bool t_recording = true;
thread_local std::uint64_t t_next_id = 1;

// One-time process setup: keep BLAS single-threaded (bit-identical reductions)
// and raise the mmap threshold so multi-megabyte activation buffers are
// recycled from the heap instead of being re-faulted from zeroed pages.
void engine_init() {
    static const bool done = [] {
#if defined(__GLIBC__)
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
#endif
        if (openblas_set_num_threads) openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

std::vector<double>& scratch(int slot) {
    thread_local std::vector<double> bufs[2];
    return bufs[slot];
}

[[noreturn]] void dim_fail(const std::string& op, const std::string& detail) {
    throw DimensionError(op + ": " + detail);
}

void require_defined(const char* op, std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (!t->defined()) dim_fail(op, "undefined tensor argument");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        dim_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "}";
    return os.str();
}

std::int64_t shape_size(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

// ---- Tensor ----------------------------------------------------------------

namespace {

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> values,
                                             bool tracked) {
    engine_init();
    for (auto d : shape)
        if (d <= 0) dim_fail("tensor", "non-positive dimension in shape " + shape_str(shape));
    if (static_cast<std::int64_t>(values.size()) != shape_size(shape))
        dim_fail("tensor", "value count " + std::to_string(values.size()) +
                               " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->tracked = tracked;
    impl->id = t_next_id++;
    return impl;
}

}  // namespace

Tensor Tensor::scalar(double v, bool tracked) { return from_values({1}, {v}, tracked); }

Tensor Tensor::zeros(const Shape& shape, bool tracked) {
    return from_values(shape, std::vector<double>(shape_size(shape), 0.0), tracked);
}

Tensor Tensor::full(const Shape& shape, double v, bool tracked) {
    return from_values(shape, std::vector<double>(shape_size(shape), v), tracked);
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool tracked) {
    return Tensor(new_impl(shape, std::move(values), tracked));
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double mean, double stddev, bool tracked) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.normal(mean, stddev);
    return from_values(shape, std::move(v), tracked);
}

Tensor Tensor::uniform(const Shape& shape, Rng& rng, double lo, double hi, bool tracked) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return from_values(shape, std::move(v), tracked);
}

Tensor Tensor::make_node(Shape shape, std::vector<double> values, std::string op,
                         std::vector<Tensor> inputs, detail::VjpFn vjp) {
    bool track = t_recording;
    if (track) {
        track = false;
        for (const auto& in : inputs)
            if (in.tracked()) {
                track = true;
                break;
            }
    }
    auto impl = new_impl(std::move(shape), std::move(values), track);
    if (track) {
        impl->op = std::move(op);
        impl->inputs = std::move(inputs);
        impl->vjp = std::move(vjp);
    }
    return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::int64_t Tensor::size() const { return static_cast<std::int64_t>(impl_->values.size()); }
std::int64_t Tensor::ndim() const { return static_cast<std::int64_t>(impl_->shape.size()); }

std::int64_t Tensor::dim(std::size_t i) const {
    if (i >= impl_->shape.size()) dim_fail("dim", "axis out of range for " + shape_str(shape()));
    return impl_->shape[i];
}

const std::vector<double>& Tensor::values() const { return impl_->values; }
std::vector<double>& Tensor::mutable_values() { return impl_->values; }

double Tensor::scalar_value() const {
    if (size() != 1) dim_fail("scalar_value", "tensor has shape " + shape_str(shape()));
    return impl_->values[0];
}

bool Tensor::all_finite() const {
    for (double v : impl_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

bool Tensor::tracked() const { return impl_ && impl_->tracked; }

Tensor Tensor::detach() const { return from_values(shape(), values(), false); }

bool Tensor::has_grad() const { return impl_ && impl_->grad != nullptr; }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ConfigError("grad: no gradient accumulated for this tensor");
    return *impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_ && impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
    if (g.size() != impl_->values.size())
        dim_fail("accumulate_grad", "gradient size mismatch for " + shape_str(shape()));
    if (!impl_->grad) impl_->grad = std::make_unique<std::vector<double>>(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) (*impl_->grad)[i] += g[i];
}

std::uint64_t Tensor::node_id() const { return impl_->id; }
const std::string& Tensor::op_name() const { return impl_->op; }
const std::vector<Tensor>& Tensor::inputs() const { return impl_->inputs; }

void zero_grads(const std::vector<Tensor>& params) {
    for (auto p : params) p.zero_grad();
}

NoGradGuard::NoGradGuard() : prev_(t_recording) { t_recording = false; }
NoGradGuard::~NoGradGuard() { t_recording = prev_; }

bool grad_recording() { return t_recording; }

// ---- elementwise ops --------------------------------------------------------

namespace {

template <class F>
std::vector<double> map_vals(const std::vector<double>& a, F f) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <class F>
std::vector<double> zip_vals(const std::vector<double>& a, const std::vector<double>& b, F f) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow: max(x,0) + log1p(e^-|x|).
double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined("add", {&a, &b});
    require_same_shape("add", a, b);
    return Tensor::make_node(
        a.shape(), zip_vals(a.values(), b.values(), [](double x, double y) { return x + y; }),
        "add", {a, b},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_defined("sub", {&a, &b});
    require_same_shape("sub", a, b);
    return Tensor::make_node(
        a.shape(), zip_vals(a.values(), b.values(), [](double x, double y) { return x - y; }),
        "sub", {a, b},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t i) {
            return i == 0 ? g : neg(g);
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined("mul", {&a, &b});
    require_same_shape("mul", a, b);
    return Tensor::make_node(
        a.shape(), zip_vals(a.values(), b.values(), [](double x, double y) { return x * y; }),
        "mul", {a, b},
        [](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t i) {
            return mul(g, in[1 - i]);
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    require_defined("divide", {&a, &b});
    require_same_shape("divide", a, b);
    return Tensor::make_node(
        a.shape(), zip_vals(a.values(), b.values(), [](double x, double y) { return x / y; }),
        "divide", {a, b},
        [](const Tensor& g, const std::vector<Tensor>& in, const Tensor& self, std::size_t i) {
            if (i == 0) return divide(g, in[1]);
            // d(a/b)/db = -a/b^2 = -self/b
            return neg(divide(mul(g, self), in[1]));
        });
}

Tensor neg(const Tensor& a) {
    require_defined("neg", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [](double x) { return -x; }), "neg", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return neg(g);
        });
}

Tensor scale(const Tensor& a, double c) {
    require_defined("scale", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [c](double x) { return c * x; }), "scale", {a},
        [c](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return scale(g, c);
        });
}

Tensor shift(const Tensor& a, double c) {
    require_defined("shift", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [c](double x) { return x + c; }), "shift", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) { return g; });
}

Tensor exp(const Tensor& a) {
    require_defined("exp", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [](double x) { return std::exp(x); }), "exp", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor& self, std::size_t) {
            return mul(g, self);
        });
}

Tensor log(const Tensor& a) {
    require_defined("log", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [](double x) { return std::log(x); }), "log", {a},
        [](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t) {
            return divide(g, in[0]);
        });
}

Tensor sqrt(const Tensor& a) {
    require_defined("sqrt", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [](double x) { return std::sqrt(x); }), "sqrt", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor& self, std::size_t) {
            // d(sqrt x)/dx = 1 / (2 sqrt x)
            return divide(g, scale(self, 2.0));
        });
}

Tensor sigmoid(const Tensor& a) {
    require_defined("sigmoid", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), stable_sigmoid), "sigmoid", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor& self, std::size_t) {
            // sigma' = sigma * (1 - sigma)
            return mul(g, mul(self, shift(neg(self), 1.0)));
        });
}

Tensor softplus(const Tensor& a) {
    require_defined("softplus", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), stable_softplus), "softplus", {a},
        [](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t) {
            return mul(g, sigmoid(in[0]));
        });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    require_defined("leaky_relu", {&a});
    return Tensor::make_node(
        a.shape(), map_vals(a.values(), [slope](double x) { return x >= 0.0 ? x : slope * x; }),
        "leaky_relu", {a},
        [slope](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t) {
            // Derivative taken as 1 at exactly 0.
            Tensor mask = Tensor::from_values(
                in[0].shape(),
                map_vals(in[0].values(), [slope](double x) { return x >= 0.0 ? 1.0 : slope; }));
            return mul(g, mask);
        });
}

// ---- matmul / structure -----------------------------------------------------

namespace {

void gemm_rm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::int64_t m, std::int64_t n,
             std::int64_t k, const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
             double* c, std::int64_t ldc) {
    cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(lda), b, static_cast<int>(ldb), 0.0,
                c, static_cast<int>(ldc));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined("matmul", {&a, &b});
    if (a.ndim() != 2 || b.ndim() != 2)
        dim_fail("matmul", "expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                               shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        dim_fail("matmul", "inner dimension mismatch " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n));
    gemm_rm(CblasNoTrans, CblasNoTrans, m, n, k, a.values().data(), k, b.values().data(), n,
            out.data(), n);
    return Tensor::make_node(
        {m, n}, std::move(out), "matmul", {a, b},
        [](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t i) {
            if (i == 0) return matmul(g, transpose(in[1]));
            return matmul(transpose(in[0]), g);
        });
}

Tensor transpose(const Tensor& a) {
    require_defined("transpose", {&a});
    if (a.ndim() != 2) dim_fail("transpose", "expects 2-D, got " + shape_str(a.shape()));
    const std::int64_t r = a.dim(0), c = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(r * c));
    const auto& v = a.values();
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
    return Tensor::make_node(
        {c, r}, std::move(out), "transpose", {a},
        [](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return transpose(g);
        });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    require_defined("reshape", {&a});
    if (shape_size(shape) != a.size())
        dim_fail("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    Shape in_shape = a.shape();
    return Tensor::make_node(
        shape, a.values(), "reshape", {a},
        [in_shape](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return reshape(g, in_shape);
        });
}

namespace {

// Pads src with leading 1s to the length of ref; fails if src is longer.
Shape pad_leading(const char* op, const Shape& src, std::size_t nd) {
    if (src.size() > nd)
        dim_fail(op, "source rank exceeds target rank (" + shape_str(src) + ")");
    Shape out(nd, 1);
    std::copy(src.begin(), src.end(), out.begin() + (nd - src.size()));
    return out;
}

}  // namespace

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
    require_defined("broadcast_to", {&a});
    const std::size_t nd = shape.size();
    Shape src = pad_leading("broadcast_to", a.shape(), nd);
    std::vector<std::int64_t> sstride(nd, 0);
    std::int64_t acc = 1;
    for (std::size_t d = nd; d-- > 0;) {
        if (src[d] != 1 && src[d] != shape[d])
            dim_fail("broadcast_to",
                     "cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
        sstride[d] = (src[d] == 1) ? 0 : acc;
        acc *= src[d];
    }
    const std::int64_t n = shape_size(shape);
    std::vector<double> out(static_cast<std::size_t>(n));
    const auto& v = a.values();
    std::vector<std::int64_t> coord(nd, 0);
    std::int64_t soff = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(soff)];
        for (std::size_t d = nd; d-- > 0;) {
            ++coord[d];
            soff += sstride[d];
            if (coord[d] < shape[d]) break;
            soff -= coord[d] * sstride[d];
            coord[d] = 0;
        }
    }
    Shape in_shape = a.shape();
    return Tensor::make_node(
        shape, std::move(out), "broadcast_to", {a},
        [in_shape](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return sum_to(g, in_shape);
        });
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
    require_defined("sum_to", {&a});
    const std::size_t nd = a.shape().size();
    Shape tgt = pad_leading("sum_to", shape, nd);
    std::vector<std::int64_t> tstride(nd, 0);
    std::int64_t acc = 1;
    for (std::size_t d = nd; d-- > 0;) {
        if (tgt[d] != 1 && tgt[d] != a.shape()[d])
            dim_fail("sum_to", "cannot reduce " + shape_str(a.shape()) + " to " + shape_str(shape));
        tstride[d] = (tgt[d] == 1) ? 0 : acc;
        acc *= tgt[d];
    }
    std::vector<double> out(static_cast<std::size_t>(shape_size(shape)), 0.0);
    const auto& v = a.values();
    const Shape& as = a.shape();
    std::vector<std::int64_t> coord(nd, 0);
    std::int64_t toff = 0;
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(toff)] += v[static_cast<std::size_t>(i)];
        for (std::size_t d = nd; d-- > 0;) {
            ++coord[d];
            toff += tstride[d];
            if (coord[d] < as[d]) break;
            toff -= coord[d] * tstride[d];
            coord[d] = 0;
        }
    }
    Shape in_shape = a.shape();
    return Tensor::make_node(
        shape, std::move(out), "sum_to", {a},
        [in_shape](const Tensor& g, const std::vector<Tensor>&, const Tensor&, std::size_t) {
            return broadcast_to(g, in_shape);
        });
}

Tensor sum_all(const Tensor& a) { return sum_to(a, {1}); }

Tensor mean_all(const Tensor& a) {
    require_defined("mean_all", {&a});
    return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat_axis1(const std::vector<Tensor>& parts) {
    if (parts.empty()) dim_fail("concat_axis1", "no tensors to concatenate");
    for (const auto& p : parts) require_defined("concat_axis1", {&p});
    const Shape& s0 = parts[0].shape();
    if (s0.size() < 2) dim_fail("concat_axis1", "expects rank >= 2, got " + shape_str(s0));
    std::int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != static_cast<std::int64_t>(s0.size()))
            dim_fail("concat_axis1", "rank mismatch " + shape_str(s0) + " vs " +
                                         shape_str(p.shape()));
        for (std::size_t d = 0; d < s0.size(); ++d)
            if (d != 1 && p.shape()[d] != s0[d])
                dim_fail("concat_axis1", "non-axis dims differ: " + shape_str(s0) + " vs " +
                                             shape_str(p.shape()));
        axis_total += p.shape()[1];
    }
    Shape out_shape = s0;
    out_shape[1] = axis_total;
    std::int64_t inner = 1;
    for (std::size_t d = 2; d < s0.size(); ++d) inner *= s0[d];
    const std::int64_t outer = s0[0];
    std::vector<double> out(static_cast<std::size_t>(shape_size(out_shape)));
    for (std::int64_t b = 0; b < outer; ++b) {
        std::int64_t off = 0;
        for (const auto& p : parts) {
            const std::int64_t c = p.shape()[1];
            std::memcpy(out.data() + (b * axis_total + off) * inner,
                        p.values().data() + b * c * inner,
                        static_cast<std::size_t>(c * inner) * sizeof(double));
            off += c;
        }
    }
    std::vector<std::int64_t> offsets;
    std::int64_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        off += p.shape()[1];
    }
    return Tensor::make_node(
        out_shape, std::move(out), "concat_axis1", parts,
        [offsets](const Tensor& g, const std::vector<Tensor>& in, const Tensor&, std::size_t i) {
            return slice_axis1(g, offsets[i], in[i].shape()[1]);
        });
}

Tensor slice_axis1(const Tensor& a, std::int64_t start, std::int64_t len) {
    require_defined("slice_axis1", {&a});
    const Shape& s = a.shape();
    if (s.size() < 2) dim_fail("slice_axis1", "expects rank >= 2, got " + shape_str(s));
    if (start < 0 || len <= 0 || start + len > s[1])
        dim_fail("slice_axis1", "range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of bounds for " +
                                    shape_str(s));
    Shape out_shape = s;
    out_shape[1] = len;
    std::int64_t inner = 1;
    for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
    const std::int64_t outer = s[0], c = s[1];
    std::vector<double> out(static_cast<std::size_t>(shape_size(out_shape)));
    for (std::int64_t b = 0; b < outer; ++b)
        std::memcpy(out.data() + b * len * inner, a.values().data() + (b * c + start) * inner,
                    static_cast<std::size_t>(len * inner) * sizeof(double));
    return Tensor::make_node(
        out_shape, std::move(out), "slice_axis1", {a},
        [start, len](const Tensor& g, const std::vector<Tensor>& in, const Tensor&,
                     std::size_t) {
            // Adjoint scatters the slice back into a zero tensor of the input
            // shape, expressed as a concat with constant zero pads.
            const Shape& is = in[0].shape();
            std::vector<Tensor> parts;
            if (start > 0) {
                Shape before = is;
                before[1] = start;
                parts.push_back(Tensor::zeros(before));
            }
            parts.push_back(g);
            if (start + len < is[1]) {
                Shape after = is;
                after[1] = is[1] - (start + len);
                parts.push_back(Tensor::zeros(after));
            }
            return parts.size() == 1 ? parts[0] : concat_axis1(parts);
        });
}

// ---- convolution family -----------------------------------------------------

namespace {

struct ConvDims {
    std::int64_t B, Ci, H, W, Co, kh, kw, Hp, Wp;
};

std::int64_t conv_out_size(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p) {
    return (in + 2 * p - k) / s + 1;
}

void check_conv_args(const char* op, Extent stride, Extent pad) {
    if (stride.h < 1 || stride.w < 1)
        dim_fail(op, "stride must be >= 1, got {" + std::to_string(stride.h) + "," +
                         std::to_string(stride.w) + "}");
    if (pad.h < 0 || pad.w < 0)
        dim_fail(op, "padding must be >= 0, got {" + std::to_string(pad.h) + "," +
                         std::to_string(pad.w) + "}");
}

// cols is (Ci*kh*kw) x (B*Hp*Wp); column index is ((b*Hp + ho)*Wp + wo).
void im2col(const double* x, const ConvDims& d, Extent stride, Extent pad, double* cols) {
    const std::int64_t ncol = d.B * d.Hp * d.Wp;
    for (std::int64_t ci = 0; ci < d.Ci; ++ci)
        for (std::int64_t i = 0; i < d.kh; ++i)
            for (std::int64_t j = 0; j < d.kw; ++j) {
                double* dst = cols + ((ci * d.kh + i) * d.kw + j) * ncol;
                for (std::int64_t b = 0; b < d.B; ++b) {
                    const double* xb = x + (b * d.Ci + ci) * d.H * d.W;
                    for (std::int64_t ho = 0; ho < d.Hp; ++ho) {
                        const std::int64_t h = ho * stride.h - pad.h + i;
                        if (h < 0 || h >= d.H) {
                            std::memset(dst, 0, static_cast<std::size_t>(d.Wp) * sizeof(double));
                            dst += d.Wp;
                            continue;
                        }
                        const double* row = xb + h * d.W;
                        for (std::int64_t wo = 0; wo < d.Wp; ++wo) {
                            const std::int64_t w = wo * stride.w - pad.w + j;
                            *dst++ = (w >= 0 && w < d.W) ? row[w] : 0.0;
                        }
                    }
                }
            }
}

// Adjoint of im2col: accumulates columns back into the (B,Ci,H,W) image.
void col2im_add(const double* cols, const ConvDims& d, Extent stride, Extent pad, double* x) {
    const std::int64_t ncol = d.B * d.Hp * d.Wp;
    for (std::int64_t ci = 0; ci < d.Ci; ++ci)
        for (std::int64_t i = 0; i < d.kh; ++i)
            for (std::int64_t j = 0; j < d.kw; ++j) {
                const double* src = cols + ((ci * d.kh + i) * d.kw + j) * ncol;
                for (std::int64_t b = 0; b < d.B; ++b) {
                    double* xb = x + (b * d.Ci + ci) * d.H * d.W;
                    for (std::int64_t ho = 0; ho < d.Hp; ++ho) {
                        const std::int64_t h = ho * stride.h - pad.h + i;
                        if (h < 0 || h >= d.H) {
                            src += d.Wp;
                            continue;
                        }
                        double* row = xb + h * d.W;
                        for (std::int64_t wo = 0; wo < d.Wp; ++wo) {
                            const std::int64_t w = wo * stride.w - pad.w + j;
                            if (w >= 0 && w < d.W) row[w] += src[wo];
                        }
                        src += d.Wp;
                    }
                }
            }
}

// y (B,Co,Hp,Wp) row-major -> yflat (Co, B*Hp*Wp) with column index (b*Hp+ho)*Wp+wo.
void to_channel_major(const double* y, std::int64_t B, std::int64_t Co, std::int64_t n,
                      double* yflat) {
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t co = 0; co < Co; ++co)
            std::memcpy(yflat + co * B * n + b * n, y + (b * Co + co) * n,
                        static_cast<std::size_t>(n) * sizeof(double));
}

void from_channel_major(const double* yflat, std::int64_t B, std::int64_t Co, std::int64_t n,
                        double* y) {
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t co = 0; co < Co; ++co)
            std::memcpy(y + (b * Co + co) * n, yflat + co * B * n + b * n,
                        static_cast<std::size_t>(n) * sizeof(double));
}

Tensor kernel_grad(const Tensor& x, const Tensor& gy, Extent stride, Extent pad, std::int64_t kh,
                   std::int64_t kw);

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, Extent stride, Extent pad) {
    require_defined("conv2d", {&x, &k});
    check_conv_args("conv2d", stride, pad);
    if (x.ndim() != 4 || k.ndim() != 4)
        dim_fail("conv2d", "expects 4-D input and kernel, got " + shape_str(x.shape()) + " and " +
                               shape_str(k.shape()));
    if (x.dim(1) != k.dim(1))
        dim_fail("conv2d", "channel mismatch: input " + shape_str(x.shape()) + " vs kernel " +
                               shape_str(k.shape()));
    ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(2), k.dim(3), 0, 0};
    if (d.H + 2 * pad.h < d.kh || d.W + 2 * pad.w < d.kw)
        dim_fail("conv2d", "kernel " + shape_str(k.shape()) + " larger than padded input " +
                               shape_str(x.shape()));
    d.Hp = conv_out_size(d.H, d.kh, stride.h, pad.h);
    d.Wp = conv_out_size(d.W, d.kw, stride.w, pad.w);

    const std::int64_t kdim = d.Ci * d.kh * d.kw;
    const std::int64_t ncol = d.B * d.Hp * d.Wp;
    auto& cols = scratch(0);
    cols.resize(static_cast<std::size_t>(kdim * ncol));
    im2col(x.values().data(), d, stride, pad, cols.data());
    auto& yflat = scratch(1);
    yflat.resize(static_cast<std::size_t>(d.Co * ncol));
    gemm_rm(CblasNoTrans, CblasNoTrans, d.Co, ncol, kdim, k.values().data(), kdim, cols.data(),
            ncol, yflat.data(), ncol);
    std::vector<double> out(static_cast<std::size_t>(d.B * d.Co * d.Hp * d.Wp));
    from_channel_major(yflat.data(), d.B, d.Co, d.Hp * d.Wp, out.data());

    const std::int64_t H = d.H, W = d.W, kh = d.kh, kw = d.kw;
    return Tensor::make_node(
        {d.B, d.Co, d.Hp, d.Wp}, std::move(out), "conv2d", {x, k},
        [stride, pad, H, W, kh, kw](const Tensor& g, const std::vector<Tensor>& in, const Tensor&,
                                    std::size_t i) {
            if (i == 0) return conv_transpose2d(g, in[1], stride, pad, H, W);
            return kernel_grad(in[0], g, stride, pad, kh, kw);
        });
}

Tensor conv_transpose2d(const Tensor& y, const Tensor& k, Extent stride, Extent pad,
                        std::int64_t out_h, std::int64_t out_w) {
    require_defined("conv_transpose2d", {&y, &k});
    check_conv_args("conv_transpose2d", stride, pad);
    if (y.ndim() != 4 || k.ndim() != 4)
        dim_fail("conv_transpose2d", "expects 4-D input and kernel, got " + shape_str(y.shape()) +
                                         " and " + shape_str(k.shape()));
    if (y.dim(1) != k.dim(0))
        dim_fail("conv_transpose2d", "channel mismatch: input " + shape_str(y.shape()) +
                                         " vs kernel " + shape_str(k.shape()));
    ConvDims d{y.dim(0), k.dim(1), out_h, out_w, y.dim(1), k.dim(2), k.dim(3), y.dim(2), y.dim(3)};
    if (out_h + 2 * pad.h < d.kh || out_w + 2 * pad.w < d.kw ||
        conv_out_size(out_h, d.kh, stride.h, pad.h) != d.Hp ||
        conv_out_size(out_w, d.kw, stride.w, pad.w) != d.Wp)
        dim_fail("conv_transpose2d",
                 "output size {" + std::to_string(out_h) + "," + std::to_string(out_w) +
                     "} inconsistent with input " + shape_str(y.shape()) + " and kernel " +
                     shape_str(k.shape()));

    const std::int64_t kdim = d.Ci * d.kh * d.kw;
    const std::int64_t n = d.Hp * d.Wp;
    const std::int64_t ncol = d.B * n;
    auto& yflat = scratch(0);
    yflat.resize(static_cast<std::size_t>(d.Co * ncol));
    to_channel_major(y.values().data(), d.B, d.Co, n, yflat.data());
    auto& colsg = scratch(1);
    colsg.resize(static_cast<std::size_t>(kdim * ncol));
    gemm_rm(CblasTrans, CblasNoTrans, kdim, ncol, d.Co, k.values().data(), kdim, yflat.data(),
            ncol, colsg.data(), ncol);
    std::vector<double> out(static_cast<std::size_t>(d.B * d.Ci * out_h * out_w), 0.0);
    col2im_add(colsg.data(), d, stride, pad, out.data());

    return Tensor::make_node(
        {d.B, d.Ci, out_h, out_w}, std::move(out), "conv_transpose2d", {y, k},
        [stride, pad](const Tensor& g, const std::vector<Tensor>& in, const Tensor&,
                      std::size_t i) {
            const Tensor& k = in[1];
            if (i == 0) return conv2d(g, k, stride, pad);
            return kernel_grad(g, in[0], stride, pad, k.shape()[2], k.shape()[3]);
        });
}

namespace {

// d(sum(g_y * conv2d(x, k)))/dk: same im2col as the forward, contracted
// against the output gradient. Returns a kernel-shaped node whose own vjps
// map back onto conv2d / conv_transpose2d, closing the family under
// differentiation (which is what makes the gradient penalty twice
// differentiable).
Tensor kernel_grad(const Tensor& x, const Tensor& gy, Extent stride, Extent pad, std::int64_t kh,
                   std::int64_t kw) {
    ConvDims d{x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3],
               gy.shape()[1], kh,          kw,           gy.shape()[2], gy.shape()[3]};
    const std::int64_t kdim = d.Ci * d.kh * d.kw;
    const std::int64_t n = d.Hp * d.Wp;
    const std::int64_t ncol = d.B * n;
    auto& cols = scratch(0);
    cols.resize(static_cast<std::size_t>(kdim * ncol));
    im2col(x.values().data(), d, stride, pad, cols.data());
    auto& gflat = scratch(1);
    gflat.resize(static_cast<std::size_t>(d.Co * ncol));
    to_channel_major(gy.values().data(), d.B, d.Co, n, gflat.data());
    std::vector<double> dk(static_cast<std::size_t>(d.Co * kdim));
    gemm_rm(CblasNoTrans, CblasTrans, d.Co, kdim, ncol, gflat.data(), ncol, cols.data(), ncol,
            dk.data(), kdim);

    const std::int64_t H = d.H, W = d.W;
    return Tensor::make_node(
        {d.Co, d.Ci, kh, kw}, std::move(dk), "kernel_grad", {x, gy},
        [stride, pad, H, W](const Tensor& g, const std::vector<Tensor>& in, const Tensor&,
                            std::size_t i) {
            if (i == 0) return conv_transpose2d(in[1], g, stride, pad, H, W);
            return conv2d(in[0], g, stride, pad);
        });
}

}  // namespace

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_defined("fully_connected", {&x, &w, &b});
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1)
        dim_fail("fully_connected", "expects x {B,F}, w {F,O}, b {O}; got " +
                                        shape_str(x.shape()) + ", " + shape_str(w.shape()) +
                                        ", " + shape_str(b.shape()));
    if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
        dim_fail("fully_connected", "size mismatch: x " + shape_str(x.shape()) + ", w " +
                                        shape_str(w.shape()) + ", b " + shape_str(b.shape()));
    Tensor prod = matmul(x, w);
    return add(prod, broadcast_to(reshape(b, {1, b.dim(0)}), prod.shape()));
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  BnMode mode, BatchNormStats& running, double momentum) {
    require_defined("batch_norm", {&x, &gamma, &beta});
    if (x.ndim() != 4)
        dim_fail("batch_norm", "expects 4-D input, got " + shape_str(x.shape()));
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C)
        dim_fail("batch_norm", "gamma/beta must have shape {" + std::to_string(C) + "}, got " +
                                   shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    if (running.mean.empty()) {
        running.mean.assign(static_cast<std::size_t>(C), 0.0);
        running.var.assign(static_cast<std::size_t>(C), 1.0);
    }
    const Shape cshape{1, C, 1, 1};
    Tensor xn;
    if (mode == BnMode::train) {
        if (B < 2)
            dim_fail("batch_norm", "train mode needs batch size >= 2, got " +
                                       std::to_string(B));
        const double n = static_cast<double>(B * H * W);
        Tensor mean = scale(sum_to(x, cshape), 1.0 / n);
        Tensor xc = sub(x, broadcast_to(mean, x.shape()));
        Tensor var = scale(sum_to(mul(xc, xc), cshape), 1.0 / n);
        for (std::int64_t c = 0; c < C; ++c) {
            running.mean[c] = (1.0 - momentum) * running.mean[c] + momentum * mean.values()[c];
            running.var[c] = (1.0 - momentum) * running.var[c] + momentum * var.values()[c];
        }
        xn = divide(xc, broadcast_to(sqrt(shift(var, eps)), x.shape()));
    } else {
        std::vector<double> inv(static_cast<std::size_t>(C));
        for (std::int64_t c = 0; c < C; ++c) inv[c] = 1.0 / std::sqrt(running.var[c] + eps);
        Tensor mean_c = Tensor::from_values(cshape, running.mean);
        Tensor inv_c = Tensor::from_values(cshape, std::move(inv));
        xn = mul(sub(x, broadcast_to(mean_c, x.shape())), broadcast_to(inv_c, x.shape()));
    }
    Tensor g4 = broadcast_to(reshape(gamma, cshape), x.shape());
    Tensor b4 = broadcast_to(reshape(beta, cshape), x.shape());
    return add(mul(g4, xn), b4);
}

// ---- autodiff ---------------------------------------------------------------

Tape Tape::of(const Tensor& root) {
    Tape tape;
    if (!root.defined() || !root.tracked()) return tape;
    std::unordered_set<const detail::TensorImpl*> seen;
    std::vector<Tensor> stack{root};
    while (!stack.empty()) {
        Tensor t = stack.back();
        stack.pop_back();
        if (!t.tracked() || seen.count(t.impl())) continue;
        seen.insert(t.impl());
        tape.nodes.push_back(t);
        for (const auto& in : t.inputs()) stack.push_back(in);
    }
    std::sort(tape.nodes.begin(), tape.nodes.end(),
              [](const Tensor& a, const Tensor& b) { return a.node_id() < b.node_id(); });
    return tape;
}

namespace {

using GradMap = std::unordered_map<const detail::TensorImpl*, Tensor>;

// Reverse sweep from root. Nodes are visited in descending creation id, which
// is a reverse topological order by construction. When a wrt set is given,
// vjps are only evaluated along paths that can reach one of its members.
GradMap run_reverse(const Tensor& root,
                    const std::unordered_set<const detail::TensorImpl*>* wrt, bool create_graph) {
    Tape tape = Tape::of(root);
    std::unordered_set<const detail::TensorImpl*> reach;
    if (wrt) {
        for (const auto& node : tape.nodes) {
            if (wrt->count(node.impl())) {
                reach.insert(node.impl());
                continue;
            }
            for (const auto& in : node.inputs())
                if (in.tracked() && reach.count(in.impl())) {
                    reach.insert(node.impl());
                    break;
                }
        }
    }
    GradMap grads;
    grads.emplace(root.impl(), Tensor::full(root.shape(), 1.0));
    std::optional<NoGradGuard> guard;
    if (!create_graph) guard.emplace();
    for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
        const Tensor& node = *it;
        if (wrt && !reach.count(node.impl())) continue;
        auto gi = grads.find(node.impl());
        if (gi == grads.end() || node.inputs().empty()) continue;
        const Tensor g = gi->second;
        const auto& ins = node.inputs();
        for (std::size_t i = 0; i < ins.size(); ++i) {
            if (!ins[i].tracked()) continue;
            if (wrt && !reach.count(ins[i].impl())) continue;
            Tensor pg = node.impl()->vjp(g, ins, node, i);
            if (pg.shape() != ins[i].shape())
                dim_fail(node.op_name(),
                         "vjp produced " + shape_str(pg.shape()) + " for input of shape " +
                             shape_str(ins[i].shape()));
            auto e = grads.find(ins[i].impl());
            if (e == grads.end())
                grads.emplace(ins[i].impl(), pg);
            else
                e->second = add(e->second, pg);
        }
    }
    return grads;
}

void check_backward_root(const char* op, const Tensor& loss) {
    if (!loss.defined()) dim_fail(op, "undefined loss tensor");
    if (loss.size() != 1)
        dim_fail(op, "expects a scalar, got shape " + shape_str(loss.shape()));
    if (!loss.tracked())
        throw ConfigError(std::string(op) + ": value is not connected to any tracked tensor");
}

}  // namespace

void backward(const Tensor& loss) {
    check_backward_root("backward", loss);
    Tape tape = Tape::of(loss);
    GradMap grads = run_reverse(loss, nullptr, false);
    for (const auto& node : tape.nodes) {
        if (!node.inputs().empty()) continue;  // only leaves accumulate
        auto it = grads.find(node.impl());
        if (it == grads.end()) continue;
        Tensor leaf = node;
        leaf.accumulate_grad(it->second.values());
    }
}

void backward(const Tensor& loss, const std::vector<Tensor>& wrt) {
    check_backward_root("backward", loss);
    std::unordered_set<const detail::TensorImpl*> wset;
    for (const auto& t : wrt)
        if (t.defined() && t.tracked()) wset.insert(t.impl());
    GradMap grads = run_reverse(loss, &wset, false);
    for (const auto& t : wrt) {
        auto it = grads.find(t.impl());
        if (it != grads.end()) {
            Tensor mutable_t = t;
            mutable_t.accumulate_grad(it->second.values());
        }
    }
}

Tensor gradient(const Tensor& out, const Tensor& wrt, bool create_graph) {
    check_backward_root("gradient", out);
    if (!wrt.defined() || !wrt.tracked())
        throw ConfigError("gradient: wrt tensor is not tracked");
    std::unordered_set<const detail::TensorImpl*> wset{wrt.impl()};
    GradMap grads = run_reverse(out, &wset, create_graph);
    auto it = grads.find(wrt.impl());
    if (it == grads.end()) return Tensor::zeros(wrt.shape());
    return it->second;
}

Tensor input_gradient_norm(const std::function<Tensor(const Tensor&)>& net, const Tensor& x,
                           double eps) {
    if (!x.defined() || x.ndim() < 1) dim_fail("input_gradient_norm", "undefined input");
    const std::int64_t B = x.dim(0);
    Tensor xv = Tensor::from_values(x.shape(), x.values(), /*tracked=*/true);
    Tensor scores = net(xv);
    if (!scores.defined() || scores.dim(0) != B)
        dim_fail("input_gradient_norm", "net output batch dim does not match input batch " +
                                            std::to_string(B));
    // Summing scores is valid because each sample's score depends only on its
    // own row of x, so d(sum)/dx_b recovers the per-sample gradient.
    // A scorer that ignores its input entirely has zero input gradient.
    Tensor gx = scores.tracked() ? gradient(sum_all(scores), xv, /*create_graph=*/true)
                                 : Tensor::zeros(xv.shape());
    Shape red(static_cast<std::size_t>(x.ndim()), 1);
    red[0] = B;
    Tensor ss = reshape(sum_to(mul(gx, gx), red), {B});
    return sqrt(shift(ss, eps));
}

}  // namespace gan2vec
