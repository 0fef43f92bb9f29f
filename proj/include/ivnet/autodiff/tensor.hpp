#ifndef IVNET_AUTODIFF_TENSOR_HPP
#define IVNET_AUTODIFF_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ivnet/error.hpp"

namespace ivnet::ad {

/// Dimensions, outermost first. An empty shape is a scalar.
using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape &shape) { return fmt::format("[{}]", fmt::join(shape, "x")); }

struct TensorImpl;

/// One recorded operation: the inputs it read and how to push the output
/// gradient back into them.
struct OpRecord {
    std::string_view name;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void(const TensorImpl &out)> backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool consumed = false;  // set on interior nodes once backward has run through them
    std::unique_ptr<OpRecord> op;

    std::vector<double> &ensure_grad() {
        if (grad.empty()) {
            grad.assign(data.size(), 0.0);
        }
        return grad;
    }
};

/// Handle to a dense row-major float64 array that may participate in a
/// reverse-mode computation graph. Copies share the same storage.
class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : impl_(std::make_shared<TensorImpl>()) {
        if (numel(shape) != data.size()) {
            throw DimensionError(fmt::format("tensor of shape {} cannot hold {} values", shape_str(shape), data.size()));
        }
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const std::size_t n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) { return Tensor({}, {value}, requires_grad); }

    static Tensor vector(std::vector<double> values, bool requires_grad = false) {
        const std::size_t n = values.size();
        return Tensor({n}, std::move(values), requires_grad);
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false) {
        return Tensor({rows, cols}, std::move(values), requires_grad);
    }

    [[nodiscard]] bool defined() const noexcept { return impl_ != nullptr; }
    [[nodiscard]] const Shape &shape() const { return impl_->shape; }
    [[nodiscard]] std::size_t rank() const { return impl_->shape.size(); }
    [[nodiscard]] std::size_t size() const { return impl_->data.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

    [[nodiscard]] std::span<const double> data() const { return impl_->data; }
    [[nodiscard]] std::span<double> mutable_data() { return impl_->data; }
    [[nodiscard]] double item() const {
        if (size() != 1) {
            throw DimensionError(fmt::format("item() on tensor of shape {}", shape_str(shape())));
        }
        return impl_->data[0];
    }
    [[nodiscard]] double operator[](std::size_t i) const { return impl_->data[i]; }

    [[nodiscard]] bool requires_grad() const { return impl_->requires_grad; }
    [[nodiscard]] bool has_grad() const { return !impl_->grad.empty(); }
    /// Accumulated gradient; zeros when nothing has been accumulated yet.
    [[nodiscard]] std::span<const double> grad() const { return impl_->ensure_grad(); }
    [[nodiscard]] std::span<double> mutable_grad() { return impl_->ensure_grad(); }

    void zero_grad() {
        if (!impl_->grad.empty()) {
            std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
        }
    }

    [[nodiscard]] bool is_leaf() const { return impl_->op == nullptr; }
    [[nodiscard]] std::string_view op_name() const { return impl_->op ? impl_->op->name : std::string_view("leaf"); }

    /// Deep copy of the values, detached from any graph.
    [[nodiscard]] Tensor clone(bool requires_grad = false) const { return Tensor(shape(), impl_->data, requires_grad); }

    [[nodiscard]] const std::shared_ptr<TensorImpl> &impl() const { return impl_; }

    [[nodiscard]] bool same_storage(const Tensor &other) const noexcept { return impl_ == other.impl_; }

  private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<TensorImpl> impl_;

    friend Tensor make_result(Shape, std::vector<double>, std::string_view, std::vector<Tensor>,
                              std::function<void(const TensorImpl &)>);
};

/// Build an op output. The backward closure is only attached when some input
/// requires a gradient.
inline Tensor make_result(Shape shape, std::vector<double> data, std::string_view name, std::vector<Tensor> inputs,
                          std::function<void(const TensorImpl &)> backward) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor &t) { return t.requires_grad(); });
    if (needs) {
        impl->requires_grad = true;
        auto op = std::make_unique<OpRecord>();
        op->name = name;
        op->inputs.reserve(inputs.size());
        for (const auto &t : inputs) {
            if (t.impl()->consumed) {
                throw GraphError(fmt::format("{}: input belongs to a graph that has already been back-propagated", name));
            }
            op->inputs.push_back(t.impl());
        }
        op->backward = std::move(backward);
        impl->op = std::move(op);
    }
    return Tensor(std::move(impl));
}

namespace detail {

inline void check_finite(std::span<const double> values, std::string_view op) {
    for (const double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(fmt::format("{}: non-finite input value {}", op, v));
        }
    }
}

inline bool is_scalar_like(const Tensor &t) { return t.size() == 1; }

// Broadcast rule for binary elementwise ops: equal shapes, or one side holds
// a single value.
inline Shape broadcast_shape(const Tensor &a, const Tensor &b, std::string_view op) {
    if (a.shape() == b.shape()) {
        return a.shape();
    }
    if (is_scalar_like(b) && (!is_scalar_like(a) || a.shape().size() >= b.shape().size())) {
        return a.shape();
    }
    if (is_scalar_like(a)) {
        return b.shape();
    }
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor &a, const Tensor &b, std::string_view name, Fwd fwd, DA da, DB db) {
    Shape out_shape = broadcast_shape(a, b, name);
    const std::size_t n = numel(out_shape);
    const bool a_bc = a.size() != n;
    const bool b_bc = b.size() != n;
    std::vector<double> out(n);
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = fwd(ad[a_bc ? 0 : i], bd[b_bc ? 0 : i]);
    }
    auto ai = a.impl();
    auto bi = b.impl();
    return make_result(std::move(out_shape), std::move(out), name, {a, b}, [ai, bi, a_bc, b_bc, da, db](const TensorImpl &o) {
        const std::size_t n = o.data.size();
        if (ai->requires_grad) {
            auto &g = ai->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                g[a_bc ? 0 : i] += o.grad[i] * da(ai->data[a_bc ? 0 : i], bi->data[b_bc ? 0 : i]);
            }
        }
        if (bi->requires_grad) {
            auto &g = bi->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                g[b_bc ? 0 : i] += o.grad[i] * db(ai->data[a_bc ? 0 : i], bi->data[b_bc ? 0 : i]);
            }
        }
    });
}

// Unary op whose derivative is expressed through the output value.
template <typename Fwd, typename DOut>
Tensor unary(const Tensor &a, std::string_view name, Fwd fwd, DOut d_from_out) {
    std::vector<double> out(a.size());
    const auto ad = a.data();
    std::transform(ad.begin(), ad.end(), out.begin(), fwd);
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), name, {a}, [ai, d_from_out](const TensorImpl &o) {
        auto &g = ai->ensure_grad();
        for (std::size_t i = 0; i < o.data.size(); ++i) {
            g[i] += o.grad[i] * d_from_out(o.data[i]);
        }
    });
}

inline double stable_sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor &a, const Tensor &b) {
    return detail::binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor &a, const Tensor &b) {
    return detail::binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor &a, const Tensor &b) {
    return detail::binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

inline Tensor tanh(const Tensor &a) {
    return detail::unary(
        a, "tanh", [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor &a) {
    return detail::unary(a, "sigmoid", detail::stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

inline Tensor scale(const Tensor &a, double factor) {
    return detail::unary(
        a, "scale", [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

inline Tensor operator+(const Tensor &a, const Tensor &b) { return add(a, b); }
inline Tensor operator-(const Tensor &a, const Tensor &b) { return sub(a, b); }
inline Tensor operator*(const Tensor &a, const Tensor &b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// Linear algebra

/// Matrix product. `b` may be rank 1, in which case it is treated as a
/// column and the result is rank 1 as well.
inline Tensor matmul(const Tensor &a, const Tensor &b) {
    const bool b_vec = b.rank() == 1;
    if (a.rank() != 2 || (b.rank() != 2 && !b_vec) || a.dim(1) != b.dim(0)) {
        throw DimensionError(
            fmt::format("matmul: cannot multiply {} by {}", shape_str(a.shape()), shape_str(b.shape())));
    }
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b_vec ? 1 : b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const double *A = a.data().data();
    const double *B = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double *arow = A + i * k;
        double *orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double *brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    Shape out_shape = b_vec ? Shape{m} : Shape{m, n};
    auto ai = a.impl();
    auto bi = b.impl();
    return make_result(std::move(out_shape), std::move(out), "matmul", {a, b}, [ai, bi, m, k, n](const TensorImpl &o) {
        const double *dC = o.grad.data();
        if (ai->requires_grad) {
            // dA = dC * B^T
            auto &dA = ai->ensure_grad();
            const double *B = bi->data.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        acc += dC[i * n + j] * B[p * n + j];
                    }
                    dA[i * k + p] += acc;
                }
            }
        }
        if (bi->requires_grad) {
            // dB = A^T * dC
            auto &dB = bi->ensure_grad();
            const double *A = ai->data.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) {
                        dB[p * n + j] += av * dC[i * n + j];
                    }
                }
            }
        }
    });
}

inline Tensor dot(const Tensor &a, const Tensor &b) {
    if (a.rank() != 1 || b.shape() != a.shape()) {
        throw DimensionError(fmt::format("dot: shape mismatch {} vs {}", shape_str(a.shape()), shape_str(b.shape())));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    auto ai = a.impl();
    auto bi = b.impl();
    return make_result({}, {acc}, "dot", {a, b}, [ai, bi](const TensorImpl &o) {
        const double g = o.grad[0];
        if (ai->requires_grad) {
            auto &ga = ai->ensure_grad();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += g * bi->data[i];
            }
        }
        if (bi->requires_grad) {
            auto &gb = bi->ensure_grad();
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] += g * ai->data[i];
            }
        }
    });
}

inline Tensor sum(const Tensor &a) {
    double acc = 0.0;
    for (const double v : a.data()) {
        acc += v;
    }
    auto ai = a.impl();
    return make_result({}, {acc}, "sum", {a}, [ai](const TensorImpl &o) {
        auto &g = ai->ensure_grad();
        for (double &x : g) {
            x += o.grad[0];
        }
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor concat(const Tensor &a, const Tensor &b) {
    if (a.rank() != 1 || b.rank() != 1) {
        throw DimensionError(fmt::format("concat: expected rank-1 operands, got {} and {}", shape_str(a.shape()),
                                         shape_str(b.shape())));
    }
    const std::size_t p = a.size();
    std::vector<double> out;
    out.reserve(p + b.size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    auto ai = a.impl();
    auto bi = b.impl();
    return make_result({p + b.size()}, std::move(out), "concat", {a, b}, [ai, bi, p](const TensorImpl &o) {
        if (ai->requires_grad) {
            auto &g = ai->ensure_grad();
            for (std::size_t i = 0; i < p; ++i) {
                g[i] += o.grad[i];
            }
        }
        if (bi->requires_grad) {
            auto &g = bi->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += o.grad[p + i];
            }
        }
    });
}

/// Contiguous sub-range [offset, offset + length) of a rank-1 tensor.
inline Tensor slice(const Tensor &a, std::size_t offset, std::size_t length) {
    if (a.rank() != 1 || offset + length > a.size()) {
        throw DimensionError(fmt::format("slice: [{}, {}) out of range for {}", offset, offset + length,
                                         shape_str(a.shape())));
    }
    std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(offset),
                            a.data().begin() + static_cast<std::ptrdiff_t>(offset + length));
    auto ai = a.impl();
    return make_result({length}, std::move(out), "slice", {a}, [ai, offset](const TensorImpl &o) {
        auto &g = ai->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            g[offset + i] += o.grad[i];
        }
    });
}

/// Row `index` of a rank-2 tensor (embedding lookup).
inline Tensor row(const Tensor &table, std::size_t index) {
    if (table.rank() != 2 || index >= table.dim(0)) {
        throw DimensionError(fmt::format("row: index {} out of range for {}", index, shape_str(table.shape())));
    }
    const std::size_t cols = table.dim(1);
    const auto begin = table.data().begin() + static_cast<std::ptrdiff_t>(index * cols);
    std::vector<double> out(begin, begin + static_cast<std::ptrdiff_t>(cols));
    auto ti = table.impl();
    return make_result({cols}, std::move(out), "row", {table}, [ti, index, cols](const TensorImpl &o) {
        auto &g = ti->ensure_grad();
        for (std::size_t j = 0; j < cols; ++j) {
            g[index * cols + j] += o.grad[j];
        }
    });
}

/// Gather scalar tensors into one rank-1 tensor.
inline Tensor stack(std::span<const Tensor> scalars) {
    std::vector<double> out;
    out.reserve(scalars.size());
    std::vector<Tensor> inputs(scalars.begin(), scalars.end());
    for (const auto &s : scalars) {
        if (s.size() != 1) {
            throw DimensionError(fmt::format("stack: expected scalars, got {}", shape_str(s.shape())));
        }
        out.push_back(s.item());
    }
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(inputs.size());
    for (const auto &t : inputs) {
        impls.push_back(t.impl());
    }
    return make_result({scalars.size()}, std::move(out), "stack", std::move(inputs), [impls](const TensorImpl &o) {
        for (std::size_t i = 0; i < impls.size(); ++i) {
            if (impls[i]->requires_grad) {
                impls[i]->ensure_grad()[0] += o.grad[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Probability

/// Softmax of a rank-1 tensor, computed with max subtraction.
inline Tensor softmax(const Tensor &logits) {
    if (logits.rank() != 1 || logits.size() == 0) {
        throw DimensionError(fmt::format("softmax: expected non-empty rank-1 input, got {}", shape_str(logits.shape())));
    }
    detail::check_finite(logits.data(), "softmax");
    const auto x = logits.data();
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        z += out[i];
    }
    for (double &v : out) {
        v /= z;
    }
    auto li = logits.impl();
    return make_result(logits.shape(), std::move(out), "softmax", {logits}, [li](const TensorImpl &o) {
        // dx_i = y_i * (dy_i - sum_j dy_j y_j)
        double s = 0.0;
        for (std::size_t j = 0; j < o.data.size(); ++j) {
            s += o.grad[j] * o.data[j];
        }
        auto &g = li->ensure_grad();
        for (std::size_t i = 0; i < o.data.size(); ++i) {
            g[i] += o.data[i] * (o.grad[i] - s);
        }
    });
}

/// -log softmax(logits)[label], via log-sum-exp.
inline Tensor cross_entropy(const Tensor &logits, std::size_t label) {
    if (logits.rank() != 1 || label >= logits.size()) {
        throw DimensionError(
            fmt::format("cross_entropy: label {} invalid for logits {}", label, shape_str(logits.shape())));
    }
    detail::check_finite(logits.data(), "cross_entropy");
    const auto x = logits.data();
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (const double v : x) {
        z += std::exp(v - mx);
    }
    const double lse = mx + std::log(z);
    const double loss = lse - x[label];
    auto li = logits.impl();
    return make_result({}, {loss}, "cross_entropy", {logits}, [li, lse, label](const TensorImpl &o) {
        auto &g = li->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double p = std::exp(li->data[i] - lse);
            g[i] += o.grad[0] * (p - (i == label ? 1.0 : 0.0));
        }
    });
}

/// sum_i weights[i] * vectors[i]. The first term seeds the accumulator, so a
/// single vector with weight exactly 1 is reproduced bit for bit.
inline Tensor weighted_sum(const Tensor &weights, std::span<const Tensor> vectors) {
    if (weights.rank() != 1 || weights.size() != vectors.size() || vectors.empty()) {
        throw DimensionError(fmt::format("weighted_sum: {} weights for {} vectors", weights.size(), vectors.size()));
    }
    const Shape &vshape = vectors.front().shape();
    for (const auto &v : vectors) {
        if (v.shape() != vshape) {
            throw DimensionError(
                fmt::format("weighted_sum: vector shapes differ ({} vs {})", shape_str(vshape), shape_str(v.shape())));
        }
    }
    const auto w = weights.data();
    std::vector<double> out(vectors.front().size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = w[0] * vectors[0][j];
    }
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        const auto vd = vectors[i].data();
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += w[i] * vd[j];
        }
    }
    std::vector<Tensor> inputs{weights};
    inputs.insert(inputs.end(), vectors.begin(), vectors.end());
    std::vector<std::shared_ptr<TensorImpl>> vimpls;
    vimpls.reserve(vectors.size());
    for (const auto &v : vectors) {
        vimpls.push_back(v.impl());
    }
    auto wi = weights.impl();
    return make_result(vshape, std::move(out), "weighted_sum", std::move(inputs), [wi, vimpls](const TensorImpl &o) {
        for (std::size_t i = 0; i < vimpls.size(); ++i) {
            const auto &vi = vimpls[i];
            if (wi->requires_grad) {
                double acc = 0.0;
                for (std::size_t j = 0; j < o.grad.size(); ++j) {
                    acc += o.grad[j] * vi->data[j];
                }
                wi->ensure_grad()[i] += acc;
            }
            if (vi->requires_grad) {
                auto &g = vi->ensure_grad();
                const double wv = wi->data[i];
                for (std::size_t j = 0; j < o.grad.size(); ++j) {
                    g[j] += wv * o.grad[j];
                }
            }
        }
    });
}

}  // namespace ivnet::ad

#endif
