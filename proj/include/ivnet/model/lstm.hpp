#ifndef IVNET_MODEL_LSTM_HPP
#define IVNET_MODEL_LSTM_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ivnet/autodiff/tensor.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet {

using ad::Tensor;

/// Single-layer LSTM weights. Gate rows are stacked as input, forget,
/// output, candidate: z = W_x x + W_h h + b, each block `hidden` rows.
struct LstmParams {
    Tensor w_x;  // [4h x d]
    Tensor w_h;  // [4h x h]
    Tensor b;    // [4h]
    std::size_t hidden = 0;
    std::size_t input = 0;

    /// uniform(-1/sqrt(h), 1/sqrt(h)) weights, forget bias 1, other biases 0.
    static LstmParams init(std::size_t input, std::size_t hidden, Rng &rng) {
        const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
        const auto uniform = [&](std::size_t n) {
            std::vector<double> v(n);
            for (double &x : v) {
                x = rng.uniform(-r, r);
            }
            return v;
        };
        LstmParams p;
        p.hidden = hidden;
        p.input = input;
        p.w_x = Tensor::matrix(4 * hidden, input, uniform(4 * hidden * input), true);
        p.w_h = Tensor::matrix(4 * hidden, hidden, uniform(4 * hidden * hidden), true);
        std::vector<double> bias(4 * hidden, 0.0);
        std::fill(bias.begin() + static_cast<std::ptrdiff_t>(hidden),
                  bias.begin() + static_cast<std::ptrdiff_t>(2 * hidden), 1.0);
        p.b = Tensor::vector(std::move(bias), true);
        return p;
    }

    static LstmParams zeros(std::size_t input, std::size_t hidden) {
        LstmParams p;
        p.hidden = hidden;
        p.input = input;
        p.w_x = Tensor::zeros({4 * hidden, input}, true);
        p.w_h = Tensor::zeros({4 * hidden, hidden}, true);
        p.b = Tensor::zeros({4 * hidden}, true);
        return p;
    }
};

struct LstmState {
    Tensor h;
    Tensor c;

    static LstmState zeros(std::size_t hidden) {
        return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
    }
};

inline LstmState lstm_step(const LstmParams &p, const Tensor &x, const LstmState &prev) {
    if (x.rank() != 1 || x.size() != p.input || prev.h.size() != p.hidden || prev.c.size() != p.hidden) {
        throw DimensionError(fmt::format("lstm_step: x {} / h {} / c {} do not fit input {} hidden {}",
                                         ad::shape_str(x.shape()), ad::shape_str(prev.h.shape()),
                                         ad::shape_str(prev.c.shape()), p.input, p.hidden));
    }
    for (const double v : prev.c.data()) {
        if (!std::isfinite(v)) {
            throw NumericError("lstm_step: non-finite cell state");
        }
    }
    const std::size_t h = p.hidden;
    const Tensor z = ad::matmul(p.w_x, x) + ad::matmul(p.w_h, prev.h) + p.b;
    const Tensor in_gate = ad::sigmoid(ad::slice(z, 0, h));
    const Tensor forget = ad::sigmoid(ad::slice(z, h, h));
    const Tensor out_gate = ad::sigmoid(ad::slice(z, 2 * h, h));
    const Tensor cand = ad::tanh(ad::slice(z, 3 * h, h));
    Tensor c = forget * prev.c + in_gate * cand;
    Tensor hidden = out_gate * ad::tanh(c);
    return {std::move(hidden), std::move(c)};
}

/// Final hidden state of the word-level LSTM over a post's token embeddings.
inline Tensor encode_post(const LstmParams &p, std::span<const Tensor> embeddings) {
    if (embeddings.empty()) {
        throw DimensionError("encode_post: post has no tokens");
    }
    LstmState s = LstmState::zeros(p.hidden);
    for (const auto &x : embeddings) {
        s = lstm_step(p, x, s);
    }
    return s.h;
}

/// Context snapshots C_1..C_k: the post-level LSTM's hidden state after
/// each post vector.
inline std::vector<Tensor> encode_contexts(const LstmParams &p, std::span<const Tensor> posts) {
    if (posts.empty()) {
        throw DimensionError("encode_contexts: no post vectors");
    }
    std::vector<Tensor> contexts;
    contexts.reserve(posts.size());
    LstmState s = LstmState::zeros(p.hidden);
    for (const auto &post : posts) {
        s = lstm_step(p, post, s);
        contexts.push_back(s.h);
    }
    return contexts;
}

}  // namespace ivnet

#endif
