#ifndef IVNET_MODEL_MODEL_HPP
#define IVNET_MODEL_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ivnet/autodiff/grad_check.hpp"
#include "ivnet/autodiff/tensor.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/model/lstm.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet {

enum class Variant { kHlstm, kUpa, kPpa, kApa };

inline constexpr Variant kAllVariants[] = {Variant::kHlstm, Variant::kUpa, Variant::kPpa, Variant::kApa};

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::kHlstm: return "hlstm";
        case Variant::kUpa: return "upa";
        case Variant::kPpa: return "ppa";
        case Variant::kApa: return "apa";
    }
    return "hlstm";
}

inline Variant parse_variant(std::string_view s) {
    for (const Variant v : kAllVariants) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw DataError("unknown variant '" + std::string(s) + "'");
}

/// How APA turns its query/context scores into weights.
enum class ApaNormalization {
    /// One softmax across all (P_i, C_{i-1}) pairs.
    kJoint,
    /// Each query P_i attends over C_1..C_{i-1} with its own softmax; the
    /// per-query weights are averaged.
    kPerQueryMean,
};

/// Additive attention scorer a = v^T tanh(W [query; context] + b).
struct AttentionParams {
    Tensor w;  // [h x 2h]
    Tensor b;  // [h]
    Tensor v;  // [h]
};

/// Fully connected 2-way output layer.
struct ClassifierParams {
    Tensor w;  // [2 x h]
    Tensor b;  // [2]
};

struct ModelParams {
    Tensor embeddings;  // [V x E]
    LstmParams post;    // lstm_post: E -> h
    LstmParams ctx;     // lstm_ctx: h -> h
    AttentionParams attention;
    ClassifierParams classifier;

    [[nodiscard]] std::size_t hidden() const { return post.hidden; }
    [[nodiscard]] std::size_t embed_dim() const { return embeddings.dim(1); }
    [[nodiscard]] std::size_t vocab_size() const { return embeddings.dim(0); }

    /// Every trainable tensor with a stable name, in checkpoint order.
    [[nodiscard]] std::vector<ad::NamedTensor> named() const {
        return {{"embeddings", embeddings},   {"post.w_x", post.w_x},         {"post.w_h", post.w_h},
                {"post.b", post.b},           {"ctx.w_x", ctx.w_x},           {"ctx.w_h", ctx.w_h},
                {"ctx.b", ctx.b},             {"attention.w", attention.w},   {"attention.b", attention.b},
                {"attention.v", attention.v}, {"classifier.w", classifier.w}, {"classifier.b", classifier.b}};
    }

    /// Deep copy; `trainable` decides whether the copy records gradients.
    [[nodiscard]] ModelParams clone(bool trainable = true) const {
        ModelParams p;
        p.embeddings = embeddings.clone(trainable);
        p.post = {post.w_x.clone(trainable), post.w_h.clone(trainable), post.b.clone(trainable), post.hidden,
                  post.input};
        p.ctx = {ctx.w_x.clone(trainable), ctx.w_h.clone(trainable), ctx.b.clone(trainable), ctx.hidden, ctx.input};
        p.attention = {attention.w.clone(trainable), attention.b.clone(trainable), attention.v.clone(trainable)};
        p.classifier = {classifier.w.clone(trainable), classifier.b.clone(trainable)};
        return p;
    }

    /// Read-only copy for evaluation: no graph is recorded.
    [[nodiscard]] ModelParams frozen() const { return clone(false); }

    void zero_grad() {
        for (auto &[name, t] : named()) {
            t.zero_grad();
        }
    }

    /// Random initialization. `embeddings` may be supplied (e.g. loaded
    /// vectors); otherwise rows are uniform(-0.05, 0.05).
    static ModelParams init(std::size_t vocab_size, std::size_t embed, std::size_t hidden, Rng &rng,
                            std::optional<Tensor> embeddings = std::nullopt) {
        ModelParams p;
        if (embeddings) {
            if (embeddings->rank() != 2 || embeddings->dim(0) != vocab_size || embeddings->dim(1) != embed) {
                throw DimensionError(fmt::format("embedding matrix {} does not match vocab {} x embed {}",
                                                 ad::shape_str(embeddings->shape()), vocab_size, embed));
            }
            p.embeddings = embeddings->clone(true);
        } else {
            std::vector<double> e(vocab_size * embed);
            for (double &x : e) {
                x = rng.uniform(-0.05, 0.05);
            }
            p.embeddings = Tensor::matrix(vocab_size, embed, std::move(e), true);
        }
        p.post = LstmParams::init(embed, hidden, rng);
        p.ctx = LstmParams::init(hidden, hidden, rng);
        const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
        const auto uniform = [&](std::size_t n) {
            std::vector<double> v(n);
            for (double &x : v) {
                x = rng.uniform(-r, r);
            }
            return v;
        };
        p.attention.w = Tensor::matrix(hidden, 2 * hidden, uniform(2 * hidden * hidden), true);
        p.attention.b = Tensor::zeros({hidden}, true);
        p.attention.v = Tensor::vector(uniform(hidden), true);
        p.classifier.w = Tensor::matrix(2, hidden, uniform(2 * hidden), true);
        p.classifier.b = Tensor::zeros({2}, true);
        return p;
    }
};

/// A thread as vocabulary indices, one list per student post.
struct EncodedThread {
    std::string thread_id;
    std::vector<std::vector<std::size_t>> posts;
    int label = 0;
};

inline EncodedThread encode_thread(const Thread &t, const Vocab &vocab) {
    EncodedThread e{t.thread_id, {}, t.label};
    e.posts.reserve(t.posts.size());
    for (const auto &p : t.posts) {
        auto ids = vocab.encode(p.tokens);
        if (ids.empty()) {
            ids.push_back(vocab.index(std::string(special::kEmpty)));
        }
        e.posts.push_back(std::move(ids));
    }
    return e;
}

/// Keep only the last `k` posts.
inline EncodedThread truncate_context(EncodedThread t, std::size_t k) {
    if (k > 0 && t.posts.size() > k) {
        t.posts.erase(t.posts.begin(), t.posts.end() - static_cast<std::ptrdiff_t>(k));
    }
    return t;
}

/// Attention weight of one query/context pair. Indices are 1-based post
/// positions: query P_i, context C_j.
struct AttentionPair {
    std::size_t query = 0;
    std::size_t context = 0;
    double weight = 0.0;
};

struct AttentionTrace {
    std::string thread_id;
    Variant variant = Variant::kUpa;
    std::vector<AttentionPair> pairs;
};

struct Forward {
    Tensor logits;  // [2]
    std::optional<AttentionTrace> trace;
};

struct ModelOptions {
    ApaNormalization apa_normalization = ApaNormalization::kJoint;
};

inline Tensor classify(const ClassifierParams &p, const Tensor &rep) {
    return ad::matmul(p.w, rep) + p.b;
}

inline Tensor attention_score(const AttentionParams &p, const Tensor &query, const Tensor &context) {
    return ad::dot(p.v, ad::tanh(ad::matmul(p.w, ad::concat(query, context)) + p.b));
}

/// Post vectors P_1..P_k from lstm_post.
inline std::vector<Tensor> encode_posts(const ModelParams &p, const EncodedThread &t) {
    if (t.posts.empty()) {
        throw DataError("thread " + t.thread_id + " has no student posts");
    }
    std::vector<Tensor> vectors;
    vectors.reserve(t.posts.size());
    std::vector<Tensor> embedded;
    for (const auto &post : t.posts) {
        embedded.clear();
        for (const std::size_t id : post) {
            embedded.push_back(ad::row(p.embeddings, id));
        }
        vectors.push_back(encode_post(p.post, embedded));
    }
    return vectors;
}

namespace detail {

// Query `query` (0-based post) over contexts[0..count).
inline Forward attend_single_query(const ModelParams &p, const std::vector<Tensor> &posts,
                                   const std::vector<Tensor> &contexts, std::size_t query, std::size_t count,
                                   Variant variant, const std::string &thread_id) {
    std::vector<Tensor> scores;
    scores.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        scores.push_back(attention_score(p.attention, posts[query], contexts[j]));
    }
    const Tensor alpha = ad::softmax(ad::stack(scores));
    const Tensor attended = ad::weighted_sum(alpha, std::span(contexts.data(), count));
    AttentionTrace trace{thread_id, variant, {}};
    for (std::size_t j = 0; j < count; ++j) {
        trace.pairs.push_back({query + 1, j + 1, alpha[j]});
    }
    return {classify(p.classifier, attended), std::move(trace)};
}

inline Forward single_context_fallback(const ModelParams &p, const std::vector<Tensor> &contexts, Variant variant,
                                       const std::string &thread_id) {
    return {classify(p.classifier, contexts.front()), AttentionTrace{thread_id, variant, {{1, 1, 1.0}}}};
}

inline Forward apa_forward(const ModelParams &p, const std::vector<Tensor> &posts,
                           const std::vector<Tensor> &contexts, const ModelOptions &opt,
                           const std::string &thread_id) {
    const std::size_t m = posts.size();
    if (opt.apa_normalization == ApaNormalization::kJoint) {
        // pairs (P_i, C_{i-1}) for i = 2..m, one softmax over all of them
        std::vector<Tensor> scores;
        scores.reserve(m - 1);
        for (std::size_t i = 1; i < m; ++i) {
            scores.push_back(attention_score(p.attention, posts[i], contexts[i - 1]));
        }
        const Tensor alpha = ad::softmax(ad::stack(scores));
        const Tensor attended = ad::weighted_sum(alpha, std::span(contexts.data(), m - 1));
        AttentionTrace trace{thread_id, Variant::kApa, {}};
        for (std::size_t i = 1; i < m; ++i) {
            trace.pairs.push_back({i + 1, i, alpha[i - 1]});
        }
        return {classify(p.classifier, attended), std::move(trace)};
    }
    // Per-query softmax over each query's preceding contexts, then the mean
    // of the per-query weight rows.
    const double share = 1.0 / static_cast<double>(m - 1);
    std::vector<Tensor> weights(m - 1);
    AttentionTrace trace{thread_id, Variant::kApa, {}};
    for (std::size_t i = 1; i < m; ++i) {
        std::vector<Tensor> scores;
        for (std::size_t j = 0; j < i; ++j) {
            scores.push_back(attention_score(p.attention, posts[i], contexts[j]));
        }
        const Tensor alpha = ad::scale(ad::softmax(ad::stack(scores)), share);
        for (std::size_t j = 0; j < i; ++j) {
            const Tensor a_ij = ad::slice(alpha, j, 1);
            weights[j] = weights[j].defined() ? ad::add(weights[j], a_ij) : a_ij;
            trace.pairs.push_back({i + 1, j + 1, alpha[j]});
        }
    }
    std::vector<Tensor> scalars;
    scalars.reserve(weights.size());
    for (const auto &w : weights) {
        scalars.push_back(ad::sum(w));
    }
    const Tensor alpha = ad::stack(scalars);
    const Tensor attended = ad::weighted_sum(alpha, std::span(contexts.data(), m - 1));
    return {classify(p.classifier, attended), std::move(trace)};
}

}  // namespace detail

/// Forward pass of one variant over a thread of k >= 1 student posts.
///
/// hLSTM classifies the last context C_k. UPA queries P_k over C_1..C_k;
/// PPA queries P_k over C_1..C_{k-1}; APA scores pairs (P_i, C_{i-1}) for
/// i = 2..k. PPA and APA fall back to C_1 with weight 1 on one-post threads.
inline Forward predict(const ModelParams &p, const EncodedThread &t, Variant variant, const ModelOptions &opt = {}) {
    const std::vector<Tensor> posts = encode_posts(p, t);
    const std::vector<Tensor> contexts = encode_contexts(p.ctx, posts);
    const std::size_t m = posts.size();
    switch (variant) {
        case Variant::kHlstm: return {classify(p.classifier, contexts.back()), std::nullopt};
        case Variant::kUpa: return detail::attend_single_query(p, posts, contexts, m - 1, m, variant, t.thread_id);
        case Variant::kPpa:
            if (m == 1) {
                return detail::single_context_fallback(p, contexts, variant, t.thread_id);
            }
            return detail::attend_single_query(p, posts, contexts, m - 1, m - 1, variant, t.thread_id);
        case Variant::kApa:
            if (m == 1) {
                return detail::single_context_fallback(p, contexts, variant, t.thread_id);
            }
            return detail::apa_forward(p, posts, contexts, opt, t.thread_id);
    }
    throw DataError("unknown variant");
}

/// Predicted class: 1 when the positive logit is strictly larger.
inline int predicted_label(const Tensor &logits) { return logits[1] > logits[0] ? 1 : 0; }

}  // namespace ivnet

#endif
