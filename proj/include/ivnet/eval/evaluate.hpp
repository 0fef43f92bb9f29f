#ifndef IVNET_EVAL_EVALUATE_HPP
#define IVNET_EVAL_EVALUATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/baseline/logreg.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/eval/metrics.hpp"
#include "ivnet/model/model.hpp"

namespace ivnet {

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Each index is
/// handled by exactly one worker and results go to caller-owned slots, so
/// the outcome does not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn &&fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) {
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

struct Evaluation {
    std::vector<PredictionRecord> records;
    /// Empty for hLSTM and the baseline.
    std::vector<AttentionTrace> traces;
};

inline double positive_probability(const Tensor &logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    return e1 / (e0 + e1);
}

/// Predictions of a neural model on `threads`. The parameters are frozen
/// before the fan-out so that no worker records a graph.
inline Evaluation evaluate_model(const ModelParams &params, Variant variant, const Corpus &threads,
                                 const Vocab &vocab, std::size_t workers = 1, const ModelOptions &opt = {}) {
    const ModelParams frozen = params.frozen();
    const std::size_t n = threads.threads.size();
    Evaluation ev;
    ev.records.resize(n);
    std::vector<std::optional<AttentionTrace>> traces(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const Thread &t = threads.threads[i];
        const Forward fwd = predict(frozen, encode_thread(t, vocab), variant, opt);
        PredictionRecord &r = ev.records[i];
        r.thread_id = t.thread_id;
        r.course_id = t.course_id;
        r.label = t.label;
        r.predicted = predicted_label(fwd.logits);
        r.p_positive = positive_probability(fwd.logits);
        r.length = t.posts.size();
        r.original_length = t.original_length;
        traces[i] = fwd.trace;
    });
    for (auto &t : traces) {
        if (t) {
            ev.traces.push_back(std::move(*t));
        }
    }
    return ev;
}

inline Evaluation evaluate_logreg(const LogRegParams &params, const Corpus &threads, const Vocab &vocab,
                                  const FeatureOptions &features = {}, std::size_t workers = 1) {
    const std::size_t n = threads.threads.size();
    Evaluation ev;
    ev.records.resize(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const Thread &t = threads.threads[i];
        const double p = predict_logreg(params, extract_features(t, vocab, features));
        ev.records[i] = {t.thread_id, t.course_id, t.label, p > 0.5 ? 1 : 0, p, t.posts.size(), t.original_length};
    });
    return ev;
}

/// {thread_id, variant, pairs:[{query, context, weight}], predicted, label}
inline nlohmann::ordered_json trace_json(const AttentionTrace &trace, const PredictionRecord &record) {
    nlohmann::ordered_json j;
    j["thread_id"] = trace.thread_id;
    j["variant"] = std::string(to_string(trace.variant));
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto &p : trace.pairs) {
        j["pairs"].push_back({{"query", p.query}, {"context", p.context}, {"weight", p.weight}});
    }
    j["predicted"] = record.predicted;
    j["label"] = record.label;
    return j;
}

inline AttentionTrace trace_from_json(const nlohmann::json &j) {
    AttentionTrace t;
    t.thread_id = j.at("thread_id").get<std::string>();
    t.variant = parse_variant(j.at("variant").get<std::string>());
    for (const auto &p : j.at("pairs")) {
        t.pairs.push_back({p.at("query").get<std::size_t>(), p.at("context").get<std::size_t>(),
                           p.at("weight").get<double>()});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Introspection

enum class RelativePosition { kFirst, kMiddle, kLast };

inline std::string_view to_string(RelativePosition p) {
    switch (p) {
        case RelativePosition::kFirst: return "first";
        case RelativePosition::kMiddle: return "middle";
        case RelativePosition::kLast: return "last";
    }
    return "first";
}

/// Position of context j among m student posts; a lone post counts as first.
inline RelativePosition relative_position(std::size_t j, std::size_t m) {
    if (j <= 1) {
        return RelativePosition::kFirst;
    }
    return j >= m ? RelativePosition::kLast : RelativePosition::kMiddle;
}

/// Attention mass per context (1-based), summed over queries.
inline std::map<std::size_t, double> context_mass(const AttentionTrace &trace) {
    std::map<std::size_t, double> mass;
    for (const auto &p : trace.pairs) {
        mass[p.context] += p.weight;
    }
    return mass;
}

struct IntrospectionRow {
    std::string thread_id;
    std::size_t posts = 0;
    std::size_t top_context = 0;
    double top_weight = 0.0;
    RelativePosition position = RelativePosition::kFirst;
    std::string snippet;
};

struct IntrospectionReport {
    std::vector<IntrospectionRow> rows;
    std::map<std::string, std::size_t> position_histogram{{"first", 0}, {"middle", 0}, {"last", 0}};
    /// Mean weight on the context of the last student post, and the mean of
    /// the matching uniform weight 1/m.
    double mean_final_mass = 0.0;
    double mean_uniform_baseline = 0.0;
    /// Mean mass on contexts whose post carries a signal token, over threads
    /// that have one. Absent without signal tokens.
    std::optional<double> mean_signal_mass;
    std::size_t signal_threads = 0;
};

struct IntrospectOptions {
    std::set<std::string> signal_tokens;
    std::size_t snippet_chars = 80;
};

inline std::string snippet_of(const std::string &text, std::size_t limit) {
    if (text.size() <= limit) {
        return text;
    }
    std::size_t cut = limit;
    // do not split a UTF-8 sequence
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) {
        --cut;
    }
    return text.substr(0, cut) + "...";
}

inline IntrospectionReport introspect(const std::vector<AttentionTrace> &traces, const Corpus &corpus,
                                      const IntrospectOptions &opt = {}) {
    std::map<std::string, const Thread *> by_id;
    for (const auto &t : corpus.threads) {
        by_id.emplace(t.thread_id, &t);
    }
    IntrospectionReport rep;
    double signal_total = 0.0;
    for (const auto &trace : traces) {
        const auto it = by_id.find(trace.thread_id);
        if (it == by_id.end()) {
            throw DataError(fmt::format("introspect: trace for unknown thread '{}'", trace.thread_id));
        }
        const Thread &thread = *it->second;
        if (trace.pairs.empty()) {
            throw DataError(fmt::format("introspect: empty trace for thread '{}'", trace.thread_id));
        }
        const std::size_t m = thread.posts.size();
        const auto mass = context_mass(trace);
        IntrospectionRow row;
        row.thread_id = thread.thread_id;
        row.posts = m;
        for (const auto &[ctx, w] : mass) {
            if (ctx == 0 || ctx > m) {
                throw DataError(fmt::format("introspect: thread '{}' has {} posts but the trace attends to context {}",
                                            thread.thread_id, m, ctx));
            }
            if (w > row.top_weight || row.top_context == 0) {
                row.top_context = ctx;
                row.top_weight = w;
            }
        }
        row.position = relative_position(row.top_context, m);
        row.snippet = snippet_of(thread.posts[row.top_context - 1].text, opt.snippet_chars);
        ++rep.position_histogram[std::string(to_string(row.position))];

        const auto last = mass.find(m);
        rep.mean_final_mass += last == mass.end() ? 0.0 : last->second;
        rep.mean_uniform_baseline += 1.0 / static_cast<double>(m);

        if (!opt.signal_tokens.empty()) {
            bool any = false;
            double w = 0.0;
            for (std::size_t j = 1; j <= m; ++j) {
                const auto &tokens = thread.posts[j - 1].tokens;
                const bool has = std::any_of(tokens.begin(), tokens.end(),
                                             [&](const std::string &tok) { return opt.signal_tokens.count(tok) != 0; });
                if (has) {
                    any = true;
                    const auto mj = mass.find(j);
                    w += mj == mass.end() ? 0.0 : mj->second;
                }
            }
            if (any) {
                ++rep.signal_threads;
                signal_total += w;
            }
        }
        rep.rows.push_back(std::move(row));
    }
    if (!rep.rows.empty()) {
        rep.mean_final_mass /= static_cast<double>(rep.rows.size());
        rep.mean_uniform_baseline /= static_cast<double>(rep.rows.size());
    }
    if (rep.signal_threads > 0) {
        rep.mean_signal_mass = signal_total / static_cast<double>(rep.signal_threads);
    }
    return rep;
}

inline nlohmann::ordered_json to_json(const IntrospectionReport &rep) {
    nlohmann::ordered_json j;
    j["threads"] = rep.rows.size();
    j["position_histogram"] = rep.position_histogram;
    j["mean_final_mass"] = rep.mean_final_mass;
    j["mean_uniform_baseline"] = rep.mean_uniform_baseline;
    j["mean_signal_mass"] =
        rep.mean_signal_mass ? nlohmann::ordered_json(*rep.mean_signal_mass) : nlohmann::ordered_json(nullptr);
    j["signal_threads"] = rep.signal_threads;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto &r : rep.rows) {
        j["rows"].push_back({{"thread_id", r.thread_id},
                             {"posts", r.posts},
                             {"top_context", r.top_context},
                             {"top_weight", r.top_weight},
                             {"position", std::string(to_string(r.position))},
                             {"snippet", r.snippet}});
    }
    return j;
}

}  // namespace ivnet

#endif
