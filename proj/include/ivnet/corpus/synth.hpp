#ifndef IVNET_CORPUS_SYNTH_HPP
#define IVNET_CORPUS_SYNTH_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/corpus/thread.hpp"
#include "ivnet/error.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet {

enum class SignalPosition { kFirst, kLast, kUniform, kFixed };

inline std::string_view to_string(SignalPosition p) {
    switch (p) {
        case SignalPosition::kFirst: return "first";
        case SignalPosition::kLast: return "last";
        case SignalPosition::kUniform: return "uniform-random";
        case SignalPosition::kFixed: return "fixed-k";
    }
    return "last";
}

inline SignalPosition parse_signal_position(std::string_view s) {
    for (const auto p : {SignalPosition::kFirst, SignalPosition::kLast, SignalPosition::kUniform, SignalPosition::kFixed}) {
        if (to_string(p) == s) {
            return p;
        }
    }
    throw DataError("unknown signal_position '" + std::string(s) + "'");
}

/// Parameters of a synthetic corpus. Intervened threads carry one signal
/// token in the post picked by `signal_position`, followed by an instructor
/// reply (and a few trailing student posts that truncation must remove).
struct SynthSpec {
    std::size_t n_threads = 100;
    /// Intervened : non-intervened thread count.
    double intervention_ratio = 1.0;
    /// length_weights[i] is the relative frequency of i+1 student posts.
    std::vector<double> length_weights = {1, 1, 1, 1, 1};
    std::size_t post_len_min = 4;
    std::size_t post_len_max = 10;
    std::size_t vocab_size = 50;
    std::vector<std::string> signal_tokens = {"sig0", "sig1", "sig2"};
    SignalPosition signal_position = SignalPosition::kLast;
    std::size_t signal_k = 1;  // 1-based post for kFixed
    /// Probability of flipping a thread's label after construction.
    double noise_rate = 0.0;
    /// Probability that a non-intervened thread with >= 2 posts carries a
    /// signal token in some post other than the one `signal_position` picks.
    double distractor_rate = 0.0;
    std::size_t courses = 1;
    std::size_t max_trailing_posts = 2;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(intervention_ratio) || intervention_ratio < 0.0) {
            throw DataError(fmt::format("synth: invalid intervention_ratio {}", intervention_ratio));
        }
        if (vocab_size == 0) {
            throw DataError("synth: vocab_size must be positive");
        }
        if (n_threads == 0 || courses == 0) {
            throw DataError("synth: n_threads and courses must be positive");
        }
        if (length_weights.empty() ||
            std::accumulate(length_weights.begin(), length_weights.end(), 0.0) <= 0.0) {
            throw DataError("synth: length distribution is empty");
        }
        for (const double w : length_weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw DataError("synth: length weights must be finite and non-negative");
            }
        }
        if (post_len_min == 0 || post_len_max < post_len_min) {
            throw DataError("synth: need 1 <= post_len_min <= post_len_max");
        }
        if (signal_tokens.empty()) {
            throw DataError("synth: signal_tokens is empty");
        }
        if (!(noise_rate >= 0.0 && noise_rate <= 1.0) || !(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
            throw DataError("synth: noise_rate and distractor_rate must lie in [0, 1]");
        }
        if (signal_position == SignalPosition::kUniform && distractor_rate > 0.0) {
            throw DataError("synth: distractors need a definite signal position");
        }
        if (signal_position == SignalPosition::kFixed && signal_k == 0) {
            throw DataError("synth: signal_k is 1-based");
        }
    }

    /// round(n * r / (1 + r))
    [[nodiscard]] std::size_t positive_count() const {
        return static_cast<std::size_t>(
            std::llround(static_cast<double>(n_threads) * intervention_ratio / (1.0 + intervention_ratio)));
    }
};

inline void to_json(nlohmann::json &j, const SynthSpec &s) {
    j = nlohmann::json{{"n_threads", s.n_threads},
                       {"intervention_ratio", s.intervention_ratio},
                       {"length_distribution", {{"weights", s.length_weights}}},
                       {"post_len_min", s.post_len_min},
                       {"post_len_max", s.post_len_max},
                       {"vocab_size", s.vocab_size},
                       {"signal_tokens", s.signal_tokens},
                       {"signal_position", std::string(to_string(s.signal_position))},
                       {"signal_k", s.signal_k},
                       {"noise_rate", s.noise_rate},
                       {"distractor_rate", s.distractor_rate},
                       {"courses", s.courses},
                       {"max_trailing_posts", s.max_trailing_posts},
                       {"seed", s.seed}};
}

/// Missing keys keep their defaults. `length_distribution` is either
/// {"weights": [...]} or {"min": a, "max": b} (uniform over a..b posts).
inline void from_json(const nlohmann::json &j, SynthSpec &s) {
    try {
        s.n_threads = j.value("n_threads", s.n_threads);
        s.intervention_ratio = j.value("intervention_ratio", s.intervention_ratio);
        if (j.contains("length_distribution")) {
            const auto &d = j.at("length_distribution");
            if (d.contains("weights")) {
                s.length_weights = d.at("weights").get<std::vector<double>>();
            } else {
                const auto lo = d.at("min").get<std::size_t>();
                const auto hi = d.at("max").get<std::size_t>();
                if (lo == 0 || hi < lo) {
                    throw DataError("synth: length_distribution needs 1 <= min <= max");
                }
                s.length_weights.assign(hi, 0.0);
                for (std::size_t k = lo; k <= hi; ++k) {
                    s.length_weights[k - 1] = 1.0;
                }
            }
        }
        s.post_len_min = j.value("post_len_min", s.post_len_min);
        s.post_len_max = j.value("post_len_max", s.post_len_max);
        s.vocab_size = j.value("vocab_size", s.vocab_size);
        s.signal_tokens = j.value("signal_tokens", s.signal_tokens);
        if (j.contains("signal_position")) {
            s.signal_position = parse_signal_position(j.at("signal_position").get<std::string>());
        }
        s.signal_k = j.value("signal_k", s.signal_k);
        s.noise_rate = j.value("noise_rate", s.noise_rate);
        s.distractor_rate = j.value("distractor_rate", s.distractor_rate);
        s.courses = j.value("courses", s.courses);
        s.max_trailing_posts = j.value("max_trailing_posts", s.max_trailing_posts);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception &e) {
        throw DataError(std::string("synth spec: ") + e.what());
    }
}

namespace detail {

inline std::size_t sample_length(Rng &rng, const std::vector<double> &weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) {
            return i + 1;
        }
        u -= weights[i];
    }
    // round-off: last length with positive weight
    for (std::size_t i = weights.size(); i > 0; --i) {
        if (weights[i - 1] > 0.0) {
            return i;
        }
    }
    return 1;
}

inline std::size_t signal_post(const SynthSpec &spec, std::size_t m, Rng &rng) {
    switch (spec.signal_position) {
        case SignalPosition::kFirst: return 0;
        case SignalPosition::kLast: return m - 1;
        case SignalPosition::kUniform: return rng.below(m);
        case SignalPosition::kFixed: return std::min(spec.signal_k, m) - 1;
    }
    return m - 1;
}

inline std::vector<std::string> filler_words(const SynthSpec &spec, Rng &rng) {
    const std::size_t len = spec.post_len_min + rng.below(spec.post_len_max - spec.post_len_min + 1);
    std::vector<std::string> words;
    words.reserve(len + 1);
    for (std::size_t k = 0; k < len; ++k) {
        words.push_back(fmt::format("w{}", rng.below(spec.vocab_size)));
    }
    return words;
}

inline std::string join_words(const std::vector<std::string> &words) {
    std::string out;
    for (std::size_t k = 0; k < words.size(); ++k) {
        if (k > 0) {
            out.push_back(' ');
        }
        out += words[k];
    }
    return out;
}

}  // namespace detail

/// Deterministic synthetic corpus in raw form (instructor replies still
/// present), labelled by construction.
inline Corpus synth_generate(const SynthSpec &spec) {
    spec.validate();
    static constexpr const char *kForums[] = {"Lecture", "Homework", "Quiz", "Exam"};
    Rng rng(spec.seed);
    const std::size_t n_pos = spec.positive_count();
    std::vector<std::size_t> order(spec.n_threads);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<bool> designed_positive(spec.n_threads, false);
    for (std::size_t k = 0; k < n_pos; ++k) {
        designed_positive[order[k]] = true;
    }

    Corpus corpus;
    corpus.threads.reserve(spec.n_threads);
    for (std::size_t i = 0; i < spec.n_threads; ++i) {
        Thread t;
        t.thread_id = fmt::format("t{:05}", i);
        t.course_id = fmt::format("synth-{}", i % spec.courses);
        const std::size_t forum = rng.below(4);
        t.forum = kForums[forum];
        t.forum_type = kAllForumTypes[forum];

        const std::size_t m = detail::sample_length(rng, spec.length_weights);
        std::vector<std::vector<std::string>> words(m);
        for (auto &w : words) {
            w = detail::filler_words(spec, rng);
        }
        const auto plant = [&](std::size_t post) {
            auto &w = words[post];
            const auto &sig = spec.signal_tokens[rng.below(spec.signal_tokens.size())];
            w.insert(w.begin() + static_cast<std::ptrdiff_t>(rng.below(w.size() + 1)), sig);
        };
        const std::size_t target = detail::signal_post(spec, m, rng);
        if (designed_positive[i]) {
            plant(target);
        } else if (m >= 2 && rng.bernoulli(spec.distractor_rate)) {
            std::size_t other = rng.below(m - 1);
            other += other >= target ? 1 : 0;
            plant(other);
        }
        const bool flip = rng.bernoulli(spec.noise_rate);
        const bool intervened = designed_positive[i] != flip;

        for (std::size_t j = 0; j < m; ++j) {
            Post p;
            p.post_id = fmt::format("{}-p{}", t.thread_id, j + 1);
            p.text = detail::join_words(words[j]);
            t.posts.push_back(std::move(p));
        }
        if (intervened) {
            Post reply;
            reply.post_id = fmt::format("{}-p{}", t.thread_id, m + 1);
            reply.author_role = AuthorRole::kInstructor;
            reply.text = "thanks for raising this , see the clarification below";
            t.posts.push_back(std::move(reply));
            const std::size_t trailing = rng.below(spec.max_trailing_posts + 1);
            for (std::size_t j = 0; j < trailing; ++j) {
                Post p;
                p.post_id = fmt::format("{}-p{}", t.thread_id, t.posts.size() + 1);
                p.text = detail::join_words(detail::filler_words(spec, rng));
                t.posts.push_back(std::move(p));
            }
        }
        t.label = intervened ? 1 : 0;
        t.original_length = t.posts.size();
        corpus.threads.push_back(std::move(t));
    }
    return corpus;
}

}  // namespace ivnet

#endif
