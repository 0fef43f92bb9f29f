#ifndef IVNET_CORPUS_SPLIT_HPP
#define IVNET_CORPUS_SPLIT_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ivnet/corpus/thread.hpp"
#include "ivnet/error.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet {

struct TrainTestSplit {
    Corpus train;
    Corpus test;
};

namespace detail {

// round(0.8 * n), halves rounded up
inline std::size_t train_share(std::size_t n) { return (8 * n + 5) / 10; }

inline constexpr std::size_t kMinStratumSize = 5;

}  // namespace detail

/// Seeded 80/20 split, per course. A course is stratified on the label when
/// both classes have at least five threads there. Both halves keep the
/// corpus order.
inline TrainTestSplit split_train_test(const Corpus &corpus, std::uint64_t seed) {
    if (corpus.threads.size() < detail::kMinStratumSize) {
        throw DataError("split_train_test: need at least 5 threads, got " + std::to_string(corpus.threads.size()));
    }
    std::vector<std::string> courses;
    for (const auto &t : corpus.threads) {
        if (std::find(courses.begin(), courses.end(), t.course_id) == courses.end()) {
            courses.push_back(t.course_id);
        }
    }
    Rng rng(seed);
    std::vector<bool> in_train(corpus.threads.size(), false);
    const auto take = [&](std::vector<std::size_t> idx) {
        rng.shuffle(idx);
        const std::size_t n = detail::train_share(idx.size());
        for (std::size_t k = 0; k < n; ++k) {
            in_train[idx[k]] = true;
        }
    };
    for (const auto &course : courses) {
        std::vector<std::size_t> pos;
        std::vector<std::size_t> neg;
        for (std::size_t i = 0; i < corpus.threads.size(); ++i) {
            if (corpus.threads[i].course_id == course) {
                (corpus.threads[i].label == 1 ? pos : neg).push_back(i);
            }
        }
        if (pos.size() >= detail::kMinStratumSize && neg.size() >= detail::kMinStratumSize) {
            take(std::move(pos));
            take(std::move(neg));
        } else {
            std::vector<std::size_t> all = pos;
            all.insert(all.end(), neg.begin(), neg.end());
            std::sort(all.begin(), all.end());
            take(std::move(all));
        }
    }
    TrainTestSplit split;
    for (std::size_t i = 0; i < corpus.threads.size(); ++i) {
        (in_train[i] ? split.train : split.test).threads.push_back(corpus.threads[i]);
    }
    return split;
}

}  // namespace ivnet

#endif
