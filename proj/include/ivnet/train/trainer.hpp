#ifndef IVNET_TRAIN_TRAINER_HPP
#define IVNET_TRAIN_TRAINER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/autodiff/graph.hpp"
#include "ivnet/model/model.hpp"
#include "ivnet/train/adam.hpp"
#include "ivnet/train/embeddings.hpp"

namespace ivnet {

struct TrainConfig {
    Variant variant = Variant::kUpa;
    double lr = 0.001;
    std::size_t epochs = 1;
    std::size_t hidden = 128;
    std::size_t embed = 300;
    std::uint64_t seed = 0;
    /// Train on the last k posts of each thread only.
    std::optional<std::size_t> context_truncation;
    /// Extra cross-entropy terms, one per length, on context truncated to it.
    std::vector<std::size_t> multi_loss_lengths;
    /// "random" or a path to a text vector file.
    std::string embeddings = "random";
    std::size_t min_count = 2;
    ApaNormalization apa_normalization = ApaNormalization::kJoint;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 0.0;
    double weight_decay = 0.0;

    void validate() const {
        if (!(lr >= 0.0) || !std::isfinite(lr)) {
            throw DataError(fmt::format("lr must be a finite non-negative number, got {}", lr));
        }
        if (hidden == 0 || embed == 0 || epochs == 0) {
            throw DataError("hidden, embed and epochs must be positive");
        }
        if (context_truncation && *context_truncation == 0) {
            throw DataError("context_truncation must be >= 1");
        }
        for (const std::size_t k : multi_loss_lengths) {
            if (k == 0) {
                throw DataError("multi_loss_lengths entries must be >= 1");
            }
        }
    }

    [[nodiscard]] AdamOptions adam() const { return {lr, beta1, beta2, adam_eps, clip_norm, weight_decay}; }
    [[nodiscard]] ModelOptions model_options() const { return {apa_normalization}; }
};

inline void to_json(nlohmann::json &j, const TrainConfig &c) {
    j = nlohmann::json{{"variant", std::string(to_string(c.variant))},
                       {"lr", c.lr},
                       {"epochs", c.epochs},
                       {"hidden", c.hidden},
                       {"embed", c.embed},
                       {"seed", c.seed},
                       {"context_truncation", c.context_truncation ? nlohmann::json(*c.context_truncation)
                                                                   : nlohmann::json(nullptr)},
                       {"multi_loss_lengths", c.multi_loss_lengths},
                       {"embeddings", c.embeddings},
                       {"min_count", c.min_count},
                       {"apa_normalization",
                        c.apa_normalization == ApaNormalization::kJoint ? "joint" : "per-query-mean"},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"adam_eps", c.adam_eps},
                       {"clip_norm", c.clip_norm},
                       {"weight_decay", c.weight_decay}};
}

inline void from_json(const nlohmann::json &j, TrainConfig &c) {
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.embed = j.at("embed").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.context_truncation = j.at("context_truncation").is_null()
                               ? std::nullopt
                               : std::optional<std::size_t>(j.at("context_truncation").get<std::size_t>());
    c.multi_loss_lengths = j.at("multi_loss_lengths").get<std::vector<std::size_t>>();
    c.embeddings = j.at("embeddings").get<std::string>();
    c.min_count = j.at("min_count").get<std::size_t>();
    c.apa_normalization = j.at("apa_normalization").get<std::string>() == "joint" ? ApaNormalization::kJoint
                                                                                : ApaNormalization::kPerQueryMean;
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
}

struct InstanceLoss {
    std::size_t epoch = 0;
    std::string thread_id;
    double loss = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<InstanceLoss> loss_log;
    std::uint64_t updates = 0;
};

/// Seeds for the independent random streams of a run, all derived from the
/// single run seed.
struct RunSeeds {
    std::uint64_t split;
    std::uint64_t init;
    std::uint64_t embeddings;
    std::uint64_t shuffle;

    static RunSeeds from(std::uint64_t seed) {
        Rng rng(seed);
        const std::uint64_t split = seed;
        const std::uint64_t init = rng.fork();
        const std::uint64_t embeddings = rng.fork();
        const std::uint64_t shuffle = rng.fork();
        return {split, init, embeddings, shuffle};
    }
};

/// Loss of one training instance: cross-entropy on the (optionally
/// truncated) thread plus one term per configured multi-loss length.
inline ad::Tensor instance_loss(const ModelParams &params, const EncodedThread &thread, const TrainConfig &config) {
    const EncodedThread seen =
        config.context_truncation ? truncate_context(thread, *config.context_truncation) : thread;
    const auto label = static_cast<std::size_t>(seen.label);
    const ModelOptions opt = config.model_options();
    ad::Tensor loss = ad::cross_entropy(predict(params, seen, config.variant, opt).logits, label);
    for (const std::size_t k : config.multi_loss_lengths) {
        loss = loss + ad::cross_entropy(predict(params, truncate_context(seen, k), config.variant, opt).logits, label);
    }
    return loss;
}

using TrainObserver = std::function<void(const InstanceLoss &)>;

/// Per-instance Adam updates over `epochs` seeded shuffles of the training
/// threads. Embeddings are trained with the rest of the model.
inline TrainResult train(const TrainConfig &config, const std::vector<EncodedThread> &threads, ModelParams init,
                         const TrainObserver &observer = {}) {
    config.validate();
    if (threads.empty()) {
        throw DataError("train: empty training corpus");
    }
    TrainResult result{std::move(init), {}, 0};
    Adam adam(result.params.named(), config.adam());
    Rng shuffle_rng(RunSeeds::from(config.seed).shuffle);
    std::vector<std::size_t> order(threads.size());
    result.loss_log.reserve(threads.size() * config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(order);
        for (const std::size_t idx : order) {
            const EncodedThread &thread = threads[idx];
            adam.zero_grad();
            const ad::Tensor loss = instance_loss(result.params, thread, config);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw NumericError(
                    fmt::format("train: loss diverged ({}) on instance '{}' in epoch {}", value, thread.thread_id, epoch));
            }
            ad::backward(loss);
            adam.step();
            ++result.updates;
            result.loss_log.push_back({epoch, thread.thread_id, value});
            if (observer) {
                observer(result.loss_log.back());
            }
        }
    }
    adam.zero_grad();
    return result;
}

/// Initial parameters for a run: vocabulary-sized embeddings (random or
/// loaded) and seeded weights.
inline ModelParams initial_params(const TrainConfig &config, const Vocab &vocab,
                                  std::optional<ad::Tensor> embeddings = std::nullopt) {
    Rng rng(RunSeeds::from(config.seed).init);
    if (!embeddings) {
        embeddings = random_embeddings(vocab, config.embed, RunSeeds::from(config.seed).embeddings);
    }
    return ModelParams::init(vocab.size(), config.embed, config.hidden, rng, embeddings);
}

inline std::vector<EncodedThread> encode_corpus(const Corpus &corpus, const Vocab &vocab) {
    std::vector<EncodedThread> out;
    out.reserve(corpus.threads.size());
    for (const auto &t : corpus.threads) {
        out.push_back(encode_thread(t, vocab));
    }
    return out;
}

}  // namespace ivnet

#endif
