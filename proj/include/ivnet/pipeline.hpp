#ifndef IVNET_PIPELINE_HPP
#define IVNET_PIPELINE_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ivnet/baseline/logreg.hpp"
#include "ivnet/corpus/split.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/eval/evaluate.hpp"
#include "ivnet/train/checkpoint.hpp"
#include "ivnet/train/embeddings.hpp"
#include "ivnet/train/trainer.hpp"

namespace ivnet {

/// The seeded split of a processed corpus and the vocabulary of its
/// training half.
struct PreparedData {
    TrainTestSplit split;
    Vocab vocab;
};

inline PreparedData prepare(const Corpus &corpus, const TrainConfig &config) {
    PreparedData d{split_train_test(corpus, RunSeeds::from(config.seed).split), {}};
    d.vocab = Vocab::build(d.split.train, config.min_count);
    return d;
}

/// Trains a neural variant on the training half. `config.embeddings` is
/// either "random" or a vector file path.
inline Checkpoint train_neural(const TrainConfig &config, const PreparedData &data,
                               std::vector<InstanceLoss> *loss_log = nullptr, const TrainObserver &observer = {}) {
    config.validate();
    std::optional<ad::Tensor> embeddings;
    if (config.embeddings != "random") {
        embeddings = load_embeddings(config.embeddings, data.vocab, config.embed, RunSeeds::from(config.seed).embeddings);
    }
    TrainResult result =
        train(config, encode_corpus(data.split.train, data.vocab), initial_params(config, data.vocab, embeddings),
              observer);
    if (loss_log != nullptr) {
        *loss_log = std::move(result.loss_log);
    }
    Checkpoint ck;
    ck.kind = Checkpoint::Kind::kNeural;
    ck.config = config;
    ck.vocab = data.vocab.tokens();
    ck.params = std::move(result.params);
    return ck;
}

inline nlohmann::json baseline_settings(const LogRegOptions &lr, const FeatureOptions &features) {
    return {{"l2", lr.l2},
            {"iters", lr.iters},
            {"tol", lr.tol},
            {"agreement_norm", features.agreement_norm == AgreementNorm::kPostCount ? "posts" : "tokens"},
            {"agreement_lexicon", features.agreement_lexicon}};
}

inline FeatureOptions feature_options_from(const nlohmann::json &settings) {
    FeatureOptions f;
    if (settings.contains("agreement_norm")) {
        f.agreement_norm =
            settings.at("agreement_norm").get<std::string>() == "tokens" ? AgreementNorm::kTokenCount : AgreementNorm::kPostCount;
    }
    if (settings.contains("agreement_lexicon")) {
        f.agreement_lexicon = settings.at("agreement_lexicon").get<std::vector<std::string>>();
    }
    return f;
}

struct BaselineFit {
    Checkpoint checkpoint;
    LogRegFit fit;
};

inline BaselineFit train_baseline(const TrainConfig &config, const PreparedData &data, const LogRegOptions &lr = {},
                                  const FeatureOptions &features = {}) {
    std::vector<FeatureVector> rows;
    std::vector<int> labels;
    for (const auto &t : data.split.train.threads) {
        rows.push_back(extract_features(t, data.vocab, features));
        labels.push_back(t.label);
    }
    BaselineFit out;
    out.fit = train_logreg(rows, labels, lr);
    out.checkpoint.kind = Checkpoint::Kind::kLogreg;
    out.checkpoint.config = config;
    out.checkpoint.vocab = data.vocab.tokens();
    out.checkpoint.logreg = out.fit.params;
    out.checkpoint.baseline = baseline_settings(lr, features);
    return out;
}

inline Evaluation evaluate_checkpoint(const Checkpoint &ck, const Corpus &threads, std::size_t workers = 1) {
    const Vocab vocab(ck.vocab);
    if (ck.kind == Checkpoint::Kind::kLogreg) {
        return evaluate_logreg(*ck.logreg, threads, vocab, feature_options_from(ck.baseline), workers);
    }
    return evaluate_model(*ck.params, ck.config.variant, threads, vocab, workers, ck.config.model_options());
}

}  // namespace ivnet

#endif
