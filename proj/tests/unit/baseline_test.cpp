#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "../support/gen.hpp"
#include "ivnet/baseline/logreg.hpp"
#include "ivnet/corpus/preprocess.hpp"

using namespace ivnet;

namespace {

Thread thread_of(const std::vector<std::string> &texts, ForumType forum = ForumType::kLecture) {
    Thread t;
    t.thread_id = "t";
    t.course_id = "c";
    t.forum_type = forum;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Post p = gen::post(std::to_string(i), texts[i]);
        preprocess_post(p, default_replacement_rules());
        t.posts.push_back(std::move(p));
    }
    return t;
}

// Brute force: is there a threshold on feature `x` splitting the labels?
bool separable_on(const std::vector<FeatureVector> &rows, const std::vector<int> &labels, const std::string &x) {
    for (const auto &pivot : rows) {
        const double cut = pivot.count(x) ? pivot.at(x) : 0.0;
        for (const int above : {0, 1}) {
            bool ok = true;
            for (std::size_t i = 0; i < rows.size() && ok; ++i) {
                const double v = rows[i].count(x) ? rows[i].at(x) : 0.0;
                ok = (v > cut - 0.5 ? above : 1 - above) == labels[i];
            }
            if (ok) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

TEST(Features, LengthAndForum) {
    const Vocab vocab({"a"});
    const auto f = extract_features(thread_of({"a", "b"}, ForumType::kHomework), vocab);
    EXPECT_EQ(f.at("len"), 2.0);
    EXPECT_EQ(f.at("forum:homework"), 1.0);
    int forum_keys = 0;
    for (const auto &[k, v] : f) {
        forum_keys += k.rfind("forum:", 0) == 0 ? 1 : 0;
    }
    EXPECT_EQ(forum_keys, 1);
    EXPECT_EQ(f.at("w:a"), 1.0);
    EXPECT_EQ(f.at("w:<UNK>"), 1.0);
}

TEST(Features, ReferenceCounts) {
    const Vocab vocab(std::vector<std::string>{});
    const auto f = extract_features(thread_of({"see https://a.b and www.c.d at 3:15"}), vocab);
    EXPECT_EQ(f.at("ref:url"), 2.0);
    EXPECT_EQ(f.at("ref:timeref"), 1.0);
    EXPECT_EQ(f.count("ref:math"), 0u);
}

TEST(Features, AgreementNormalizedByPosts) {
    const Vocab vocab(std::vector<std::string>{});
    const auto t = thread_of({"thanks, I agree", "ok"});
    EXPECT_DOUBLE_EQ(extract_features(t, vocab).at("agree"), 1.0);
    FeatureOptions by_tokens;
    by_tokens.agreement_norm = AgreementNorm::kTokenCount;
    // tokens: thanks , i agree | ok
    EXPECT_DOUBLE_EQ(extract_features(t, vocab, by_tokens).at("agree"), 2.0 / 5.0);
}

TEST(Features, MultiWordAndPunctuationPhrases) {
    const Vocab vocab(std::vector<std::string>{});
    const auto f = extract_features(thread_of({"Thank you! me too, +1"}), vocab);
    EXPECT_DOUBLE_EQ(f.at("agree"), 3.0);
}

TEST(Features, PureAndNonNegative) {
    Rng rng(1);
    const Vocab vocab({"x", "y", "agree"});
    const std::vector<std::string> words = {"x", "y", "z", "agree", "thanks", "$a^2$", "http://q.r", "1:00"};
    for (int k = 0; k < 100; ++k) {
        std::vector<std::string> texts(gen::between(rng, 1, 4));
        for (auto &s : texts) {
            for (std::size_t w = gen::between(rng, 0, 6); w > 0; --w) {
                s += words[rng.below(words.size())] + " ";
            }
        }
        const auto t = thread_of(texts);
        const auto f = extract_features(t, vocab);
        EXPECT_EQ(f, extract_features(t, vocab));
        for (const auto &[name, v] : f) {
            EXPECT_GE(v, 0.0) << name;
        }
    }
}

TEST(Features, SparseExport) {
    std::vector<FeatureVector> rows = {{{"b", 2.0}, {"a", 0.5}}, {{"c", 1.0}}};
    std::ostringstream out;
    std::vector<std::string> names;
    write_sparse(out, rows, {1, 0}, names);
    EXPECT_EQ(names, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(out.str(), "1 0:0.5 1:2\n0 2:1\n");
}

TEST(Predict, ClosedForms) {
    LogRegParams p;
    EXPECT_EQ(predict_logreg(p, {{"x", 4.0}}), 0.5);
    p.bias = std::log(3.0);
    EXPECT_NEAR(predict_logreg(p, {}), 0.75, 1e-15);
    p.bias = 0.0;
    p.weights["x"] = std::log(3.0) / 2.0;
    EXPECT_NEAR(predict_logreg(p, {{"x", 2.0}}), 0.75, 1e-15);
}

TEST(Predict, MonotoneInPositiveWeight) {
    Rng rng(2);
    for (int k = 0; k < 200; ++k) {
        LogRegParams p;
        p.bias = rng.uniform(-3, 3);
        p.weights["x"] = rng.uniform(0, 3);
        p.weights["y"] = rng.uniform(-3, 3);
        const double y = rng.uniform(-2, 2);
        const double a = rng.uniform(-5, 5);
        const double b = a + rng.uniform(0, 5);
        EXPECT_LE(predict_logreg(p, {{"x", a}, {"y", y}}), predict_logreg(p, {{"x", b}, {"y", y}}));
    }
}

TEST(Train, SeparableToySet) {
    const std::vector<FeatureVector> rows = {{{"x", -2.0}}, {{"x", -1.0}}, {{"x", 1.0}}, {{"x", 2.0}}};
    const std::vector<int> labels = {0, 0, 1, 1};
    ASSERT_TRUE(separable_on(rows, labels, "x"));
    LogRegOptions opt;
    opt.l2 = 1e-3;
    const auto fit = train_logreg(rows, labels, opt);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(predict_logreg(fit.params, rows[i]) >= 0.5 ? 1 : 0, labels[i]);
    }
}

TEST(Train, ObjectiveDecreasesMonotonically) {
    Rng rng(3);
    std::vector<FeatureVector> rows;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        const double a = rng.uniform(-1, 1);
        const double b = rng.uniform(-1, 1);
        rows.push_back({{"a", a}, {"b", b}, {"c", rng.uniform(0, 1)}});
        labels.push_back(a + 0.5 * b + rng.uniform(-0.5, 0.5) > 0 ? 1 : 0);
    }
    const auto fit = train_logreg(rows, labels);
    ASSERT_GE(fit.objective_trace.size(), 2u);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        EXPECT_LT(fit.objective_trace[i], fit.objective_trace[i - 1]);
    }
    EXPECT_LT(fit.grad_norm, 1e-4);
    EXPECT_FALSE(fit.degenerate);
}

TEST(Train, StrongRegularizationGivesPrior) {
    const std::vector<FeatureVector> rows = {{{"x", 1.0}}, {{"x", 2.0}}, {{"x", 3.0}}, {{"x", -1.0}}};
    LogRegOptions opt;
    opt.l2 = 1e9;
    const auto fit = train_logreg(rows, {1, 1, 1, 0}, opt);
    for (const auto &[name, w] : fit.params.weights) {
        EXPECT_NEAR(w, 0.0, 1e-6) << name;
    }
    EXPECT_NEAR(sigmoid(fit.params.bias), 0.75, 1e-6);
}

TEST(Train, SingleClassIsBiasOnly) {
    const auto fit = train_logreg({{{"x", 1.0}}, {{"x", 2.0}}}, {0, 0});
    EXPECT_TRUE(fit.degenerate);
    EXPECT_TRUE(fit.params.weights.empty());
    EXPECT_LT(predict_logreg(fit.params, {{"x", 5.0}}), 0.5);
}

TEST(Train, Deterministic) {
    const std::vector<FeatureVector> rows = {{{"x", 1.0}, {"y", 0.3}}, {{"x", -1.0}}, {{"y", 2.0}}, {{"x", 0.5}}};
    const std::vector<int> labels = {1, 0, 0, 1};
    const auto a = train_logreg(rows, labels);
    const auto b = train_logreg(rows, labels);
    EXPECT_EQ(a.params.weights, b.params.weights);
    EXPECT_EQ(a.params.bias, b.params.bias);
}

TEST(Train, Errors) {
    EXPECT_THROW(train_logreg({}, {}), DataError);
    EXPECT_THROW(train_logreg({{{"x", 1.0}}}, {1, 0}), DataError);
}
