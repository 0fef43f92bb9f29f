#ifndef IVNET_BASELINE_LOGREG_HPP
#define IVNET_BASELINE_LOGREG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "ivnet/corpus/text.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/error.hpp"

namespace ivnet {

/// Sparse feature map, keyed by feature name:
///   w:<token>     unigram count (out-of-vocabulary tokens count as w:<UNK>)
///   len           number of posts
///   agree         agreement-lexicon matches, normalized (see below)
///   ref:url, ref:math, ref:timeref   placeholder counts
///   forum:<type>  one-hot forum type
using FeatureVector = std::map<std::string, double>;

enum class AgreementNorm { kPostCount, kTokenCount };

struct FeatureOptions {
    std::vector<std::string> agreement_lexicon = {"agree", "+1", "thanks", "thank you", "yes", "exactly", "me too"};
    AgreementNorm agreement_norm = AgreementNorm::kPostCount;
};

namespace detail {

inline std::size_t count_phrase(const std::vector<std::string> &tokens, const std::vector<std::string> &phrase) {
    if (phrase.empty() || tokens.size() < phrase.size()) {
        return 0;
    }
    std::size_t n = 0;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
            ++n;
        }
    }
    return n;
}

}  // namespace detail

inline FeatureVector extract_features(const Thread &thread, const Vocab &vocab, const FeatureOptions &opt = {}) {
    FeatureVector f;
    std::vector<std::vector<std::string>> lexicon;
    lexicon.reserve(opt.agreement_lexicon.size());
    for (const auto &entry : opt.agreement_lexicon) {
        lexicon.push_back(tokenize(entry));
    }
    std::size_t agreements = 0;
    std::size_t token_total = 0;
    for (const auto &post : thread.posts) {
        for (const auto &tok : post.tokens) {
            f["w:" + vocab.token(vocab.index(tok))] += 1.0;
            if (tok == special::kUrl) {
                f["ref:url"] += 1.0;
            } else if (tok == special::kMath) {
                f["ref:math"] += 1.0;
            } else if (tok == special::kTimeref) {
                f["ref:timeref"] += 1.0;
            }
        }
        token_total += post.tokens.size();
        for (const auto &phrase : lexicon) {
            agreements += detail::count_phrase(post.tokens, phrase);
        }
    }
    f["len"] = static_cast<double>(thread.posts.size());
    const std::size_t denom = opt.agreement_norm == AgreementNorm::kPostCount ? thread.posts.size() : token_total;
    f["agree"] = denom == 0 ? 0.0 : static_cast<double>(agreements) / static_cast<double>(denom);
    f[fmt::format("forum:{}", to_string(thread.forum_type))] = 1.0;
    return f;
}

/// Writes "<label> <id>:<value> ..." lines (ids are positions in the sorted
/// list of feature names, which `names` receives).
inline void write_sparse(std::ostream &out, const std::vector<FeatureVector> &rows, const std::vector<int> &labels,
                         std::vector<std::string> &names) {
    std::map<std::string, std::size_t> ids;
    for (const auto &r : rows) {
        for (const auto &[name, v] : r) {
            ids.emplace(name, 0);
        }
    }
    names.clear();
    for (auto &[name, id] : ids) {
        id = names.size();
        names.push_back(name);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << labels.at(i);
        for (const auto &[name, v] : rows[i]) {
            out << ' ' << ids[name] << ':' << fmt::format("{:.17g}", v);
        }
        out << '\n';
    }
}

struct LogRegParams {
    std::map<std::string, double> weights;
    double bias = 0.0;
};

struct LogRegFit {
    LogRegParams params;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    double objective = 0.0;
    /// Only one class present: bias-only model.
    bool degenerate = false;
    std::vector<double> objective_trace;
};

struct LogRegOptions {
    double l2 = 1.0;
    std::size_t iters = 1000;
    double tol = 1e-6;
};

inline double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double predict_logreg(const LogRegParams &params, const FeatureVector &x) {
    double z = params.bias;
    for (const auto &[name, v] : x) {
        const auto it = params.weights.find(name);
        if (it != params.weights.end()) {
            z += it->second * v;
        }
    }
    return sigmoid(z);
}

namespace detail {

// log(1 + exp(x)) without overflow
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct SparseRow {
    std::vector<std::pair<std::size_t, double>> entries;
};

}  // namespace detail

/// Full-batch gradient descent, diagonally preconditioned, with Armijo
/// backtracking (each search starts from a Barzilai-Borwein step) on
///   sum_i log(1 + exp(-y_i (w.x_i + b))) + l2/2 ||w||^2,   y in {-1, +1}.
/// The bias is not regularized.
inline LogRegFit train_logreg(const std::vector<FeatureVector> &rows, const std::vector<int> &labels,
                              const LogRegOptions &opt = {}) {
    if (rows.size() != labels.size() || rows.empty()) {
        throw DataError(fmt::format("train_logreg: {} rows for {} labels", rows.size(), labels.size()));
    }
    LogRegFit fit;
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        fit.degenerate = true;
        fit.params.bias = std::log((static_cast<double>(n_pos) + 0.5) / (static_cast<double>(n_neg) + 0.5));
        return fit;
    }
    std::map<std::string, std::size_t> ids;
    for (const auto &r : rows) {
        for (const auto &[name, v] : r) {
            ids.emplace(name, 0);
        }
    }
    std::vector<std::string> names;
    for (auto &[name, id] : ids) {
        id = names.size();
        names.push_back(name);
    }
    std::vector<detail::SparseRow> x(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto &[name, v] : rows[i]) {
            x[i].entries.emplace_back(ids[name], v);
        }
    }
    const std::size_t d = names.size();
    std::vector<double> w(d, 0.0);
    double b = 0.0;

    const auto objective = [&](const std::vector<double> &wv, double bv) {
        double j = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double z = bv;
            for (const auto &[k, v] : x[i].entries) {
                z += wv[k] * v;
            }
            j += detail::softplus(labels[i] == 1 ? -z : z);
        }
        double reg = 0.0;
        for (const double v : wv) {
            reg += v * v;
        }
        return j + 0.5 * opt.l2 * reg;
    };
    const auto gradient = [&](std::vector<double> &gw, double &gb) {
        std::fill(gw.begin(), gw.end(), 0.0);
        gb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double z = b;
            for (const auto &[k, v] : x[i].entries) {
                z += w[k] * v;
            }
            const double r = sigmoid(z) - (labels[i] == 1 ? 1.0 : 0.0);
            for (const auto &[k, v] : x[i].entries) {
                gw[k] += r * v;
            }
            gb += r;
        }
        double sq = gb * gb;
        for (std::size_t k = 0; k < d; ++k) {
            gw[k] += opt.l2 * w[k];
            sq += gw[k] * gw[k];
        }
        return std::sqrt(sq);
    };

    // Jacobi preconditioner from the Hessian bound X^T X / 4 + l2 I; keeps a
    // large l2 from stalling the (unregularized) bias.
    std::vector<double> diag(d, opt.l2);
    for (const auto &row : x) {
        for (const auto &[k, v] : row.entries) {
            diag[k] += 0.25 * v * v;
        }
    }
    for (double &v : diag) {
        v = std::max(v, 1e-12);
    }
    const double diag_b = 0.25 * static_cast<double>(x.size());

    std::vector<double> gw(d);
    std::vector<double> dir(d);
    std::vector<double> prev_gw(d);
    std::vector<double> prev_dir(d);
    std::vector<double> trial(d);
    double gb = 0.0;
    double dir_b = 0.0;
    double prev_gb = 0.0;
    double prev_dir_b = 0.0;
    double step = 1.0;
    double last_step = 0.0;
    double current = objective(w, b);
    fit.objective_trace.push_back(current);
    for (fit.iterations = 0; fit.iterations < opt.iters; ++fit.iterations) {
        fit.grad_norm = gradient(gw, gb);
        if (fit.grad_norm <= opt.tol) {
            break;
        }
        double decrease = gb * gb / diag_b;  // g . D^-1 g
        for (std::size_t k = 0; k < d; ++k) {
            dir[k] = gw[k] / diag[k];
            decrease += gw[k] * dir[k];
        }
        dir_b = gb / diag_b;
        if (last_step > 0.0) {
            // Barzilai-Borwein step in the preconditioned metric:
            // s = -last_step * D^-1 prev_g, y = g - prev_g, step = s'Ds / s'y
            double sds = 0.0;
            double sy = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double sk = -last_step * prev_dir[k];
                sds += sk * sk * diag[k];
                sy += sk * (gw[k] - prev_gw[k]);
            }
            const double sb = -last_step * prev_dir_b;
            sds += sb * sb * diag_b;
            sy += sb * (gb - prev_gb);
            step = sy > 0.0 ? std::clamp(sds / sy, 1e-10, 1e4) : std::min(last_step * 2.0, 1e4);
        }
        double next = 0.0;
        while (true) {
            for (std::size_t k = 0; k < d; ++k) {
                trial[k] = w[k] - step * dir[k];
            }
            next = objective(trial, b - step * dir_b);
            if (next <= current - 1e-4 * step * decrease) {
                break;
            }
            step *= 0.5;
            if (step < 1e-16) {
                break;
            }
        }
        if (!(next < current)) {
            // no further decrease representable in floating point
            break;
        }
        w.swap(trial);
        b -= step * dir_b;
        current = next;
        last_step = step;
        prev_gw = gw;
        prev_gb = gb;
        prev_dir = dir;
        prev_dir_b = dir_b;
        fit.objective_trace.push_back(current);
    }
    fit.objective = current;
    fit.params.bias = b;
    for (std::size_t k = 0; k < d; ++k) {
        if (w[k] != 0.0) {
            fit.params.weights.emplace(names[k], w[k]);
        }
    }
    return fit;
}

}  // namespace ivnet

#endif
