#ifndef IVNET_EVAL_METRICS_HPP
#define IVNET_EVAL_METRICS_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/error.hpp"

namespace ivnet {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    Confusion &operator+=(const Confusion &o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

/// Positive-class precision, recall and F1.
struct Prf {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
};

inline double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// 0/0 is taken as 0 for both precision and recall.
inline Prf prf_from(const Confusion &c) {
    Prf m;
    m.p = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    m.r = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.f1 = harmonic_mean(m.p, m.r);
    return m;
}

inline Confusion confusion_of(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw DataError(fmt::format("compute_prf: {} predictions for {} labels", predictions.size(), labels.size()));
    }
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = predictions[i] == 1;
        const bool gold = labels[i] == 1;
        if (pred && gold) {
            ++c.tp;
        } else if (pred) {
            ++c.fp;
        } else if (gold) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

struct PrfResult {
    Prf prf;
    Confusion confusion;
};

inline PrfResult compute_prf(std::span<const int> predictions, std::span<const int> labels) {
    const Confusion c = confusion_of(predictions, labels);
    return {prf_from(c), c};
}

struct CourseRow {
    std::string course_id;
    std::size_t thread_count = 0;
    /// intervened : non-intervened; infinite when every thread is intervened.
    double i_ratio = 0.0;
    Prf prf;
    Confusion confusion;
};

/// An averaged row. `p` and `r` are (weighted) means of the per-course
/// values and `f1` is their harmonic mean, which is how the printed average
/// rows of the reference results table come out. `f1_mean` is the plain
/// mean of per-course F1, kept for comparison.
struct Average {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
    double f1_mean = 0.0;
};

inline Average weighted_macro_average(std::span<const CourseRow> rows, std::span<const double> weights) {
    if (rows.empty()) {
        throw DataError("macro average of zero rows");
    }
    if (rows.size() != weights.size()) {
        throw DataError(fmt::format("{} rows for {} weights", rows.size(), weights.size()));
    }
    double total = 0.0;
    for (const double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw DataError(fmt::format("weights must be positive, got {}", w));
        }
        total += w;
    }
    Average a;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double share = weights[i] / total;
        a.p += share * rows[i].prf.p;
        a.r += share * rows[i].prf.r;
        a.f1_mean += share * rows[i].prf.f1;
    }
    a.f1 = harmonic_mean(a.p, a.r);
    return a;
}

inline Average macro_average(std::span<const CourseRow> rows) {
    const std::vector<double> ones(rows.size(), 1.0);
    return weighted_macro_average(rows, ones);
}

/// Weights used for the weighted row: total thread count per course.
inline std::vector<double> thread_count_weights(std::span<const CourseRow> rows) {
    std::vector<double> w;
    w.reserve(rows.size());
    for (const auto &r : rows) {
        w.push_back(static_cast<double>(r.thread_count));
    }
    return w;
}

/// One model decision on one held-out thread.
struct PredictionRecord {
    std::string thread_id;
    std::string course_id;
    int label = 0;
    int predicted = 0;
    double p_positive = 0.0;
    /// Student posts the model saw.
    std::size_t length = 0;
    /// Posts in the raw thread, before truncation.
    std::size_t original_length = 0;
};

inline nlohmann::ordered_json to_json(const PredictionRecord &r) {
    return nlohmann::ordered_json{{"thread_id", r.thread_id}, {"course_id", r.course_id}, {"label", r.label},
                               {"predicted", r.predicted}, {"p_positive", r.p_positive}, {"length", r.length},
                               {"original_length", r.original_length}};
}

struct MetricsReport {
    std::vector<CourseRow> courses;
    Average macro;
    Average weighted;
    Prf overall;
    Confusion confusion;
};

/// Per-course rows in order of first appearance, plus both averages.
inline MetricsReport build_report(std::span<const PredictionRecord> records) {
    if (records.empty()) {
        throw DataError("no predictions to report");
    }
    MetricsReport rep;
    std::map<std::string, std::size_t> slot;
    for (const auto &r : records) {
        auto [it, inserted] = slot.emplace(r.course_id, rep.courses.size());
        if (inserted) {
            rep.courses.push_back({r.course_id, 0, 0.0, {}, {}});
        }
        CourseRow &row = rep.courses[it->second];
        ++row.thread_count;
        const int pred[] = {r.predicted};
        const int gold[] = {r.label};
        row.confusion += confusion_of(pred, gold);
    }
    for (auto &row : rep.courses) {
        row.prf = prf_from(row.confusion);
        const std::size_t pos = row.confusion.tp + row.confusion.fn;
        const std::size_t neg = row.thread_count - pos;
        row.i_ratio = neg == 0 ? std::numeric_limits<double>::infinity()
                               : static_cast<double>(pos) / static_cast<double>(neg);
        rep.confusion += row.confusion;
    }
    rep.overall = prf_from(rep.confusion);
    rep.macro = macro_average(rep.courses);
    rep.weighted = weighted_macro_average(rep.courses, thread_count_weights(rep.courses));
    return rep;
}

inline std::string format_ratio(double r) { return std::isinf(r) ? std::string("inf") : fmt::format("{:.2f}", r); }

/// Aligned text table: one row per course, then the two average rows.
inline std::string format_table(const MetricsReport &rep, std::string_view title = {}) {
    std::size_t width = std::string_view("Weighted Macro Avg").size();
    for (const auto &row : rep.courses) {
        width = std::max(width, row.course_id.size());
    }
    std::string out;
    if (!title.empty()) {
        out += fmt::format("{}\n", title);
    }
    out += fmt::format("{:<{}}  {:>8}  {:>7}  {:>5}  {:>5}  {:>5}\n", "Course", width, "#Threads", "i.ratio", "P", "R",
                       "F1");
    for (const auto &row : rep.courses) {
        out += fmt::format("{:<{}}  {:>8}  {:>7}  {:>5.2f}  {:>5.2f}  {:>5.2f}\n", row.course_id, width,
                           row.thread_count, format_ratio(row.i_ratio), row.prf.p, row.prf.r, row.prf.f1);
    }
    out += fmt::format("{:<{}}  {:>8}  {:>7}  {:>5.2f}  {:>5.2f}  {:>5.2f}\n", "Macro Avg.", width, "", "",
                       rep.macro.p, rep.macro.r, rep.macro.f1);
    out += fmt::format("{:<{}}  {:>8}  {:>7}  {:>5.2f}  {:>5.2f}  {:>5.2f}\n", "Weighted Macro Avg", width, "", "",
                       rep.weighted.p, rep.weighted.r, rep.weighted.f1);
    return out;
}

inline nlohmann::ordered_json to_json(const MetricsReport &rep) {
    const auto prf = [](double p, double r, double f1) { return nlohmann::ordered_json{{"P", p}, {"R", r}, {"F1", f1}}; };
    nlohmann::ordered_json j;
    j["courses"] = nlohmann::ordered_json::array();
    for (const auto &row : rep.courses) {
        auto c = nlohmann::ordered_json{{"course_id", row.course_id}, {"thread_count", row.thread_count}};
        c["i_ratio"] = std::isinf(row.i_ratio) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(row.i_ratio);
        c["P"] = row.prf.p;
        c["R"] = row.prf.r;
        c["F1"] = row.prf.f1;
        j["courses"].push_back(c);
    }
    j["macro_avg"] = prf(rep.macro.p, rep.macro.r, rep.macro.f1);
    j["macro_avg"]["F1_mean"] = rep.macro.f1_mean;
    j["weighted_macro_avg"] = prf(rep.weighted.p, rep.weighted.r, rep.weighted.f1);
    j["weighted_macro_avg"]["F1_mean"] = rep.weighted.f1_mean;
    j["overall"] = prf(rep.overall.p, rep.overall.r, rep.overall.f1);
    j["confusion"] = {{"tp", rep.confusion.tp}, {"fp", rep.confusion.fp}, {"fn", rep.confusion.fn},
                      {"tn", rep.confusion.tn}};
    return j;
}

/// Positive-class recall by thread length: bins 1..7 and ">7".
struct LengthBin {
    std::string name;
    std::size_t support = 0;
    std::size_t recalled = 0;
    [[nodiscard]] std::optional<double> recall() const {
        return support == 0 ? std::nullopt
                             : std::optional<double>(static_cast<double>(recalled) / static_cast<double>(support));
    }
};

struct LengthBinReport {
    std::array<LengthBin, 8> bins;
};

inline LengthBinReport bin_recall_by_length(std::span<const int> predictions, std::span<const int> labels,
                                            std::span<const std::size_t> lengths) {
    if (predictions.size() != labels.size() || lengths.size() != labels.size()) {
        throw DataError("bin_recall_by_length: sequences differ in length");
    }
    LengthBinReport rep;
    for (std::size_t b = 0; b < 7; ++b) {
        rep.bins[b].name = std::to_string(b + 1);
    }
    rep.bins[7].name = ">7";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) {
            continue;
        }
        if (lengths[i] == 0) {
            throw DataError("bin_recall_by_length: thread of length 0");
        }
        LengthBin &bin = rep.bins[std::min<std::size_t>(lengths[i], 8) - 1];
        ++bin.support;
        bin.recalled += predictions[i] == 1 ? 1 : 0;
    }
    return rep;
}

enum class LengthBasis { kModelInput, kOriginal };

inline LengthBinReport bin_recall_by_length(std::span<const PredictionRecord> records,
                                            LengthBasis basis = LengthBasis::kModelInput) {
    std::vector<int> pred;
    std::vector<int> gold;
    std::vector<std::size_t> len;
    for (const auto &r : records) {
        pred.push_back(r.predicted);
        gold.push_back(r.label);
        len.push_back(basis == LengthBasis::kModelInput ? r.length : r.original_length);
    }
    return bin_recall_by_length(pred, gold, len);
}

inline std::string bins_csv(const LengthBinReport &rep) {
    std::string out = "bin,support,recalled,recall\n";
    for (const auto &b : rep.bins) {
        const auto r = b.recall();
        out += fmt::format("{},{},{},{}\n", b.name, b.support, b.recalled, r ? fmt::format("{:.6f}", *r) : "");
    }
    return out;
}

}  // namespace ivnet

#endif
