#pragma once

#include "raptor/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace raptor {

/// Mann-Whitney AUROC: probability that a random positive outranks a random
/// negative, ties counted one half. Labels are 0/1.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "auroc: scores/labels length differ");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;  // midranks, 1-based; multiples of 1/2 so exact in double
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] != 0) {
                pos_rank_sum += midrank;
                ++pos;
            }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorCode::SingleClass, "auroc needs both classes");
    const double u = pos_rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Average precision: sum over distinct thresholds (descending) of
/// (recall gain) x precision. Tied scores form one threshold.
inline double aupr(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "aupr: scores/labels length differ");
    const std::size_t n = scores.size();
    const auto total_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
    if (total_pos == 0) throw Error(ErrorCode::NoPositives, "aupr needs at least one positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] != 0) ++tp;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

/// Squared Pearson correlation; 0 when either side has zero variance.
inline double pearson_r2(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw Error(ErrorCode::ShapeMismatch, "pearson_r2: length mismatch");
    if (pred.size() < 2) throw Error(ErrorCode::TooFewSamples, "pearson_r2 needs n >= 2");
    const double n = static_cast<double>(pred.size());
    const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
    const double mt = std::accumulate(target.begin(), target.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double a = pred[i] - mp, b = target[i] - mt;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return (sxy * sxy) / (sxx * syy);
}

enum class Averaging { Macro, Micro };

namespace detail {

inline std::vector<int> one_vs_rest(std::span<const int> labels, int cls) {
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == cls ? 1 : 0;
    return out;
}

inline std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
    return out;
}

/// Applies a binary metric one-vs-rest. Macro skips classes absent from
/// `labels`; micro pools every (sample, class) decision.
template <typename Metric>
double multiclass(const Eigen::MatrixXd& probs, std::span<const int> labels, Averaging avg, Metric metric) {
    const Eigen::Index classes = probs.cols();
    if (classes == 2 && avg == Averaging::Macro) {
        const auto s = column(probs, 1);
        const auto y = one_vs_rest(labels, 1);
        return metric(s, y);
    }
    if (avg == Averaging::Micro) {
        std::vector<double> s;
        std::vector<int> y;
        s.reserve(static_cast<std::size_t>(probs.size()));
        y.reserve(static_cast<std::size_t>(probs.size()));
        for (Eigen::Index i = 0; i < probs.rows(); ++i)
            for (Eigen::Index c = 0; c < classes; ++c) {
                s.push_back(probs(i, c));
                y.push_back(labels[static_cast<std::size_t>(i)] == c ? 1 : 0);
            }
        return metric(s, y);
    }
    double total = 0;
    int used = 0;
    for (Eigen::Index c = 0; c < classes; ++c) {
        const auto y = one_vs_rest(labels, static_cast<int>(c));
        const auto npos = std::count(y.begin(), y.end(), 1);
        if (npos == 0 || npos == static_cast<long>(y.size())) continue;
        total += metric(column(probs, c), y);
        ++used;
    }
    if (used == 0) throw Error(ErrorCode::SingleClass, "no class has both positives and negatives");
    return total / used;
}

} // namespace detail

/// One-vs-rest AUROC of class-probability columns against integer labels.
inline double auroc_multiclass(const Eigen::MatrixXd& probs, std::span<const int> labels, Averaging avg) {
    return detail::multiclass(probs, labels, avg,
                              [](std::span<const double> s, std::span<const int> y) { return auroc(s, y); });
}

inline double aupr_multiclass(const Eigen::MatrixXd& probs, std::span<const int> labels, Averaging avg) {
    return detail::multiclass(probs, labels, avg,
                              [](std::span<const double> s, std::span<const int> y) { return aupr(s, y); });
}

inline double accuracy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index arg = 0;
        probs.row(i).maxCoeff(&arg);
        if (arg == labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

struct MetricReport {
    double auroc_macro = 0, auroc_micro = 0;
    double accuracy = 0;
    double aupr_macro = 0, aupr_micro = 0;
    std::vector<double> r2_per_target;
    double r2_mean = 0;
};

inline MetricReport classification_report(const Eigen::MatrixXd& probs, std::span<const int> labels) {
    MetricReport r;
    r.auroc_macro = auroc_multiclass(probs, labels, Averaging::Macro);
    r.auroc_micro = auroc_multiclass(probs, labels, Averaging::Micro);
    r.aupr_macro = aupr_multiclass(probs, labels, Averaging::Macro);
    r.aupr_micro = aupr_multiclass(probs, labels, Averaging::Micro);
    r.accuracy = accuracy(probs, labels);
    return r;
}

inline MetricReport regression_report(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    MetricReport r;
    for (Eigen::Index c = 0; c < pred.cols(); ++c)
        r.r2_per_target.push_back(pearson_r2(detail::column(pred, c), detail::column(target, c)));
    if (!r.r2_per_target.empty())
        r.r2_mean = std::accumulate(r.r2_per_target.begin(), r.r2_per_target.end(), 0.0) /
                    static_cast<double>(r.r2_per_target.size());
    return r;
}

} // namespace raptor
