#pragma once

#include "raptor/core.hpp"
#include "raptor/encoder.hpp"
#include "raptor/pca.hpp"
#include "raptor/reduction.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace raptor {

// ---------------------------------------------------------------------------
// Distance preservation under random projection
// ---------------------------------------------------------------------------

struct DistortionReport {
    std::size_t points = 0;
    std::size_t dim = 0;
    std::size_t k = 0;
    double eps = 0;
    std::size_t pair_count = 0;        // non-degenerate pairs x seeds
    std::size_t violations = 0;
    std::size_t degenerate_pairs = 0;  // duplicate points, skipped
    double max_observed_distortion = 0;
    std::size_t seed_count = 0;

    double violation_fraction() const {
        return pair_count == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(pair_count);
    }
};

inline Eigen::MatrixXd to_eigen(const ProjectionMatrix& r) {
    Eigen::MatrixXd m(r.rows, r.cols);
    for (std::uint32_t k = 0; k < r.rows; ++k)
        for (std::uint32_t l = 0; l < r.cols; ++l) m(k, l) = r(k, l);
    return m;
}

/// Counts pairs whose squared-distance ratio ||R xi - R xj||^2 / ||xi - xj||^2
/// leaves [1 - eps, 1 + eps], aggregated over the supplied matrices.
inline DistortionReport jl_check_with(const Eigen::MatrixXd& points, double eps,
                                      std::span<const ProjectionMatrix> projections) {
    const auto n = points.rows();
    if (n < 2) throw Error(ErrorCode::InsufficientSamples, "jl_check needs at least two points");
    DistortionReport rep{static_cast<std::size_t>(n), static_cast<std::size_t>(points.cols()),
                         projections.empty() ? 0 : projections.front().rows, eps};

    std::vector<double> raw_sq;
    raw_sq.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d2 = (points.row(i) - points.row(j)).squaredNorm();
            raw_sq.push_back(d2);
            if (d2 == 0.0) ++rep.degenerate_pairs;
        }

    for (const auto& r : projections) {
        if (r.cols != points.cols()) throw Error(ErrorCode::DimMismatch, "projection width != point dim");
        const Eigen::MatrixXd y = points * to_eigen(r).transpose();
        std::size_t pair = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j, ++pair) {
                if (raw_sq[pair] == 0.0) continue;
                const double ratio = (y.row(i) - y.row(j)).squaredNorm() / raw_sq[pair];
                const double dist = std::abs(ratio - 1.0);
                ++rep.pair_count;
                if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++rep.violations;
                rep.max_observed_distortion = std::max(rep.max_observed_distortion, dist);
            }
        ++rep.seed_count;
    }
    return rep;
}

inline DistortionReport jl_check(const Eigen::MatrixXd& points, std::uint32_t k, double eps,
                                 std::span<const std::uint64_t> seeds) {
    std::vector<ProjectionMatrix> rs;
    rs.reserve(seeds.size());
    for (auto s : seeds) rs.push_back(gen_projection(k, static_cast<std::uint32_t>(points.cols()), s, ScaleMode::InvSqrtK));
    return jl_check_with(points, eps, rs);
}

/// Smallest K satisfying the union-bound form K >= C eps^-2 ln n.
inline std::uint32_t jl_dimension(std::size_t n, double eps, double c = 8.0) {
    return static_cast<std::uint32_t>(std::ceil(c * std::log(static_cast<double>(n)) / (eps * eps)));
}

/// ||R z||^2 / ||z||^2 for each seed in [first_seed, first_seed + trials).
inline std::vector<double> norm_ratios(const Eigen::VectorXd& z, std::uint32_t k, std::size_t trials,
                                       std::uint64_t first_seed = 0) {
    std::vector<double> out;
    out.reserve(trials);
    const double zz = z.squaredNorm();
    for (std::size_t t = 0; t < trials; ++t) {
        const auto r = gen_projection(k, static_cast<std::uint32_t>(z.size()), first_seed + t, ScaleMode::InvSqrtK);
        out.push_back((to_eigen(r) * z).squaredNorm() / zz);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Slice alignment and the distance sandwich
// ---------------------------------------------------------------------------

struct AlphaProfile {
    Axis axis = Axis::Axial;
    std::vector<double> alphas;  // slot i holds alpha for slice i + 2 (1-based)
    double alpha_min = 1.0;
    double q05 = 1.0;
    std::size_t zero_count = 0;  // slots where a norm vanished
};

/// Linear-interpolated quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

inline constexpr double kAlphaNormFloor = 1e-12;

/// alpha_j = <D_j, S_{j-1}> / (|D_j| |S_{j-1}|) with D_j the slice-j token
/// difference and S the running sum; 0 when either norm is below 1e-12.
inline AlphaProfile alpha_profile(const TokenTensor& a, const TokenTensor& b) {
    if (!a.same_shape(b) || a.axis != b.axis) throw Error(ErrorCode::ShapeMismatch, "alpha_profile: tensors differ in shape or axis");
    const std::size_t n = a.slice_size();
    AlphaProfile prof;
    prof.axis = a.axis;
    std::vector<double> running(n, 0.0), delta(n);
    for (std::size_t j = 0; j < a.slices; ++j) {
        const auto sa = a.slice(j), sb = b.slice(j);
        double dd = 0, ss = 0, ds = 0;
        for (std::size_t i = 0; i < n; ++i) {
            delta[i] = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
            dd += delta[i] * delta[i];
            ss += running[i] * running[i];
            ds += delta[i] * running[i];
        }
        if (j > 0) {
            const double nd = std::sqrt(dd), ns = std::sqrt(ss);
            double alpha = 0.0;
            if (nd < kAlphaNormFloor || ns < kAlphaNormFloor) {
                ++prof.zero_count;
            } else {
                alpha = std::clamp(ds / (nd * ns), -1.0, 1.0);
            }
            prof.alphas.push_back(alpha);
        }
        for (std::size_t i = 0; i < n; ++i) running[i] += delta[i];
    }
    if (!prof.alphas.empty()) {
        prof.alpha_min = *std::min_element(prof.alphas.begin(), prof.alphas.end());
        prof.q05 = quantile(prof.alphas, 0.05);
    }
    return prof;
}

struct DistancePair {
    double raw = 0;     // sqrt(sum_j |D_j|^2)
    double reduced = 0; // |R sum_j D_j| / D
};

inline DistancePair distance_pair(const TokenTensor& a, const TokenTensor& b, const ProjectionMatrix& r) {
    if (!a.same_shape(b) || a.axis != b.axis) throw Error(ErrorCode::ShapeMismatch, "distance_pair: tensors differ in shape or axis");
    if (r.cols != a.dim) throw Error(ErrorCode::DimMismatch, "projection width != token dim");
    const std::size_t n = a.slice_size();
    std::vector<double> sum(n, 0.0);
    double raw2 = 0.0;
    for (std::size_t j = 0; j < a.slices; ++j) {
        const auto sa = a.slice(j), sb = b.slice(j);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
            raw2 += d * d;
            sum[i] += d;
        }
    }
    double red2 = 0.0;
    for (std::size_t q = 0; q < a.patches(); ++q) {
        const double* s = sum.data() + q * a.dim;
        for (std::size_t k = 0; k < r.rows; ++k) {
            double acc = 0.0;
            for (std::size_t l = 0; l < r.cols; ++l) acc += static_cast<double>(r(k, l)) * s[l];
            red2 += acc * acc;
        }
    }
    return {std::sqrt(raw2), std::sqrt(red2) / static_cast<double>(a.slices)};
}

struct BoundReport {
    double d_raw = 0;
    double d_raptor = 0;
    double alpha_min = 0;
    double lower = 0;  // (1 - eps) alpha_min d_raw / D
    double upper = 0;  // (1 + eps) d_raw / sqrt(D)
    bool lower_applicable = false;  // alpha_min > 0
    bool holds_lower = false;
    bool holds_upper = false;
};

inline BoundReport bound_check(const TokenTensor& a, const TokenTensor& b, const ProjectionMatrix& r, double eps) {
    const auto dist = distance_pair(a, b, r);
    const auto prof = alpha_profile(a, b);
    const double dd = static_cast<double>(a.slices);
    BoundReport rep;
    rep.d_raw = dist.raw;
    rep.d_raptor = dist.reduced;
    rep.alpha_min = prof.alpha_min;
    rep.lower = (1.0 - eps) * prof.alpha_min * dist.raw / dd;
    rep.upper = (1.0 + eps) * dist.raw / std::sqrt(dd);
    rep.lower_applicable = prof.alpha_min > 0.0;
    rep.holds_lower = rep.lower_applicable && dist.reduced >= rep.lower;
    rep.holds_upper = dist.reduced <= rep.upper;
    return rep;
}

// ---------------------------------------------------------------------------
// Class separation and explained-variance overlap
// ---------------------------------------------------------------------------

struct Separability {
    double center_dist_raw = 0;
    double center_dist_emb = 0;
    double ratio = 0;
};

/// Distance between cluster means in pooled-token space versus after
/// projection. Embedding-space means are averaged from projected samples.
inline Separability separability_check(std::span<const PooledTokens> a, std::span<const PooledTokens> b,
                                       const ProjectionMatrix& r) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCluster, "separability_check needs two nonempty clusters");
    const std::size_t n = a.front().values.size();
    auto raw_mean = [n](std::span<const PooledTokens> c) {
        std::vector<double> m(n, 0.0);
        for (const auto& p : c) {
            if (p.values.size() != n) throw Error(ErrorCode::DimMismatch, "cluster members differ in shape");
            for (std::size_t i = 0; i < n; ++i) m[i] += p.values[i];
        }
        for (auto& v : m) v /= static_cast<double>(c.size());
        return m;
    };
    auto emb_mean = [&r](std::span<const PooledTokens> c) {
        std::vector<double> m;
        for (const auto& p : c) {
            const auto proj = project(p, r);
            if (m.empty()) m.assign(proj.values.size(), 0.0);
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += proj.values[i];
        }
        for (auto& v : m) v /= static_cast<double>(c.size());
        return m;
    };
    auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return std::sqrt(s);
    };
    Separability out;
    out.center_dist_raw = dist(raw_mean(a), raw_mean(b));
    out.center_dist_emb = dist(emb_mean(a), emb_mean(b));
    out.ratio = out.center_dist_raw > 0 ? out.center_dist_emb / out.center_dist_raw : 0.0;
    return out;
}

struct OverlapRow {
    std::size_t pcs = 0;
    double reference_fraction = 0;
    double probe_fraction = 0;
    double ratio = 0;  // probe / reference
};

/// Fraction of probe variance captured by the reference's top principal
/// axes. Both sets are centered by the reference mean.
inline std::vector<OverlapRow> variance_overlap(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& probe,
                                                std::span<const std::size_t> pcs) {
    if (reference.cols() != probe.cols()) throw Error(ErrorCode::DimMismatch, "reference and probe dims differ");
    if (pcs.empty()) return {};
    const auto max_pc = *std::max_element(pcs.begin(), pcs.end());
    if (static_cast<Eigen::Index>(max_pc) > reference.cols())
        throw Error(ErrorCode::InvalidArgument, "PC count exceeds dimensionality");
    if (static_cast<std::size_t>(reference.rows()) < max_pc)
        throw Error(ErrorCode::InsufficientSamples, "reference set smaller than the largest PC count");

    const auto fit = fit_pca(reference, static_cast<Eigen::Index>(max_pc));
    const Eigen::MatrixXd centered = probe.rowwise() - fit.mean.transpose();
    const double probe_total = centered.squaredNorm();
    const Eigen::MatrixXd scores = centered * fit.components;

    std::vector<OverlapRow> rows;
    for (std::size_t c : pcs) {
        OverlapRow row{c};
        row.reference_fraction = fit.explained_ratio(static_cast<Eigen::Index>(c));
        row.probe_fraction = probe_total > 0 ? scores.leftCols(static_cast<Eigen::Index>(c)).squaredNorm() / probe_total : 0.0;
        row.ratio = row.reference_fraction > 0 ? row.probe_fraction / row.reference_fraction : 0.0;
        rows.push_back(row);
    }
    return rows;
}

} // namespace raptor
