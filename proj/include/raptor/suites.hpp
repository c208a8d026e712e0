#pragma once

#include "raptor/analysis.hpp"
#include "raptor/core.hpp"
#include "raptor/encoder.hpp"
#include "raptor/reduction.hpp"
#include "raptor/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace raptor {

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    double value = 0;
    std::string detail;
};

inline bool all_passed(std::span<const CheckResult> checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

/// Standard normal matrix from the Test stream of `seed`.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    const CounterRng rng(seed, RngStream::Test);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(static_cast<std::uint64_t>(i * cols + j));
    return m;
}

struct JlSuiteConfig {
    std::size_t points = 128;
    std::uint32_t dim = 1024;
    double eps = 0.25;
    std::size_t seeds = 10;
    std::uint32_t norm_k = 100;
    std::size_t norm_trials = 1000;
    double max_violation_fraction = 0.01;
    std::uint64_t seed = 0;
};

/// Pairwise distortion at K = ceil(8 eps^-2 ln n) over several projection
/// seeds, and the mean of ||Rz||^2 / ||z||^2 over many seeds.
inline std::vector<CheckResult> jl_suite(const JlSuiteConfig& cfg = {}) {
    const auto pts = gaussian_matrix(static_cast<Eigen::Index>(cfg.points), cfg.dim, cfg.seed);
    const auto k = jl_dimension(cfg.points, cfg.eps);
    std::vector<std::uint64_t> seeds(cfg.seeds);
    std::iota(seeds.begin(), seeds.end(), cfg.seed + 1);
    const auto rep = jl_check(pts, k, cfg.eps, seeds);

    std::vector<CheckResult> out;
    out.push_back({"jl", "pairwise violation fraction (K=" + std::to_string(k) + ")",
                   rep.violation_fraction() <= cfg.max_violation_fraction, rep.violation_fraction(),
                   std::to_string(rep.violations) + " of " + std::to_string(rep.pair_count) + " pairs outside 1 +- " +
                       std::to_string(cfg.eps)});

    const Eigen::VectorXd z = gaussian_matrix(cfg.dim, 1, cfg.seed + 1000).col(0);
    const auto ratios = norm_ratios(z, cfg.norm_k, cfg.norm_trials, cfg.seed + 2000);
    const double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size());
    out.push_back({"jl", "mean squared-norm ratio (K=" + std::to_string(cfg.norm_k) + ")",
                   mean >= 0.95 && mean <= 1.05, mean, std::to_string(cfg.norm_trials) + " seeds"});
    return out;
}

/// Token pair whose slice differences all point near one direction u:
/// D_j = c_j (u + noise_j), c_j in [0.5, 1.5]. Small noise keeps every
/// alpha_j close to 1.
inline std::pair<TokenTensor, TokenTensor> make_aligned_pair(std::uint32_t slices, std::uint32_t grid,
                                                             std::uint32_t dim, std::uint64_t seed,
                                                             double noise = 0.3) {
    const CounterRng rng(seed, RngStream::Test);
    std::uint64_t idx = 0;
    TokenTensor b(Axis::Axial, slices, grid, dim, {});
    for (auto& v : b.values) v = static_cast<float>(rng.normal(idx++));
    TokenTensor a = b;
    const std::size_t n = b.slice_size();
    std::vector<double> u(n);
    for (auto& v : u) v = rng.normal(idx++);
    for (std::uint32_t j = 0; j < slices; ++j) {
        const double c = 0.5 + rng.uniform(idx++);
        auto s = a.slice(j);
        for (std::size_t i = 0; i < n; ++i) s[i] += static_cast<float>(c * (u[i] + noise * rng.normal(idx++)));
    }
    return {std::move(a), std::move(b)};
}

struct BoundSuiteConfig {
    std::size_t pairs = 100;
    std::uint32_t slices = 16;
    std::uint32_t grid = 2;
    std::uint32_t dim = 256;
    std::uint32_t k = 100;
    double eps = 0.3;
    double alpha_floor = 0.2;
    std::size_t min_holding = 99;
    std::uint64_t seed = 0;
};

struct BoundSuiteResult {
    std::size_t pairs = 0;
    std::size_t holding = 0;
    double min_alpha = 1.0;
    std::vector<BoundReport> reports;
};

inline BoundSuiteResult run_bound_pairs(const BoundSuiteConfig& cfg = {}) {
    BoundSuiteResult res;
    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        const auto [a, b] = make_aligned_pair(cfg.slices, cfg.grid, cfg.dim, derive_seed(cfg.seed, i));
        const auto r = gen_projection(cfg.k, cfg.dim, derive_seed(cfg.seed + 1, i));
        const auto rep = bound_check(a, b, r, cfg.eps);
        res.min_alpha = std::min(res.min_alpha, rep.alpha_min);
        if (rep.holds_lower && rep.holds_upper) ++res.holding;
        res.reports.push_back(rep);
        ++res.pairs;
    }
    return res;
}

inline std::vector<CheckResult> alpha_suite(const BoundSuiteConfig& cfg = {}) {
    std::vector<CheckResult> out;
    const auto [a, b] = make_aligned_pair(cfg.slices, cfg.grid, cfg.dim, cfg.seed);
    const auto prof = alpha_profile(a, b);
    const bool in_range = std::all_of(prof.alphas.begin(), prof.alphas.end(), [](double x) { return x >= -1 && x <= 1; });
    out.push_back({"alpha", "alpha values in [-1, 1]", in_range && prof.alphas.size() + 1 == cfg.slices,
                   static_cast<double>(prof.alphas.size()), "D-1 coefficients"});
    // Constant slice difference: every alpha is exactly 1.
    TokenTensor c = b;
    for (std::uint32_t j = 0; j < cfg.slices; ++j) {
        auto s = c.slice(j);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += static_cast<float>(1 + i % 3);
    }
    const auto same = alpha_profile(c, b);
    out.push_back({"alpha", "constant difference gives alpha_min = 1", std::abs(same.alpha_min - 1.0) < 1e-9,
                   same.alpha_min, ""});
    const auto res = run_bound_pairs(cfg);
    out.push_back({"alpha", "constructed pairs reach alpha_min >= " + std::to_string(cfg.alpha_floor),
                   res.min_alpha >= cfg.alpha_floor, res.min_alpha, std::to_string(res.pairs) + " pairs"});
    return out;
}

inline std::vector<CheckResult> bounds_suite(const BoundSuiteConfig& cfg = {}) {
    const auto res = run_bound_pairs(cfg);
    return {{"bounds", "distance sandwich holds", res.holding >= cfg.min_holding && res.min_alpha >= cfg.alpha_floor,
             static_cast<double>(res.holding),
             std::to_string(res.holding) + " of " + std::to_string(res.pairs) + " pairs, min alpha " +
                 std::to_string(res.min_alpha)}};
}

struct OverlapSuiteConfig {
    Eigen::Index dim = 32;
    Eigen::Index samples = 2000;
    std::vector<std::size_t> checkpoints{4, 8, 16, 32};
    std::uint64_t seed = 0;
};

/// Generic set: spectrum 0.8^i along a random orthonormal basis. Domain set:
/// same basis, variance rising with i, so the generic top axes explain less
/// of it until the PC count reaches the ambient rank.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> make_overlap_sets(const OverlapSuiteConfig& cfg) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(cfg.dim, cfg.dim, cfg.seed));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd generic(cfg.dim), domain(cfg.dim);
    for (Eigen::Index i = 0; i < cfg.dim; ++i) {
        generic(i) = std::sqrt(std::pow(0.8, static_cast<double>(i)));
        domain(i) = std::sqrt(0.2 + static_cast<double>(i) / static_cast<double>(cfg.dim));
    }
    const Eigen::MatrixXd g = gaussian_matrix(cfg.samples, cfg.dim, cfg.seed + 1) * generic.asDiagonal() * q.transpose();
    const Eigen::MatrixXd d = gaussian_matrix(cfg.samples, cfg.dim, cfg.seed + 2) * domain.asDiagonal() * q.transpose();
    return {g, d};
}

inline std::vector<CheckResult> overlap_suite(const OverlapSuiteConfig& cfg = {}) {
    const auto [generic, domain] = make_overlap_sets(cfg);
    const auto rows = variance_overlap(generic, domain, cfg.checkpoints);
    bool increasing = true;
    std::string trace;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && !(rows[i].ratio > rows[i - 1].ratio)) increasing = false;
        trace += (i ? ", " : "") + std::to_string(rows[i].pcs) + ":" + std::to_string(rows[i].ratio);
    }
    return {{"overlap", "probe/reference ratio strictly increasing", increasing, rows.back().ratio, trace},
            {"overlap", "ratio at ambient rank >= 0.99", rows.back().ratio >= 0.99, rows.back().ratio, trace}};
}

} // namespace raptor
