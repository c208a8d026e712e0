#pragma once

#include "raptor/core.hpp"
#include "raptor/metrics.hpp"
#include "raptor/parallel.hpp"
#include "raptor/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace raptor {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitPlan {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.6, 0.2, 0.2};
    std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle, then contiguous train / val / test blocks. Train and val
/// sizes round to nearest; test takes the remainder.
inline SplitPlan make_split(std::size_t n, std::array<double, 3> ratios = {0.6, 0.2, 0.2}, std::uint64_t seed = 0) {
    if (n < 5) throw Error(ErrorCode::TooFewSamples, "split needs n >= 5, got " + std::to_string(n));
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (total <= 0) throw Error(ErrorCode::InvalidArgument, "split ratios must be positive");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RngSequence(seed, RngStream::Split).shuffle(std::span(idx));
    const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] / total * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] / total * static_cast<double>(n))));
    SplitPlan p;
    p.seed = seed;
    p.ratios = ratios;
    p.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    p.val.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_val));
    p.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
    return p;
}

/// Same shuffle with explicit block sizes; the rest of the indices are unused.
inline SplitPlan make_split_counts(std::size_t n, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                                   std::uint64_t seed) {
    if (n_train + n_val + n_test > n) throw Error(ErrorCode::TooFewSamples, "split counts exceed sample count");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RngSequence(seed, RngStream::Split).shuffle(std::span(idx));
    const double dn = static_cast<double>(n);
    SplitPlan p;
    p.seed = seed;
    p.ratios = {n_train / dn, n_val / dn, n_test / dn};
    auto it = idx.begin();
    p.train.assign(it, it + static_cast<long>(n_train));
    it += static_cast<long>(n_train);
    p.val.assign(it, it + static_cast<long>(n_val));
    it += static_cast<long>(n_val);
    p.test.assign(it, it + static_cast<long>(n_test));
    return p;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

template <typename T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[r]);
    return out;
}

/// Per-feature (mean, std) from training rows; zero std maps to 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        const Eigen::MatrixXd c = x.rowwise() - s.mean;
        const double denom = std::max<double>(1.0, static_cast<double>(x.rows()));
        s.scale = (c.colwise().squaredNorm() / denom).cwiseSqrt();
        for (Eigen::Index i = 0; i < s.scale.size(); ++i)
            if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() / scale.array();
    }
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression
// ---------------------------------------------------------------------------

inline const std::vector<double> kDefaultPenaltyGrid{0.01, 0.1, 1.0, 10.0, 100.0};

struct LogRegModel {
    Eigen::MatrixXd weights;  // classes x dim, in standardized feature space
    Eigen::VectorXd bias;
    double penalty = 0;
    Standardizer standardizer;
    int classes = 0;
    double best_val_score = 0;
    int iterations = 0;
    double final_grad_norm = 0;

    Eigen::MatrixXd decision(const Eigen::MatrixXd& x) const {
        return (standardizer.apply(x) * weights.transpose()).rowwise() + bias.transpose();
    }

    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd z = decision(x);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double m = z.row(i).maxCoeff();
            z.row(i) = (z.row(i).array() - m).exp();
            z.row(i) /= z.row(i).sum();
        }
        return z;
    }
};

/// Objective (1/n) sum_i -log softmax(W x_i + b)[y_i] + (lambda/2)|W|^2 and
/// its gradient. Parameters are packed as vec(W) (column-major, classes x dim)
/// followed by b.
struct SoftmaxObjective {
    const Eigen::MatrixXd& x;
    std::span<const int> y;
    int classes;
    double lambda;

    Eigen::Index size() const { return classes * x.cols() + classes; }

    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
        const Eigen::Index c = classes, d = x.cols();
        const Eigen::Map<const Eigen::MatrixXd> w(theta.data(), c, d);
        const Eigen::Map<const Eigen::VectorXd> b(theta.data() + c * d, c);
        Eigen::MatrixXd z = (x * w.transpose()).rowwise() + b.transpose();
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double m = z.row(i).maxCoeff();
            const double lse = m + std::log((z.row(i).array() - m).exp().sum());
            loss += lse - z(i, y[static_cast<std::size_t>(i)]);
            z.row(i) = (z.row(i).array() - lse).exp();  // probabilities
            z(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        }
        const double inv_n = 1.0 / static_cast<double>(x.rows());
        grad.resize(size());
        Eigen::Map<Eigen::MatrixXd> gw(grad.data(), c, d);
        gw = inv_n * (z.transpose() * x) + lambda * w;
        Eigen::Map<Eigen::VectorXd>(grad.data() + c * d, c) = inv_n * z.colwise().sum().transpose();
        return inv_n * loss + 0.5 * lambda * w.squaredNorm();
    }
};

struct LbfgsResult {
    int iterations = 0;
    double grad_norm = 0;
    double value = 0;
};

/// Limited-memory BFGS with backtracking Armijo line search.
template <typename Objective>
LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd& theta, double grad_tol = 1e-6, int max_iter = 500,
                           int memory = 10) {
    Eigen::VectorXd g, g_new, dir, theta_new;
    double fx = f(theta, g);
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    LbfgsResult res;
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        if (g.norm() <= grad_tol) break;
        // Two-loop recursion.
        dir = -g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
            dir -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(dir);
            dir += (alpha[i] - beta) * s_hist[i];
        }
        double slope = g.dot(dir);
        if (!(slope < 0)) {
            dir = -g;
            slope = -g.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        double f_new = 0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            theta_new = theta + step * dir;
            f_new = f(theta_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        Eigen::VectorXd s = theta_new - theta, yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * yv.squaredNorm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const bool stalled = std::abs(fx - f_new) <= 1e-15 * std::max(1.0, std::abs(fx));
        theta.swap(theta_new);
        g.swap(g_new);
        fx = f_new;
        if (stalled) {
            ++res.iterations;
            break;
        }
    }
    res.grad_norm = g.norm();
    res.value = fx;
    return res;
}

namespace detail {

inline int count_classes(std::span<const int> y) {
    int c = 0;
    for (int v : y) {
        if (v < 0) throw Error(ErrorCode::InvalidArgument, "class labels must be non-negative");
        c = std::max(c, v + 1);
    }
    return c;
}

/// Row-space basis of standardized training features: when dim > n the
/// problem is solved on F = U S (X = U S V^T), which carries the same
/// objective for W = Z V^T.
struct ReducedDesign {
    Eigen::MatrixXd features;  // n x r
    Eigen::MatrixXd back;      // r x dim, W = Z * back
};

inline ReducedDesign reduce_design(const Eigen::MatrixXd& xs) {
    const Eigen::MatrixXd gram = xs * xs.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > 1e-10 * top) keep.push_back(i);
    const auto r = static_cast<Eigen::Index>(keep.size());
    ReducedDesign out;
    out.features.resize(xs.rows(), r);
    Eigen::MatrixXd u_over_s(xs.rows(), r);
    for (Eigen::Index j = 0; j < r; ++j) {
        const double s = std::sqrt(es.eigenvalues()(keep[static_cast<std::size_t>(j)]));
        out.features.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]) * s;
        u_over_s.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]) / s;
    }
    out.back = u_over_s.transpose() * xs;  // V^T
    return out;
}

inline double selection_score(const Eigen::MatrixXd& probs, std::span<const int> y) {
    try {
        return auroc_multiclass(probs, y, Averaging::Macro);
    } catch (const Error&) {
        return accuracy(probs, y);
    }
}

} // namespace detail

struct LogRegOptions {
    double grad_tol = 1e-6;
    int max_iter = 500;
    unsigned threads = 1;
};

/// Fits one model at a fixed penalty on already standardized features.
inline LogRegModel fit_logreg_fixed(const Eigen::MatrixXd& xs, std::span<const int> y, int classes, double lambda,
                                    const LogRegOptions& opt = {}) {
    LogRegModel m;
    m.penalty = lambda;
    m.classes = classes;
    const bool reduce = xs.cols() > xs.rows();
    std::optional<detail::ReducedDesign> rd;
    if (reduce) rd = detail::reduce_design(xs);
    const Eigen::MatrixXd& design = reduce ? rd->features : xs;
    SoftmaxObjective obj{design, y, classes, lambda};
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(obj.size());
    const auto res = minimize_lbfgs(obj, theta, opt.grad_tol, opt.max_iter);
    const Eigen::Index d = design.cols();
    const Eigen::Map<const Eigen::MatrixXd> z(theta.data(), classes, d);
    m.weights = reduce ? Eigen::MatrixXd(z * rd->back) : Eigen::MatrixXd(z);
    m.bias = theta.tail(classes);
    m.iterations = res.iterations;
    m.final_grad_norm = res.grad_norm;
    for (Eigen::Index i = 0; i < m.weights.size(); ++i)
        if (!std::isfinite(m.weights.data()[i])) throw Error(ErrorCode::NonFinite, "logistic regression diverged");
    return m;
}

/// Standardize on train, fit each penalty, keep the best validation
/// AUROC-macro (first in grid order on ties).
inline LogRegModel fit_logreg(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> grid,
                              const SplitPlan& split, const LogRegOptions& opt = {}) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty penalty grid");
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i])) throw Error(ErrorCode::NonFinite, "non-finite feature");
    const Eigen::MatrixXd xtr = take_rows(x, split.train);
    const auto ytr = take(y, split.train);
    const int classes = std::max(detail::count_classes(y), 2);
    {
        std::vector<int> present(ytr);
        std::sort(present.begin(), present.end());
        if (std::unique(present.begin(), present.end()) - present.begin() < 2)
            throw Error(ErrorCode::SingleClass, "training split holds a single class");
    }
    const auto stdz = Standardizer::fit(xtr);
    const Eigen::MatrixXd xs = stdz.apply(xtr);
    const bool have_val = !split.val.empty();
    const Eigen::MatrixXd xval = have_val ? take_rows(x, split.val) : Eigen::MatrixXd();
    const auto yval = take(y, split.val);

    std::vector<LogRegModel> fits(grid.size());
    std::vector<double> scores(grid.size(), -std::numeric_limits<double>::infinity());
    parallel_for(grid.size(), opt.threads, [&](std::size_t g) {
        fits[g] = fit_logreg_fixed(xs, ytr, classes, grid[g], opt);
        fits[g].standardizer = stdz;
        if (have_val) scores[g] = detail::selection_score(fits[g].predict_proba(xval), yval);
    });
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (scores[g] > scores[best]) best = g;
    fits[best].best_val_score = scores[best];
    return std::move(fits[best]);
}

// ---------------------------------------------------------------------------
// Multi-layer perceptron: in -> 256 (batch norm, ReLU) -> 256 (ReLU) -> out
// ---------------------------------------------------------------------------

struct MlpConfig {
    int hidden = 256;
    int max_epochs = 50;
    double learning_rate = 1e-3;
    int batch_size = 32;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double bn_momentum = 0.1, bn_eps = 1e-5;
    bool standardize_inputs = true;
    bool standardize_targets = true;
    std::uint64_t seed = 0;
};

template <typename Scalar = double>
struct MlpParams {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Mat w1, w2, w3;  // out x in
    Vec b1, b2, b3;
    Vec gamma, beta;  // batch norm affine

    template <typename Fn>
    void for_each(Fn&& fn) {
        fn(w1); fn(b1); fn(gamma); fn(beta); fn(w2); fn(b2); fn(w3); fn(b3);
    }
    template <typename Fn>
    void for_each_pair(MlpParams& other, Fn&& fn) {
        fn(w1, other.w1); fn(b1, other.b1); fn(gamma, other.gamma); fn(beta, other.beta);
        fn(w2, other.w2); fn(b2, other.b2); fn(w3, other.w3); fn(b3, other.b3);
    }

    MlpParams zeros_like() const {
        MlpParams z;
        z.w1 = Mat::Zero(w1.rows(), w1.cols()); z.w2 = Mat::Zero(w2.rows(), w2.cols()); z.w3 = Mat::Zero(w3.rows(), w3.cols());
        z.b1 = Vec::Zero(b1.size()); z.b2 = Vec::Zero(b2.size()); z.b3 = Vec::Zero(b3.size());
        z.gamma = Vec::Zero(gamma.size()); z.beta = Vec::Zero(beta.size());
        return z;
    }
};

template <typename Scalar = double>
struct MlpModel {
    using Mat = typename MlpParams<Scalar>::Mat;
    using Vec = typename MlpParams<Scalar>::Vec;

    std::array<int, 4> widths{};
    MlpParams<Scalar> params;
    Vec running_mean, running_var;
    Standardizer input_scaler;
    Eigen::RowVectorXd target_mean, target_scale;
    double best_val_score = -std::numeric_limits<double>::infinity();
    int epochs_run = 0;
    int best_epoch = 0;
    double bn_eps = 1e-5;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const {
        const Mat in = input_scaler.apply(x).template cast<Scalar>();
        Mat z1 = (in * params.w1.transpose()).rowwise() + params.b1.transpose();
        for (Eigen::Index j = 0; j < z1.cols(); ++j) {
            const Scalar inv = Scalar(1) / std::sqrt(running_var(j) + Scalar(bn_eps));
            z1.col(j) = ((z1.col(j).array() - running_mean(j)) * inv * params.gamma(j) + params.beta(j)).cwiseMax(Scalar(0));
        }
        Mat a2 = ((z1 * params.w2.transpose()).rowwise() + params.b2.transpose()).cwiseMax(Scalar(0));
        Mat out = (a2 * params.w3.transpose()).rowwise() + params.b3.transpose();
        Eigen::MatrixXd y = out.template cast<double>();
        return (y.array().rowwise() * target_scale.array()).rowwise() + target_mean.array();
    }
};

namespace detail {

template <typename Scalar>
MlpParams<Scalar> init_mlp(int in, int hidden, int out, std::uint64_t seed) {
    using P = MlpParams<Scalar>;
    RngSequence rng(seed, RngStream::MlpInit);
    auto uniform_fill = [&rng](auto& m, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>((2 * rng.uniform() - 1) * bound);
    };
    P p;
    p.w1.resize(hidden, in); uniform_fill(p.w1, in);
    p.b1.resize(hidden); uniform_fill(p.b1, in);
    p.gamma = P::Vec::Ones(hidden);
    p.beta = P::Vec::Zero(hidden);
    p.w2.resize(hidden, hidden); uniform_fill(p.w2, hidden);
    p.b2.resize(hidden); uniform_fill(p.b2, hidden);
    p.w3.resize(out, hidden); uniform_fill(p.w3, hidden);
    p.b3.resize(out); uniform_fill(p.b3, hidden);
    return p;
}

} // namespace detail

/// Training-mode loss (mean squared error over batch and targets, batch
/// statistics in the normalization layer) and gradient for one batch.
template <typename Scalar>
struct MlpBatchResult {
    Scalar loss;
    MlpParams<Scalar> grad;
    typename MlpParams<Scalar>::Vec batch_mean, batch_var;
};

template <typename Scalar>
MlpBatchResult<Scalar> mlp_loss_and_grad(const MlpParams<Scalar>& p,
                                         const typename MlpParams<Scalar>::Mat& x,
                                         const typename MlpParams<Scalar>::Mat& y, Scalar bn_eps = Scalar(1e-5)) {
    using Mat = typename MlpParams<Scalar>::Mat;
    using Vec = typename MlpParams<Scalar>::Vec;
    const Eigen::Index n = x.rows();
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

    const Mat z1 = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
    const Vec mu = z1.colwise().mean().transpose();
    const Mat zc = z1.rowwise() - mu.transpose();
    const Vec var = (zc.array().square().colwise().sum() * inv_n).transpose();
    const Vec inv_std = (var.array() + bn_eps).rsqrt();
    const Mat zhat = zc.array().rowwise() * inv_std.transpose().array();
    const Mat h1 = (zhat.array().rowwise() * p.gamma.transpose().array()).rowwise() + p.beta.transpose().array();
    const Mat a1 = h1.cwiseMax(Scalar(0));
    const Mat z2 = (a1 * p.w2.transpose()).rowwise() + p.b2.transpose();
    const Mat a2 = z2.cwiseMax(Scalar(0));
    const Mat out = (a2 * p.w3.transpose()).rowwise() + p.b3.transpose();

    const Mat diff = out - y;
    const Scalar denom = static_cast<Scalar>(diff.size());
    MlpBatchResult<Scalar> r{diff.squaredNorm() / denom, p.zeros_like(), mu, var};

    const Mat d_out = diff * (Scalar(2) / denom);
    r.grad.w3 = d_out.transpose() * a2;
    r.grad.b3 = d_out.colwise().sum().transpose();
    const Mat d_a2 = d_out * p.w3;
    const Mat d_z2 = (z2.array() > Scalar(0)).select(d_a2, Scalar(0));
    r.grad.w2 = d_z2.transpose() * a1;
    r.grad.b2 = d_z2.colwise().sum().transpose();
    const Mat d_a1 = d_z2 * p.w2;
    const Mat d_h1 = (h1.array() > Scalar(0)).select(d_a1, Scalar(0));
    r.grad.gamma = (d_h1.array() * zhat.array()).colwise().sum().transpose();
    r.grad.beta = d_h1.colwise().sum().transpose();
    const Mat d_zhat = d_h1.array().rowwise() * p.gamma.transpose().array();
    // d z1 = inv_std / n * (n d_zhat - sum(d_zhat) - zhat * sum(d_zhat * zhat))
    const Vec sum_d = d_zhat.colwise().sum().transpose();
    const Vec sum_dz = (d_zhat.array() * zhat.array()).colwise().sum().transpose();
    Mat d_z1 = (d_zhat * static_cast<Scalar>(n)).rowwise() - sum_d.transpose();
    d_z1 -= Mat(zhat.array().rowwise() * sum_dz.transpose().array());
    d_z1 = d_z1.array().rowwise() * (inv_std.transpose().array() * inv_n);
    r.grad.w1 = d_z1.transpose() * x;
    r.grad.b1 = d_z1.colwise().sum().transpose();
    return r;
}

/// Adam on mini-batches; keeps the parameters of the epoch with the best
/// validation mean r^2.
template <typename Scalar = double>
MlpModel<Scalar> fit_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SplitPlan& split,
                         const MlpConfig& cfg = {}) {
    using Mat = typename MlpParams<Scalar>::Mat;
    using Vec = typename MlpParams<Scalar>::Vec;
    if (y.cols() < 1) throw Error(ErrorCode::InvalidArgument, "mlp needs at least one target");
    if (split.train.size() < 2) throw Error(ErrorCode::TooFewSamples, "mlp needs two training rows");

    MlpModel<Scalar> m;
    m.widths = {static_cast<int>(x.cols()), cfg.hidden, cfg.hidden, static_cast<int>(y.cols())};
    m.bn_eps = cfg.bn_eps;
    const Eigen::MatrixXd xtr_raw = take_rows(x, split.train);
    const Eigen::MatrixXd ytr_raw = take_rows(y, split.train);
    if (cfg.standardize_inputs) {
        m.input_scaler = Standardizer::fit(xtr_raw);
    } else {
        m.input_scaler.mean = Eigen::RowVectorXd::Zero(x.cols());
        m.input_scaler.scale = Eigen::RowVectorXd::Ones(x.cols());
    }
    if (cfg.standardize_targets) {
        const auto ts = Standardizer::fit(ytr_raw);
        m.target_mean = ts.mean;
        m.target_scale = ts.scale;
    } else {
        m.target_mean = Eigen::RowVectorXd::Zero(y.cols());
        m.target_scale = Eigen::RowVectorXd::Ones(y.cols());
    }
    const Mat xtr = m.input_scaler.apply(xtr_raw).template cast<Scalar>();
    const Mat ytr = ((ytr_raw.rowwise() - m.target_mean).array().rowwise() / m.target_scale.array())
                        .matrix().template cast<Scalar>();
    const Eigen::MatrixXd xval = take_rows(x, split.val.empty() ? split.train : split.val);
    const Eigen::MatrixXd yval = take_rows(y, split.val.empty() ? split.train : split.val);

    m.params = detail::init_mlp<Scalar>(m.widths[0], cfg.hidden, m.widths[3], cfg.seed);
    m.running_mean = Vec::Zero(cfg.hidden);
    m.running_var = Vec::Ones(cfg.hidden);
    auto adam_m = m.params.zeros_like();
    auto adam_v = m.params.zeros_like();
    MlpModel<Scalar> best = m;

    RngSequence shuffle_rng(cfg.seed, RngStream::MlpShuffle);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(xtr.rows()));
    std::iota(order.begin(), order.end(), 0);
    long step = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(std::span(order));
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            if (end - start < 2) continue;  // batch statistics need two rows
            Mat xb(static_cast<Eigen::Index>(end - start), xtr.cols()), yb(static_cast<Eigen::Index>(end - start), ytr.cols());
            for (std::size_t i = start; i < end; ++i) {
                xb.row(static_cast<Eigen::Index>(i - start)) = xtr.row(order[i]);
                yb.row(static_cast<Eigen::Index>(i - start)) = ytr.row(order[i]);
            }
            auto r = mlp_loss_and_grad<Scalar>(m.params, xb, yb, static_cast<Scalar>(cfg.bn_eps));
            if (!std::isfinite(static_cast<double>(r.loss))) throw Error(ErrorCode::NonFinite, "mlp loss diverged");
            const Scalar nb = static_cast<Scalar>(end - start);
            const Scalar mom = static_cast<Scalar>(cfg.bn_momentum);
            m.running_mean = (Scalar(1) - mom) * m.running_mean + mom * r.batch_mean;
            m.running_var = (Scalar(1) - mom) * m.running_var + mom * r.batch_var * (nb / (nb - Scalar(1)));

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            const auto b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
            const auto lr = static_cast<Scalar>(cfg.learning_rate / bc1);
            const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
            const auto eps = static_cast<Scalar>(cfg.adam_eps);
            auto update = [&](auto& param, auto& grad, auto& mm, auto& vv) {
                mm = b1 * mm + (Scalar(1) - b1) * grad;
                vv = b2 * vv + (Scalar(1) - b2) * grad.cwiseProduct(grad);
                param.array() -= lr * mm.array() / ((vv.array() * inv_bc2).sqrt() + eps);
            };
            update(m.params.w1, r.grad.w1, adam_m.w1, adam_v.w1);
            update(m.params.b1, r.grad.b1, adam_m.b1, adam_v.b1);
            update(m.params.gamma, r.grad.gamma, adam_m.gamma, adam_v.gamma);
            update(m.params.beta, r.grad.beta, adam_m.beta, adam_v.beta);
            update(m.params.w2, r.grad.w2, adam_m.w2, adam_v.w2);
            update(m.params.b2, r.grad.b2, adam_m.b2, adam_v.b2);
            update(m.params.w3, r.grad.w3, adam_m.w3, adam_v.w3);
            update(m.params.b3, r.grad.b3, adam_m.b3, adam_v.b3);
        }
        m.epochs_run = epoch + 1;
        const double score = regression_report(m.predict(xval), yval).r2_mean;
        if (score > best.best_val_score) {
            best = m;
            best.best_val_score = score;
            best.best_epoch = epoch + 1;
        }
    }
    best.epochs_run = m.epochs_run;
    return best;
}

// ---------------------------------------------------------------------------
// Data-scarcity curve
// ---------------------------------------------------------------------------

struct ScarcityPoint {
    std::size_t size = 0;
    std::vector<double> aurocs;  // one per repeat
    double median = 0, lo95 = 0, hi95 = 0;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

} // namespace detail

/// Subsamples `size` training rows (keeping the pool's order, both classes
/// present), fits with validation selection and scores the fixed test rows.
inline std::vector<ScarcityPoint> scarcity_curve(const Eigen::MatrixXd& x, std::span<const int> y,
                                                 std::span<const std::size_t> sizes, std::size_t repeats,
                                                 const SplitPlan& split, std::span<const double> grid,
                                                 std::uint64_t seed, const LogRegOptions& opt = {}) {
    if (sizes.empty() || repeats == 0) return {};
    const auto max_size = *std::max_element(sizes.begin(), sizes.end());
    if (max_size > split.train.size() || split.test.empty())
        throw Error(ErrorCode::TooFewSamples, "training pool of " + std::to_string(split.train.size()) +
                                                  " cannot supply " + std::to_string(max_size) + " samples");
    const Eigen::MatrixXd xtest = take_rows(x, split.test);
    const auto ytest = take(y, split.test);

    std::vector<ScarcityPoint> out;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        ScarcityPoint pt{sizes[si], std::vector<double>(repeats)};
        for (std::size_t r = 0; r < repeats; ++r) {
            RngSequence rng(derive_seed(seed, si * 1000003u + r), RngStream::Split);
            std::vector<std::size_t> chosen;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                std::vector<std::size_t> pos(split.train.size());
                std::iota(pos.begin(), pos.end(), 0);
                if (pt.size < pos.size()) {
                    rng.shuffle(std::span(pos));
                    pos.resize(pt.size);
                    std::sort(pos.begin(), pos.end());
                }
                chosen.clear();
                for (auto p : pos) chosen.push_back(split.train[p]);
                const int first = y[chosen.front()];
                if (std::any_of(chosen.begin(), chosen.end(), [&](std::size_t i) { return y[i] != first; })) break;
                chosen.clear();
            }
            if (chosen.empty()) throw Error(ErrorCode::SingleClass, "could not draw a two-class subsample");
            SplitPlan sub = split;
            sub.train = chosen;
            const auto model = fit_logreg(x, y, grid, sub, opt);
            pt.aurocs[r] = auroc_multiclass(model.predict_proba(xtest), ytest, Averaging::Macro);
        }
        pt.median = detail::percentile(pt.aurocs, 0.5);
        pt.lo95 = detail::percentile(pt.aurocs, 0.025);
        pt.hi95 = detail::percentile(pt.aurocs, 0.975);
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace raptor
