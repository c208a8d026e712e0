#pragma once

#include "raptor/core.hpp"
#include "raptor/encoder.hpp"
#include "raptor/pca.hpp"
#include "raptor/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace raptor {

enum class ScaleMode : std::uint8_t { Unit = 0, InvSqrtK = 1 };

inline ScaleMode parse_scale_mode(std::string_view s) {
    if (s == "unit") return ScaleMode::Unit;
    if (s == "invsqrtk") return ScaleMode::InvSqrtK;
    throw Error(ErrorCode::InvalidArgument, "scale mode must be unit|invsqrtk, got '" + std::string(s) + "'");
}

inline std::string_view to_string(ScaleMode m) { return m == ScaleMode::Unit ? "unit" : "invsqrtk"; }

/// K x d Gaussian matrix shared by every axis and patch, row-major.
struct ProjectionMatrix {
    std::uint32_t rows = 0;  // K
    std::uint32_t cols = 0;  // d
    std::uint64_t seed = 0;
    ScaleMode scale = ScaleMode::InvSqrtK;
    std::vector<float> entries;

    float operator()(std::size_t k, std::size_t l) const { return entries[k * cols + l]; }

    /// Test hook: K = d identity.
    static ProjectionMatrix identity(std::uint32_t d) {
        ProjectionMatrix r{d, d, 0, ScaleMode::Unit, std::vector<float>(std::size_t{d} * d, 0.f)};
        for (std::uint32_t i = 0; i < d; ++i) r.entries[std::size_t{i} * d + i] = 1.f;
        return r;
    }
};

/// Entry (k, l) is standard normal element k*d + l of the seed's projection
/// stream, times 1/sqrt(K) in InvSqrtK mode.
inline ProjectionMatrix gen_projection(std::uint32_t k, std::uint32_t d, std::uint64_t seed,
                                       ScaleMode scale = ScaleMode::InvSqrtK) {
    if (k < 1 || d < 1) throw Error(ErrorCode::InvalidArgument, "projection needs K >= 1 and d >= 1");
    ProjectionMatrix r{k, d, seed, scale, std::vector<float>(std::size_t{k} * d)};
    const CounterRng rng(seed, RngStream::Projection);
    const double s = scale == ScaleMode::InvSqrtK ? 1.0 / std::sqrt(static_cast<double>(k)) : 1.0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) r.entries[i] = static_cast<float>(s * rng.normal(i));
    return r;
}

/// Slice-averaged tokens of one axis, p*p x d.
struct PooledTokens {
    Axis axis = Axis::Axial;
    std::uint32_t grid = 0;
    std::uint32_t dim = 0;
    Digest encoder_id{};
    std::vector<float> values;

    std::size_t patches() const { return std::size_t{grid} * grid; }
    float at(std::size_t patch, std::size_t ch) const { return values[patch * dim + ch]; }
};

/// Mean over slices, accumulated in ascending slice order in double.
inline PooledTokens mean_pool(const TokenTensor& t) {
    if (t.slices == 0) throw Error(ErrorCode::ShapeMismatch, "cannot pool zero slices");
    const std::size_t n = t.slice_size();
    std::vector<double> acc(n, 0.0);
    for (std::size_t j = 0; j < t.slices; ++j) {
        const auto s = t.slice(j);
        for (std::size_t i = 0; i < n; ++i) acc[i] += s[i];
    }
    PooledTokens out{t.axis, t.grid, t.dim, t.encoder_id, std::vector<float>(n)};
    const double denom = static_cast<double>(t.slices);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = static_cast<float>(acc[i] / denom);
    return out;
}

/// R applied to every patch token; laid out (patch, k).
struct ProjectedTokens {
    std::uint32_t rows = 0;  // K
    std::size_t patches = 0;
    std::vector<float> values;

    float at(std::size_t k, std::size_t patch) const { return values[patch * rows + k]; }
};

inline ProjectedTokens project(const PooledTokens& pooled, const ProjectionMatrix& r) {
    if (r.cols != pooled.dim)
        throw Error(ErrorCode::DimMismatch, "projection expects d=" + std::to_string(r.cols) + ", tokens have d=" +
                                                std::to_string(pooled.dim));
    ProjectedTokens out{r.rows, pooled.patches(), std::vector<float>(pooled.patches() * r.rows)};
    for (std::size_t q = 0; q < out.patches; ++q) {
        const float* z = pooled.values.data() + q * pooled.dim;
        for (std::size_t k = 0; k < r.rows; ++k) {
            const float* row = r.entries.data() + k * r.cols;
            double acc = 0.0;
            for (std::size_t l = 0; l < r.cols; ++l) acc += static_cast<double>(row[l]) * z[l];
            out.values[q * r.rows + k] = static_cast<float>(acc);
        }
    }
    return out;
}

struct EmbeddingMeta {
    std::uint32_t k = 0;
    std::uint32_t grid = 0;
    std::uint32_t dim = 0;
    std::uint64_t seed = 0;
    ScaleMode scale = ScaleMode::InvSqrtK;
    AxisMask axes;
    Digest encoder_id{};
    std::uint16_t prng_id = kPrngId;
    std::string volume_id;
};

/// Flattened (axis ascending, patch row-major, projection component).
struct Embedding {
    std::vector<float> vector;
    EmbeddingMeta meta;
};

inline std::size_t embedding_length(AxisMask axes, std::uint32_t k, std::uint32_t grid) {
    return static_cast<std::size_t>(axes.count()) * k * grid * grid;
}

using PooledSet = std::array<std::optional<PooledTokens>, 3>;

/// Projection + flattening of already pooled tokens.
inline Embedding embed_pooled(const PooledSet& pooled, const ProjectionMatrix& r, AxisMask axes,
                              std::string volume_id = {}) {
    if (axes.empty()) throw Error(ErrorCode::AxisMissing, "no axes selected");
    const PooledTokens* first = nullptr;
    for (Axis a : kAllAxes) {
        if (!axes.has(a)) continue;
        const auto& p = pooled[axis_index(a)];
        if (!p) throw Error(ErrorCode::AxisMissing, std::string("no tokens for axis '") + axis_letter(a) + "'");
        if (!first) {
            first = &*p;
        } else if (p->grid != first->grid || p->dim != first->dim) {
            throw Error(ErrorCode::DimMismatch, "axes disagree on (p, d)");
        } else if (p->encoder_id != first->encoder_id) {
            throw Error(ErrorCode::DimMismatch, "axes come from different encoders");
        }
    }
    Embedding e;
    e.meta = EmbeddingMeta{r.rows, first->grid, first->dim, r.seed, r.scale, axes, first->encoder_id, kPrngId,
                           std::move(volume_id)};
    e.vector.reserve(embedding_length(axes, r.rows, first->grid));
    for (Axis a : kAllAxes) {
        if (!axes.has(a)) continue;
        const auto proj = project(*pooled[axis_index(a)], r);
        e.vector.insert(e.vector.end(), proj.values.begin(), proj.values.end());
    }
    return e;
}

/// Full reduction: per selected axis project(mean_pool(tokens)), flattened.
inline Embedding raptor_embed(std::span<const TokenTensor> tensors, const ProjectionMatrix& r, AxisMask axes,
                              std::string volume_id = {}) {
    PooledSet pooled;
    for (const auto& t : tensors) {
        if (!axes.has(t.axis)) continue;
        pooled[axis_index(t.axis)] = mean_pool(t);
    }
    return embed_pooled(pooled, r, axes, std::move(volume_id));
}

/// Data-dependent baseline: per patch position, the top-K principal
/// components of the N pooled tokens at that position.
struct PcaReduction {
    std::size_t samples = 0;
    std::uint32_t k = 0;
    std::size_t patches = 0;
    std::vector<float> embeddings;  // N x (p*p*K), (patch, component)
    std::vector<PcaFit> fits;        // one per patch position

    std::span<const float> row(std::size_t i) const {
        return std::span(embeddings).subspan(i * patches * k, patches * k);
    }
};

inline PcaReduction pca_reduce(std::span<const PooledTokens> pooled_set, std::uint32_t k) {
    if (pooled_set.empty() || pooled_set.size() < k)
        throw Error(ErrorCode::InsufficientSamples,
                    "pca needs N >= K (N=" + std::to_string(pooled_set.size()) + ", K=" + std::to_string(k) + ")");
    const auto& ref = pooled_set.front();
    if (k > ref.dim) throw Error(ErrorCode::DimMismatch, "K exceeds token dim");
    for (const auto& p : pooled_set)
        if (p.grid != ref.grid || p.dim != ref.dim) throw Error(ErrorCode::DimMismatch, "pooled shapes differ");

    PcaReduction out{pooled_set.size(), k, ref.patches(), {}, {}};
    out.embeddings.assign(out.samples * out.patches * k, 0.f);
    out.fits.reserve(out.patches);
    const auto n = static_cast<Eigen::Index>(out.samples);
    const auto d = static_cast<Eigen::Index>(ref.dim);
    for (std::size_t q = 0; q < out.patches; ++q) {
        Eigen::MatrixXd x(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d; ++c) x(i, c) = pooled_set[static_cast<std::size_t>(i)].at(q, static_cast<std::size_t>(c));
        auto fit = fit_pca(x, k);
        const Eigen::MatrixXd scores = fit.transform(x);
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::uint32_t c = 0; c < k; ++c)
                out.embeddings[(static_cast<std::size_t>(i) * out.patches + q) * k + c] = static_cast<float>(scores(i, c));
        out.fits.push_back(std::move(fit));
    }
    return out;
}

struct BenchRow {
    std::uint32_t volume_edge = 0;  // D
    std::uint32_t k = 0;
    std::size_t volumes = 0;        // N
    double encode_ms = 0, pool_ms = 0, project_ms = 0, total_ms = 0;
};

inline void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
    os << "D,K,N,encode_ms,pool_ms,project_ms,total_ms\n";
    for (const auto& r : rows)
        os << r.volume_edge << ',' << r.k << ',' << r.volumes << ',' << r.encode_ms << ',' << r.pool_ms << ','
           << r.project_ms << ',' << r.total_ms << '\n';
}

namespace detail {

/// Smooth seeded test volume in [0, 1] for timing runs.
inline Volume bench_volume(std::uint32_t edge, std::uint64_t seed) {
    const CounterRng rng(seed, RngStream::Test);
    const double fx = 1 + 3 * rng.uniform(0), fy = 1 + 3 * rng.uniform(1), fz = 1 + 3 * rng.uniform(2);
    std::vector<float> v(std::size_t{edge} * edge * edge);
    std::size_t o = 0;
    const double inv = 1.0 / edge;
    for (std::uint32_t x = 0; x < edge; ++x)
        for (std::uint32_t y = 0; y < edge; ++y)
            for (std::uint32_t z = 0; z < edge; ++z)
                v[o++] = static_cast<float>(0.5 + 0.25 * std::sin(fx * x * inv * 6.28) * std::cos(fy * y * inv * 6.28) +
                                            0.25 * std::sin(fz * z * inv * 6.28));
    return Volume("bench", Dims{edge, edge, edge}, std::move(v));
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Single-threaded wall-clock of encode / pool / project over N generated
/// volumes per (D, K). Volume generation is not timed.
inline std::vector<BenchRow> bench_embed(std::span<const std::uint32_t> edges, std::span<const std::uint32_t> ks,
                                         std::size_t n, const EncoderSpec& spec, std::uint64_t seed = 0) {
    const SyntheticEncoder enc(spec);
    std::vector<BenchRow> rows;
    for (std::uint32_t edge : edges) {
        std::vector<Volume> vols;
        vols.reserve(n);
        for (std::size_t i = 0; i < n; ++i) vols.push_back(detail::bench_volume(edge, derive_seed(seed, i)));
        for (std::uint32_t k : ks) {
            const auto r = gen_projection(k, spec.token_dim, seed);
            BenchRow row{edge, k, n};
            for (const auto& v : vols) {
                for (Axis a : kAllAxes) {
                    auto t0 = std::chrono::steady_clock::now();
                    const auto tokens = enc.encode_volume_axis(v, a, 1);
                    row.encode_ms += detail::elapsed_ms(t0);
                    t0 = std::chrono::steady_clock::now();
                    const auto pooled = mean_pool(tokens);
                    row.pool_ms += detail::elapsed_ms(t0);
                    t0 = std::chrono::steady_clock::now();
                    const auto proj = project(pooled, r);
                    row.project_ms += detail::elapsed_ms(t0);
                }
            }
            row.total_ms = row.encode_ms + row.pool_ms + row.project_ms;
            rows.push_back(row);
        }
    }
    return rows;
}

struct PcaVsProjection {
    double pca_ms = 0;
    double project_ms = 0;
};

/// Wall clock of full-covariance PCA versus random projection on the same
/// N pooled token sets.
inline PcaVsProjection bench_pca_vs_projection(std::uint32_t d, std::uint32_t k, std::size_t n, std::uint32_t grid,
                                               std::uint64_t seed = 0) {
    std::vector<PooledTokens> set;
    set.reserve(n);
    const CounterRng rng(seed, RngStream::Test);
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        PooledTokens p{Axis::Axial, grid, d, {}, std::vector<float>(std::size_t{grid} * grid * d)};
        for (auto& v : p.values) v = static_cast<float>(rng.normal(idx++));
        set.push_back(std::move(p));
    }
    PcaVsProjection out;
    auto t0 = std::chrono::steady_clock::now();
    const auto red = pca_reduce(set, k);
    out.pca_ms = detail::elapsed_ms(t0);
    t0 = std::chrono::steady_clock::now();
    const auto r = gen_projection(k, d, seed);
    std::vector<ProjectedTokens> projected;
    projected.reserve(set.size());
    for (const auto& p : set) projected.push_back(project(p, r));
    out.project_ms = detail::elapsed_ms(t0);
    return out;
}

} // namespace raptor
