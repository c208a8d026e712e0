#pragma once

#include "raptor/core.hpp"
#include "raptor/encoder.hpp"
#include "raptor/heads.hpp"
#include "raptor/metrics.hpp"
#include "raptor/parallel.hpp"
#include "raptor/reduction.hpp"
#include "raptor/simlab.hpp"
#include "raptor/volume.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace raptor {

/// Volume -> pooled tokens. Volumes are min-max normalized, resampled to
/// `edge` when set (or when not cubic), then encoded along every selected axis.
struct PipelineConfig {
    EncoderSpec encoder;
    AxisMask axes = AxisMask::all();
    std::optional<std::uint32_t> edge;
    bool normalize = true;
    unsigned threads = 1;
};

inline Volume prepare_volume(const Volume& v, const PipelineConfig& cfg) {
    Volume out = cfg.normalize ? normalize(v) : v;
    if (cfg.edge) {
        out = resample(out, *cfg.edge);
    } else if (!out.is_cubic()) {
        const auto d = out.dims();
        out = resample(out, std::max({d.x, d.y, d.z}));
    }
    return out;
}

inline PooledSet pool_volume(const Volume& v, const SyntheticEncoder& enc, const PipelineConfig& cfg) {
    const Volume prepared = prepare_volume(v, cfg);
    PooledSet out;
    for (Axis a : kAllAxes)
        if (cfg.axes.has(a)) out[axis_index(a)] = mean_pool(enc.encode_volume_axis(prepared, a, 1));
    return out;
}

/// Pooled tokens of every volume; volumes are spread over the workers and
/// each is encoded sequentially, so the result does not depend on `threads`.
inline std::vector<PooledSet> pool_volumes(std::span<const Volume> volumes, const PipelineConfig& cfg) {
    const SyntheticEncoder enc(cfg.encoder);
    std::vector<PooledSet> out(volumes.size());
    parallel_for(volumes.size(), cfg.threads, [&](std::size_t i) { out[i] = pool_volume(volumes[i], enc, cfg); });
    return out;
}

inline std::vector<Embedding> embed_all(std::span<const PooledSet> pooled, const ProjectionMatrix& r, AxisMask axes,
                                        std::span<const std::string> ids = {}) {
    std::vector<Embedding> out;
    out.reserve(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i)
        out.push_back(embed_pooled(pooled[i], r, axes, i < ids.size() ? ids[i] : std::string{}));
    return out;
}

/// One embedding per row.
inline Eigen::MatrixXd embedding_matrix(std::span<const PooledSet> pooled, const ProjectionMatrix& r, AxisMask axes) {
    Eigen::MatrixXd x;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const auto e = embed_pooled(pooled[i], r, axes);
        if (i == 0) x.resize(static_cast<Eigen::Index>(pooled.size()), static_cast<Eigen::Index>(e.vector.size()));
        for (std::size_t c = 0; c < e.vector.size(); ++c)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = e.vector[c];
    }
    return x;
}

/// Logistic head with validation selection; returns the test report.
inline MetricReport evaluate_classifier(const Eigen::MatrixXd& x, std::span<const int> y, const SplitPlan& split,
                                        std::span<const double> grid, unsigned threads = 1) {
    LogRegOptions opt;
    opt.threads = threads;
    const auto model = fit_logreg(x, y, grid, split, opt);
    const auto probs = model.predict_proba(take_rows(x, split.test));
    return classification_report(probs, take(y, split.test));
}

inline double test_auroc(const Eigen::MatrixXd& x, std::span<const int> y, const SplitPlan& split,
                         std::span<const double> grid, unsigned threads = 1) {
    return evaluate_classifier(x, y, split, grid, threads).auroc_macro;
}

struct PooledDataset {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<PooledSet> pooled;
};

inline PooledDataset pool_sim_dataset(const SimSpec& spec, const PipelineConfig& cfg) {
    const auto ds = make_sim_dataset(spec, cfg.threads);
    PooledDataset out;
    out.labels = ds.labels;
    for (const auto& v : ds.volumes) out.ids.push_back(v.id());
    out.pooled = pool_volumes(ds.volumes, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

inline std::uint32_t pooled_dim(const PooledSet& p) {
    for (const auto& t : p)
        if (t) return t->dim;
    throw Error(ErrorCode::AxisMissing, "no pooled tokens");
}

struct KStudyRow {
    std::uint32_t k = 0;
    std::uint64_t seed = 0;
    double auroc = 0;
};

struct KStudySummary {
    std::uint32_t k = 0;
    double mean = 0;
    double std = 0;  // population standard deviation over seeds
};

inline std::vector<KStudyRow> k_study(const PooledDataset& data, std::span<const std::uint32_t> ks,
                                      std::span<const std::uint64_t> seeds, const SplitPlan& split,
                                      std::span<const double> grid, AxisMask axes = AxisMask::all(),
                                      unsigned threads = 1) {
    const std::uint32_t d = pooled_dim(data.pooled.front());
    std::vector<KStudyRow> rows;
    for (auto k : ks)
        for (auto s : seeds) {
            const auto r = gen_projection(k, d, s);
            rows.push_back({k, s, test_auroc(embedding_matrix(data.pooled, r, axes), data.labels, split, grid, threads)});
        }
    return rows;
}

inline std::vector<KStudySummary> summarize_k_study(std::span<const KStudyRow> rows) {
    std::map<std::uint32_t, std::vector<double>> by_k;
    for (const auto& r : rows) by_k[r.k].push_back(r.auroc);
    std::vector<KStudySummary> out;
    for (const auto& [k, v] : by_k) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0;
        for (double a : v) ss += (a - mean) * (a - mean);
        out.push_back({k, mean, std::sqrt(ss / static_cast<double>(v.size()))});
    }
    return out;
}

struct ViewStudyRow {
    AxisMask axes;
    MetricReport report;
};

/// All seven non-empty axis subsets, in mask order a, c, ac, s, as, cs, acs.
inline std::vector<ViewStudyRow> view_study(const PooledDataset& data, std::uint32_t k, std::uint64_t seed,
                                            const SplitPlan& split, std::span<const double> grid,
                                            unsigned threads = 1) {
    const auto r = gen_projection(k, pooled_dim(data.pooled.front()), seed);
    std::vector<ViewStudyRow> rows;
    for (std::uint8_t bits = 1; bits <= 7; ++bits) {
        const AxisMask axes(bits);
        rows.push_back({axes, evaluate_classifier(embedding_matrix(data.pooled, r, axes), data.labels, split, grid,
                                                  threads)});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Built-in simulated studies
// ---------------------------------------------------------------------------

/// A simulated dataset, the encoder that pools it and the split sizes used
/// to score it. Split counts of zero fall back to a 0.6 / 0.2 / 0.2 split.
struct StudyPreset {
    SimSpec sim;
    PipelineConfig pipeline;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    std::uint32_t k = 100;

    SplitPlan split(std::uint64_t seed) const {
        if (n_train + n_val + n_test == 0) return make_split(sim.n_samples, {0.6, 0.2, 0.2}, seed);
        return make_split_counts(sim.n_samples, n_train, n_val, n_test, seed);
    }
};

inline EncoderSpec small_encoder(std::uint32_t patch, std::uint32_t resolution, std::uint32_t dim) {
    EncoderSpec e;
    e.patch_size = patch;
    e.input_resolution = resolution;
    e.token_dim = dim;
    return e;
}

/// Size task with 32 px digits in 64^3 hosts; 150 fit, 50 validation, 100 test.
inline StudyPreset k_study_preset() {
    StudyPreset p;
    p.sim.task = SimTask::Size;
    p.sim.resolution_px = 32;
    p.sim.host_extent = 64;
    p.sim.n_samples = 300;
    p.sim.seed = 1;
    p.pipeline.encoder = small_encoder(16, 64, 64);
    p.n_train = 150;
    p.n_val = 50;
    p.n_test = 100;
    return p;
}

/// Location task on z-invariant hosts: the digit shifts along z, which the
/// axial and coronal planes see and the sagittal plane does not.
inline StudyPreset view_study_preset() {
    StudyPreset p;
    p.sim.task = SimTask::Location;
    p.sim.resolution_px = 16;
    p.sim.host_extent = 64;
    p.sim.host_shape = HostShape::Columns;
    p.sim.n_samples = 200;
    p.sim.seed = 2;
    p.pipeline.encoder = small_encoder(16, 64, 64);
    return p;
}

/// Size task at digit edge `px` in 128^3 hosts.
inline StudyPreset size_task_preset(std::uint32_t px) {
    StudyPreset p;
    p.sim.task = SimTask::Size;
    p.sim.resolution_px = px;
    p.sim.host_extent = 128;
    p.sim.n_samples = 400;
    p.sim.seed = 3;
    p.pipeline.encoder = small_encoder(16, 64, 64);
    return p;
}

/// Small, cheap size task with a 500-row training pool.
inline StudyPreset scarcity_preset() {
    StudyPreset p;
    p.sim.task = SimTask::Size;
    p.sim.resolution_px = 16;
    p.sim.host_extent = 32;
    p.sim.n_samples = 800;
    p.sim.seed = 3;
    p.pipeline.encoder = small_encoder(8, 32, 64);
    p.n_train = 500;
    p.n_val = 100;
    p.n_test = 200;
    p.k = 10;
    return p;
}

// ---------------------------------------------------------------------------
// Label tables
// ---------------------------------------------------------------------------

/// CSV with a header row: id followed by one label column (classification)
/// or several numeric target columns (regression / multilabel).
struct LabelTable {
    std::vector<std::string> columns;  // without the id column
    std::map<std::string, std::vector<double>> rows;
};

inline LabelTable read_label_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    auto split_line = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            cells.push_back(cell);
        }
        return cells;
    };
    LabelTable t;
    std::string line;
    do {
        if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, path.string() + " is empty");
    } while (line.empty() || line[0] == '#');
    auto header = split_line(line);
    if (header.size() < 2) throw Error(ErrorCode::InvalidArgument, path.string() + ": need id and label columns");
    t.columns.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw Error(ErrorCode::InvalidArgument, path.string() + ": row '" + line + "' has the wrong column count");
        std::vector<double> vals;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                vals.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, path.string() + ": '" + cells[i] + "' is not numeric");
            }
        }
        if (!t.rows.emplace(cells[0], std::move(vals)).second)
            throw Error(ErrorCode::DuplicateId, path.string() + ": duplicate id '" + cells[0] + "'");
    }
    return t;
}

} // namespace raptor
