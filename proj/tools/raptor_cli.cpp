#include "raptor/encoder.hpp"
#include "raptor/experiments.hpp"
#include "raptor/heads.hpp"
#include "raptor/metrics.hpp"
#include "raptor/parallel.hpp"
#include "raptor/reduction.hpp"
#include "raptor/simlab.hpp"
#include "raptor/store.hpp"
#include "raptor/suites.hpp"
#include "raptor/volume.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace raptor;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string output_dir = ".";
};

void add_globals(CLI::App* sub, Globals& g) {
    sub->add_option("--seed", g.seed, "Projection / experiment seed");
    sub->add_option("--threads", g.threads, "Worker count (0: RAPTOR_THREADS, then all cores)");
    sub->add_option("--output_dir", g.output_dir, "Directory for every output file");
}

/// Every option of the chosen subcommand with its resolved value.
json run_config(const CLI::App* sub, const Globals& g) {
    json flags = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "seed" || name == "threads" || name == "output_dir") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            std::string joined;
            for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
            flags[name] = opt->get_type_size() == 0 ? "true" : joined;
        } else {
            flags[name] = opt->get_default_str();
        }
    }
    return json{{"command", sub->get_name()},
                {"global", {{"seed", g.seed}, {"threads", resolve_threads(g.threads)}, {"output_dir", g.output_dir}}},
                {"flags", flags}};
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    os << text;
}

/// CSV whose first line carries the run config.
std::ofstream open_csv(const fs::path& path, const json& cfg) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    os << "# run_config: " << cfg.dump() << '\n' << std::setprecision(10);
    return os;
}

void save_run_config(const Globals& g, const json& cfg) {
    write_text(fs::path(g.output_dir) / "run_config.json", cfg.dump(2) + "\n");
}

VolumeFormat parse_format(const std::string& s) {
    if (s == "rvol") return VolumeFormat::RVOL;
    if (s == "raw") return VolumeFormat::RAW_U8;
    if (s == "idx3d") return VolumeFormat::IDX3D;
    throw Error(ErrorCode::InvalidArgument, "unknown volume format '" + s + "'");
}

std::vector<fs::path> list_files(const fs::path& input, const std::string& suffix = {}) {
    std::vector<fs::path> out;
    if (fs::is_regular_file(input)) return {input};
    if (!fs::is_directory(input)) throw Error(ErrorCode::IoFailure, "no such input " + input.string());
    for (const auto& e : fs::directory_iterator(input)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (name.ends_with(".csv") || name.ends_with(".json")) continue;
        if (!suffix.empty() && !name.ends_with(suffix)) continue;
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(ErrorCode::IoFailure, "no input files in " + input.string());
    return out;
}

/// Encoder and volume-loading flags shared by every command that pools volumes.
struct VolumeOpts {
    std::string format = "rvol";
    std::uint32_t raw_extent = 0;
    std::uint32_t edge = 0;
    std::uint32_t patch = 16;
    std::uint32_t dim = 1024;
    std::uint64_t encoder_seed = 0;
    std::uint32_t input_res = 0;

    void add(CLI::App* sub) {
        sub->add_option("--format", format, "Volume format: rvol, raw, idx3d");
        sub->add_option("--raw-extent", raw_extent, "Cube edge of raw u8 inputs (0: cube root of size)");
        sub->add_option("--edge", edge, "Resample volumes to this edge (0: keep)");
        sub->add_option("--patch", patch, "Encoder patch size T");
        sub->add_option("--dim", dim, "Encoder token dimension d");
        sub->add_option("--encoder-seed", encoder_seed, "Synthetic encoder weight seed");
        sub->add_option("--input-res", input_res, "Encoder input resolution (0: slice edge)");
    }

    void set_from(const PipelineConfig& p) {
        patch = p.encoder.patch_size;
        dim = p.encoder.token_dim;
        encoder_seed = p.encoder.seed;
        input_res = p.encoder.input_resolution;
        edge = p.edge.value_or(0);
    }

    PipelineConfig pipeline(AxisMask axes, unsigned threads) const {
        PipelineConfig cfg;
        cfg.encoder.patch_size = patch;
        cfg.encoder.token_dim = dim;
        cfg.encoder.seed = encoder_seed;
        cfg.encoder.input_resolution = input_res;
        cfg.axes = axes;
        if (edge > 0) cfg.edge = edge;
        cfg.threads = threads;
        return cfg;
    }

    std::vector<Volume> load(const fs::path& input) const {
        const auto fmt = parse_format(format);
        std::vector<Volume> vols;
        for (const auto& f : list_files(input))
            vols.push_back(load_volume(f, fmt, raw_extent ? std::optional(raw_extent) : std::nullopt));
        return vols;
    }
};

/// Flags selecting either a built-in simulated dataset or a labelled volume
/// directory.
struct DataOpts {
    StudyPreset preset;
    std::string task = "size";
    std::string host_shape = "blobs";
    std::string input;
    std::string labels;
    VolumeOpts vol;

    explicit DataOpts(StudyPreset p) : preset(std::move(p)) {
        task = preset.sim.task == SimTask::Location ? "location" : "size";
        host_shape = preset.sim.host_shape == HostShape::Columns ? "columns" : "blobs";
        vol.set_from(preset.pipeline);
    }

    void add(CLI::App* sub) {
        sub->add_option("--input", input, "Volume directory (default: built-in simulated task)");
        sub->add_option("--labels", labels, "Label CSV for --input (id,label)");
        sub->add_option("--task", task, "Simulated task: location or size");
        sub->add_option("--res", preset.sim.resolution_px, "Simulated digit edge in pixels");
        sub->add_option("--n", preset.sim.n_samples, "Simulated sample count");
        sub->add_option("--host-extent", preset.sim.host_extent, "Simulated host cube edge");
        sub->add_option("--host-shape", host_shape, "Simulated host anatomy: blobs or columns");
        sub->add_option("--sim-seed", preset.sim.seed, "Simulation seed");
        sub->add_option("--train", preset.n_train, "Training rows (0: 60/20/20 split)");
        sub->add_option("--val", preset.n_val, "Validation rows");
        sub->add_option("--test", preset.n_test, "Test rows");
        vol.add(sub);
    }

    SimSpec sim_spec() const {
        SimSpec s = preset.sim;
        if (task == "location") s.task = SimTask::Location;
        else if (task == "size") s.task = SimTask::Size;
        else throw Error(ErrorCode::InvalidArgument, "unknown task '" + task + "'");
        if (host_shape == "columns") s.host_shape = HostShape::Columns;
        else if (host_shape == "blobs") s.host_shape = HostShape::Blobs;
        else throw Error(ErrorCode::InvalidArgument, "unknown host shape '" + host_shape + "'");
        return s;
    }

    PooledDataset load(unsigned threads, AxisMask axes = AxisMask::all()) const {
        const auto cfg = vol.pipeline(axes, threads);
        if (input.empty()) return pool_sim_dataset(sim_spec(), cfg);
        if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "--input needs --labels");
        const auto vols = vol.load(input);
        const auto table = read_label_csv(labels);
        PooledDataset out;
        for (const auto& v : vols) {
            const auto it = table.rows.find(v.id());
            if (it == table.rows.end()) throw Error(ErrorCode::IdMismatch, "no label for volume '" + v.id() + "'");
            out.ids.push_back(v.id());
            out.labels.push_back(static_cast<int>(std::lround(it->second.front())));
        }
        out.pooled = pool_volumes(vols, cfg);
        return out;
    }

    SplitPlan split(std::size_t n, std::uint64_t seed) const {
        if (preset.n_train + preset.n_val + preset.n_test == 0) return make_split(n, {0.6, 0.2, 0.2}, seed);
        return make_split_counts(n, preset.n_train, preset.n_val, preset.n_test, seed);
    }
};

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

struct EmbedOpts {
    std::string input;
    std::string encoder = "synthetic";
    std::uint32_t k = 100;
    std::string axes = "acs";
    std::string scale = "invsqrtk";
    std::string out;
    VolumeOpts vol;
};

/// Groups `<id>.<a|c|s>.rtok` files by id.
std::map<std::string, std::vector<fs::path>> group_token_files(const fs::path& input) {
    std::map<std::string, std::vector<fs::path>> groups;
    for (const auto& f : list_files(input, ".rtok")) {
        const auto stem = f.stem().string();  // <id>.<axis>
        const auto dot = stem.rfind('.');
        if (dot == std::string::npos) throw Error(ErrorCode::InvalidArgument, f.string() + " lacks an axis suffix");
        groups[stem.substr(0, dot)].push_back(f);
    }
    return groups;
}

int cmd_embed(const EmbedOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    const auto axes = AxisMask::parse(o.axes);
    const auto scale = parse_scale_mode(o.scale);
    EmbeddingSet set;
    if (o.encoder == "synthetic") {
        const auto vols = o.vol.load(o.input);
        const auto pooled = pool_volumes(vols, o.vol.pipeline(axes, threads));
        const auto r = gen_projection(o.k, o.vol.dim, g.seed, scale);
        for (std::size_t i = 0; i < vols.size(); ++i) set.add(embed_pooled(pooled[i], r, axes, vols[i].id()));
    } else if (o.encoder == "tokens") {
        const auto groups = group_token_files(o.input);
        std::vector<std::string> ids;
        std::vector<PooledSet> pooled(groups.size());
        for (const auto& [id, files] : groups) ids.push_back(id);
        parallel_for(ids.size(), threads, [&](std::size_t i) {
            for (const auto& f : groups.at(ids[i])) {
                const auto t = load_tokens(f);
                if (axes.has(t.axis)) pooled[i][axis_index(t.axis)] = mean_pool(t);
            }
        });
        std::optional<ProjectionMatrix> r;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!r) r = gen_projection(o.k, pooled_dim(pooled[i]), g.seed, scale);
            set.add(embed_pooled(pooled[i], *r, axes, ids[i]));
        }
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown encoder '" + o.encoder + "'");
    }
    const fs::path out = o.out.empty() ? fs::path(g.output_dir) / "embeddings.remb" : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const auto bytes = write_embeddings(set, out);
    write_text(out.string() + ".run.json", cfg.dump(2) + "\n");
    save_run_config(g, cfg);
    std::cout << "wrote " << set.count() << " embeddings of length " << set.header.row_length() << " (" << bytes
              << " bytes) to " << out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string embeddings;
    std::string labels;
    std::string task = "cls";
    std::vector<double> grid = kDefaultPenaltyGrid;
    std::uint64_t split_seed = 0;
    int epochs = 50;
};

json report_json(const MetricReport& r) {
    return json{{"auroc_macro", r.auroc_macro}, {"auroc_micro", r.auroc_micro}, {"aupr_macro", r.aupr_macro},
                {"aupr_micro", r.aupr_micro},   {"accuracy", r.accuracy},       {"r2_mean", r.r2_mean},
                {"r2_per_target", r.r2_per_target}};
}

int cmd_eval(const EvalOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    const auto set = read_embeddings(o.embeddings);
    const auto table = read_label_csv(o.labels);
    const auto n = static_cast<Eigen::Index>(set.count());
    const auto len = static_cast<Eigen::Index>(set.header.row_length());
    const auto cols = static_cast<Eigen::Index>(table.columns.size());
    Eigen::MatrixXd x(n, len), targets(n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& id = set.ids[static_cast<std::size_t>(i)];
        const auto it = table.rows.find(id);
        if (it == table.rows.end()) throw Error(ErrorCode::IdMismatch, "no label row for embedding '" + id + "'");
        const auto row = set.row(static_cast<std::size_t>(i));
        for (Eigen::Index c = 0; c < len; ++c) x(i, c) = row[static_cast<std::size_t>(c)];
        for (Eigen::Index c = 0; c < cols; ++c) targets(i, c) = it->second[static_cast<std::size_t>(c)];
    }
    const auto split = make_split(static_cast<std::size_t>(n), {0.6, 0.2, 0.2}, o.split_seed);

    json metrics{{"task", o.task}, {"samples", n}, {"train", split.train.size()}, {"val", split.val.size()},
                 {"test", split.test.size()}};
    MetricReport rep;
    if (o.task == "cls") {
        std::vector<int> y(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(targets(i, 0)));
        LogRegOptions opt;
        opt.threads = threads;
        const auto model = fit_logreg(x, y, o.grid, split, opt);
        rep = classification_report(model.predict_proba(take_rows(x, split.test)), take(std::span<const int>(y), split.test));
        metrics["penalty"] = model.penalty;
    } else if (o.task == "reg") {
        MlpConfig mc;
        mc.max_epochs = o.epochs;
        mc.seed = g.seed;
        const auto model = fit_mlp<double>(x, targets, split, mc);
        rep = regression_report(model.predict(take_rows(x, split.test)), take_rows(targets, split.test));
        metrics["best_epoch"] = model.best_epoch;
    } else if (o.task == "multilabel") {
        // One binary head per label column; micro pools every (sample, label) score.
        std::vector<double> aurocs, auprs, all_scores;
        std::vector<int> all_labels;
        json penalties = json::array();
        LogRegOptions opt;
        opt.threads = threads;
        for (Eigen::Index c = 0; c < cols; ++c) {
            std::vector<int> y(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = targets(i, c) > 0.5 ? 1 : 0;
            const auto model = fit_logreg(x, y, o.grid, split, opt);
            const auto probs = model.predict_proba(take_rows(x, split.test));
            const auto yt = take(std::span<const int>(y), split.test);
            std::vector<double> s(probs.rows());
            for (Eigen::Index i = 0; i < probs.rows(); ++i) s[static_cast<std::size_t>(i)] = probs(i, 1);
            aurocs.push_back(auroc(s, yt));
            auprs.push_back(aupr(s, yt));
            all_scores.insert(all_scores.end(), s.begin(), s.end());
            all_labels.insert(all_labels.end(), yt.begin(), yt.end());
            penalties.push_back(model.penalty);
        }
        auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
        rep.auroc_macro = mean(aurocs);
        rep.aupr_macro = mean(auprs);
        rep.auroc_micro = auroc(all_scores, all_labels);
        rep.aupr_micro = aupr(all_scores, all_labels);
        metrics["auroc_per_label"] = aurocs;
        metrics["penalty"] = penalties;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown task '" + o.task + "'");
    }
    metrics["test"] = report_json(rep);
    metrics["run_config"] = cfg;
    const fs::path dir(g.output_dir);
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");
    auto csv = open_csv(dir / "metrics.csv", cfg);
    csv << "auroc_macro,auroc_micro,aupr_macro,aupr_micro,accuracy,r2_mean\n"
        << rep.auroc_macro << ',' << rep.auroc_micro << ',' << rep.aupr_macro << ',' << rep.aupr_micro << ','
        << rep.accuracy << ',' << rep.r2_mean << '\n';
    save_run_config(g, cfg);
    std::cout << metrics["test"].dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct KStudyOpts {
    DataOpts data{k_study_preset()};
    std::vector<std::uint32_t> ks{1, 5, 10, 100, 150};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::uint64_t split_seed = 0;
    std::vector<double> grid = kDefaultPenaltyGrid;
};

int cmd_kstudy(const KStudyOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    const auto data = o.data.load(threads);
    const auto split = o.data.split(data.labels.size(), o.split_seed);
    const auto rows = k_study(data, o.ks, o.seeds, split, o.grid, AxisMask::all(), threads);
    const auto summary = summarize_k_study(rows);
    const fs::path dir(g.output_dir);
    auto csv = open_csv(dir / "kstudy.csv", cfg);
    csv << "k,seed,auroc\n";
    for (const auto& r : rows) csv << r.k << ',' << r.seed << ',' << r.auroc << '\n';
    auto sum = open_csv(dir / "kstudy_summary.csv", cfg);
    sum << "k,mean,std\n";
    for (const auto& s : summary) {
        sum << s.k << ',' << s.mean << ',' << s.std << '\n';
        std::cout << "K=" << s.k << " mean AUROC " << s.mean << " std " << s.std << '\n';
    }
    save_run_config(g, cfg);
    return 0;
}

struct ViewStudyOpts {
    DataOpts data{view_study_preset()};
    std::uint64_t split_seed = 0;
    std::vector<double> grid = kDefaultPenaltyGrid;
};

int cmd_viewstudy(const ViewStudyOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    const auto data = o.data.load(threads);
    const auto split = o.data.split(data.labels.size(), o.split_seed);
    const auto rows = view_study(data, o.data.preset.k, g.seed, split, o.grid, threads);
    auto csv = open_csv(fs::path(g.output_dir) / "viewstudy.csv", cfg);
    csv << "axes,auroc_macro,accuracy,aupr_macro\n";
    for (const auto& r : rows) {
        csv << r.axes.letters() << ',' << r.report.auroc_macro << ',' << r.report.accuracy << ','
            << r.report.aupr_macro << '\n';
        std::cout << r.axes.letters() << " AUROC " << r.report.auroc_macro << '\n';
    }
    save_run_config(g, cfg);
    return 0;
}

struct SimulateOpts {
    DataOpts data{size_task_preset(64)};
    std::vector<std::uint32_t> resolutions{64, 32, 16, 8};
    std::uint64_t split_seed = 0;
    std::vector<double> grid = kDefaultPenaltyGrid;
    std::string write_volumes;
};

int cmd_simulate(const SimulateOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    auto csv = open_csv(fs::path(g.output_dir) / "simulate.csv", cfg);
    csv << "task,res,auroc_macro,accuracy,aupr_macro\n";
    for (auto px : o.resolutions) {
        auto spec = o.data.sim_spec();
        spec.resolution_px = px;
        const auto ds = make_sim_dataset(spec, threads);
        if (!o.write_volumes.empty()) write_sim_dataset(ds, fs::path(o.write_volumes) / ("res" + std::to_string(px)));
        const auto pooled = pool_volumes(ds.volumes, o.data.vol.pipeline(AxisMask::all(), threads));
        const auto r = gen_projection(o.data.preset.k, o.data.vol.dim, g.seed);
        const auto x = embedding_matrix(pooled, r, AxisMask::all());
        const auto rep = evaluate_classifier(x, ds.labels, o.data.split(ds.labels.size(), o.split_seed), o.grid, threads);
        csv << o.data.task << ',' << px << ',' << rep.auroc_macro << ',' << rep.accuracy << ',' << rep.aupr_macro << '\n';
        std::cout << o.data.task << " " << px << "px AUROC " << rep.auroc_macro << std::endl;
    }
    save_run_config(g, cfg);
    return 0;
}

struct ScarcityOpts {
    DataOpts data{scarcity_preset()};
    std::vector<std::size_t> sizes{10, 50, 100, 200, 500};
    std::size_t repeats = 5;
    std::uint64_t split_seed = 0;
    std::vector<double> grid = kDefaultPenaltyGrid;
};

int cmd_scarcity(const ScarcityOpts& o, const Globals& g, const json& cfg) {
    const unsigned threads = resolve_threads(g.threads);
    const auto data = o.data.load(threads);
    const auto split = o.data.split(data.labels.size(), o.split_seed);
    const auto r = gen_projection(o.data.preset.k, pooled_dim(data.pooled.front()), g.seed);
    const auto x = embedding_matrix(data.pooled, r, AxisMask::all());
    LogRegOptions opt;
    opt.threads = threads;
    const auto curve = scarcity_curve(x, data.labels, o.sizes, o.repeats, split, o.grid, g.seed, opt);
    const fs::path dir(g.output_dir);
    auto csv = open_csv(dir / "scarcity.csv", cfg);
    csv << "size,median,lo95,hi95\n";
    auto runs = open_csv(dir / "scarcity_runs.csv", cfg);
    runs << "size,repeat,auroc\n";
    for (const auto& p : curve) {
        csv << p.size << ',' << p.median << ',' << p.lo95 << ',' << p.hi95 << '\n';
        for (std::size_t i = 0; i < p.aurocs.size(); ++i) runs << p.size << ',' << i << ',' << p.aurocs[i] << '\n';
        std::cout << "n=" << p.size << " median AUROC " << p.median << " [" << p.lo95 << ", " << p.hi95 << "]\n";
    }
    save_run_config(g, cfg);
    return 0;
}

// ---------------------------------------------------------------------------
// verify / bench
// ---------------------------------------------------------------------------

struct VerifyOpts {
    std::vector<std::string> suites{"all"};
};

int cmd_verify(const VerifyOpts& o, const Globals& g, const json& cfg) {
    std::set<std::string> want(o.suites.begin(), o.suites.end());
    const bool all = want.count("all") > 0;
    for (const auto& s : want)
        if (s != "all" && s != "jl" && s != "alpha" && s != "bounds" && s != "overlap")
            throw Error(ErrorCode::InvalidArgument, "unknown suite '" + s + "'");
    const fs::path dir(g.output_dir);
    std::vector<CheckResult> checks;
    auto run = [&](const std::string& name, auto fn) {
        if (!all && !want.count(name)) return;
        auto r = fn();
        checks.insert(checks.end(), r.begin(), r.end());
    };
    BoundSuiteConfig bcfg;
    bcfg.seed = g.seed;
    run("jl", [&] {
        JlSuiteConfig c;
        c.seed = g.seed;
        return jl_suite(c);
    });
    run("alpha", [&] {
        // Histogram data of every alpha_j over the constructed pairs.
        auto hist = open_csv(dir / "alpha_histogram.csv", cfg);
        hist << "pair,j,alpha\n";
        for (std::size_t i = 0; i < bcfg.pairs; ++i) {
            const auto [a, b] = make_aligned_pair(bcfg.slices, bcfg.grid, bcfg.dim, derive_seed(bcfg.seed, i));
            const auto prof = alpha_profile(a, b);
            for (std::size_t j = 0; j < prof.alphas.size(); ++j) hist << i << ',' << j + 1 << ',' << prof.alphas[j] << '\n';
        }
        return alpha_suite(bcfg);
    });
    run("bounds", [&] { return bounds_suite(bcfg); });
    run("overlap", [&] {
        OverlapSuiteConfig c;
        c.seed = g.seed;
        return overlap_suite(c);
    });
    auto csv = open_csv(dir / "verify.csv", cfg);
    csv << "suite,check,passed,value\n";
    for (const auto& c : checks) {
        csv << c.suite << ",\"" << c.name << "\"," << (c.passed ? 1 : 0) << ',' << c.value << '\n';
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.suite << ": " << c.name << " = " << c.value
                  << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
    }
    save_run_config(g, cfg);
    return all_passed(checks) ? 0 : 1;
}

struct BenchOpts {
    std::vector<std::uint32_t> edges{32, 64, 128};
    std::vector<std::uint32_t> ks{100};
    std::size_t n = 2;
    std::uint32_t patch = 16;
    std::uint32_t dim = 256;
    std::uint32_t input_res = 64;
    bool pca = false;
    std::uint32_t pca_dim = 1024;
    std::size_t pca_n = 200;
};

int cmd_bench(const BenchOpts& o, const Globals& g, const json& cfg) {
    const auto rows = bench_embed(o.edges, o.ks, o.n, small_encoder(o.patch, o.input_res, o.dim), g.seed);
    const fs::path dir(g.output_dir);
    auto csv = open_csv(dir / "bench.csv", cfg);
    write_bench_csv(csv, rows);
    write_bench_csv(std::cout, rows);
    if (o.pca) {
        const auto k = o.ks.empty() ? 100u : o.ks.front();
        const auto t = bench_pca_vs_projection(o.pca_dim, k, o.pca_n, 1, g.seed);
        auto pc = open_csv(dir / "bench_pca.csv", cfg);
        pc << "d,K,N,pca_ms,project_ms\n" << o.pca_dim << ',' << k << ',' << o.pca_n << ',' << t.pca_ms << ','
           << t.project_ms << '\n';
        std::cout << "pca " << t.pca_ms << " ms, projection " << t.project_ms << " ms\n";
    }
    save_run_config(g, cfg);
    return 0;
}

void add_grid(CLI::App* sub, std::vector<double>& grid) {
    sub->add_option("--grid", grid, "L2 penalty grid")->delimiter(',');
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raptor: training-free volume embeddings from 2D patch tokens"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    Globals g;

    EmbedOpts embed;
    auto* s_embed = app.add_subcommand("embed", "Embed volumes or token files into a REMB file");
    s_embed->add_option("--input", embed.input, "Volume or token directory (or a single file)")->required();
    s_embed->add_option("--encoder", embed.encoder, "synthetic or tokens");
    s_embed->add_option("--k", embed.k, "Projection count K");
    s_embed->add_option("--axes", embed.axes, "Axis letters, e.g. acs, a, cs");
    s_embed->add_option("--scale", embed.scale, "Projection scaling: unit or invsqrtk");
    s_embed->add_option("--out", embed.out, "Output REMB path (default output_dir/embeddings.remb)");
    embed.vol.add(s_embed);
    add_globals(s_embed, g);

    EvalOpts eval;
    auto* s_eval = app.add_subcommand("eval", "Fit heads on embeddings and report test metrics");
    s_eval->add_option("--embeddings", eval.embeddings, "REMB file")->required();
    s_eval->add_option("--labels", eval.labels, "Label CSV: id then label or target columns")->required();
    s_eval->add_option("--task", eval.task, "cls, reg or multilabel");
    add_grid(s_eval, eval.grid);
    s_eval->add_option("--split-seed", eval.split_seed, "Train / val / test split seed");
    s_eval->add_option("--epochs", eval.epochs, "MLP epochs for reg");
    add_globals(s_eval, g);

    KStudyOpts kst;
    auto* s_k = app.add_subcommand("kstudy", "AUROC per projection count and seed");
    s_k->add_option("--k-list", kst.ks, "Projection counts")->delimiter(',');
    s_k->add_option("--seeds", kst.seeds, "Projection seeds")->delimiter(',');
    s_k->add_option("--split-seed", kst.split_seed, "Split seed");
    add_grid(s_k, kst.grid);
    kst.data.add(s_k);
    add_globals(s_k, g);

    ViewStudyOpts vst;
    auto* s_v = app.add_subcommand("viewstudy", "Metrics for all seven axis subsets");
    s_v->add_option("--k", vst.data.preset.k, "Projection count K");
    s_v->add_option("--split-seed", vst.split_seed, "Split seed");
    add_grid(s_v, vst.grid);
    vst.data.add(s_v);
    add_globals(s_v, g);

    SimulateOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "Simulated digit tasks, end to end");
    s_sim->add_option("--res-list", sim.resolutions, "Digit edges to run")->delimiter(',');
    s_sim->add_option("--k", sim.data.preset.k, "Projection count K");
    s_sim->add_option("--split-seed", sim.split_seed, "Split seed");
    s_sim->add_option("--write-volumes", sim.write_volumes, "Also write the generated volumes here");
    add_grid(s_sim, sim.grid);
    sim.data.add(s_sim);
    s_sim->remove_option(s_sim->get_option("--res"));
    s_sim->remove_option(s_sim->get_option("--input"));
    s_sim->remove_option(s_sim->get_option("--labels"));
    add_globals(s_sim, g);

    ScarcityOpts sc;
    auto* s_sc = app.add_subcommand("scarcity", "Test AUROC against training-set size");
    s_sc->add_option("--sizes", sc.sizes, "Training sizes")->delimiter(',');
    s_sc->add_option("--repeats", sc.repeats, "Subsamples per size");
    s_sc->add_option("--k", sc.data.preset.k, "Projection count K");
    s_sc->add_option("--split-seed", sc.split_seed, "Split seed");
    add_grid(s_sc, sc.grid);
    sc.data.add(s_sc);
    add_globals(s_sc, g);

    VerifyOpts ver;
    auto* s_ver = app.add_subcommand("verify", "Run analytic checks; exit 0 iff all pass");
    s_ver->add_option("--suite", ver.suites, "jl, alpha, bounds, overlap or all")->delimiter(',');
    add_globals(s_ver, g);

    BenchOpts bench;
    auto* s_b = app.add_subcommand("bench", "Time encode / pool / project against volume edge");
    s_b->add_option("--edges", bench.edges, "Volume edges D")->delimiter(',');
    s_b->add_option("--k-list", bench.ks, "Projection counts")->delimiter(',');
    s_b->add_option("--n", bench.n, "Volumes per edge");
    s_b->add_option("--patch", bench.patch, "Encoder patch size");
    s_b->add_option("--dim", bench.dim, "Encoder token dimension");
    s_b->add_option("--input-res", bench.input_res, "Encoder input resolution (fixes p)");
    s_b->add_flag("--pca", bench.pca, "Also time PCA against projection");
    s_b->add_option("--pca-dim", bench.pca_dim, "Token dimension for the PCA comparison");
    s_b->add_option("--pca-n", bench.pca_n, "Sample count for the PCA comparison");
    add_globals(s_b, g);

    CLI11_PARSE(app, argc, argv);

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const auto cfg = run_config(sub, g);
        fs::create_directories(g.output_dir);
        const auto& name = sub->get_name();
        if (name == "embed") return cmd_embed(embed, g, cfg);
        if (name == "eval") return cmd_eval(eval, g, cfg);
        if (name == "kstudy") return cmd_kstudy(kst, g, cfg);
        if (name == "viewstudy") return cmd_viewstudy(vst, g, cfg);
        if (name == "simulate") return cmd_simulate(sim, g, cfg);
        if (name == "scarcity") return cmd_scarcity(sc, g, cfg);
        if (name == "verify") return cmd_verify(ver, g, cfg);
        if (name == "bench") return cmd_bench(bench, g, cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
