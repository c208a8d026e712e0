#include "raptor/experiments.hpp"
#include "raptor/simlab.hpp"
#include "raptor/store.hpp"
#include "raptor/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

using namespace raptor;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

unsigned worker_count() {
    if (const char* env = std::getenv("RAPTOR_THREADS"))
        if (const int n = std::atoi(env); n > 0) return static_cast<unsigned>(n);
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4f", v[i]);
    return s;
}

// Adjacent steps that move the wrong way.
std::size_t inversions(const std::vector<double>& v, bool want_increasing) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (want_increasing ? v[i] < v[i - 1] : v[i] > v[i - 1]) ++n;
    return n;
}

TokenTensor normal_tensor(std::uint32_t slices, std::uint32_t grid, std::uint32_t dim, std::uint64_t seed) {
    const CounterRng rng(seed, RngStream::Test);
    TokenTensor t(Axis::Axial, slices, grid, dim, {});
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = static_cast<float>(rng.normal(i));
    return t;
}

Outcome jl() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto checks = jl_suite();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {all_passed(checks) && secs <= 30.0,
            "violation fraction " + fmt("%.5f", checks[0].value) + ", mean norm ratio " + fmt("%.4f", checks[1].value) +
                ", " + fmt("%.1f", secs) + " s"};
}

// Projecting every token by hand and averaging over slices must match
// project(mean_pool(t)).
Outcome commutativity() {
    double worst = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto t = normal_tensor(16, 4, 256, s);
        const auto r = gen_projection(100, 256, 1000 + s);
        const auto fast = project(mean_pool(t), r);
        const std::size_t patches = std::size_t{t.grid} * t.grid;
        double num = 0, den = 0;
        for (std::size_t p = 0; p < patches; ++p)
            for (std::uint32_t k = 0; k < r.rows; ++k) {
                double acc = 0;
                for (std::uint32_t j = 0; j < t.slices; ++j) {
                    const auto tok = t.slice(j).subspan(p * t.dim, t.dim);
                    double dot = 0;
                    for (std::uint32_t l = 0; l < t.dim; ++l) dot += static_cast<double>(r(k, l)) * tok[l];
                    acc += dot;
                }
                acc /= t.slices;
                const double got = fast.values[p * r.rows + k];
                num += (got - acc) * (got - acc);
                den += acc * acc;
            }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {worst <= 1e-5, "worst relative error " + fmt("%.2e", worst) + " over 50 tensors"};
}

std::vector<double> alpha_oracle(const TokenTensor& a, const TokenTensor& b) {
    std::vector<double> out;
    const std::size_t n = a.slice_size();
    for (std::size_t j = 1; j < a.slices; ++j) {
        double dot = 0, dd = 0, ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dj = static_cast<double>(a.slice(j)[i]) - b.slice(j)[i];
            double s = 0;
            for (std::size_t k = 0; k < j; ++k) s += static_cast<double>(a.slice(k)[i]) - b.slice(k)[i];
            dot += dj * s;
            dd += dj * dj;
            ss += s * s;
        }
        const double nd = std::sqrt(dd), ns = std::sqrt(ss);
        out.push_back(nd < 1e-12 || ns < 1e-12 ? 0.0 : dot / (nd * ns));
    }
    return out;
}

Outcome alpha_and_bounds() {
    double worst = 0;
    for (std::uint32_t d = 2; d <= 8; ++d)
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto a = normal_tensor(d, 2, 8, 10 * d + s), b = normal_tensor(d, 2, 8, 500 + 10 * d + s);
            const auto prof = alpha_profile(a, b);
            const auto want = alpha_oracle(a, b);
            if (prof.alphas.size() != want.size()) return {false, "alpha count mismatch at D=" + std::to_string(d)};
            for (std::size_t j = 0; j < want.size(); ++j) worst = std::max(worst, std::abs(prof.alphas[j] - want[j]));
        }
    const auto res = run_bound_pairs();
    return {worst <= 1e-12 && res.holding >= 99 && res.min_alpha >= 0.2,
            "alpha oracle error " + fmt("%.1e", worst) + ", sandwich holds in " + std::to_string(res.holding) +
                " of " + std::to_string(res.pairs) + " pairs, min alpha " + fmt("%.3f", res.min_alpha)};
}

// 64^3 volume, T=4 at input resolution 64 gives p=16.
Outcome embedding_layout() {
    const auto v = [] {
        const CounterRng rng(7, RngStream::Test);
        std::vector<float> vox(64 * 64 * 64);
        for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<float>(rng.uniform(i));
        return Volume("acc", Dims{64, 64, 64}, std::move(vox));
    }();
    EncoderSpec spec;
    spec.patch_size = 4;
    spec.input_resolution = 64;
    spec.token_dim = 64;
    const SyntheticEncoder enc(spec);
    const auto r = gen_projection(100, 64, 0);
    auto remb = [&](unsigned threads) {
        std::vector<TokenTensor> ts;
        for (Axis a : kAllAxes) ts.push_back(enc.encode_volume_axis(v, a, threads));
        EmbeddingSet set;
        set.add(raptor_embed(ts, r, AxisMask::all(), "acc"));
        return encode_remb(set);
    };
    const auto one = remb(1), again = remb(1), many = remb(4);
    const auto set = decode_remb(one);
    const std::size_t len = set.header.row_length();
    return {len == 76800 && set.header.grid == 16 && one == again && one == many,
            "length " + std::to_string(len) + ", p " + std::to_string(set.header.grid) + ", REMB " +
                std::to_string(one.size()) + " B, identical across reruns and thread counts: " +
                (one == again && one == many ? "yes" : "no")};
}

Outcome k_study_check(unsigned threads) {
    auto preset = k_study_preset();
    preset.pipeline.threads = threads;
    const auto data = pool_sim_dataset(preset.sim, preset.pipeline);
    const std::vector<std::uint32_t> ks{1, 100};
    const std::vector<std::uint64_t> seeds{0, 1, 2};
    const auto rows = k_study(data, ks, seeds, preset.split(0), kDefaultPenaltyGrid, AxisMask::all(), threads);
    const auto s = summarize_k_study(rows);
    return {s[1].std <= s[0].std && s[1].mean >= s[0].mean,
            "K=1 mean " + fmt("%.4f", s[0].mean) + " std " + fmt("%.4f", s[0].std) + "; K=100 mean " +
                fmt("%.4f", s[1].mean) + " std " + fmt("%.4f", s[1].std)};
}

Outcome view_study_check(unsigned threads) {
    auto preset = view_study_preset();
    preset.pipeline.threads = threads;
    const auto data = pool_sim_dataset(preset.sim, preset.pipeline);
    const auto rows = view_study(data, preset.k, 0, preset.split(0), kDefaultPenaltyGrid, threads);
    auto auc = [&](const char* letters) {
        for (const auto& r : rows)
            if (r.axes == AxisMask::parse(letters)) return r.report.auroc_macro;
        return -1.0;
    };
    const double a = auc("a"), c = auc("c"), s = auc("s"), all = auc("acs");
    const double best = std::max({a, c, s});
    return {all >= best - 0.02 && a - s >= 0.15,
            "a " + fmt("%.4f", a) + ", c " + fmt("%.4f", c) + ", s " + fmt("%.4f", s) + ", acs " + fmt("%.4f", all)};
}

Outcome size_task(unsigned threads) {
    std::vector<double> aucs;
    for (std::uint32_t px : {64u, 32u, 16u, 8u}) {
        auto preset = size_task_preset(px);
        preset.pipeline.threads = threads;
        const auto data = pool_sim_dataset(preset.sim, preset.pipeline);
        const auto r = gen_projection(preset.k, pooled_dim(data.pooled.front()), 0);
        aucs.push_back(test_auroc(embedding_matrix(data.pooled, r, AxisMask::all()), data.labels, preset.split(0),
                                  kDefaultPenaltyGrid, threads));
    }
    return {aucs[0] >= 0.90 && aucs[3] <= 0.60 && inversions(aucs, false) <= 1,
            "AUROC at 64/32/16/8 px: " + join(aucs)};
}

Outcome scarcity(unsigned threads) {
    auto preset = scarcity_preset();
    preset.pipeline.threads = threads;
    const auto data = pool_sim_dataset(preset.sim, preset.pipeline);
    const auto r = gen_projection(preset.k, pooled_dim(data.pooled.front()), 0);
    const auto x = embedding_matrix(data.pooled, r, AxisMask::all());
    const std::vector<std::size_t> sizes{10, 50, 100, 200, 500};
    LogRegOptions opt;
    opt.threads = threads;
    const auto curve = scarcity_curve(x, data.labels, sizes, 5, preset.split(0), kDefaultPenaltyGrid, 0, opt);
    std::vector<double> med;
    for (const auto& p : curve) med.push_back(p.median);
    return {inversions(med, true) <= 1 && med[0] >= 0.5, "medians at 10/50/100/200/500: " + join(med)};
}

Outcome metric_oracles() {
    double aupr_err = 0, r2_err = 0;
    bool auroc_exact = true;
    for (std::uint64_t s = 0; s < 20; ++s) {
        RngSequence rng(s, RngStream::Test);
        const std::size_t n = 10 + 10 * s;
        std::vector<double> sc(n), t(n);
        std::vector<int> lb(n);
        for (std::size_t i = 0; i < n; ++i) {
            lb[i] = static_cast<int>(rng.below(2));
            sc[i] = static_cast<double>(rng.below(6)) + 0.5 * lb[i];
            t[i] = sc[i] + rng.normal();
        }
        lb[0] = 0;
        lb[1] = 1;
        long twice = 0, pos = 0, neg = 0;
        for (std::size_t i = 0; i < n; ++i) (lb[i] ? pos : neg)++;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (lb[i] == 1 && lb[j] == 0) twice += sc[i] > sc[j] ? 2 : (sc[i] == sc[j] ? 1 : 0);
        const double pair_auc = static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
        if (auroc(sc, lb) != pair_auc) auroc_exact = false;

        double ap = 0, prev = 0;
        for (double thr : std::set<double, std::greater<>>(sc.begin(), sc.end())) {
            double tp = 0, called = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (sc[i] >= thr) {
                    ++called;
                    tp += lb[i];
                }
            ap += (tp / static_cast<double>(pos) - prev) * (tp / called);
            prev = tp / static_cast<double>(pos);
        }
        aupr_err = std::max(aupr_err, std::abs(aupr(sc, lb) - ap));

        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += sc[i];
            sy += t[i];
            sxx += sc[i] * sc[i];
            syy += t[i] * t[i];
            sxy += sc[i] * t[i];
        }
        const double dn = static_cast<double>(n);
        const double num = dn * sxy - sx * sy;
        const double r2 = num * num / ((dn * sxx - sx * sx) * (dn * syy - sy * sy));
        r2_err = std::max(r2_err, std::abs(pearson_r2(sc, t) - r2));
    }
    return {auroc_exact && aupr_err <= 1e-12 && r2_err <= 1e-12,
            std::string("AUROC exact: ") + (auroc_exact ? "yes" : "no") + ", AUPR error " + fmt("%.1e", aupr_err) +
                ", r2 error " + fmt("%.1e", r2_err)};
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

Outcome gradients() {
    Eigen::MatrixXd x = gaussian_matrix(60, 6, 1);
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) {
        y[i] = i % 3;
        x(i, y[i]) += 1.0;
    }
    const SoftmaxObjective f{x, y, 3, 0.1};
    const Eigen::VectorXd theta = 0.3 * gaussian_matrix(f.size(), 1, 2).col(0);
    Eigen::VectorXd grad, scratch, fd(f.size());
    f(theta, grad);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp(i) += h;
        tm(i) -= h;
        fd(i) = (f(tp, scratch) - f(tm, scratch)) / (2 * h);
    }
    const double logreg_err = rel_err(grad, fd);

    auto p = detail::init_mlp<double>(5, 8, 2, 3);
    p.gamma = 1.0 + 0.2 * gaussian_matrix(8, 1, 4).col(0).array();
    p.beta = 0.1 * gaussian_matrix(8, 1, 5).col(0);
    const Eigen::MatrixXd mx = gaussian_matrix(16, 5, 6), my = gaussian_matrix(16, 2, 7);
    auto g = mlp_loss_and_grad<double>(p, mx, my).grad;
    // One relative error over the whole gradient: the first-layer bias feeds
    // batch norm, so its exact gradient is zero and a per-block ratio is noise.
    double diff2 = 0, num2 = 0, ana2 = 0;
    p.for_each_pair(g, [&](auto& param, auto& gp) {
        Eigen::MatrixXd num(param.rows(), param.cols());
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double keep = param.data()[i];
            param.data()[i] = keep + h;
            const double up = mlp_loss_and_grad<double>(p, mx, my).loss;
            param.data()[i] = keep - h;
            const double down = mlp_loss_and_grad<double>(p, mx, my).loss;
            param.data()[i] = keep;
            num.data()[i] = (up - down) / (2 * h);
        }
        const Eigen::MatrixXd ana = gp;
        diff2 += (num - ana).squaredNorm();
        num2 += num.squaredNorm();
        ana2 += ana.squaredNorm();
    });
    const double mlp_err = std::sqrt(diff2) / std::max(1e-12, std::sqrt(std::max(num2, ana2)));
    return {logreg_err <= 1e-4 && mlp_err <= 1e-3,
            "logreg relative error " + fmt("%.1e", logreg_err) + ", MLP " + fmt("%.1e", mlp_err)};
}

Outcome bench() {
    const std::vector<std::uint32_t> edges{32, 64, 128}, ks{100};
    const auto rows = bench_embed(edges, ks, 2, small_encoder(16, 64, 256));
    std::vector<double> ratios;
    for (std::size_t i = 1; i < rows.size(); ++i) ratios.push_back(rows[i].total_ms / rows[i - 1].total_ms);
    const auto pca = bench_pca_vs_projection(1024, 100, 200, 1);
    const bool ok = std::all_of(ratios.begin(), ratios.end(), [](double r) { return r <= 4.5; }) &&
                    pca.project_ms < pca.pca_ms;
    return {ok, "time ratio per doubling " + join(ratios) + "; PCA " + fmt("%.1f", pca.pca_ms) + " ms vs projection " +
                    fmt("%.1f", pca.project_ms) + " ms"};
}

Outcome footprint() {
    const std::size_t emb = embedding_length(AxisMask::all(), 10, 16) * sizeof(float);
    const auto vox = volume_u8_bytes(structured_phantom(256));
    const double ratio = footprint_ratio(emb, vox);
    return {emb == 30720 && ratio <= 0.015,
            std::to_string(emb) + " B embedding / gzipped phantom = " + fmt("%.4f", 100 * ratio) + "%"};
}

Outcome overlap() {
    const auto checks = overlap_suite();
    return {all_passed(checks), checks[0].detail};
}

} // namespace

int main() {
    const unsigned threads = worker_count();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"jl distortion", jl},
        {"pool/project commutativity", commutativity},
        {"alpha oracle and distance sandwich", alpha_and_bounds},
        {"embedding length and determinism", embedding_layout},
        {"K study", [&] { return k_study_check(threads); }},
        {"view study", [&] { return view_study_check(threads); }},
        {"size task resolution sweep", [&] { return size_task(threads); }},
        {"data scarcity", [&] { return scarcity(threads); }},
        {"metric oracles", metric_oracles},
        {"gradient checks", gradients},
        {"scaling bench", bench},
        {"storage footprint", footprint},
        {"variance overlap", overlap},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.passed) ++failed;
        std::printf("%s %2zu %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
