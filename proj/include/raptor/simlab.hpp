#pragma once

#include "raptor/binio.hpp"
#include "raptor/core.hpp"
#include "raptor/encoder.hpp"
#include "raptor/parallel.hpp"
#include "raptor/rng.hpp"
#include "raptor/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace raptor {

// 8x8 digit glyphs, one byte per row, most significant bit on the left.
inline constexpr std::array<std::array<std::uint8_t, 8>, 10> kDigitGlyphs{{
    {0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00},  // 0
    {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
    {0x3C, 0x66, 0x06, 0x0C, 0x30, 0x60, 0x7E, 0x00},  // 2
    {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},  // 3
    {0x0C, 0x1C, 0x3C, 0x6C, 0x7E, 0x0C, 0x0C, 0x00},  // 4
    {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 5
    {0x3C, 0x60, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},  // 6
    {0x7E, 0x06, 0x0C, 0x18, 0x30, 0x30, 0x30, 0x00},  // 7
    {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},  // 8
    {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},  // 9
}};

inline Image glyph_template(int digit) {
    if (digit < 0 || digit > 9) throw Error(ErrorCode::UnknownDigit, "digit " + std::to_string(digit));
    Image g(8, 8);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c) g(r, c) = (kDigitGlyphs[digit][r] >> (7 - c)) & 1u ? 1.f : 0.f;
    return g;
}

/// Nearest-neighbour rescale: output pixel i samples source floor(i * n / px).
inline Image scale_nearest(const Image& src, std::size_t px) {
    Image out(px, px);
    for (std::size_t r = 0; r < px; ++r)
        for (std::size_t c = 0; c < px; ++c) out(r, c) = src(r * src.rows / px, c * src.cols / px);
    return out;
}

/// Digit images and labels from an IDX pair (0x00000803 images,
/// 0x00000801 labels).
class IdxDigits {
public:
    static IdxDigits parse(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
        IdxDigits d;
        binio::Reader ri(images), rl(labels);
        try {
            if (read_be(ri) != 0x00000803u) throw Error(ErrorCode::IdxParseError, "image file magic is not 0x00000803");
            if (read_be(rl) != 0x00000801u) throw Error(ErrorCode::IdxParseError, "label file magic is not 0x00000801");
            const auto n = read_be(ri);
            d.rows_ = read_be(ri);
            d.cols_ = read_be(ri);
            if (read_be(rl) != n) throw Error(ErrorCode::IdxParseError, "image and label counts differ");
            const std::size_t per = std::size_t{d.rows_} * d.cols_;
            if (ri.remaining() < per * n || rl.remaining() < n)
                throw Error(ErrorCode::IdxParseError, "IDX payload shorter than its header claims");
            const auto pix = ri.get_bytes(per * n);
            const auto lab = rl.get_bytes(n);
            d.pixels_.assign(pix.begin(), pix.end());
            d.labels_.assign(lab.begin(), lab.end());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::IdxParseError) throw;
            throw Error(ErrorCode::IdxParseError, e.what());
        }
        return d;
    }

    static IdxDigits load(const std::filesystem::path& images, const std::filesystem::path& labels) {
        return parse(binio::read_file(images), binio::read_file(labels));
    }

    std::size_t size() const { return labels_.size(); }
    int label(std::size_t i) const { return labels_[i]; }

    /// Image i scaled to [0, 1].
    Image image(std::size_t i) const {
        Image img(rows_, cols_);
        const std::size_t per = std::size_t{rows_} * cols_;
        for (std::size_t k = 0; k < per; ++k) img.data[k] = static_cast<float>(pixels_[i * per + k]) / 255.f;
        return img;
    }

    std::vector<std::size_t> indices_of(int digit) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == digit) out.push_back(i);
        return out;
    }

private:
    static std::uint32_t read_be(binio::Reader& r) {
        const auto b = r.get_bytes(4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    std::uint32_t rows_ = 0, cols_ = 0;
    std::vector<std::uint8_t> pixels_;
    std::vector<std::uint8_t> labels_;
};

enum class DigitSource { BuiltinGlyph, IdxFile };

/// px x px bitmap in [0, 1]. With IDX digits the seed picks one sample of
/// the requested class.
inline Image render_digit(int digit, std::size_t px, DigitSource source = DigitSource::BuiltinGlyph,
                          const IdxDigits* idx = nullptr, std::uint64_t seed = 0) {
    if (px < 8) throw Error(ErrorCode::InvalidArgument, "digit size must be >= 8 px");
    if (digit < 0 || digit > 9) throw Error(ErrorCode::UnknownDigit, "digit " + std::to_string(digit));
    if (source == DigitSource::BuiltinGlyph) return scale_nearest(glyph_template(digit), px);
    if (!idx) throw Error(ErrorCode::IdxParseError, "IDX digit source selected but no IDX data loaded");
    const auto pool = idx->indices_of(digit);
    if (pool.empty()) throw Error(ErrorCode::UnknownDigit, "IDX data has no sample of digit " + std::to_string(digit));
    const auto pick = pool[RngSequence(seed, RngStream::Simulation).below(pool.size())];
    return detail::resize_bilinear(idx->image(pick), px);
}

/// Where a digit went: axial slices [axial_start, axial_start + thickness),
/// rows (y) from row0 and columns (z) from col0, px x px.
struct InsertionRecord {
    std::uint32_t axial_start = 0;
    std::uint32_t thickness = 0;
    std::uint32_t row0 = 0;
    std::uint32_t col0 = 0;
    std::uint32_t px = 0;
    int digit = -1;
    float intensity = 1.f;
};

inline std::uint32_t extrusion_thickness(std::size_t px) { return static_cast<std::uint32_t>(std::max<std::size_t>(1, px / 4)); }

/// Max-composites `intensity * bitmap` into a copy of `v` across
/// max(1, px/4) axial slices centred on `axial_center`; the bitmap lies in
/// the (y, z) plane centred on (center_y, center_z).
inline std::pair<Volume, InsertionRecord> insert_digit(const Volume& v, const Image& bitmap, std::uint32_t center_y,
                                                       std::uint32_t center_z, std::uint32_t axial_center,
                                                       float intensity = 1.f, int digit = -1) {
    const std::size_t px = bitmap.rows;
    if (bitmap.cols != px) throw Error(ErrorCode::ShapeMismatch, "bitmap must be square");
    const std::uint32_t thick = extrusion_thickness(px);
    const auto d = v.dims();
    const long r0 = static_cast<long>(center_y) - static_cast<long>(px / 2);
    const long c0 = static_cast<long>(center_z) - static_cast<long>(px / 2);
    const long a0 = static_cast<long>(axial_center) - static_cast<long>(thick / 2);
    if (r0 < 0 || c0 < 0 || a0 < 0 || r0 + static_cast<long>(px) > static_cast<long>(d.y) ||
        c0 + static_cast<long>(px) > static_cast<long>(d.z) || a0 + static_cast<long>(thick) > static_cast<long>(d.x))
        throw Error(ErrorCode::OutOfBounds, "digit of " + std::to_string(px) + " px does not fit at (" +
                                                std::to_string(axial_center) + ", " + std::to_string(center_y) + ", " +
                                                std::to_string(center_z) + ")");
    InsertionRecord rec{static_cast<std::uint32_t>(a0), thick, static_cast<std::uint32_t>(r0),
                        static_cast<std::uint32_t>(c0), static_cast<std::uint32_t>(px), digit, intensity};
    std::vector<float> vox(v.voxels().begin(), v.voxels().end());
    for (std::uint32_t x = rec.axial_start; x < rec.axial_start + thick; ++x)
        for (std::size_t r = 0; r < px; ++r)
            for (std::size_t c = 0; c < px; ++c) {
                auto& dst = vox[v.index(x, rec.row0 + r, rec.col0 + c)];
                dst = std::max(dst, intensity * bitmap(r, c));
            }
    return {Volume(v.id(), d, std::move(vox)), rec};
}

enum class HostShape { Blobs, Columns };

/// Smooth host volume in [0, 1]: a shared layout of Gaussian blobs drawn
/// from `anatomy_seed`, perturbed per sample (centre, width and amplitude
/// jitter, optional extra small blobs) from `seed`, then min-max normalized.
/// Columns drops the z factor, so every sagittal slice is the same image.
inline Volume phantom_host(std::uint32_t extent, std::uint64_t seed, std::uint64_t anatomy_seed = 0,
                           HostShape shape = HostShape::Blobs, int extra_blobs = 0, std::string id = {}) {
    struct Blob {
        double x, y, z, sigma, amp;
    };
    const double n = extent;
    RngSequence layout(anatomy_seed, RngStream::Simulation);
    RngSequence jitter(seed, RngStream::Simulation);
    std::vector<Blob> blobs;
    for (int b = 0; b < 6; ++b) {
        Blob base{(0.2 + 0.6 * layout.uniform()) * n, (0.2 + 0.6 * layout.uniform()) * n,
                  (0.2 + 0.6 * layout.uniform()) * n, (0.08 + 0.12 * layout.uniform()) * n,
                  0.3 + 0.5 * layout.uniform()};
        base.x += 0.01 * n * jitter.normal();
        base.y += 0.01 * n * jitter.normal();
        base.z += 0.01 * n * jitter.normal();
        base.sigma *= std::max(0.5, 1 + 0.02 * jitter.normal());
        base.amp *= std::max(0.2, 1 + 0.03 * jitter.normal());
        blobs.push_back(base);
    }
    for (int b = 0; b < extra_blobs; ++b)
        blobs.push_back({jitter.uniform() * n, jitter.uniform() * n, jitter.uniform() * n,
                         (0.03 + 0.04 * jitter.uniform()) * n, 0.05 + 0.1 * jitter.uniform()});

    const std::size_t e = extent;
    std::vector<float> vox(e * e * e, 0.f);
    std::vector<double> gx(e), gy(e), gz(e);
    for (const auto& b : blobs) {
        const double inv = 1.0 / (2 * b.sigma * b.sigma);
        for (std::size_t i = 0; i < e; ++i) {
            const double t = static_cast<double>(i);
            gx[i] = std::exp(-(t - b.x) * (t - b.x) * inv);
            gy[i] = std::exp(-(t - b.y) * (t - b.y) * inv);
            gz[i] = shape == HostShape::Columns ? 1.0 : std::exp(-(t - b.z) * (t - b.z) * inv);
        }
        std::size_t o = 0;
        for (std::size_t x = 0; x < e; ++x)
            for (std::size_t y = 0; y < e; ++y) {
                const double xy = b.amp * gx[x] * gy[y];
                for (std::size_t z = 0; z < e; ++z) vox[o++] += static_cast<float>(xy * gz[z]);
            }
    }
    return normalize(Volume(std::move(id), Dims{extent, extent, extent}, std::move(vox)));
}

enum class SimTask { Location, Size };
enum class HostSource { SyntheticPhantom, VolumeDir };

struct SimSpec {
    SimTask task = SimTask::Size;
    std::uint32_t resolution_px = 64;
    std::optional<int> digit;  // empty: any digit, drawn per sample
    DigitSource digit_source = DigitSource::BuiltinGlyph;
    std::filesystem::path idx_images, idx_labels;
    std::uint64_t seed = 0;
    std::size_t n_samples = 200;
    HostSource host_source = HostSource::SyntheticPhantom;
    HostShape host_shape = HostShape::Blobs;
    std::filesystem::path host_dir;
    std::uint32_t host_extent = 128;
    float intensity = 1.f;
};

struct SimDataset {
    std::vector<Volume> volumes;
    std::vector<int> labels;
    std::vector<std::optional<InsertionRecord>> records;
};

namespace detail {

class HostPool {
public:
    explicit HostPool(const SimSpec& spec) : spec_(spec) {
        if (spec.host_source == HostSource::VolumeDir) {
            std::vector<std::filesystem::path> files;
            for (const auto& e : std::filesystem::directory_iterator(spec.host_dir))
                if (e.is_regular_file() && e.path().extension() == ".rvol") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw Error(ErrorCode::IoFailure, "no .rvol hosts in " + spec.host_dir.string());
            for (const auto& f : files) {
                auto v = normalize(load_volume(f, VolumeFormat::RVOL));
                if (!v.is_cubic()) throw Error(ErrorCode::NonCubic, "host " + f.string() + " is not cubic");
                hosts_.push_back(std::move(v));
            }
        }
    }

    std::uint32_t extent() const {
        return hosts_.empty() ? spec_.host_extent : hosts_.front().dims().x;
    }

    Volume host(std::size_t i, std::uint64_t sample_seed) const {
        if (hosts_.empty()) return phantom_host(spec_.host_extent, sample_seed, spec_.seed, spec_.host_shape);
        const auto& h = hosts_[i % hosts_.size()];
        if (h.dims().x != extent()) throw Error(ErrorCode::ShapeMismatch, "host volumes differ in extent");
        return h;
    }

private:
    const SimSpec& spec_;
    std::vector<Volume> hosts_;
};

inline std::string sample_id(const SimSpec& spec, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%02u_%05zu", spec.task == SimTask::Location ? "loc" : "size",
                  spec.resolution_px, i);
    return buf;
}

} // namespace detail

/// Samples alternate class 0 / class 1 by index, so classes are balanced.
/// Every sample draws from its own derived seed, so generation is worker
/// count invariant.
inline SimDataset make_sim_dataset(const SimSpec& spec, unsigned threads = 1) {
    if (spec.n_samples == 0 || spec.n_samples % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "n_samples must be even and positive");
    if (spec.digit && (*spec.digit < 0 || *spec.digit > 9))
        throw Error(ErrorCode::UnknownDigit, "digit " + std::to_string(*spec.digit));
    std::optional<IdxDigits> idx;
    if (spec.digit_source == DigitSource::IdxFile) idx = IdxDigits::load(spec.idx_images, spec.idx_labels);
    const detail::HostPool hosts(spec);
    const std::uint32_t extent = hosts.extent();
    const std::uint32_t px = spec.resolution_px;
    if (px < 8 || 2 * px > extent)
        throw Error(ErrorCode::OutOfBounds, "resolution " + std::to_string(px) + " px needs host extent >= " +
                                                std::to_string(2 * px));

    SimDataset ds;
    ds.volumes.resize(spec.n_samples);
    ds.labels.resize(spec.n_samples);
    ds.records.resize(spec.n_samples);
    parallel_for(spec.n_samples, threads, [&](std::size_t i) {
        const std::uint64_t s = derive_seed(spec.seed, i);
        RngSequence rng(derive_seed(s, 1), RngStream::Simulation);
        const int label = static_cast<int>(i % 2);
        const int digit = spec.digit ? *spec.digit : static_cast<int>(rng.below(10));
        Volume host = hosts.host(i, s).with_id(detail::sample_id(spec, i));
        const std::uint32_t mid = extent / 2;
        const std::uint32_t thick = extrusion_thickness(px);
        std::optional<InsertionRecord> rec;
        if (spec.task == SimTask::Location) {
            // Two centres on the z axis, px apart, symmetric about the middle.
            const std::uint32_t cz = label == 0 ? mid - px / 2 : mid + (px - px / 2);
            const auto bmp = render_digit(digit, px, spec.digit_source, idx ? &*idx : nullptr, derive_seed(s, 2));
            auto [v, r] = insert_digit(host, bmp, mid, cz, mid, spec.intensity, digit);
            host = std::move(v);
            rec = r;
        } else if (label == 1) {
            auto pick = [&](std::uint32_t lo, std::uint32_t hi) {
                return lo + static_cast<std::uint32_t>(rng.below(hi - lo + 1));
            };
            const std::uint32_t half = px / 2;
            const std::uint32_t cy = pick(half, extent - (px - half));
            const std::uint32_t cz = pick(half, extent - (px - half));
            const std::uint32_t cx = pick(thick / 2, extent - (thick - thick / 2));
            const auto bmp = render_digit(digit, px, spec.digit_source, idx ? &*idx : nullptr, derive_seed(s, 2));
            auto [v, r] = insert_digit(host, bmp, cy, cz, cx, spec.intensity, digit);
            host = std::move(v);
            rec = r;
        }
        ds.volumes[i] = std::move(host);
        ds.labels[i] = label;
        ds.records[i] = rec;
    });
    return ds;
}

/// RVOL per sample plus labels.csv (id,label) and records.csv.
inline void write_sim_dataset(const SimDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream labels(dir / "labels.csv"), records(dir / "records.csv");
    if (!labels || !records) throw Error(ErrorCode::IoFailure, "cannot write dataset tables in " + dir.string());
    labels << "id,label\n";
    records << "id,label,digit,axial_start,thickness,row0,col0,px\n";
    for (std::size_t i = 0; i < ds.volumes.size(); ++i) {
        const auto& v = ds.volumes[i];
        write_volume(v, dir / (v.id() + ".rvol"), VoxelType::F32, true);
        labels << v.id() << ',' << ds.labels[i] << '\n';
        if (const auto& r = ds.records[i])
            records << v.id() << ',' << ds.labels[i] << ',' << r->digit << ',' << r->axial_start << ','
                    << r->thickness << ',' << r->row0 << ',' << r->col0 << ',' << r->px << '\n';
    }
}

/// Structured 256^3-style u8 phantom: a head-like ellipsoid shell with soft
/// tissue, internal blobs and acquisition noise. Integer voxels in [0, 255].
inline Volume structured_phantom(std::uint32_t extent = 256, std::uint64_t seed = 0, double noise_sd = 6.0) {
    RngSequence rng(seed, RngStream::Simulation);
    const std::size_t n = extent;
    const double c = (static_cast<double>(n) - 1) / 2;
    const double ax = 0.42 * n, ay = 0.36 * n, az = 0.40 * n;
    struct Blob {
        double x, y, z, r, v;
    };
    std::vector<Blob> blobs;
    for (int b = 0; b < 12; ++b)
        blobs.push_back({c + (rng.uniform() - 0.5) * 0.5 * n, c + (rng.uniform() - 0.5) * 0.4 * n,
                         c + (rng.uniform() - 0.5) * 0.5 * n, (0.03 + 0.07 * rng.uniform()) * n,
                         40 + 80 * rng.uniform()});
    std::vector<float> vox(n * n * n);
    std::size_t o = 0;
    const CounterRng noise(seed, RngStream::Test);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t z = 0; z < n; ++z, ++o) {
                const double dx = (x - c) / ax, dy = (y - c) / ay, dz = (z - c) / az;
                const double rr = std::sqrt(dx * dx + dy * dy + dz * dz);
                double val = 0;
                if (rr <= 1.0) {
                    val = rr > 0.9 ? 200 : 90 + 20 * std::cos(0.15 * static_cast<double>(x + y));
                    for (const auto& b : blobs) {
                        const double ex = x - b.x, ey = y - b.y, ez = z - b.z;
                        if (ex * ex + ey * ey + ez * ez <= b.r * b.r) val = b.v;
                    }
                    val += noise_sd * noise.normal(o);
                }
                vox[o] = static_cast<float>(std::clamp(std::round(val), 0.0, 255.0));
            }
    return Volume("phantom", Dims{extent, extent, extent}, std::move(vox));
}

} // namespace raptor
