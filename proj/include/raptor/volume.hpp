#pragma once

#include "raptor/binio.hpp"
#include "raptor/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace raptor {

struct Dims {
    std::uint32_t x = 0, y = 0, z = 0;

    std::size_t count() const { return std::size_t{x} * y * z; }
    bool cubic() const { return x == y && y == z; }
    std::uint32_t operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense voxel grid, x slowest and z fastest. Immutable once built.
class Volume {
public:
    Volume() = default;

    Volume(std::string id, Dims dims, std::vector<float> voxels)
        : id_(std::move(id)), dims_(dims), voxels_(std::move(voxels)) {
        if (dims_.x == 0 || dims_.y == 0 || dims_.z == 0)
            throw Error(ErrorCode::InvalidArgument, "volume dims must be positive");
        if (voxels_.size() != dims_.count())
            throw Error(ErrorCode::ShapeMismatch, "voxel count " + std::to_string(voxels_.size()) +
                                                      " != dims product " + std::to_string(dims_.count()));
        float lo = voxels_.empty() ? 0.f : voxels_[0], hi = lo;
        for (float v : voxels_) {
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "volume '" + id_ + "' has a non-finite voxel");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        range_ = {lo, hi};
    }

    const std::string& id() const { return id_; }
    Dims dims() const { return dims_; }
    std::span<const float> voxels() const { return voxels_; }
    std::pair<float, float> value_range() const { return range_; }
    bool is_cubic() const { return dims_.cubic(); }

    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return (x * dims_.y + y) * dims_.z + z;
    }
    float at(std::size_t x, std::size_t y, std::size_t z) const { return voxels_[index(x, y, z)]; }

    Volume with_id(std::string id) const { return Volume(std::move(id), dims_, voxels_); }

private:
    std::string id_;
    Dims dims_;
    std::vector<float> voxels_;
    std::pair<float, float> range_{0.f, 0.f};
};

/// Row-major 2D array.
struct Image {
    std::size_t rows = 0, cols = 0;
    std::vector<float> data;

    Image() = default;
    Image(std::size_t r, std::size_t c, float fill = 0.f) : rows(r), cols(c), data(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    friend bool operator==(const Image&, const Image&) = default;
};

/// The D cross-sections perpendicular to one axis. Within a slice, the two
/// remaining voxel axes appear in ascending index order (row, column).
struct SliceStack {
    Axis axis = Axis::Axial;
    std::vector<Image> slices;
};

enum class VolumeFormat { RVOL, RAW_U8, IDX3D };

enum class VoxelType : std::uint8_t { U8 = 0, F32 = 1 };

namespace detail {

inline std::uint32_t read_be32(binio::Reader& r) {
    const auto b = r.get_bytes(4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline std::vector<float> decode_payload(std::span<const std::uint8_t> payload, VoxelType t, std::size_t count) {
    const std::size_t width = t == VoxelType::U8 ? 1 : 4;
    if (payload.size() < count * width)
        throw Error(ErrorCode::TruncatedPayload, "payload holds " + std::to_string(payload.size()) +
                                                     " bytes, dims need " + std::to_string(count * width));
    std::vector<float> out(count);
    if (t == VoxelType::U8) {
        for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<float>(payload[i]);
    } else {
        std::memcpy(out.data(), payload.data(), count * 4);
    }
    return out;
}

} // namespace detail

inline constexpr std::uint16_t kRvolVersion = 1;
inline constexpr std::size_t kRvolHeaderBytes = 20;

/// Reads RVOL, RAW_U8 or IDX3D. RAW_U8 carries no header: the cube extent is
/// `raw_extent` when given, otherwise the cube root of the file size.
inline Volume load_volume(const std::filesystem::path& path, VolumeFormat format,
                          std::optional<std::uint32_t> raw_extent = std::nullopt) {
    const auto bytes = binio::read_file(path);
    const std::string id = path.stem().string();
    binio::Reader r(bytes);

    switch (format) {
    case VolumeFormat::RVOL: {
        if (!r.magic_is("RVOL")) throw Error(ErrorCode::MagicMismatch, path.string() + " is not RVOL");
        const auto version = r.get<std::uint16_t>();
        if (version != kRvolVersion)
            throw Error(ErrorCode::UnsupportedVersion, "RVOL version " + std::to_string(version));
        const auto dtype = r.get<std::uint8_t>();
        const auto flags = r.get<std::uint8_t>();
        if (dtype > 1) throw Error(ErrorCode::HeaderInconsistent, "RVOL dtype " + std::to_string(dtype));
        Dims d{r.get<std::uint32_t>(), r.get<std::uint32_t>(), r.get<std::uint32_t>()};
        if (d.count() == 0) throw Error(ErrorCode::HeaderInconsistent, "RVOL has a zero dimension");
        std::vector<std::uint8_t> inflated;
        std::span<const std::uint8_t> payload = r.rest();
        if (flags & 1u) {
            inflated = binio::gzip_decompress(payload);
            payload = inflated;
        }
        return Volume(id, d, detail::decode_payload(payload, static_cast<VoxelType>(dtype), d.count()));
    }
    case VolumeFormat::RAW_U8: {
        std::uint32_t e = 0;
        if (raw_extent) {
            e = *raw_extent;
        } else {
            e = static_cast<std::uint32_t>(std::llround(std::cbrt(static_cast<double>(bytes.size()))));
            if (std::size_t{e} * e * e != bytes.size())
                throw Error(ErrorCode::TruncatedPayload, "RAW_U8 size " + std::to_string(bytes.size()) + " is not a cube");
        }
        Dims d{e, e, e};
        return Volume(id, d, detail::decode_payload(bytes, VoxelType::U8, d.count()));
    }
    case VolumeFormat::IDX3D: {
        const auto magic = r.get_bytes(4);
        if (magic[0] != 0 || magic[1] != 0 || magic[3] != 3)
            throw Error(ErrorCode::MagicMismatch, path.string() + " is not a 3-dimensional IDX file");
        Dims d{detail::read_be32(r), detail::read_be32(r), detail::read_be32(r)};
        if (magic[2] == 0x08) return Volume(id, d, detail::decode_payload(r.rest(), VoxelType::U8, d.count()));
        if (magic[2] == 0x0D) {
            if (r.remaining() < d.count() * 4) throw Error(ErrorCode::TruncatedPayload, "IDX f32 payload short");
            std::vector<float> vals(d.count());
            for (auto& v : vals) v = std::bit_cast<float>(detail::read_be32(r));
            return Volume(id, d, std::move(vals));
        }
        throw Error(ErrorCode::MagicMismatch, "unsupported IDX element type");
    }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown volume format");
}

/// RVOL encoder. U8 requires every voxel to be an integer in [0, 255].
inline binio::Bytes encode_rvol(const Volume& v, VoxelType dtype = VoxelType::F32, bool gzip = false) {
    binio::Writer w;
    w.put_magic("RVOL");
    w.put<std::uint16_t>(kRvolVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
    w.put<std::uint8_t>(gzip ? 1 : 0);
    w.put(v.dims().x);
    w.put(v.dims().y);
    w.put(v.dims().z);

    binio::Bytes payload;
    if (dtype == VoxelType::U8) {
        payload.resize(v.voxels().size());
        for (std::size_t i = 0; i < payload.size(); ++i) {
            const float x = v.voxels()[i];
            if (x < 0.f || x > 255.f || x != std::floor(x))
                throw Error(ErrorCode::InvalidArgument, "voxel not representable as u8");
            payload[i] = static_cast<std::uint8_t>(x);
        }
    } else {
        const auto raw = std::as_bytes(v.voxels());
        payload.assign(reinterpret_cast<const std::uint8_t*>(raw.data()),
                       reinterpret_cast<const std::uint8_t*>(raw.data()) + raw.size());
    }
    if (gzip) payload = binio::gzip_compress(payload);
    w.put_bytes(payload);
    return std::move(w.bytes());
}

inline void write_volume(const Volume& v, const std::filesystem::path& path, VoxelType dtype = VoxelType::F32,
                         bool gzip = false) {
    binio::write_file(path, encode_rvol(v, dtype, gzip));
}

enum class NormalizeMode { GlobalMinMax };

/// (x - min) / (max - min); a constant volume maps to all zeros.
inline Volume normalize(const Volume& v, NormalizeMode = NormalizeMode::GlobalMinMax) {
    const auto [lo, hi] = v.value_range();
    std::vector<float> out(v.voxels().size(), 0.f);
    if (hi > lo) {
        const double span = static_cast<double>(hi) - lo;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<float>((static_cast<double>(v.voxels()[i]) - lo) / span);
    }
    return Volume(v.id(), v.dims(), std::move(out));
}

/// Trilinear resampling onto a target^3 grid. Corner voxels are aligned, so
/// linear ramps are reproduced exactly and a same-size request is the
/// identity.
inline Volume resample(const Volume& v, std::uint32_t target) {
    if (target < 2) throw Error(ErrorCode::InvalidArgument, "resample target must be >= 2");
    const Dims src = v.dims();
    if (src == Dims{target, target, target}) return v;

    struct Tap {
        std::size_t i0, i1;
        double w;
    };
    auto taps = [target](std::uint32_t n) {
        std::vector<Tap> t(target);
        for (std::uint32_t i = 0; i < target; ++i) {
            const double pos = n == 1 ? 0.0 : static_cast<double>(i) * (n - 1) / (target - 1);
            auto i0 = static_cast<std::size_t>(std::floor(pos));
            i0 = std::min<std::size_t>(i0, n - 1);
            const std::size_t i1 = std::min<std::size_t>(i0 + 1, n - 1);
            t[i] = {i0, i1, pos - static_cast<double>(i0)};
        }
        return t;
    };
    const auto tx = taps(src.x), ty = taps(src.y), tz = taps(src.z);

    std::vector<float> out(std::size_t{target} * target * target);
    std::size_t o = 0;
    for (std::uint32_t i = 0; i < target; ++i)
        for (std::uint32_t j = 0; j < target; ++j)
            for (std::uint32_t k = 0; k < target; ++k) {
                const auto& a = tx[i];
                const auto& b = ty[j];
                const auto& c = tz[k];
                auto f = [&](std::size_t x, std::size_t y, std::size_t z) { return static_cast<double>(v.at(x, y, z)); };
                const double c00 = f(a.i0, b.i0, c.i0) * (1 - c.w) + f(a.i0, b.i0, c.i1) * c.w;
                const double c01 = f(a.i0, b.i1, c.i0) * (1 - c.w) + f(a.i0, b.i1, c.i1) * c.w;
                const double c10 = f(a.i1, b.i0, c.i0) * (1 - c.w) + f(a.i1, b.i0, c.i1) * c.w;
                const double c11 = f(a.i1, b.i1, c.i0) * (1 - c.w) + f(a.i1, b.i1, c.i1) * c.w;
                const double c0 = c00 * (1 - b.w) + c01 * b.w;
                const double c1 = c10 * (1 - b.w) + c11 * b.w;
                out[o++] = static_cast<float>(c0 * (1 - a.w) + c1 * a.w);
            }
    return Volume(v.id(), Dims{target, target, target}, std::move(out));
}

/// Slice j of the stack is the cross-section with voxel index `axis` fixed at j.
inline SliceStack slice_stack(const Volume& v, Axis axis) {
    if (!v.is_cubic())
        throw Error(ErrorCode::NonCubic, "volume '" + v.id() + "' must be cubic before slicing; resample first");
    const std::size_t n = v.dims().x;
    SliceStack s{axis, std::vector<Image>(n, Image(n, n))};
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t z = 0; z < n; ++z) {
                const float val = v.at(x, y, z);
                switch (axis) {
                case Axis::Axial: s.slices[x](y, z) = val; break;
                case Axis::Coronal: s.slices[y](x, z) = val; break;
                case Axis::Sagittal: s.slices[z](x, y) = val; break;
                }
            }
    return s;
}

/// Inverse of slice_stack.
inline Volume restack(const SliceStack& s, std::string id = {}) {
    const std::size_t n = s.slices.size();
    for (const auto& img : s.slices)
        if (img.rows != n || img.cols != n) throw Error(ErrorCode::ShapeMismatch, "slices must be n x n for n slices");
    const auto e = static_cast<std::uint32_t>(n);
    std::vector<float> vox(n * n * n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t z = 0; z < n; ++z) {
                float val = 0.f;
                switch (s.axis) {
                case Axis::Axial: val = s.slices[x](y, z); break;
                case Axis::Coronal: val = s.slices[y](x, z); break;
                case Axis::Sagittal: val = s.slices[z](x, y); break;
                }
                vox[(x * n + y) * n + z] = val;
            }
    return Volume(std::move(id), Dims{e, e, e}, std::move(vox));
}

} // namespace raptor
