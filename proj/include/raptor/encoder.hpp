#pragma once

#include "raptor/binio.hpp"
#include "raptor/core.hpp"
#include "raptor/digest.hpp"
#include "raptor/parallel.hpp"
#include "raptor/rng.hpp"
#include "raptor/volume.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace raptor {

enum class EncoderKind : std::uint8_t { Synthetic = 0, TokenFile = 1 };

/// Describes how slices turn into patch tokens. `input_resolution` > 0 makes
/// the encoder resize every slice to that edge length first, the way a ViT
/// front end resizes images to its native grid; 0 encodes slices as given.
struct EncoderSpec {
    EncoderKind kind = EncoderKind::Synthetic;
    std::uint32_t patch_size = 16;
    std::uint32_t token_dim = 1024;
    std::uint64_t seed = 0;
    std::string source_path;
    std::uint32_t input_resolution = 0;

    /// Digest of every field; changes whenever any field does.
    Digest id_hash() const {
        std::string canon = "raptor-encoder/v1";
        canon += "|kind=" + std::to_string(static_cast<int>(kind));
        canon += "|T=" + std::to_string(patch_size);
        canon += "|d=" + std::to_string(token_dim);
        canon += "|seed=" + std::to_string(seed);
        canon += "|src=" + source_path;
        canon += "|res=" + std::to_string(input_resolution);
        return sha256(canon);
    }

    /// Patch-grid edge for slices of edge `extent`.
    std::uint32_t grid_for(std::uint32_t extent) const {
        const std::uint32_t e = input_resolution > 0 ? input_resolution : extent;
        if (patch_size == 0 || e % patch_size != 0)
            throw Error(ErrorCode::ShapeMismatch, "slice edge " + std::to_string(e) +
                                                      " is not a multiple of patch size " + std::to_string(patch_size));
        return e / patch_size;
    }
};

/// Per-slice patch tokens for one axis, laid out (slice, patch row-major, channel).
struct TokenTensor {
    Axis axis = Axis::Axial;
    std::uint32_t slices = 0;
    std::uint32_t grid = 0;  // p; each slice holds p*p patches
    std::uint32_t dim = 0;   // d
    Digest encoder_id{};
    std::vector<float> values;

    TokenTensor() = default;
    TokenTensor(Axis a, std::uint32_t n_slices, std::uint32_t p, std::uint32_t d, Digest id)
        : axis(a), slices(n_slices), grid(p), dim(d), encoder_id(id),
          values(std::size_t{n_slices} * p * p * d, 0.f) {}

    std::size_t patches() const { return std::size_t{grid} * grid; }
    std::size_t slice_size() const { return patches() * dim; }

    std::span<float> slice(std::size_t j) { return std::span(values).subspan(j * slice_size(), slice_size()); }
    std::span<const float> slice(std::size_t j) const {
        return std::span(values).subspan(j * slice_size(), slice_size());
    }
    float at(std::size_t j, std::size_t patch, std::size_t ch) const {
        return values[(j * patches() + patch) * dim + ch];
    }

    bool same_shape(const TokenTensor& o) const {
        return slices == o.slices && grid == o.grid && dim == o.dim;
    }
};

namespace detail {

/// Bilinear resampling with aligned corners.
inline Image resize_bilinear(const Image& src, std::size_t edge) {
    Image out(edge, edge);
    auto coord = [edge](std::size_t i, std::size_t n) {
        return edge == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(edge - 1);
    };
    for (std::size_t r = 0; r < edge; ++r) {
        const double y = coord(r, src.rows);
        const auto y0 = std::min(static_cast<std::size_t>(y), src.rows - 1);
        const auto y1 = std::min(y0 + 1, src.rows - 1);
        const double wy = y - static_cast<double>(y0);
        for (std::size_t c = 0; c < edge; ++c) {
            const double x = coord(c, src.cols);
            const auto x0 = std::min(static_cast<std::size_t>(x), src.cols - 1);
            const auto x1 = std::min(x0 + 1, src.cols - 1);
            const double wx = x - static_cast<double>(x0);
            const double top = src(y0, x0) * (1 - wx) + src(y0, x1) * wx;
            const double bot = src(y1, x0) * (1 - wx) + src(y1, x1) * wx;
            out(r, c) = static_cast<float>(top * (1 - wy) + bot * wy);
        }
    }
    return out;
}

/// Box average when the edge shrinks by an integer factor, bilinear
/// otherwise.
inline Image resize_image(const Image& src, std::size_t edge) {
    if (src.rows == edge && src.cols == edge) return src;
    if (src.rows == src.cols && src.rows % edge == 0) {
        Image out(edge, edge);
        const std::size_t f = src.rows / edge;
        const double inv = 1.0 / static_cast<double>(f * f);
        for (std::size_t r = 0; r < edge; ++r)
            for (std::size_t c = 0; c < edge; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < f; ++i)
                    for (std::size_t j = 0; j < f; ++j) acc += src(r * f + i, c * f + j);
                out(r, c) = static_cast<float>(acc * inv);
            }
        return out;
    }
    return resize_bilinear(src, edge);
}

} // namespace detail

/// Deterministic stand-in for a frozen 2D foundation model: each T x T patch
/// u is mapped to tanh(G u) with G ~ N(0, 1/T^2) drawn once from the seed.
class SyntheticEncoder {
public:
    explicit SyntheticEncoder(EncoderSpec spec) : spec_(std::move(spec)), id_(spec_.id_hash()) {
        if (spec_.kind != EncoderKind::Synthetic)
            throw Error(ErrorCode::InvalidArgument, "SyntheticEncoder needs a Synthetic spec");
        if (spec_.patch_size == 0 || spec_.token_dim == 0)
            throw Error(ErrorCode::InvalidArgument, "patch size and token dim must be positive");
        const std::size_t in = std::size_t{spec_.patch_size} * spec_.patch_size;
        const double scale = 1.0 / static_cast<double>(spec_.patch_size);
        const CounterRng rng(spec_.seed, RngStream::EncoderWeights);
        weights_.resize(static_cast<Eigen::Index>(spec_.token_dim), static_cast<Eigen::Index>(in));
        for (Eigen::Index r = 0; r < weights_.rows(); ++r)
            for (Eigen::Index c = 0; c < weights_.cols(); ++c)
                weights_(r, c) = static_cast<float>(scale * rng.normal(static_cast<std::uint64_t>(r) * in + c));
    }

    const EncoderSpec& spec() const { return spec_; }
    const Digest& id() const { return id_; }
    const Eigen::MatrixXf& weights() const { return weights_; }

    /// p*p x d tokens, patch-major.
    std::vector<float> encode_slice(const Image& slice) const {
        if (slice.rows != slice.cols) throw Error(ErrorCode::ShapeMismatch, "slices must be square");
        const Image img = spec_.input_resolution > 0 ? detail::resize_image(slice, spec_.input_resolution) : slice;
        const std::uint32_t t = spec_.patch_size;
        const std::uint32_t p = spec_.grid_for(static_cast<std::uint32_t>(slice.rows));

        Eigen::MatrixXf patches(static_cast<Eigen::Index>(t) * t, static_cast<Eigen::Index>(p) * p);
        for (std::uint32_t pr = 0; pr < p; ++pr)
            for (std::uint32_t pc = 0; pc < p; ++pc) {
                const Eigen::Index col = static_cast<Eigen::Index>(pr) * p + pc;
                for (std::uint32_t i = 0; i < t; ++i)
                    for (std::uint32_t j = 0; j < t; ++j)
                        patches(static_cast<Eigen::Index>(i) * t + j, col) = img(pr * t + i, pc * t + j);
            }
        const Eigen::MatrixXf pre = weights_ * patches;  // d x p^2
        std::vector<float> out(static_cast<std::size_t>(pre.size()));
        for (Eigen::Index q = 0; q < pre.cols(); ++q)
            for (Eigen::Index ch = 0; ch < pre.rows(); ++ch)
                out[static_cast<std::size_t>(q * pre.rows() + ch)] = std::tanh(pre(ch, q));
        return out;
    }

    /// Token j comes from slice j; any worker count gives identical output.
    TokenTensor encode_stack(const SliceStack& stack, unsigned threads = 1) const {
        if (stack.slices.empty()) throw Error(ErrorCode::ShapeMismatch, "empty slice stack");
        const auto edge = static_cast<std::uint32_t>(stack.slices.front().rows);
        const std::uint32_t p = spec_.grid_for(edge);
        TokenTensor t(stack.axis, static_cast<std::uint32_t>(stack.slices.size()), p, spec_.token_dim, id_);
        parallel_for(stack.slices.size(), threads, [&](std::size_t j) {
            const auto tok = encode_slice(stack.slices[j]);
            std::copy(tok.begin(), tok.end(), t.slice(j).begin());
        });
        return t;
    }

    TokenTensor encode_volume_axis(const Volume& v, Axis axis, unsigned threads = 1) const {
        return encode_stack(slice_stack(v, axis), threads);
    }

private:
    EncoderSpec spec_;
    Digest id_;
    Eigen::MatrixXf weights_;
};

// RTOK layout: 32-byte fixed header, 48-byte extended header, then payload.
inline constexpr std::uint16_t kRtokVersion = 1;
inline constexpr std::size_t kRtokFixedHeader = 32;
inline constexpr std::size_t kRtokExtendedHeader = 48;

inline binio::Bytes encode_rtok(const TokenTensor& t) {
    binio::Writer w;
    w.put_magic("RTOK");
    w.put<std::uint16_t>(kRtokVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.axis));
    w.put<std::uint8_t>(0);
    w.put(t.slices);
    w.put(t.grid);
    w.put(t.dim);
    w.put<std::uint32_t>(kRtokExtendedHeader);
    w.put_zeros(8);
    w.put_bytes(t.encoder_id);
    w.put<std::uint64_t>(t.values.size());
    w.put_zeros(8);
    w.put_floats(t.values);
    return std::move(w.bytes());
}

inline void write_tokens(const TokenTensor& t, const std::filesystem::path& path) {
    binio::write_file(path, encode_rtok(t));
}

inline TokenTensor decode_rtok(std::span<const std::uint8_t> bytes, const std::string& origin = "RTOK buffer") {
    binio::Reader r(bytes);
    if (!r.magic_is("RTOK")) throw Error(ErrorCode::MagicMismatch, origin + " is not RTOK");
    try {
        const auto version = r.get<std::uint16_t>();
        if (version != kRtokVersion) throw Error(ErrorCode::UnsupportedVersion, "RTOK version " + std::to_string(version));
        const auto axis_raw = r.get<std::uint8_t>();
        if (axis_raw > 2) throw Error(ErrorCode::HeaderInconsistent, "RTOK axis " + std::to_string(axis_raw));
        r.skip(1);
        TokenTensor t;
        t.axis = static_cast<Axis>(axis_raw);
        t.slices = r.get<std::uint32_t>();
        t.grid = r.get<std::uint32_t>();
        t.dim = r.get<std::uint32_t>();
        const auto ext = r.get<std::uint32_t>();
        if (ext != kRtokExtendedHeader) throw Error(ErrorCode::HeaderInconsistent, "RTOK extended header size");
        r.skip(8);
        const auto id = r.get_bytes(32);
        std::copy(id.begin(), id.end(), t.encoder_id.begin());
        const auto count = r.get<std::uint64_t>();
        r.skip(8);
        const std::size_t expected = std::size_t{t.slices} * t.grid * t.grid * t.dim;
        if (count != expected || r.remaining() != expected * 4)
            throw Error(ErrorCode::HeaderInconsistent, origin + ": payload holds " + std::to_string(r.remaining()) +
                                                           " bytes, header implies " + std::to_string(expected * 4));
        t.values.resize(expected);
        std::memcpy(t.values.data(), r.rest().data(), expected * 4);
        for (float v : t.values)
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, origin + " holds a non-finite token");
        return t;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TruncatedPayload) throw Error(ErrorCode::HeaderInconsistent, origin + ": short header");
        throw;
    }
}

inline TokenTensor load_tokens(const std::filesystem::path& path) {
    return decode_rtok(binio::read_file(path), path.string());
}

} // namespace raptor
