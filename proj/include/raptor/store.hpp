#pragma once

#include "raptor/binio.hpp"
#include "raptor/core.hpp"
#include "raptor/reduction.hpp"
#include "raptor/volume.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace raptor {

inline constexpr std::uint16_t kRembVersion = 1;
inline constexpr std::size_t kRembHeaderBytes = 64;

// REMB header, little-endian, 64 bytes:
//   0 "REMB"   4 u16 version   6 u8 scale_mode   7 u8 axes bitmask
//   8 u32 K   12 u16 p   14 u16 prng_id   16 u32 d   20 u64 seed
//  28 u32 count   32 encoder_id[32]
// then the id table (u32 length + bytes per id, closed by a u32 zero) and
// count rows of |axes| * K * p^2 f32 values.
struct RembHeader {
    std::uint16_t version = kRembVersion;
    ScaleMode scale = ScaleMode::InvSqrtK;
    AxisMask axes = AxisMask::all();
    std::uint32_t k = 0;
    std::uint16_t grid = 0;
    std::uint16_t prng_id = kPrngId;
    std::uint32_t dim = 0;
    std::uint64_t seed = 0;
    std::uint32_t count = 0;
    Digest encoder_id{};

    std::size_t row_length() const { return embedding_length(axes, k, grid); }

    /// Everything but the count must agree for two sets to merge.
    bool compatible(const RembHeader& o) const {
        return version == o.version && scale == o.scale && axes == o.axes && k == o.k && grid == o.grid &&
               prng_id == o.prng_id && dim == o.dim && seed == o.seed && encoder_id == o.encoder_id;
    }

    static RembHeader from_meta(const EmbeddingMeta& m) {
        RembHeader h;
        h.scale = m.scale;
        h.axes = m.axes;
        h.k = m.k;
        h.grid = static_cast<std::uint16_t>(m.grid);
        h.prng_id = m.prng_id;
        h.dim = m.dim;
        h.seed = m.seed;
        h.encoder_id = m.encoder_id;
        return h;
    }
};

struct EmbeddingSet {
    RembHeader header;
    std::vector<std::string> ids;
    std::vector<float> rows;  // count x row_length

    std::size_t count() const { return ids.size(); }
    std::span<const float> row(std::size_t i) const {
        const std::size_t len = header.row_length();
        return std::span(rows).subspan(i * len, len);
    }

    void add(const Embedding& e) {
        if (ids.empty() && rows.empty()) {
            header = RembHeader::from_meta(e.meta);
        } else if (!header.compatible(RembHeader::from_meta(e.meta))) {
            throw Error(ErrorCode::HeaderInconsistent, "embedding '" + e.meta.volume_id + "' has different provenance");
        }
        if (e.vector.size() != header.row_length())
            throw Error(ErrorCode::HeaderInconsistent, "embedding length " + std::to_string(e.vector.size()) +
                                                           " != " + std::to_string(header.row_length()));
        ids.push_back(e.meta.volume_id);
        rows.insert(rows.end(), e.vector.begin(), e.vector.end());
        header.count = static_cast<std::uint32_t>(ids.size());
    }
};

namespace detail {

inline void validate_set(const EmbeddingSet& s) {
    if (s.header.k == 0 || s.header.grid == 0 || s.header.dim == 0)
        throw Error(ErrorCode::HeaderInconsistent, "embedding set header has zero K, p or d");
    if (s.rows.size() != s.ids.size() * s.header.row_length())
        throw Error(ErrorCode::HeaderInconsistent, "row storage does not match count x row length");
    std::unordered_set<std::string> seen;
    for (const auto& id : s.ids) {
        if (id.empty()) throw Error(ErrorCode::HeaderInconsistent, "empty embedding id");
        if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "duplicate embedding id '" + id + "'");
    }
}

inline void put_header(binio::Writer& w, const RembHeader& h, std::uint32_t count) {
    w.put_magic("REMB");
    w.put<std::uint16_t>(h.version);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(h.scale));
    w.put<std::uint8_t>(h.axes.bits());
    w.put<std::uint32_t>(h.k);
    w.put<std::uint16_t>(h.grid);
    w.put<std::uint16_t>(h.prng_id);
    w.put<std::uint32_t>(h.dim);
    w.put<std::uint64_t>(h.seed);
    w.put<std::uint32_t>(count);
    w.put_bytes(h.encoder_id);
}

inline RembHeader get_header(binio::Reader& r, const std::string& origin) {
    if (r.remaining() < kRembHeaderBytes) {
        if (r.remaining() >= 4 && !r.magic_is("REMB")) throw Error(ErrorCode::MagicMismatch, origin + " is not REMB");
        throw Error(ErrorCode::HeaderInconsistent, origin + " is shorter than the REMB header");
    }
    if (!r.magic_is("REMB")) throw Error(ErrorCode::MagicMismatch, origin + " is not REMB");
    RembHeader h;
    h.version = r.get<std::uint16_t>();
    if (h.version != kRembVersion)
        throw Error(ErrorCode::UnsupportedVersion, origin + ": REMB version " + std::to_string(h.version));
    const auto scale = r.get<std::uint8_t>();
    const auto axes = r.get<std::uint8_t>();
    if (scale > 1) throw Error(ErrorCode::HeaderInconsistent, origin + ": scale mode " + std::to_string(scale));
    if (axes == 0 || axes > 7) throw Error(ErrorCode::HeaderInconsistent, origin + ": axes mask " + std::to_string(axes));
    h.scale = static_cast<ScaleMode>(scale);
    h.axes = AxisMask(axes);
    h.k = r.get<std::uint32_t>();
    h.grid = r.get<std::uint16_t>();
    h.prng_id = r.get<std::uint16_t>();
    h.dim = r.get<std::uint32_t>();
    h.seed = r.get<std::uint64_t>();
    h.count = r.get<std::uint32_t>();
    const auto id = r.get_bytes(32);
    std::copy(id.begin(), id.end(), h.encoder_id.begin());
    if (h.k == 0 || h.grid == 0 || h.dim == 0)
        throw Error(ErrorCode::HeaderInconsistent, origin + ": zero K, p or d");
    if (h.prng_id != kPrngId)
        throw Error(ErrorCode::HeaderInconsistent, origin + ": unknown prng id " + std::to_string(h.prng_id));
    return h;
}

} // namespace detail

inline binio::Bytes encode_remb(const EmbeddingSet& s) {
    detail::validate_set(s);
    binio::Writer w;
    detail::put_header(w, s.header, static_cast<std::uint32_t>(s.ids.size()));
    for (const auto& id : s.ids) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
        w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(id.data()), id.size()));
    }
    w.put<std::uint32_t>(0);
    w.put_floats(s.rows);
    return std::move(w.bytes());
}

/// Returns the number of bytes written.
inline std::size_t write_embeddings(const EmbeddingSet& s, const std::filesystem::path& path) {
    const auto bytes = encode_remb(s);
    binio::write_file(path, bytes);
    return bytes.size();
}

struct RembIndex {
    RembHeader header;
    std::vector<std::string> ids;
    std::size_t rows_offset = 0;
};

inline RembIndex decode_remb_index(std::span<const std::uint8_t> bytes, const std::string& origin = "REMB buffer") {
    binio::Reader r(bytes);
    RembIndex idx;
    idx.header = detail::get_header(r, origin);
    std::unordered_set<std::string> seen;
    for (;;) {
        if (r.remaining() < 4) throw Error(ErrorCode::HeaderInconsistent, origin + ": id table is not terminated");
        const auto len = r.get<std::uint32_t>();
        if (len == 0) break;
        if (len > r.remaining()) throw Error(ErrorCode::HeaderInconsistent, origin + ": id runs past end of file");
        const auto b = r.get_bytes(len);
        std::string id(b.begin(), b.end());
        if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, origin + ": duplicate id '" + id + "'");
        idx.ids.push_back(std::move(id));
    }
    if (idx.ids.size() != idx.header.count)
        throw Error(ErrorCode::HeaderInconsistent, origin + ": header count " + std::to_string(idx.header.count) +
                                                       " but " + std::to_string(idx.ids.size()) + " ids");
    idx.rows_offset = bytes.size() - r.remaining();
    const std::size_t need = std::size_t{idx.header.count} * idx.header.row_length() * 4;
    if (r.remaining() != need)
        throw Error(ErrorCode::HeaderInconsistent, origin + ": row payload is " + std::to_string(r.remaining()) +
                                                       " bytes, header implies " + std::to_string(need));
    return idx;
}

inline EmbeddingSet decode_remb(std::span<const std::uint8_t> bytes, const std::string& origin = "REMB buffer") {
    auto idx = decode_remb_index(bytes, origin);
    EmbeddingSet s{idx.header, std::move(idx.ids), {}};
    s.rows.resize(std::size_t{s.header.count} * s.header.row_length());
    if (!s.rows.empty()) std::memcpy(s.rows.data(), bytes.data() + idx.rows_offset, s.rows.size() * 4);
    return s;
}

inline EmbeddingSet read_embeddings(const std::filesystem::path& path) {
    return decode_remb(binio::read_file(path), path.string());
}

/// Reads row i by seeking to its offset; the file is not loaded whole.
inline std::vector<float> read_embedding_row(const std::filesystem::path& path, std::size_t i) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    binio::Bytes head(kRembHeaderBytes);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    if (in.gcount() != static_cast<std::streamsize>(head.size()))
        throw Error(ErrorCode::HeaderInconsistent, path.string() + " is shorter than the REMB header");
    binio::Reader hr(head);
    const auto h = detail::get_header(hr, path.string());
    if (i >= h.count) throw Error(ErrorCode::OutOfBounds, "row " + std::to_string(i) + " of " + std::to_string(h.count));
    std::size_t offset = kRembHeaderBytes;
    for (;;) {
        std::uint32_t len = 0;
        in.seekg(static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(&len), 4);
        if (!in) throw Error(ErrorCode::HeaderInconsistent, path.string() + ": id table is not terminated");
        offset += 4 + len;
        if (len == 0) break;
    }
    const std::size_t len = h.row_length();
    std::vector<float> row(len);
    in.seekg(static_cast<std::streamoff>(offset + i * len * 4));
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(len * 4));
    if (!in) throw Error(ErrorCode::TruncatedPayload, path.string() + ": row " + std::to_string(i) + " is truncated");
    return row;
}

/// Concatenation of sets with identical provenance.
inline EmbeddingSet merge_embeddings(const EmbeddingSet& a, const EmbeddingSet& b) {
    if (!a.header.compatible(b.header))
        throw Error(ErrorCode::HeaderInconsistent, "cannot merge embedding sets with different provenance");
    EmbeddingSet out = a;
    out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
    out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
    out.header.count = static_cast<std::uint32_t>(out.ids.size());
    detail::validate_set(out);
    return out;
}

/// Embedding bytes divided by the gzip-compressed size of the raw volume
/// file's voxels.
inline double footprint_ratio(std::size_t embedding_bytes, std::span<const std::uint8_t> volume_bytes,
                              int level = 6) {
    const auto gz = binio::gzip_compress(volume_bytes, level);
    return static_cast<double>(embedding_bytes) / static_cast<double>(gz.size());
}

inline double footprint_ratio(const std::filesystem::path& volume_path, std::span<const float> embedding_row) {
    return footprint_ratio(embedding_row.size_bytes(), binio::read_file(volume_path));
}

/// u8 voxels of an integer-valued volume, x slowest.
inline binio::Bytes volume_u8_bytes(const Volume& v) {
    binio::Bytes out(v.voxels().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::clamp(v.voxels()[i], 0.f, 255.f));
    return out;
}

} // namespace raptor
