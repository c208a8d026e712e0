#include "raptor/store.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace raptor;
using raptor::testing::TempDir;

namespace {

EmbeddingSet make_set(std::size_t n, std::uint32_t k = 3, std::uint32_t grid = 2, std::uint64_t seed = 5,
                      const std::string& prefix = "v") {
    EmbeddingSet s;
    const CounterRng rng(seed, RngStream::Test);
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Embedding e;
        e.meta.k = k;
        e.meta.grid = grid;
        e.meta.dim = 16;
        e.meta.seed = 42;
        e.meta.axes = AxisMask::all();
        e.meta.encoder_id[0] = 7;
        e.meta.volume_id = prefix + std::to_string(i);
        e.vector.resize(embedding_length(e.meta.axes, k, grid));
        for (auto& x : e.vector) x = static_cast<float>(rng.normal(idx++));
        s.add(e);
    }
    return s;
}

ErrorCode decode_code(const binio::Bytes& b) {
    try {
        decode_remb(b);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Remb, RoundTripPreservesEverything) {
    const auto s = make_set(4);
    const auto back = decode_remb(encode_remb(s));
    EXPECT_TRUE(back.header.compatible(s.header));
    EXPECT_EQ(back.header.count, 4u);
    EXPECT_EQ(back.ids, s.ids);
    EXPECT_EQ(back.rows, s.rows);
}

TEST(Remb, ByteCountMatchesLayout) {
    const auto s = make_set(3);
    std::size_t want = 64 + 4;
    for (const auto& id : s.ids) want += 4 + id.size();
    want += 3 * s.header.row_length() * 4;
    EXPECT_EQ(encode_remb(s).size(), want);
}

TEST(Remb, HeaderFieldOffsets) {
    const auto b = encode_remb(make_set(2));
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "REMB");
    EXPECT_EQ(b[4], 1);
    EXPECT_EQ(b[7], 7);
    EXPECT_EQ(b[8], 3);
    EXPECT_EQ(b[12], 2);
    EXPECT_EQ(b[16], 16);
    EXPECT_EQ(b[20], 42);
    EXPECT_EQ(b[28], 2);
    EXPECT_EQ(b[32], 7);
}

TEST(Remb, CorruptionMapsToCodes) {
    const auto good = encode_remb(make_set(2));
    auto b = good;
    b[0] = 'X';
    EXPECT_EQ(decode_code(b), ErrorCode::MagicMismatch);
    b = good;
    b[4] = 9;
    EXPECT_EQ(decode_code(b), ErrorCode::UnsupportedVersion);
    b = good;
    b[28] = 3;
    EXPECT_EQ(decode_code(b), ErrorCode::HeaderInconsistent);
    b = good;
    b.pop_back();
    EXPECT_EQ(decode_code(b), ErrorCode::HeaderInconsistent);
    b = good;
    b[64 + 4 + 2 + 4 + 1] = '0';  // "v1" becomes "v0"
    EXPECT_EQ(decode_code(b), ErrorCode::DuplicateId);
}

TEST(Remb, AddRejectsMismatchedProvenance) {
    auto s = make_set(1);
    auto other = make_set(1, 4);
    Embedding e;
    e.meta = EmbeddingMeta{4, 2, 16, 42, ScaleMode::InvSqrtK, AxisMask::all(), s.header.encoder_id, kPrngId, "x"};
    e.vector.resize(embedding_length(AxisMask::all(), 4, 2));
    EXPECT_THROW(s.add(e), Error);
    EXPECT_THROW(encode_remb([&] {
                     auto d = make_set(2);
                     d.ids[1] = d.ids[0];
                     return d;
                 }()),
                 Error);
}

TEST(Remb, MergeAndRowAccess) {
    TempDir dir("remb");
    const auto a = make_set(2, 3, 2, 5, "a"), b = make_set(3, 3, 2, 6, "b");
    const auto m = merge_embeddings(a, b);
    EXPECT_EQ(m.count(), 5u);
    EXPECT_EQ(m.header.count, 5u);
    const auto path = dir / "m.remb";
    const auto bytes = write_embeddings(m, path);
    EXPECT_EQ(bytes, std::filesystem::file_size(path));
    for (std::size_t i = 0; i < 5; ++i) {
        const auto row = read_embedding_row(path, i);
        const auto want = m.row(i);
        ASSERT_TRUE(std::equal(row.begin(), row.end(), want.begin(), want.end()));
    }
    EXPECT_THROW(read_embedding_row(path, 5), Error);
    EXPECT_THROW(merge_embeddings(a, make_set(1, 4, 2, 5, "c")), Error);
    EXPECT_THROW(merge_embeddings(a, a), Error);
}

TEST(Footprint, RatioUsesGzipOfVolumeBytes) {
    const binio::Bytes zeros(100000, 0);
    const auto gz = binio::gzip_compress(zeros, 6);
    EXPECT_DOUBLE_EQ(footprint_ratio(40, zeros), 40.0 / static_cast<double>(gz.size()));
}
