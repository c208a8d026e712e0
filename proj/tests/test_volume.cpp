#include "raptor/volume.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace raptor;
using raptor::testing::TempDir;
using raptor::testing::random_cube;
using raptor::testing::random_volume;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected " << to_string(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

} // namespace

TEST(Volume, RejectsBadShapesAndValues) {
    expect_error(ErrorCode::ShapeMismatch, [] { Volume("v", Dims{2, 2, 2}, std::vector<float>(7)); });
    expect_error(ErrorCode::InvalidArgument, [] { Volume("v", Dims{0, 2, 2}, {}); });
    std::vector<float> v(8, 0.f);
    v[3] = std::nanf("");
    expect_error(ErrorCode::NonFinite, [&] { Volume("v", Dims{2, 2, 2}, v); });
}

TEST(Volume, IndexIsXSlowest) {
    const auto v = random_volume(3, 4, 5, 1);
    EXPECT_EQ(v.index(0, 0, 1), 1u);
    EXPECT_EQ(v.index(0, 1, 0), 5u);
    EXPECT_EQ(v.index(1, 0, 0), 20u);
}

// Oracle: slice j holds the plane with the axis index fixed at j and the two
// other indices in ascending order.
TEST(SliceStack, MatchesTripleLoopForEveryAxis) {
    const auto v = random_cube(6, 2);
    for (Axis a : kAllAxes) {
        const auto s = slice_stack(v, a);
        ASSERT_EQ(s.slices.size(), 6u);
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t y = 0; y < 6; ++y)
                for (std::size_t z = 0; z < 6; ++z) {
                    float got = 0;
                    if (a == Axis::Axial) got = s.slices[x](y, z);
                    if (a == Axis::Coronal) got = s.slices[y](x, z);
                    if (a == Axis::Sagittal) got = s.slices[z](x, y);
                    ASSERT_EQ(got, v.at(x, y, z));
                }
    }
}

TEST(SliceStack, RestackInvertsEveryAxis) {
    const auto v = random_cube(5, 3);
    for (Axis a : kAllAxes) {
        const auto back = restack(slice_stack(v, a), "v");
        EXPECT_TRUE(std::equal(back.voxels().begin(), back.voxels().end(), v.voxels().begin()));
    }
}

TEST(SliceStack, NonCubicIsRejected) {
    expect_error(ErrorCode::NonCubic, [] { slice_stack(random_volume(4, 4, 5, 1), Axis::Axial); });
}

TEST(Rvol, RoundTripsF32AndGzip) {
    TempDir dir("rvol");
    const auto v = random_volume(3, 4, 5, 4, "sample");
    for (bool gz : {false, true}) {
        const auto path = dir / (gz ? "sample_gz.rvol" : "sample.rvol");
        write_volume(v, path, VoxelType::F32, gz);
        const auto back = load_volume(path, VolumeFormat::RVOL);
        EXPECT_EQ(back.dims(), v.dims());
        EXPECT_TRUE(std::equal(back.voxels().begin(), back.voxels().end(), v.voxels().begin()));
    }
}

TEST(Rvol, HeaderLayout) {
    const Volume v("v", Dims{2, 3, 4}, std::vector<float>(24, 1.f));
    const auto bytes = encode_rvol(v);
    ASSERT_EQ(bytes.size(), kRvolHeaderBytes + 24 * 4);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RVOL");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[6], 1);  // f32
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[12], 3);
    EXPECT_EQ(bytes[16], 4);
}

TEST(Rvol, U8RoundTripAndValidation) {
    TempDir dir("rvol_u8");
    std::vector<float> vals(8);
    for (int i = 0; i < 8; ++i) vals[i] = static_cast<float>(i * 30);
    const Volume v("u", Dims{2, 2, 2}, vals);
    write_volume(v, dir / "u.rvol", VoxelType::U8);
    const auto back = load_volume(dir / "u.rvol", VolumeFormat::RVOL);
    EXPECT_TRUE(std::equal(back.voxels().begin(), back.voxels().end(), vals.begin()));
    expect_error(ErrorCode::InvalidArgument, [] { encode_rvol(Volume("f", Dims{1, 1, 1}, {0.5f}), VoxelType::U8); });
}

TEST(Rvol, CorruptFilesAreDiagnosed) {
    TempDir dir("rvol_bad");
    const auto v = random_cube(2, 5);
    auto bytes = encode_rvol(v);
    auto bad = bytes;
    bad[0] = 'X';
    binio::write_file(dir / "magic.rvol", bad);
    expect_error(ErrorCode::MagicMismatch, [&] { load_volume(dir / "magic.rvol", VolumeFormat::RVOL); });
    bad = bytes;
    bad[4] = 9;
    binio::write_file(dir / "ver.rvol", bad);
    expect_error(ErrorCode::UnsupportedVersion, [&] { load_volume(dir / "ver.rvol", VolumeFormat::RVOL); });
    bad = bytes;
    bad.resize(bad.size() - 3);
    binio::write_file(dir / "short.rvol", bad);
    expect_error(ErrorCode::TruncatedPayload, [&] { load_volume(dir / "short.rvol", VolumeFormat::RVOL); });
}

TEST(RawU8, InfersCubeEdgeOrUsesGivenExtent) {
    TempDir dir("raw");
    binio::Bytes raw(27);
    for (int i = 0; i < 27; ++i) raw[i] = static_cast<std::uint8_t>(i);
    binio::write_file(dir / "c.raw", raw);
    const auto v = load_volume(dir / "c.raw", VolumeFormat::RAW_U8);
    EXPECT_EQ(v.dims(), (Dims{3, 3, 3}));
    EXPECT_EQ(v.at(1, 2, 0), 15.f);
    EXPECT_EQ(v.id(), "c");
    raw.pop_back();
    binio::write_file(dir / "bad.raw", raw);
    expect_error(ErrorCode::TruncatedPayload, [&] { load_volume(dir / "bad.raw", VolumeFormat::RAW_U8); });
}

TEST(Idx3d, ReadsBigEndianHeaderAndU8Payload) {
    TempDir dir("idx3");
    binio::Bytes b{0, 0, 0x08, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 3};
    for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(10 * i));
    binio::write_file(dir / "v.idx", b);
    const auto v = load_volume(dir / "v.idx", VolumeFormat::IDX3D);
    EXPECT_EQ(v.dims(), (Dims{2, 1, 3}));
    EXPECT_EQ(v.at(1, 0, 2), 50.f);
    b[3] = 2;
    binio::write_file(dir / "bad.idx", b);
    expect_error(ErrorCode::MagicMismatch, [&] { load_volume(dir / "bad.idx", VolumeFormat::IDX3D); });
}

TEST(Normalize, MapsToUnitRangeAndConstantToZero) {
    const auto v = normalize(random_cube(4, 6));
    EXPECT_FLOAT_EQ(v.value_range().first, 0.f);
    EXPECT_FLOAT_EQ(v.value_range().second, 1.f);
    const auto c = normalize(Volume("c", Dims{2, 2, 2}, std::vector<float>(8, 3.f)));
    for (float x : c.voxels()) EXPECT_EQ(x, 0.f);
}

TEST(Resample, SameSizeIsIdentity) {
    const auto v = random_cube(5, 7);
    const auto r = resample(v, 5);
    EXPECT_TRUE(std::equal(r.voxels().begin(), r.voxels().end(), v.voxels().begin()));
}

// Trilinear interpolation with aligned corners reproduces affine ramps.
TEST(Resample, ReproducesLinearRamp) {
    auto ramp = [](double x, double y, double z) { return 1.0 + 2.0 * x + 3.0 * y - 0.5 * z; };
    const Dims src{5, 7, 9};
    std::vector<float> vox(src.count());
    std::size_t o = 0;
    for (std::uint32_t x = 0; x < src.x; ++x)
        for (std::uint32_t y = 0; y < src.y; ++y)
            for (std::uint32_t z = 0; z < src.z; ++z) vox[o++] = static_cast<float>(ramp(x / 4.0, y / 6.0, z / 8.0));
    const auto r = resample(Volume("r", src, vox), 11);
    ASSERT_TRUE(r.is_cubic());
    for (std::uint32_t x = 0; x < 11; ++x)
        for (std::uint32_t y = 0; y < 11; ++y)
            for (std::uint32_t z = 0; z < 11; ++z)
                ASSERT_NEAR(r.at(x, y, z), ramp(x / 10.0, y / 10.0, z / 10.0), 1e-5);
}
