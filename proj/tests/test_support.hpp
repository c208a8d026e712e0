#pragma once

#include "raptor/encoder.hpp"
#include "raptor/rng.hpp"
#include "raptor/volume.hpp"

#include <filesystem>
#include <string>
#include <unistd.h>

namespace raptor::testing {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("raptor_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Volume random_volume(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::uint64_t seed,
                            std::string id = "vol") {
    const CounterRng rng(seed, RngStream::Test);
    std::vector<float> v(std::size_t{x} * y * z);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.uniform(i));
    return Volume(std::move(id), Dims{x, y, z}, std::move(v));
}

inline Volume random_cube(std::uint32_t n, std::uint64_t seed, std::string id = "vol") {
    return random_volume(n, n, n, seed, std::move(id));
}

inline TokenTensor random_tensor(Axis axis, std::uint32_t slices, std::uint32_t grid, std::uint32_t dim,
                                 std::uint64_t seed) {
    const CounterRng rng(seed, RngStream::Test);
    TokenTensor t(axis, slices, grid, dim, {});
    for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = static_cast<float>(rng.normal(i));
    return t;
}

} // namespace raptor::testing
