#pragma once

#include "raptor/core.hpp"

#include <openssl/evp.h>

#include <span>
#include <string_view>

namespace raptor {

/// SHA-256 over an arbitrary byte string.
inline Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
        throw Error(ErrorCode::IoFailure, "EVP_Digest(sha256) failed");
    return out;
}

inline Digest sha256(std::string_view s) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

} // namespace raptor
