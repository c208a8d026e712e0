#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace raptor {

enum class ErrorCode {
    MagicMismatch,
    TruncatedPayload,
    NonFinite,
    NonCubic,
    ShapeMismatch,
    HeaderInconsistent,
    UnsupportedVersion,
    DimMismatch,
    AxisMissing,
    InsufficientSamples,
    DegeneratePair,
    EmptyCluster,
    TooFewSamples,
    SingleClass,
    NoPositives,
    IdxParseError,
    UnknownDigit,
    OutOfBounds,
    DuplicateId,
    IdMismatch,
    IoFailure,
    InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonCubic: return "NonCubic";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::HeaderInconsistent: return "HeaderInconsistent";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::AxisMissing: return "AxisMissing";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegeneratePair: return "DegeneratePair";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::IdxParseError: return "IdxParseError";
    case ErrorCode::UnknownDigit: return "UnknownDigit";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` carries
/// the machine-checkable category, `what()` the human-readable context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Slicing directions, numbered by the voxel-array index they hold fixed.
enum class Axis : std::uint8_t { Axial = 0, Coronal = 1, Sagittal = 2 };

inline constexpr std::array<Axis, 3> kAllAxes{Axis::Axial, Axis::Coronal, Axis::Sagittal};

constexpr std::size_t axis_index(Axis a) { return static_cast<std::size_t>(a); }

constexpr char axis_letter(Axis a) {
    switch (a) {
    case Axis::Axial: return 'a';
    case Axis::Coronal: return 'c';
    case Axis::Sagittal: return 's';
    }
    return '?';
}

inline Axis axis_from_index(std::size_t i) {
    if (i > 2) throw Error(ErrorCode::InvalidArgument, "axis index " + std::to_string(i));
    return static_cast<Axis>(i);
}

/// Bit i set <=> axis i selected.
class AxisMask {
public:
    constexpr AxisMask() = default;
    constexpr explicit AxisMask(std::uint8_t bits) : bits_(bits & 0x7u) {}

    static constexpr AxisMask all() { return AxisMask(0x7); }
    static constexpr AxisMask single(Axis a) { return AxisMask(std::uint8_t(1u << axis_index(a))); }

    /// Parses letter combos such as "acs", "a", "cs".
    static AxisMask parse(std::string_view letters) {
        std::uint8_t bits = 0;
        for (char ch : letters) {
            switch (ch) {
            case 'a': case 'A': bits |= 1; break;
            case 'c': case 'C': bits |= 2; break;
            case 's': case 'S': bits |= 4; break;
            default: throw Error(ErrorCode::InvalidArgument, std::string("unknown axis letter '") + ch + "'");
            }
        }
        if (bits == 0) throw Error(ErrorCode::AxisMissing, "empty axis selection");
        return AxisMask(bits);
    }

    constexpr bool has(Axis a) const { return (bits_ >> axis_index(a)) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr int count() const { return std::popcount(static_cast<unsigned>(bits_)); }
    constexpr std::uint8_t bits() const { return bits_; }

    std::string letters() const {
        std::string out;
        for (Axis a : kAllAxes)
            if (has(a)) out.push_back(axis_letter(a));
        return out;
    }

    friend constexpr bool operator==(AxisMask, AxisMask) = default;

private:
    std::uint8_t bits_ = 0;
};

using Digest = std::array<std::uint8_t, 32>;

inline std::string to_hex(const Digest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

} // namespace raptor
