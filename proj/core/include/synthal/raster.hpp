#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "synthal/error.hpp"

namespace synthal {

/// Dense row-major H x W x Channels grid. The Tag parameter keeps
/// semantically different grids (images, binary masks, soft masks,
/// score maps) from converting into each other.
template <typename T, int Channels, typename Tag>
class Grid {
public:
    using value_type = T;
    static constexpr int kChannels = Channels;

    Grid() = default;

    Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
        if (height < 1 || width < 1) {
            throw InvalidParameter("grid dimensions must be >= 1");
        }
        data_.assign(static_cast<std::size_t>(height) * width * Channels, fill);
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }

    T operator()(int y, int x, int c = 0) const noexcept { return data_[offset(y, x, c)]; }
    T& operator()(int y, int x, int c = 0) noexcept { return data_[offset(y, x, c)]; }

    std::span<T> values() & noexcept { return data_; }
    std::span<const T> values() const& noexcept { return data_; }
    std::span<const T> values() && = delete;

    template <typename G>
    bool same_shape(const G& other) const noexcept {
        return height_ == other.height() && width_ == other.width();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t offset(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

struct RasterTag {};
struct BinaryTag {};
struct SoftTag {};
struct ScoreTag {};

/// RGB image, interleaved channels, every value in [0,1].
using RasterImage = Grid<double, 3, RasterTag>;
/// Instrument / prediction / ground-truth mask with values in {0,1}.
using BinaryMask = Grid<std::uint8_t, 1, BinaryTag>;
/// Real-valued mask in [0,1] (fusion masks).
using SoftMask = Grid<double, 1, SoftTag>;
/// Per-pixel real map (entropy / BALD scores).
using ScoreMap = Grid<double, 1, ScoreTag>;

inline double clamp01(double v) noexcept { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline std::size_t count_foreground(const BinaryMask& m) noexcept {
    std::size_t n = 0;
    for (auto v : m.values()) n += v != 0;
    return n;
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                         "x" + std::to_string(b.width()) + ")");
    }
}

}  // namespace synthal
