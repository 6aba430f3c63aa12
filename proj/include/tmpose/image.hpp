#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace tmpose {

/// Row-major single-channel image.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool contains(int row, int col) const {
        return row >= 0 && col >= 0 && row < height_ && col < width_;
    }

    T& at(int row, int col) {
        assert(contains(row, col));
        return data_[static_cast<std::size_t>(row) * width_ + col];
    }
    const T& at(int row, int col) const {
        assert(contains(row, col));
        return data_[static_cast<std::size_t>(row) * width_ + col];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Binary mask, 0 = background, 1 = covered.
using Mask = Image<std::uint8_t>;
/// 8-bit intensity.
using GrayImage = Image<std::uint8_t>;

/// Pixel coordinate; fractional values are allowed for cluster means.
struct PixelPos {
    double row = 0.0;
    double col = 0.0;
    bool operator==(const PixelPos&) const = default;
};

}  // namespace tmpose
