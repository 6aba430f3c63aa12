#include "tmpose/error.hpp"
#include "tmpose/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace tmpose {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Writes a grayscale PNG from big-endian sample rows.
void write_png(const std::string& path, int width, int height, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * (bit_depth / 8);
    for (int row = 0; row < height; ++row) {
        png_write_row(png, bytes.data() + row * stride);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads a grayscale PNG, returning big-endian sample rows.
std::vector<std::uint8_t> read_png(const std::string& path, int expected_depth, int& width, int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw CorruptFile("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw CorruptFile("PNG decode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != expected_depth) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw CorruptFile("unexpected PNG layout (want " + std::to_string(expected_depth) +
                          "-bit grayscale): " + path);
    }
    const std::size_t stride = static_cast<std::size_t>(width) * (depth / 8);
    std::vector<std::uint8_t> bytes(stride * height);
    for (int row = 0; row < height; ++row) png_read_row(png, bytes.data() + row * stride, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return bytes;
}

}  // namespace

void write_depth_png(const std::string& path, const DepthImage& depth) {
    std::vector<std::uint8_t> bytes(depth.size() * 2);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double mm = depth[i] > 0.0 ? std::min(65535.0, std::round(depth[i] * 1000.0)) : 0.0;
        const auto v = static_cast<std::uint16_t>(mm);
        bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
    write_png(path, depth.width(), depth.height(), 16, bytes);
}

DepthImage read_depth_png(const std::string& path) {
    int w = 0, h = 0;
    const auto bytes = read_png(path, 16, w, h);
    DepthImage out(w, h, 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const unsigned v = (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
        out[i] = v / 1000.0;
    }
    return out;
}

void write_gray_png(const std::string& path, const GrayImage& image) {
    write_png(path, image.width(), image.height(), 8, image.data());
}

GrayImage read_gray_png(const std::string& path) {
    int w = 0, h = 0;
    auto bytes = read_png(path, 8, w, h);
    GrayImage out(w, h);
    out.data() = std::move(bytes);
    return out;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    GrayImage img(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 255 : 0;
    write_gray_png(path, img);
}

Mask read_mask_png(const std::string& path) {
    GrayImage img = read_gray_png(path);
    Mask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) m[i] = img[i] ? 1 : 0;
    return m;
}

}  // namespace tmpose
