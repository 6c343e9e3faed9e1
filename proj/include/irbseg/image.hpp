#ifndef IRBSEG_IMAGE_HPP
#define IRBSEG_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace irbseg {

/// Interleaved 8-bit RGB raster, row-major.
struct Image8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // height * width * 3

    Image8() = default;
    Image8(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
    bool operator==(const Image8&) const = default;
};

/// Single-channel 8-bit raster; pixel value = class id when used as a mask.
struct Mask8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // height * width

    Mask8() = default;
    Mask8(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
    bool operator==(const Mask8&) const = default;
};

/// PNG I/O. Images are 8-bit RGB, masks 8-bit grayscale with value = class id
/// (no palette semantics). Throws LoadError / IoError.
Image8 read_image_rgb8(const std::filesystem::path& path);
Mask8 read_mask_gray8(const std::filesystem::path& path);
void write_image_rgb8(const std::filesystem::path& path, const Image8& image);
void write_mask_gray8(const std::filesystem::path& path, const Mask8& mask);

Image8 resize_bilinear(const Image8& image, int out_height, int out_width);
Mask8 resize_nearest(const Mask8& mask, int out_height, int out_width);

}  // namespace irbseg

#endif  // IRBSEG_IMAGE_HPP
