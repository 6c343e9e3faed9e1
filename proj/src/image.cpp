#include "irbseg/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "irbseg/errors.hpp"

namespace irbseg {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadState() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteState() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Decodes any PNG to 8-bit with the requested channel count (1 or 3).
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int want_channels, int& height, int& width) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw LoadError("cannot open file: " + path.string());

    png_byte header[8];
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw LoadError("not a PNG file: " + path.string());

    PngReadState s;
    s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!s.png) throw LoadError("png_create_read_struct failed");
    s.info = png_create_info_struct(s.png);
    if (!s.info) throw LoadError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(s.png))) throw LoadError("PNG decode error: " + path.string());

    png_init_io(s.png, file.get());
    png_set_sig_bytes(s.png, 8);
    png_read_info(s.png, s.info);

    width = static_cast<int>(png_get_image_width(s.png, s.info));
    height = static_cast<int>(png_get_image_height(s.png, s.info));
    const png_byte color_type = png_get_color_type(s.png, s.info);
    const png_byte bit_depth = png_get_bit_depth(s.png, s.info);

    if (bit_depth == 16) png_set_strip_16(s.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(s.png);
    if (png_get_valid(s.png, s.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(s.png);
    png_set_strip_alpha(s.png);
    if (want_channels == 3) {
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(s.png);
    } else {
        if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
            color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(s.png, 1, -1, -1);
    }
    png_read_update_info(s.png, s.info);

    const std::size_t rowbytes = png_get_rowbytes(s.png, s.info);
    if (rowbytes != static_cast<std::size_t>(width) * want_channels)
        throw LoadError("unexpected channel layout in " + path.string());

    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(height) * rowbytes);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * rowbytes;
    png_read_image(s.png, rows.data());
    png_read_end(s.png, nullptr);
    return pixels;
}

void write_png(const std::filesystem::path& path, const std::uint8_t* data, int height, int width, int channels) {
    if (height <= 0 || width <= 0) throw IoError("refusing to write empty raster: " + path.string());
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open file for writing: " + path.string());

    PngWriteState s;
    s.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!s.png) throw IoError("png_create_write_struct failed");
    s.info = png_create_info_struct(s.png);
    if (!s.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(s.png))) throw IoError("PNG encode error: " + path.string());

    png_init_io(s.png, file.get());
    png_set_IHDR(s.png, s.info, width, height, 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(s.png, s.info);

    std::vector<png_bytep> rows(height);
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * rowbytes);
    png_write_image(s.png, rows.data());
    png_write_end(s.png, nullptr);
}

}  // namespace

Image8 read_image_rgb8(const std::filesystem::path& path) {
    Image8 img;
    img.data = read_png(path, 3, img.height, img.width);
    return img;
}

Mask8 read_mask_gray8(const std::filesystem::path& path) {
    Mask8 mask;
    mask.data = read_png(path, 1, mask.height, mask.width);
    return mask;
}

void write_image_rgb8(const std::filesystem::path& path, const Image8& image) {
    write_png(path, image.data.data(), image.height, image.width, 3);
}

void write_mask_gray8(const std::filesystem::path& path, const Mask8& mask) {
    write_png(path, mask.data.data(), mask.height, mask.width, 1);
}

Image8 resize_bilinear(const Image8& image, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) throw ArgumentError("resize_bilinear: output size must be positive");
    if (image.height == out_height && image.width == out_width) return image;
    Image8 out(out_height, out_width);
    const double sy = static_cast<double>(image.height) / out_height;
    const double sx = static_cast<double>(image.width) / out_width;
    for (int y = 0; y < out_height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        int y0 = static_cast<int>(fy);
        int y1 = y0 + 1 < image.height ? y0 + 1 : image.height - 1;
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            int x0 = static_cast<int>(fx);
            int x1 = x0 + 1 < image.width ? x0 + 1 : image.width - 1;
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
                const double bot = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
                const double v = top * (1.0 - wy) + bot * wy;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v < 0 ? 0 : (v > 255 ? 255 : v)));
            }
        }
    }
    return out;
}

Mask8 resize_nearest(const Mask8& mask, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) throw ArgumentError("resize_nearest: output size must be positive");
    if (mask.height == out_height && mask.width == out_width) return mask;
    Mask8 out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        int sy = static_cast<int>((y + 0.5) * mask.height / out_height);
        if (sy >= mask.height) sy = mask.height - 1;
        for (int x = 0; x < out_width; ++x) {
            int sx = static_cast<int>((x + 0.5) * mask.width / out_width);
            if (sx >= mask.width) sx = mask.width - 1;
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

}  // namespace irbseg
