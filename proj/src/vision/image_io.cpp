#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "neurotrail/bytes.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/image.hpp"

namespace neurotrail {

std::vector<uint8_t> encode_raw_frame(const RgbImage& img) {
    if (img.width <= 0 || img.height <= 0 || img.width > 65535 || img.height > 65535)
        throw ShapeError("raw frame dimensions must fit u16");
    ByteWriter w;
    w.u16(static_cast<uint16_t>(img.width));
    w.u16(static_cast<uint16_t>(img.height));
    w.u32(0);
    w.bytes(img.pixels);
    return w.take();
}

RgbImage decode_raw_frame(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    RgbImage img;
    img.width = r.u16();
    img.height = r.u16();
    r.u32();
    const size_t n = static_cast<size_t>(img.width) * img.height * 3;
    if (r.remaining() != n)
        throw ParseError("raw frame payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                         std::to_string(n));
    auto px = r.bytes(n);
    img.pixels.assign(px.begin(), px.end());
    return img;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const RgbImage& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path);
    }
    png_init_io(png, fp.get());
    // Frames are small and written in bulk; favour speed over size.
    png_set_compression_level(png, 1);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialisation failed");
    }
    RgbImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("invalid PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
    for (int y = 0; y < img.height; ++y) png_read_row(png, img.at(0, y), nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

RgbImage read_frame_file(const std::string& path) {
    auto bytes = read_file_bytes(path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0) return read_png(path);
    return decode_raw_frame(bytes);
}

}  // namespace neurotrail
