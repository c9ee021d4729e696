#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace neurotrail {

// Interleaved RGB8 image, row-major.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

    uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
    const uint8_t* at(int x, int y) const { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Raw frame container: w u16, h u16, reserved u32 (little-endian), then RGB8
// row-major.
std::vector<uint8_t> encode_raw_frame(const RgbImage& img);
RgbImage decode_raw_frame(std::span<const uint8_t> bytes);

void write_png(const std::string& path, const RgbImage& img);
RgbImage read_png(const std::string& path);

// Loads either container, chosen by content (PNG signature vs raw header).
RgbImage read_frame_file(const std::string& path);

}  // namespace neurotrail
