#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hwf/common.hpp"

namespace hwf {

// 8-bit or real-valued image on the 0..255 scale, gray or RGB, interleaved
// row-major: data[(y*width + x)*channels + c]. Codec reads produce integer
// values; processing may leave non-integer (and out-of-range) reals, which
// are clamped and rounded only on 8-bit export.
struct ImageBuffer {
    int64_t width = 0;
    int64_t height = 0;
    int64_t channels = 1;  // 1 = gray, 3 = RGB
    std::vector<double> data;

    int64_t pixels() const { return width * height; }
    int64_t size() const { return width * height * channels; }
    double& at(int64_t y, int64_t x, int64_t c) { return data[(y * width + x) * channels + c]; }
    double at(int64_t y, int64_t x, int64_t c) const { return data[(y * width + x) * channels + c]; }

    static ImageBuffer make(int64_t width, int64_t height, int64_t channels) {
        if (width < 1 || height < 1 || (channels != 1 && channels != 3))
            throw ConfigError("ImageBuffer: bad dimensions");
        ImageBuffer img;
        img.width = width;
        img.height = height;
        img.channels = channels;
        img.data.assign(static_cast<size_t>(width * height * channels), 0.0);
        return img;
    }
};

// PGM (P5) and PPM (P6) with maxval <= 255. Parse errors carry the byte
// offset of the offending field; 16-bit files are rejected.
ImageBuffer read_image(const std::string& path);
ImageBuffer decode_pnm(const std::vector<uint8_t>& bytes, const std::string& origin);
void write_image(const ImageBuffer& img, const std::string& path);
std::vector<uint8_t> encode_pnm(const ImageBuffer& img);

// Sorted file names (not paths) of the PGM/PPM images in a directory.
std::vector<std::string> list_pnm_files(const std::string& dir);

// Square crop of size `side` at (y0, x0).
ImageBuffer crop(const ImageBuffer& img, int64_t y0, int64_t x0, int64_t side);

// One of the eight dihedral transforms; index 0 is the identity, 1..3 are
// rotations, 4..7 reflections. Transforms that would swap width and height
// require a square image.
ImageBuffer augment(const ImageBuffer& patch, int index);

}  // namespace hwf
