#include "hwf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace hwf {

namespace {

struct PnmReader {
    const std::vector<uint8_t>& bytes;
    const std::string& origin;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(origin + ": " + what + " at byte " + std::to_string(pos));
    }

    bool eof() const { return pos >= bytes.size(); }
    uint8_t peek() const { return bytes[pos]; }

    // Whitespace and '#' comments are allowed between header fields.
    void skip_space() {
        while (!eof()) {
            const uint8_t c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int64_t read_int(const char* field) {
        skip_space();
        if (eof() || peek() < '0' || peek() > '9') fail(std::string("expected ") + field);
        int64_t v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > 1'000'000'000) fail(std::string("absurd value for ") + field);
            ++pos;
        }
        return v;
    }
};

}  // namespace

ImageBuffer decode_pnm(const std::vector<uint8_t>& bytes, const std::string& origin) {
    PnmReader r{bytes, origin};
    if (bytes.size() < 2 || bytes[0] != 'P') r.fail("not a PNM file (bad magic)");
    int64_t channels;
    if (bytes[1] == '5')
        channels = 1;
    else if (bytes[1] == '6')
        channels = 3;
    else
        r.fail("unsupported PNM type (only P5/P6)");
    r.pos = 2;

    const int64_t width = r.read_int("width");
    const int64_t height = r.read_int("height");
    const int64_t maxval = r.read_int("maxval");
    if (width < 1 || height < 1) r.fail("non-positive dimensions");
    if (maxval > 255) r.fail("unsupported depth (maxval " + std::to_string(maxval) + " > 255)");
    if (maxval < 1) r.fail("invalid maxval");
    // exactly one whitespace byte separates the header from the payload
    if (r.eof() || (r.peek() != '\n' && r.peek() != ' ' && r.peek() != '\t' && r.peek() != '\r'))
        r.fail("missing separator before payload");
    ++r.pos;

    const size_t need = static_cast<size_t>(width * height * channels);
    if (bytes.size() - r.pos < need)
        throw DataError(origin + ": truncated payload, have " +
                        std::to_string(bytes.size() - r.pos) + " of " + std::to_string(need) +
                        " bytes at byte " + std::to_string(r.pos));

    ImageBuffer img = ImageBuffer::make(width, height, channels);
    for (size_t i = 0; i < need; ++i) img.data[i] = static_cast<double>(bytes[r.pos + i]);
    return img;
}

ImageBuffer read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes, path);
}

std::vector<uint8_t> encode_pnm(const ImageBuffer& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ConfigError("encode_pnm: image must be gray or RGB");
    char header[64];
    std::snprintf(header, sizeof(header), "P%c\n%lld %lld\n255\n", img.channels == 1 ? '5' : '6',
                  static_cast<long long>(img.width), static_cast<long long>(img.height));
    std::vector<uint8_t> bytes(header, header + std::string(header).size());
    bytes.reserve(bytes.size() + static_cast<size_t>(img.size()));
    for (double v : img.data) {
        const double clamped = std::min(255.0, std::max(0.0, v));
        bytes.push_back(static_cast<uint8_t>(std::lround(clamped)));
    }
    return bytes;
}

void write_image(const ImageBuffer& img, const std::string& path) {
    const std::vector<uint8_t> bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write: " + path);
}

ImageBuffer crop(const ImageBuffer& img, int64_t y0, int64_t x0, int64_t side) {
    if (y0 < 0 || x0 < 0 || y0 + side > img.height || x0 + side > img.width)
        throw UsageError("crop: rectangle outside image");
    ImageBuffer out = ImageBuffer::make(side, side, img.channels);
    for (int64_t y = 0; y < side; ++y)
        for (int64_t x = 0; x < side; ++x)
            for (int64_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

std::vector<std::string> list_pnm_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

ImageBuffer augment(const ImageBuffer& patch, int index) {
    if (index < 0 || index > 7) throw UsageError("augment: index must be 0..7");
    if (index == 0) return patch;
    const int64_t h = patch.height, w = patch.width;
    const bool swaps = index == 1 || index == 3 || index == 6 || index == 7;
    if (swaps && h != w) throw UsageError("augment: rotations/transposes need a square patch");

    ImageBuffer out = ImageBuffer::make(w, h, patch.channels);
    const int64_t n = h;  // square when swaps is true
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            int64_t sy = y, sx = x;
            switch (index) {
                case 1: sy = x; sx = n - 1 - y; break;          // rotate 90
                case 2: sy = h - 1 - y; sx = w - 1 - x; break;  // rotate 180
                case 3: sy = n - 1 - x; sx = y; break;          // rotate 270
                case 4: sy = y; sx = w - 1 - x; break;          // mirror horizontally
                case 5: sy = h - 1 - y; sx = x; break;          // mirror vertically
                case 6: sy = x; sx = y; break;                  // transpose
                case 7: sy = n - 1 - x; sx = n - 1 - y; break;  // anti-transpose
            }
            for (int64_t c = 0; c < patch.channels; ++c) out.at(y, x, c) = patch.at(sy, sx, c);
        }
    return out;
}

}  // namespace hwf
