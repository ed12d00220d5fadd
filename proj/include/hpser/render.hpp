#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpser/featuremap.hpp"

namespace hpser {

enum class Colormap { grayscale, heat };

struct Image {
    size_t width = 0;
    size_t height = 0;
    size_t channels = 1; // 1 = gray, 3 = RGB
    std::vector<uint8_t> pixels; // row-major, top row first
};

// Renders one channel of a feature map: width = frames, height = bands, with
// band 0 at the bottom row. Cells are min-max normalized (a no-op for maps
// already in [0, 1]; constant channels render black) and quantized to 8 bits.
// The heat colormap ramps white -> yellow -> orange -> red with increasing
// energy.
Image render_channel(const FeatureMap& map, size_t channel, Colormap colormap);

// Minimal PNG writer: 8-bit grayscale or RGB, zlib container with stored
// (uncompressed) deflate blocks. Output is byte-deterministic.
std::vector<uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::string& path);

} // namespace hpser
