#include "hpser/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpser/binio.hpp"
#include "hpser/checksum.hpp"

namespace hpser {

namespace {

uint8_t quantize(double v) {
    return uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// White (cold) through yellow and orange to red (hot), matching the usual
// presentation of spectrogram energy.
void heat_rgb(double v, uint8_t rgb[3]) {
    struct Anchor {
        double at;
        uint8_t r, g, b;
    };
    static constexpr Anchor anchors[] = {
        {0.0, 255, 255, 255},
        {1.0 / 3.0, 255, 255, 0},
        {2.0 / 3.0, 255, 140, 0},
        {1.0, 220, 0, 0},
    };
    v = std::clamp(v, 0.0, 1.0);
    for (size_t i = 0; i + 1 < std::size(anchors); ++i) {
        const Anchor& a = anchors[i];
        const Anchor& b = anchors[i + 1];
        if (v <= b.at) {
            const double t = (v - a.at) / (b.at - a.at);
            rgb[0] = uint8_t(std::lround(a.r + t * (b.r - a.r)));
            rgb[1] = uint8_t(std::lround(a.g + t * (b.g - a.g)));
            rgb[2] = uint8_t(std::lround(a.b + t * (b.b - a.b)));
            return;
        }
    }
    rgb[0] = 220;
    rgb[1] = 0;
    rgb[2] = 0;
}

} // namespace

Image render_channel(const FeatureMap& map, size_t channel, Colormap colormap) {
    if (channel >= 2) throw Error("feature maps have exactly 2 channels");
    const std::vector<float>& cells = map.channels[channel];
    if (cells.size() != map.bands * map.frames)
        throw GeometryMismatch("channel size does not match map geometry");

    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float v : cells) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const bool flat = !(hi > lo);
    const double range = flat ? 1.0 : double(hi) - double(lo);

    Image img;
    img.width = map.frames;
    img.height = map.bands;
    img.channels = colormap == Colormap::grayscale ? 1 : 3;
    img.pixels.resize(img.width * img.height * img.channels);

    for (size_t b = 0; b < map.bands; ++b) {
        const size_t row = map.bands - 1 - b; // band 0 at the bottom
        for (size_t f = 0; f < map.frames; ++f) {
            const double v = flat ? 0.0 : (double(cells[b * map.frames + f]) - lo) / range;
            uint8_t* px = img.pixels.data() + (row * img.width + f) * img.channels;
            if (img.channels == 1) {
                px[0] = quantize(v);
            } else {
                heat_rgb(v, px);
            }
        }
    }
    return img;
}

namespace {

void put_chunk(ByteWriter& out, const char type[4], std::span<const uint8_t> payload) {
    out.u8(uint8_t(payload.size() >> 24));
    out.u8(uint8_t(payload.size() >> 16));
    out.u8(uint8_t(payload.size() >> 8));
    out.u8(uint8_t(payload.size()));

    ByteWriter chunk;
    chunk.text(std::string_view(type, 4));
    chunk.bytes(payload);
    uint32_t crc = crc32(chunk.view());

    out.bytes(chunk.view());
    out.u8(uint8_t(crc >> 24));
    out.u8(uint8_t(crc >> 16));
    out.u8(uint8_t(crc >> 8));
    out.u8(uint8_t(crc));
}

} // namespace

std::vector<uint8_t> encode_png(const Image& image) {
    if (image.width == 0 || image.height == 0) throw Error("empty image");
    if (image.channels != 1 && image.channels != 3) throw Error("unsupported channel count");
    if (image.pixels.size() != image.width * image.height * image.channels)
        throw GeometryMismatch("pixel buffer does not match image geometry");

    ByteWriter out;
    static constexpr uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.bytes(signature);

    ByteWriter ihdr;
    for (int shift = 24; shift >= 0; shift -= 8) ihdr.u8(uint8_t(image.width >> shift));
    for (int shift = 24; shift >= 0; shift -= 8) ihdr.u8(uint8_t(image.height >> shift));
    ihdr.u8(8);                                   // bit depth
    ihdr.u8(image.channels == 1 ? 0 : 2);         // gray / truecolor
    ihdr.u8(0);                                   // compression
    ihdr.u8(0);                                   // filter
    ihdr.u8(0);                                   // no interlace
    put_chunk(out, "IHDR", ihdr.view());

    // Raw scanlines, each prefixed with filter byte 0.
    ByteWriter raw;
    const size_t stride = image.width * image.channels;
    for (size_t row = 0; row < image.height; ++row) {
        raw.u8(0);
        raw.bytes(std::span<const uint8_t>(image.pixels.data() + row * stride, stride));
    }
    const std::vector<uint8_t> scanlines = raw.take();

    // zlib container with stored deflate blocks.
    ByteWriter idat;
    idat.u8(0x78);
    idat.u8(0x01);
    size_t offset = 0;
    do {
        const size_t block = std::min<size_t>(65535, scanlines.size() - offset);
        const bool final = offset + block == scanlines.size();
        idat.u8(final ? 1 : 0);
        idat.u16(uint16_t(block));
        idat.u16(uint16_t(~uint16_t(block)));
        idat.bytes(std::span<const uint8_t>(scanlines.data() + offset, block));
        offset += block;
    } while (offset < scanlines.size());
    const uint32_t adler = adler32(scanlines);
    idat.u8(uint8_t(adler >> 24));
    idat.u8(uint8_t(adler >> 16));
    idat.u8(uint8_t(adler >> 8));
    idat.u8(uint8_t(adler));
    put_chunk(out, "IDAT", idat.view());

    put_chunk(out, "IEND", {});
    return out.take();
}

void write_png(const Image& image, const std::string& path) {
    write_file_bytes(path, encode_png(image));
}

} // namespace hpser
