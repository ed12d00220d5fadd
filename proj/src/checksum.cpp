#include "hpser/checksum.hpp"

#include <array>

namespace hpser {

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t n = 0; n < 256; ++n) {
        uint32_t c = n;
        for (int k = 0; k < 8; ++k)
            c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
        table[n] = c;
    }
    return table;
}

} // namespace

uint32_t crc32(std::span<const uint8_t> data, uint32_t seed) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (uint8_t byte : data)
        c = table[(c ^ byte) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

uint32_t adler32(std::span<const uint8_t> data, uint32_t seed) {
    constexpr uint32_t kMod = 65521;
    uint32_t a = seed & 0xFFFFu;
    uint32_t b = (seed >> 16) & 0xFFFFu;
    size_t i = 0;
    while (i < data.size()) {
        // 5552 is the largest block size that cannot overflow 32 bits.
        size_t block = std::min<size_t>(5552, data.size() - i);
        for (size_t j = 0; j < block; ++j) {
            a += data[i + j];
            b += a;
        }
        a %= kMod;
        b %= kMod;
        i += block;
    }
    return (b << 16) | a;
}

} // namespace hpser
