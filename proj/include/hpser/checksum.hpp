#pragma once

#include <cstdint>
#include <span>

namespace hpser {

// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320) as used by zlib and
// PNG. `seed` is the running value from a previous call, so streams can be
// checksummed incrementally: crc32(b) == crc32(b2, crc32(b1)) for b = b1+b2.
uint32_t crc32(std::span<const uint8_t> data, uint32_t seed = 0);

// Adler-32 as required by the zlib container inside PNG IDAT chunks.
uint32_t adler32(std::span<const uint8_t> data, uint32_t seed = 1);

} // namespace hpser
