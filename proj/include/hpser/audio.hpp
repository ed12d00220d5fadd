#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpser/errors.hpp"

namespace hpser {

// Mono audio, samples normalized to [-1, 1].
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 0;

    size_t size() const { return samples.size(); }
    double duration_seconds() const {
        return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
    }
};

// Decodes a RIFF/WAVE container. Accepts PCM 8/16/24/32-bit integer and
// 32-bit float data, any channel count; channels are averaged to mono and
// integer samples are scaled by the type's maximum magnitude. Throws
// MalformedHeader, UnsupportedEncoding or TruncatedData.
AudioBuffer decode_wav(std::span<const uint8_t> bytes);
AudioBuffer decode_wav_file(const std::string& path);

// Band-limited resampling with a Kaiser-windowed sinc kernel (64 zero
// crossings per side, beta = 12). Returns the input unchanged (bit-equal)
// when target_rate matches. Output length is round(len * target / source),
// so the duration is preserved within one output sample.
AudioBuffer resample(const AudioBuffer& buf, int target_rate);

} // namespace hpser
