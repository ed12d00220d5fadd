#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpser/audio.hpp"
#include "hpser/errors.hpp"
#include "hpser/hpss.hpp"

namespace hpser {

enum class EmotionLabel : uint8_t {
    anger = 0,
    boredom = 1,
    disgust = 2,
    fear = 3,
    happiness = 4,
    neutral = 5,
    sadness = 6,
};

inline constexpr size_t kNumEmotions = 7;

const char* to_string(EmotionLabel label);
std::optional<EmotionLabel> emotion_from_string(std::string_view name);

// Geometry of one feature map and how subsamples are cut from a signal.
// A subsample spans frames * analysis_hop samples, the exact span that yields
// `frames` STFT frames; with the default analysis_hop == window_size the
// frames do not overlap and the span is frames * window_size.
struct FeatureMapSpec {
    size_t bands = 128;
    size_t frames = 128;
    int sample_rate = 88200;
    size_t window_size = 2048;
    size_t analysis_hop = 2048;
    size_t subsample_hop_frames = 128; // subsample advance, in frames

    size_t subsample_samples() const { return frames * analysis_hop; }
    size_t subsample_hop_samples() const { return subsample_hop_frames * analysis_hop; }
};

// Two aligned (bands x frames) grids: channel 0 is the log of the averaged
// harmonic/percussive decomposition, channel 1 the plain log-Mel spectrogram.
// Both channels are min-max normalized to [0, 1] per map, so float storage is
// lossless for serialization purposes.
struct FeatureMap {
    size_t bands = 0;
    size_t frames = 0;
    std::array<std::vector<float>, 2> channels; // [band * frames + frame]
    std::optional<EmotionLabel> label;
    std::string source_id;

    float at(size_t channel, size_t band, size_t frame) const {
        return channels[channel][band * frames + frame];
    }
};

// Cuts a signal into fixed-length subsamples advancing by the subsample hop.
// The final partial subsample is zero-padded; at least one subsample is
// always produced. Requires buf.sample_rate == spec.sample_rate.
std::vector<AudioBuffer> subsample(const AudioBuffer& buf, const FeatureMapSpec& spec);

// Full per-subsample pipeline: Hanning STFT -> power -> Mel projection ->
// {log(averaged HP decomposition), log Mel}, each channel normalized to
// [0, 1] (a constant channel maps to all zeros). The subsample length must
// match the spec exactly.
FeatureMap build_feature_map(const AudioBuffer& sub, const FeatureMapSpec& spec,
                             const HpssConfig& hpss_cfg = {});

using LabeledMap = std::pair<FeatureMap, EmotionLabel>;

// Duplicates minority-class items by seeded draws with replacement until all
// class counts match the majority. Input order is preserved as a prefix and
// the result is deterministic for a fixed seed. When `required_classes` is
// non-empty, each listed class must be present (MissingClass otherwise);
// by default the classes present in the dataset define the task.
std::vector<size_t> oversample_indices(std::span<const EmotionLabel> labels, uint64_t seed,
                                       std::span<const EmotionLabel> required_classes = {});
std::vector<LabeledMap> oversample(std::span<const LabeledMap> dataset, uint64_t seed,
                                   std::span<const EmotionLabel> required_classes = {});

// FMAP container (little-endian): magic "FMAP", version u16, map count u32,
// then per map bands u16, frames u16, channels u16 (= 2), label u8 (ordinal
// or 255 when unlabeled), source id (u16 length + UTF-8 bytes), and
// channels * bands * frames float32 cells, band-major within each channel.
// A CRC-32 of all preceding bytes closes the file.
std::vector<uint8_t> encode_maps(std::span<const FeatureMap> maps);
std::vector<FeatureMap> decode_maps(std::span<const uint8_t> bytes);
void save_maps(std::span<const FeatureMap> maps, const std::string& path);
std::vector<FeatureMap> load_maps(const std::string& path);

} // namespace hpser
