#include "hpser/featuremap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpser/binio.hpp"
#include "hpser/checksum.hpp"
#include "hpser/melbank.hpp"
#include "hpser/rng.hpp"
#include "hpser/spectral.hpp"

namespace hpser {

const char* to_string(EmotionLabel label) {
    switch (label) {
        case EmotionLabel::anger: return "anger";
        case EmotionLabel::boredom: return "boredom";
        case EmotionLabel::disgust: return "disgust";
        case EmotionLabel::fear: return "fear";
        case EmotionLabel::happiness: return "happiness";
        case EmotionLabel::neutral: return "neutral";
        case EmotionLabel::sadness: return "sadness";
    }
    return "?";
}

std::optional<EmotionLabel> emotion_from_string(std::string_view name) {
    for (size_t i = 0; i < kNumEmotions; ++i) {
        EmotionLabel label = EmotionLabel(i);
        if (name == to_string(label)) return label;
    }
    return std::nullopt;
}

std::vector<AudioBuffer> subsample(const AudioBuffer& buf, const FeatureMapSpec& spec) {
    if (buf.sample_rate != spec.sample_rate)
        throw GeometryMismatch("buffer rate " + std::to_string(buf.sample_rate) +
                               " != spec rate " + std::to_string(spec.sample_rate));
    if (spec.subsample_hop_frames == 0) throw Error("subsample hop must be positive");

    const size_t span = spec.subsample_samples();
    const size_t hop = spec.subsample_hop_samples();
    const size_t len = buf.samples.size();

    // Enough windows at stride `hop` to cover the whole signal, minimum one.
    size_t count = 1;
    if (len > span) count = (len - span + hop - 1) / hop + 1;

    std::vector<AudioBuffer> subs;
    subs.reserve(count);
    for (size_t k = 0; k < count; ++k) {
        AudioBuffer sub;
        sub.sample_rate = buf.sample_rate;
        sub.samples.assign(span, 0.0);
        const size_t start = k * hop;
        if (start < len) {
            const size_t copy = std::min(span, len - start);
            std::copy(buf.samples.begin() + (long long)start,
                      buf.samples.begin() + (long long)(start + copy), sub.samples.begin());
        }
        subs.push_back(std::move(sub));
    }
    return subs;
}

namespace {

// Min-max normalize into [0, 1]; a constant grid maps to all zeros.
std::vector<float> normalize_channel(const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<float> out(values.size());
    if (!(hi > lo)) {
        std::fill(out.begin(), out.end(), 0.0f);
        return out;
    }
    const double range = hi - lo;
    for (size_t i = 0; i < values.size(); ++i)
        out[i] = float((values[i] - lo) / range);
    return out;
}

} // namespace

FeatureMap build_feature_map(const AudioBuffer& sub, const FeatureMapSpec& spec,
                             const HpssConfig& hpss_cfg) {
    if (sub.samples.size() != spec.subsample_samples())
        throw GeometryMismatch("subsample holds " + std::to_string(sub.samples.size()) +
                               " samples, spec expects " +
                               std::to_string(spec.subsample_samples()));
    if (sub.sample_rate != spec.sample_rate)
        throw GeometryMismatch("subsample rate differs from spec rate");

    const WindowFunction window = hanning(spec.window_size);
    ComplexSpectrogram spec_c = stft(sub, spec.window_size, spec.analysis_hop, window);
    if (spec_c.num_frames != spec.frames)
        throw GeometryMismatch("STFT produced " + std::to_string(spec_c.num_frames) +
                               " frames, spec expects " + std::to_string(spec.frames));

    const MelFilterbank fb = build_filterbank(spec.sample_rate, spec.window_size, spec.bands,
                                              0.0, double(spec.sample_rate) / 2.0);
    const MelSpectrogram mel = mel_spectrogram(power(spec_c), fb);

    const MelSpectrogram avg = averaged_hp(decompose(mel, hpss_cfg));
    const MelSpectrogram ch0 = log_mel(avg);
    const MelSpectrogram ch1 = log_mel(mel);

    FeatureMap map;
    map.bands = spec.bands;
    map.frames = spec.frames;
    map.channels[0] = normalize_channel(ch0.values);
    map.channels[1] = normalize_channel(ch1.values);
    return map;
}

std::vector<size_t> oversample_indices(std::span<const EmotionLabel> labels, uint64_t seed,
                                       std::span<const EmotionLabel> required_classes) {
    if (labels.empty()) throw Error("cannot oversample an empty dataset");

    std::array<std::vector<size_t>, kNumEmotions> per_class;
    for (size_t i = 0; i < labels.size(); ++i)
        per_class[size_t(labels[i])].push_back(i);

    for (EmotionLabel cls : required_classes)
        if (per_class[size_t(cls)].empty())
            throw MissingClass(std::string("class '") + to_string(cls) + "' has no examples");

    size_t majority = 0;
    for (const auto& members : per_class) majority = std::max(majority, members.size());

    std::vector<size_t> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) out[i] = i;

    Rng rng(seed);
    for (size_t c = 0; c < kNumEmotions; ++c) {
        const auto& members = per_class[c];
        if (members.empty()) continue;
        for (size_t need = majority - members.size(); need > 0; --need)
            out.push_back(members[rng.next_below(members.size())]);
    }
    return out;
}

std::vector<LabeledMap> oversample(std::span<const LabeledMap> dataset, uint64_t seed,
                                   std::span<const EmotionLabel> required_classes) {
    std::vector<EmotionLabel> labels;
    labels.reserve(dataset.size());
    for (const auto& [map, label] : dataset) labels.push_back(label);

    std::vector<size_t> picks = oversample_indices(labels, seed, required_classes);
    std::vector<LabeledMap> out;
    out.reserve(picks.size());
    for (size_t i : picks) out.push_back(dataset[i]);
    return out;
}

namespace {

constexpr uint16_t kMapFormatVersion = 1;
constexpr uint8_t kUnlabeled = 255;

} // namespace

std::vector<uint8_t> encode_maps(std::span<const FeatureMap> maps) {
    ByteWriter w;
    w.text("FMAP");
    w.u16(kMapFormatVersion);
    if (maps.size() > std::numeric_limits<uint32_t>::max()) throw Error("too many maps");
    w.u32(uint32_t(maps.size()));

    for (const FeatureMap& map : maps) {
        if (map.bands > 0xFFFF || map.frames > 0xFFFF)
            throw Error("map geometry exceeds the format's 16-bit limits");
        if (map.source_id.size() > 0xFFFF) throw Error("source id too long");
        const size_t cells = map.bands * map.frames;
        for (const auto& channel : map.channels)
            if (channel.size() != cells)
                throw GeometryMismatch("channel size does not match map geometry");

        w.u16(uint16_t(map.bands));
        w.u16(uint16_t(map.frames));
        w.u16(2);
        w.u8(map.label ? uint8_t(*map.label) : kUnlabeled);
        w.u16(uint16_t(map.source_id.size()));
        w.text(map.source_id);
        for (const auto& channel : map.channels)
            for (float v : channel) w.f32(v);
    }

    w.u32(crc32(w.view()));
    return w.take();
}

std::vector<FeatureMap> decode_maps(std::span<const uint8_t> bytes) {
    if (bytes.size() < 14) throw CorruptFile("file too small to be a map container");
    if (std::memcmp(bytes.data(), "FMAP", 4) != 0) throw CorruptFile("bad magic");

    const uint32_t stored = uint32_t(bytes[bytes.size() - 4]) |
                            uint32_t(bytes[bytes.size() - 3]) << 8 |
                            uint32_t(bytes[bytes.size() - 2]) << 16 |
                            uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.first(bytes.size() - 4)) != stored)
        throw CorruptFile("checksum mismatch");

    try {
        ByteReader r(bytes.first(bytes.size() - 4));
        r.skip(4);
        const uint16_t version = r.u16();
        if (version != kMapFormatVersion)
            throw VersionMismatch("map format version " + std::to_string(version) +
                                  ", expected " + std::to_string(kMapFormatVersion));
        const uint32_t count = r.u32();

        std::vector<FeatureMap> maps;
        maps.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            FeatureMap map;
            map.bands = r.u16();
            map.frames = r.u16();
            const uint16_t channels = r.u16();
            if (channels != 2) throw CorruptFile("expected 2 channels per map");
            const uint8_t label = r.u8();
            if (label != kUnlabeled) {
                if (label >= kNumEmotions) throw CorruptFile("label ordinal out of range");
                map.label = EmotionLabel(label);
            }
            map.source_id = r.text(r.u16());
            const size_t cells = map.bands * map.frames;
            for (auto& channel : map.channels) {
                channel.resize(cells);
                for (float& v : channel) {
                    v = r.f32();
                    if (!std::isfinite(v)) throw CorruptFile("non-finite cell value");
                }
            }
            maps.push_back(std::move(map));
        }
        if (!r.at_end()) throw CorruptFile("trailing bytes after the last map");
        return maps;
    } catch (const TruncatedData&) {
        throw CorruptFile("map container ends mid-record");
    }
}

void save_maps(std::span<const FeatureMap> maps, const std::string& path) {
    std::vector<uint8_t> bytes = encode_maps(maps);
    write_file_bytes(path, bytes);
}

std::vector<FeatureMap> load_maps(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    return decode_maps(bytes);
}

} // namespace hpser
