#include "hpser/hpss.hpp"

#include <algorithm>
#include <cmath>

namespace hpser {

namespace {

// Mirror an out-of-range index back into [0, n) with the edge sample
// repeated: ... x1 x0 | x0 x1 ... x{n-1} | x{n-1} ...
size_t mirror_index(long long i, size_t n) {
    if (n == 1) return 0;
    const long long period = 2 * (long long)n;
    long long m = i % period;
    if (m < 0) m += period;
    return size_t(m < (long long)n ? m : period - 1 - m);
}

void validate(const HpssConfig& cfg) {
    if (cfg.kernel_time % 2 == 0 || cfg.kernel_freq % 2 == 0)
        throw EvenKernel("median kernels must be odd");
    if (cfg.kernel_time < 3 || cfg.kernel_freq < 3)
        throw Error("median kernels must be at least 3");
    if (!(cfg.mask_power > 0.0)) throw Error("mask power must be positive");
    if (!(cfg.epsilon > 0.0)) throw Error("epsilon must be positive");
}

} // namespace

std::vector<double> median_filter_1d(std::span<const double> row, size_t kernel) {
    if (kernel % 2 == 0)
        throw EvenKernel("median kernel must be odd, got " + std::to_string(kernel));

    const size_t n = row.size();
    std::vector<double> out(n);
    if (n == 0) return out;
    if (kernel == 1) {
        std::copy(row.begin(), row.end(), out.begin());
        return out;
    }

    const long long radius = (long long)(kernel / 2);
    std::vector<double> window(kernel);
    for (size_t i = 0; i < n; ++i) {
        for (long long k = -radius; k <= radius; ++k)
            window[size_t(k + radius)] = row[mirror_index((long long)i + k, n)];
        auto mid = window.begin() + (long long)(kernel / 2);
        std::nth_element(window.begin(), mid, window.end());
        out[i] = *mid;
    }
    return out;
}

HpssPair decompose(const MelSpectrogram& s, const HpssConfig& cfg) {
    if (s.log_scaled)
        throw LogScaledInput("decomposition operates on linear energies, not log values");
    validate(cfg);

    const size_t bands = s.num_bands;
    const size_t frames = s.num_frames;

    // Horizontal pass: median along time, per band. Rows are contiguous.
    MelSpectrogram h_enh = s;
    for (size_t b = 0; b < bands; ++b) {
        std::span<const double> row(s.values.data() + b * frames, frames);
        std::vector<double> med = median_filter_1d(row, cfg.kernel_time);
        std::copy(med.begin(), med.end(), h_enh.values.begin() + (long long)(b * frames));
    }

    // Vertical pass: median along frequency, per frame.
    MelSpectrogram p_enh = s;
    std::vector<double> column(bands);
    for (size_t n = 0; n < frames; ++n) {
        for (size_t b = 0; b < bands; ++b) column[b] = s.at(b, n);
        std::vector<double> med = median_filter_1d(column, cfg.kernel_freq);
        for (size_t b = 0; b < bands; ++b) p_enh.at(b, n) = med[b];
    }

    if (cfg.raw_medians) return {std::move(h_enh), std::move(p_enh)};

    HpssPair out{s, s};
    for (size_t i = 0; i < s.values.size(); ++i) {
        const double cell = s.values[i];
        double mask_h, mask_p;
        if (cfg.mask_mode == MaskMode::binary) {
            mask_h = h_enh.values[i] >= p_enh.values[i] ? 1.0 : 0.0;
            mask_p = 1.0 - mask_h;
        } else {
            const double hp = std::pow(h_enh.values[i], cfg.mask_power);
            const double pp = std::pow(p_enh.values[i], cfg.mask_power);
            const double denom = hp + pp + cfg.epsilon;
            mask_h = hp / denom;
            mask_p = pp / denom;
        }
        out.harmonic.values[i] = cell * mask_h;
        out.percussive.values[i] = cell * mask_p;
    }
    return out;
}

MelSpectrogram averaged_hp(const HpssPair& pair) {
    if (pair.harmonic.num_bands != pair.percussive.num_bands ||
        pair.harmonic.num_frames != pair.percussive.num_frames)
        throw GeometryMismatch("harmonic and percussive grids differ in shape");

    MelSpectrogram out = pair.harmonic;
    out.log_scaled = false;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (pair.harmonic.values[i] + pair.percussive.values[i]) / 2.0;
    return out;
}

} // namespace hpser
