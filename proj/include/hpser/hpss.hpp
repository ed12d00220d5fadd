#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hpser/errors.hpp"
#include "hpser/melbank.hpp"

namespace hpser {

enum class MaskMode { soft, binary };

struct HpssConfig {
    size_t kernel_time = 31; // frames, horizontal median length
    size_t kernel_freq = 31; // bands, vertical median length
    double mask_power = 2.0;
    MaskMode mask_mode = MaskMode::soft;
    double epsilon = 1e-10;
    // When set, decompose returns the median-enhanced grids themselves
    // instead of masking the input with them.
    bool raw_medians = false;
};

struct HpssPair {
    MelSpectrogram harmonic;
    MelSpectrogram percussive;
};

// Sliding median with mirrored (edge-inclusive) boundary padding:
// [a b c ...] is extended as [... b a | a b c ...]. Output length equals the
// input length. Kernel must be odd; kernel 1 is the identity.
std::vector<double> median_filter_1d(std::span<const double> row, size_t kernel);

// Splits an energy Mel spectrogram into harmonic and percussive parts.
// Sustained tones survive the horizontal (time-direction) median filter,
// transients survive the vertical (frequency-direction) one. Soft mode builds
// Wiener-style masks from the p-th powers of the enhanced grids; binary mode
// routes each cell entirely to the larger side (ties go harmonic). Requires a
// linear-energy input (throws LogScaledInput otherwise).
HpssPair decompose(const MelSpectrogram& s, const HpssConfig& cfg = {});

// Elementwise (harmonic + percussive) / 2.
MelSpectrogram averaged_hp(const HpssPair& pair);

} // namespace hpser
