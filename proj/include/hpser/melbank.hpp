#pragma once

#include <cstddef>
#include <vector>

#include "hpser/errors.hpp"
#include "hpser/spectral.hpp"

namespace hpser {

// Mel pitch scale conversion, 2595 * log10(1 + hz / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with unit peak, band-major weights. Band centers are
// equally spaced on the Mel axis; each triangle rises and falls linearly in
// Hz between the neighboring centers, so band weights sum to exactly 1 at any
// frequency strictly between the first and last centers.
struct MelFilterbank {
    size_t num_bands = 0;
    size_t num_bins = 0;
    size_t fft_size = 0;
    int sample_rate = 0;
    double f_min = 0.0;
    double f_max = 0.0;
    std::vector<double> weights;       // [band * num_bins + bin]
    std::vector<size_t> support_begin; // first nonzero bin per band
    std::vector<size_t> support_end;   // one past the last nonzero bin

    double weight(size_t band, size_t bin) const { return weights[band * num_bins + bin]; }
};

// Throws EmptyBand when some filter row has no FFT bin inside its support
// (num_bands too large for the FFT resolution).
MelFilterbank build_filterbank(int sample_rate, size_t fft_size, size_t num_bands,
                               double f_min, double f_max);

// Band-major energy grid. log_scaled tracks whether log_mel has been applied.
struct MelSpectrogram {
    size_t num_bands = 0;
    size_t num_frames = 0;
    int sample_rate = 0;
    bool log_scaled = false;
    std::vector<double> values; // [band * num_frames + frame]

    double at(size_t band, size_t frame) const { return values[band * num_frames + frame]; }
    double& at(size_t band, size_t frame) { return values[band * num_frames + frame]; }
};

// values[b, n] = sum_k weights[b, k] * power[n, k].
MelSpectrogram mel_spectrogram(const PowerSpectrogram& pow, const MelFilterbank& fb);

// Natural log with a positive floor clamp, ln(max(v, floor)). Never produces
// NaN or -inf for non-negative input.
MelSpectrogram log_mel(const MelSpectrogram& mel, double floor = 1e-10);

struct MfccMatrix {
    size_t num_coeffs = 0;
    size_t num_frames = 0;
    std::vector<double> values; // [coeff * num_frames + frame]

    double at(size_t coeff, size_t frame) const { return values[coeff * num_frames + frame]; }
};

// Orthonormal DCT-II of each log-Mel column:
//   c_i = s_i * sum_b x[b] * cos(pi * i * (b + 0.5) / num_bands),
// s_0 = sqrt(1/m), s_i = sqrt(2/m). Requires log-scaled input and
// num_coeffs <= num_bands.
MfccMatrix mfcc(const MelSpectrogram& log_mel, size_t num_coeffs = 13);

} // namespace hpser
