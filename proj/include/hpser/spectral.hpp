#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "hpser/audio.hpp"
#include "hpser/errors.hpp"

namespace hpser {

struct WindowFunction {
    std::vector<double> coeff;

    size_t size() const { return coeff.size(); }
};

// Symmetric Hanning window: coeff[n] = sin^2(pi * n / (M - 1)). Endpoints are
// exactly zero. Note this is the symmetric variant (denominator M - 1), not
// the periodic one, so overlap-add properties differ from DFT-even windows.
WindowFunction hanning(size_t length);

// One-sided complex STFT, frame-major storage.
struct ComplexSpectrogram {
    size_t num_frames = 0;
    size_t num_bins = 0; // fft_size / 2 + 1
    size_t fft_size = 0;
    size_t hop = 0;
    int sample_rate = 0;
    std::vector<std::complex<double>> bins;

    std::complex<double> at(size_t frame, size_t bin) const {
        return bins[frame * num_bins + bin];
    }
};

// Squared magnitudes of a ComplexSpectrogram, same geometry.
struct PowerSpectrogram {
    size_t num_frames = 0;
    size_t num_bins = 0;
    size_t fft_size = 0;
    size_t hop = 0;
    int sample_rate = 0;
    std::vector<double> values;

    double at(size_t frame, size_t bin) const { return values[frame * num_bins + bin]; }
};

// Frame n covers samples [n*hop, n*hop + fft_size); the tail is zero-padded.
// Frames start at every hop multiple inside the signal, so
// num_frames = floor((len - 1) / hop) + 1. The window length must equal
// fft_size. Throws EmptySignal for an empty buffer.
ComplexSpectrogram stft(const AudioBuffer& buf, size_t fft_size, size_t hop,
                        const WindowFunction& window);

PowerSpectrogram power(const ComplexSpectrogram& spec);

} // namespace hpser
