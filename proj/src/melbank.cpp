#include "hpser/melbank.hpp"

#include <cmath>

namespace hpser {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_filterbank(int sample_rate, size_t fft_size, size_t num_bands,
                               double f_min, double f_max) {
    if (sample_rate <= 0) throw Error("sample rate must be positive");
    if (num_bands == 0) throw Error("need at least one Mel band");
    const double nyquist = double(sample_rate) / 2.0;
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= nyquist))
        throw Error("need 0 <= f_min < f_max <= sample_rate/2");

    MelFilterbank fb;
    fb.num_bands = num_bands;
    fb.num_bins = fft_size / 2 + 1;
    fb.fft_size = fft_size;
    fb.sample_rate = sample_rate;
    fb.f_min = f_min;
    fb.f_max = f_max;
    fb.weights.assign(num_bands * fb.num_bins, 0.0);
    fb.support_begin.assign(num_bands, 0);
    fb.support_end.assign(num_bands, 0);

    // num_bands + 2 points equally spaced in Mel; point m is the left edge of
    // band m, point m+1 its center, point m+2 its right edge.
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edge_hz(num_bands + 2);
    for (size_t i = 0; i < edge_hz.size(); ++i)
        edge_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(num_bands + 1));

    const double bin_hz = double(sample_rate) / double(fft_size);
    for (size_t b = 0; b < num_bands; ++b) {
        const double left = edge_hz[b];
        const double center = edge_hz[b + 1];
        const double right = edge_hz[b + 2];
        size_t begin = fb.num_bins, end = 0;
        for (size_t k = 0; k < fb.num_bins; ++k) {
            const double f = bin_hz * double(k);
            double w = 0.0;
            if (f > left && f < right)
                w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
            if (w > 0.0) {
                fb.weights[b * fb.num_bins + k] = w;
                begin = std::min(begin, k);
                end = k + 1;
            }
        }
        if (end <= begin)
            throw EmptyBand("Mel band " + std::to_string(b) +
                            " has no FFT bin inside its support; reduce the band count");
        fb.support_begin[b] = begin;
        fb.support_end[b] = end;
    }
    return fb;
}

MelSpectrogram mel_spectrogram(const PowerSpectrogram& pow, const MelFilterbank& fb) {
    if (pow.num_bins != fb.num_bins)
        throw GeometryMismatch("power spectrogram has " + std::to_string(pow.num_bins) +
                               " bins, filterbank expects " + std::to_string(fb.num_bins));
    if (pow.sample_rate != fb.sample_rate)
        throw GeometryMismatch("sample rate mismatch between spectrogram and filterbank");

    MelSpectrogram mel;
    mel.num_bands = fb.num_bands;
    mel.num_frames = pow.num_frames;
    mel.sample_rate = pow.sample_rate;
    mel.log_scaled = false;
    mel.values.assign(fb.num_bands * pow.num_frames, 0.0);

    for (size_t b = 0; b < fb.num_bands; ++b) {
        const double* w = fb.weights.data() + b * fb.num_bins;
        double* row = mel.values.data() + b * mel.num_frames;
        for (size_t n = 0; n < pow.num_frames; ++n) {
            const double* frame = pow.values.data() + n * pow.num_bins;
            double acc = 0.0;
            for (size_t k = fb.support_begin[b]; k < fb.support_end[b]; ++k)
                acc += w[k] * frame[k];
            row[n] = acc;
        }
    }
    return mel;
}

MelSpectrogram log_mel(const MelSpectrogram& mel, double floor) {
    if (mel.log_scaled) throw AlreadyLogScaled("input is already log-scaled");
    if (!(floor > 0.0)) throw Error("log floor must be positive");

    MelSpectrogram out = mel;
    out.log_scaled = true;
    for (double& v : out.values) v = std::log(std::max(v, floor));
    return out;
}

MfccMatrix mfcc(const MelSpectrogram& log_mel, size_t num_coeffs) {
    if (!log_mel.log_scaled) throw NotLogScaled("MFCC expects a log-scaled Mel spectrogram");
    if (num_coeffs == 0) throw Error("need at least one coefficient");
    if (num_coeffs > log_mel.num_bands)
        throw TooManyCoefficients(std::to_string(num_coeffs) + " coefficients from " +
                                  std::to_string(log_mel.num_bands) + " bands");

    const size_t m = log_mel.num_bands;
    const size_t frames = log_mel.num_frames;
    MfccMatrix out;
    out.num_coeffs = num_coeffs;
    out.num_frames = frames;
    out.values.assign(num_coeffs * frames, 0.0);

    const double s0 = std::sqrt(1.0 / double(m));
    const double si = std::sqrt(2.0 / double(m));
    for (size_t i = 0; i < num_coeffs; ++i) {
        const double scale = i == 0 ? s0 : si;
        for (size_t n = 0; n < frames; ++n) {
            double acc = 0.0;
            for (size_t b = 0; b < m; ++b)
                acc += log_mel.at(b, n) * std::cos(kPi * double(i) * (double(b) + 0.5) / double(m));
            out.values[i * frames + n] = scale * acc;
        }
    }
    return out;
}

} // namespace hpser
