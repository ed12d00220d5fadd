#include "hpser/spectral.hpp"

#include <cmath>

#include "hpser/fft.hpp"

namespace hpser {

WindowFunction hanning(size_t length) {
    if (length < 2)
        throw DegenerateWindow("Hanning window needs at least 2 points, got " +
                               std::to_string(length));
    constexpr double kPi = 3.14159265358979323846;
    WindowFunction w;
    w.coeff.resize(length);
    const double denom = double(length - 1);
    // Fill the first half and mirror it, so the symmetry is exact and the
    // endpoints are exactly zero (sin(pi) does not round to 0 in doubles).
    for (size_t n = 0; n <= (length - 1) / 2; ++n) {
        double s = std::sin(kPi * double(n) / denom);
        w.coeff[n] = s * s;
        w.coeff[length - 1 - n] = w.coeff[n];
    }
    return w;
}

ComplexSpectrogram stft(const AudioBuffer& buf, size_t fft_size, size_t hop,
                        const WindowFunction& window) {
    if (buf.samples.empty()) throw EmptySignal("cannot transform an empty signal");
    if (fft_size == 0 || hop == 0) throw Error("fft size and hop must be positive");
    if (window.size() != fft_size)
        throw GeometryMismatch("window length " + std::to_string(window.size()) +
                               " != fft size " + std::to_string(fft_size));

    const size_t len = buf.samples.size();
    const size_t num_frames = (len - 1) / hop + 1;
    const size_t num_bins = fft_size / 2 + 1;

    ComplexSpectrogram spec;
    spec.num_frames = num_frames;
    spec.num_bins = num_bins;
    spec.fft_size = fft_size;
    spec.hop = hop;
    spec.sample_rate = buf.sample_rate;
    spec.bins.resize(num_frames * num_bins);

    std::vector<double> frame(fft_size);
    for (size_t n = 0; n < num_frames; ++n) {
        const size_t start = n * hop;
        const size_t avail = std::min(fft_size, len - start);
        for (size_t r = 0; r < avail; ++r)
            frame[r] = buf.samples[start + r] * window.coeff[r];
        for (size_t r = avail; r < fft_size; ++r) frame[r] = 0.0;

        std::vector<std::complex<double>> spectrum = rfft(frame, fft_size);
        std::copy(spectrum.begin(), spectrum.end(), spec.bins.begin() + n * num_bins);
    }
    return spec;
}

PowerSpectrogram power(const ComplexSpectrogram& spec) {
    PowerSpectrogram p;
    p.num_frames = spec.num_frames;
    p.num_bins = spec.num_bins;
    p.fft_size = spec.fft_size;
    p.hop = spec.hop;
    p.sample_rate = spec.sample_rate;
    p.values.resize(spec.bins.size());
    for (size_t i = 0; i < spec.bins.size(); ++i) {
        const std::complex<double>& z = spec.bins[i];
        p.values[i] = z.real() * z.real() + z.imag() * z.imag();
    }
    return p;
}

} // namespace hpser
