#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "hpser/fft.hpp"
#include "hpser/spectral.hpp"
#include "test_support.hpp"

using namespace hpser;
using namespace testsup;

TEST_CASE("fft agrees with the naive DFT") {
    Rng rng(17);
    for (size_t n : {size_t(1), size_t(2), size_t(3), size_t(5), size_t(6), size_t(8),
                     size_t(37), size_t(64), size_t(100), size_t(441), size_t(1024)}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto expected = naive_dft(x);
        auto got = x;
        fft(got);
        double scale = 1.0;
        for (const auto& v : expected) scale = std::max(scale, std::abs(v));
        for (size_t k = 0; k < n; ++k)
            CHECK(std::abs(got[k] - expected[k]) <= 1e-9 * scale);
    }
}

TEST_CASE("ifft inverts fft") {
    Rng rng(23);
    for (size_t n : {size_t(4), size_t(12), size_t(128), size_t(441)}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto y = x;
        fft(y);
        ifft(y);
        for (size_t i = 0; i < n; ++i) CHECK(std::abs(y[i] - x[i]) <= 1e-12);
    }
}

TEST_CASE("rfft matches the naive DFT on real input") {
    Rng rng(31);
    auto x = random_signal(rng, 200);
    auto expected = naive_dft_real(x);
    auto got = rfft(x, 256); // zero-padded
    std::vector<double> padded = x;
    padded.resize(256, 0.0);
    expected = naive_dft_real(padded);
    REQUIRE(got.size() == 129);
    for (size_t k = 0; k < got.size(); ++k)
        CHECK(std::abs(got[k] - expected[k]) <= 1e-9);
}

TEST_CASE("hanning endpoints, midpoints and errors") {
    CHECK_THROWS_AS(hanning(0), DegenerateWindow);
    CHECK_THROWS_AS(hanning(1), DegenerateWindow);

    WindowFunction w = hanning(129);
    CHECK(w.coeff[0] == 0.0);
    CHECK(w.coeff[128] == 0.0);
    CHECK(w.coeff[64] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.coeff[32] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.coeff[96] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hanning symmetry and peak") {
    for (size_t m : {size_t(5), size_t(64), size_t(129), size_t(2048)}) {
        WindowFunction w = hanning(m);
        for (size_t n = 0; n < m; ++n) {
            CHECK(std::abs(w.coeff[n] - w.coeff[m - 1 - n]) <= 1e-12);
            CHECK(w.coeff[n] >= 0.0);
            CHECK(w.coeff[n] <= 1.0);
        }
        if (m % 2 == 1) CHECK(w.coeff[m / 2] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("hanning dual closed forms agree") {
    // 0.5 * (1 - cos(2 pi n / (M-1))) and sin^2(pi n / (M-1)) are the same
    // function; both are checked against the implementation.
    WindowFunction w = hanning(2048);
    for (size_t n : {size_t(700), size_t(1), size_t(1000), size_t(2046)}) {
        const double raised_cosine = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(n) / 2047.0));
        const double squared_sine = std::pow(std::sin(M_PI * double(n) / 2047.0), 2);
        CHECK(std::abs(raised_cosine - squared_sine) <= 1e-12);
        CHECK(std::abs(w.coeff[n] - squared_sine) <= 1e-12);
    }
}

namespace {

WindowFunction rectangular(size_t n) {
    WindowFunction w;
    w.coeff.assign(n, 1.0);
    return w;
}

AudioBuffer make_buffer(std::vector<double> samples, int rate) {
    AudioBuffer buf;
    buf.samples = std::move(samples);
    buf.sample_rate = rate;
    return buf;
}

} // namespace

TEST_CASE("stft of a unit impulse is flat") {
    std::vector<double> x(8, 0.0);
    x[0] = 1.0;
    ComplexSpectrogram spec = stft(make_buffer(x, 8000), 8, 8, rectangular(8));
    REQUIRE(spec.num_frames == 1);
    REQUIRE(spec.num_bins == 5);
    for (size_t k = 0; k < spec.num_bins; ++k) {
        CHECK(spec.at(0, k).real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(spec.at(0, k).imag()) <= 1e-12);
    }
}

TEST_CASE("stft frame count follows the hop formula") {
    WindowFunction w16 = rectangular(16);
    CHECK(stft(make_buffer(std::vector<double>(100, 0.1), 8000), 16, 4, w16).num_frames == 25);
    CHECK(stft(make_buffer(std::vector<double>(1, 0.1), 8000), 16, 4, w16).num_frames == 1);
    // Shorter than one window: a single zero-padded frame when the hop
    // reaches past the signal.
    CHECK(stft(make_buffer(std::vector<double>(10, 0.1), 8000), 16, 512, w16).num_frames == 1);
    CHECK_THROWS_AS(stft(make_buffer({}, 8000), 16, 4, w16), EmptySignal);
    CHECK_THROWS_AS(stft(make_buffer({0.0}, 8000), 16, 4, rectangular(8)), GeometryMismatch);
}

TEST_CASE("stft localizes a bin-exact sine") {
    const size_t n = 2048;
    const int sr = 88200;
    const double freq = 5.0 * sr / double(n); // exactly bin 5
    AudioBuffer buf = make_buffer(sine(3 * n, freq, sr, 0.9), sr);
    ComplexSpectrogram spec = stft(buf, n, n, hanning(n));
    REQUIRE(spec.num_frames == 3);
    for (size_t frame = 0; frame < spec.num_frames; ++frame) {
        size_t best = 0;
        double best_mag = 0.0;
        for (size_t k = 0; k < spec.num_bins; ++k) {
            const double mag = std::abs(spec.at(frame, k));
            if (mag > best_mag) {
                best_mag = mag;
                best = k;
            }
        }
        CHECK(best == 5);
    }
}

TEST_CASE("per-frame windowed energy identity holds") {
    Rng rng(41);
    const size_t n = 512, hop = 256;
    WindowFunction w = hanning(n);
    auto x = random_signal(rng, 5000);
    AudioBuffer buf = make_buffer(x, 8000);
    ComplexSpectrogram spec = stft(buf, n, hop, w);

    for (size_t frame = 0; frame < spec.num_frames; ++frame) {
        double time_energy = 0.0;
        for (size_t r = 0; r < n; ++r) {
            const size_t idx = frame * hop + r;
            const double s = idx < x.size() ? x[idx] : 0.0;
            time_energy += (w.coeff[r] * s) * (w.coeff[r] * s);
        }
        double freq_energy = 0.0;
        for (size_t k = 0; k < spec.num_bins; ++k) {
            const double mag2 = std::norm(spec.at(frame, k));
            const bool interior = k != 0 && k != spec.num_bins - 1;
            freq_energy += interior ? 2.0 * mag2 : mag2;
        }
        CHECK(freq_energy == doctest::Approx(double(n) * time_energy).epsilon(1e-6));
    }
}

TEST_CASE("stft is linear") {
    Rng rng(43);
    auto x = random_signal(rng, 1500);
    auto y = random_signal(rng, 1500);
    const double a = 0.7, b = -1.3;
    std::vector<double> mix(x.size());
    for (size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];

    WindowFunction w = hanning(256);
    auto sx = stft(make_buffer(x, 8000), 256, 128, w);
    auto sy = stft(make_buffer(y, 8000), 256, 128, w);
    auto sm = stft(make_buffer(mix, 8000), 256, 128, w);

    double scale = 1.0;
    for (const auto& v : sm.bins) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i < sm.bins.size(); ++i)
        CHECK(std::abs(sm.bins[i] - (a * sx.bins[i] + b * sy.bins[i])) <= 1e-9 * scale);
}

TEST_CASE("shifting by one hop shifts frames by one index") {
    Rng rng(47);
    auto x = random_signal(rng, 2000);
    const size_t hop = 128, n = 256;
    std::vector<double> shifted(hop, 0.0);
    shifted.insert(shifted.end(), x.begin(), x.end());

    WindowFunction w = hanning(n);
    auto sx = stft(make_buffer(x, 8000), n, hop, w);
    auto sy = stft(make_buffer(shifted, 8000), n, hop, w);

    REQUIRE(sy.num_frames >= sx.num_frames);
    // Interior frames see identical samples, so the transforms are bit-equal.
    for (size_t frame = 0; frame + 1 < sx.num_frames; ++frame)
        for (size_t k = 0; k < sx.num_bins; ++k)
            CHECK(sx.at(frame, k) == sy.at(frame + 1, k));
}

TEST_CASE("power is the elementwise squared magnitude") {
    ComplexSpectrogram spec;
    spec.num_frames = 1;
    spec.num_bins = 2;
    spec.fft_size = 2;
    spec.hop = 1;
    spec.sample_rate = 8000;
    spec.bins = {{3.0, 4.0}, {0.0, 0.0}};
    PowerSpectrogram p = power(spec);
    CHECK(p.values[0] == 25.0);
    CHECK(p.values[1] == 0.0);

    Rng rng(53);
    ComplexSpectrogram rnd;
    rnd.num_frames = 4;
    rnd.num_bins = 9;
    rnd.fft_size = 16;
    rnd.hop = 8;
    rnd.sample_rate = 8000;
    rnd.bins.resize(36);
    for (auto& v : rnd.bins) v = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    PowerSpectrogram rp = power(rnd);
    for (size_t i = 0; i < rnd.bins.size(); ++i) {
        const double re = rnd.bins[i].real(), im = rnd.bins[i].imag();
        CHECK(rp.values[i] == doctest::Approx(re * re + im * im).epsilon(1e-12));
        CHECK(rp.values[i] >= 0.0);
    }
}
