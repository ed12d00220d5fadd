#include "hpser/fft.hpp"

#include <cmath>

namespace hpser {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 Cooley-Tukey. Twiddles are computed from the exact angle
// per index rather than by repeated multiplication, which keeps the error of
// long transforms near machine epsilon.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n < 2) return;

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    std::vector<std::complex<double>> w(n / 2);
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t half = len / 2;
        for (size_t k = 0; k < half; ++k) {
            double ang = sign * 2.0 * kPi * double(k) / double(len);
            w[k] = {std::cos(ang), std::sin(ang)};
        }
        for (size_t i = 0; i < n; i += len) {
            for (size_t k = 0; k < half; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + half] * w[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

// Bluestein: with the chirp c_m = exp(sign * i pi m^2 / n) matching the
// transform direction, X_k = c_k * sum_j (a_j c_j) conj(c_{k-j}), evaluated
// as a circular convolution of power-of-two length >= 2n - 1. m^2 is reduced
// mod 2n first so the angle stays accurate for large n.
void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<std::complex<double>> chirp(n);
    for (size_t m = 0; m < n; ++m) {
        uint64_t sq = (uint64_t(m) * m) % (2 * uint64_t(n));
        double ang = sign * kPi * double(sq) / double(n);
        chirp[m] = {std::cos(ang), std::sin(ang)};
    }

    const size_t m = next_pow2(2 * n - 1);
    std::vector<std::complex<double>> f(m), g(m);
    for (size_t i = 0; i < n; ++i) f[i] = a[i] * chirp[i];
    g[0] = std::conj(chirp[0]);
    for (size_t i = 1; i < n; ++i) g[i] = g[m - i] = std::conj(chirp[i]);

    fft_pow2(f, false);
    fft_pow2(g, false);
    for (size_t i = 0; i < m; ++i) f[i] *= g[i];
    fft_pow2(f, true);

    const double scale = 1.0 / double(m);
    for (size_t k = 0; k < n; ++k) a[k] = f[k] * chirp[k] * scale;
}

void dft(std::vector<std::complex<double>>& a, bool inverse) {
    if (a.size() < 2) return;
    if (is_pow2(a.size()))
        fft_pow2(a, inverse);
    else
        fft_bluestein(a, inverse);
}

} // namespace

void fft(std::vector<std::complex<double>>& a) { dft(a, false); }

void ifft(std::vector<std::complex<double>>& a) {
    dft(a, true);
    const double scale = 1.0 / double(a.size());
    for (auto& v : a) v *= scale;
}

std::vector<std::complex<double>> rfft(std::span<const double> x, size_t n) {
    std::vector<std::complex<double>> a(n);
    const size_t copy = std::min(x.size(), n);
    for (size_t i = 0; i < copy; ++i) a[i] = {x[i], 0.0};
    fft(a);
    a.resize(n / 2 + 1);
    return a;
}

} // namespace hpser
