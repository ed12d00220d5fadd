#include "hpser/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hpser/binio.hpp"

namespace hpser {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!out) throw Error("short write: " + path);
}

namespace {

constexpr uint16_t kFormatPcm = 0x0001;
constexpr uint16_t kFormatIeeeFloat = 0x0003;
constexpr uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
    uint16_t format = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits_per_sample = 0;
};

int32_t read_i24(const uint8_t* p) {
    int32_t v = int32_t(p[0]) | int32_t(p[1]) << 8 | int32_t(p[2]) << 16;
    if (v & 0x800000) v -= 0x1000000;
    return v;
}

double clamp_unit(double v) {
    if (!std::isfinite(v)) return 0.0;
    return std::clamp(v, -1.0, 1.0);
}

} // namespace

AudioBuffer decode_wav(std::span<const uint8_t> bytes) {
    if (bytes.size() < 12)
        throw MalformedHeader("file too small for a RIFF header");
    if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw MalformedHeader("not a RIFF/WAVE container");

    ByteReader r(bytes);
    r.skip(12);

    WavFormat fmt;
    bool have_fmt = false;

    while (r.remaining() >= 8) {
        std::string id = r.text(4);
        uint32_t chunk_size = r.u32();

        if (id == "fmt ") {
            if (chunk_size < 16) throw MalformedHeader("fmt chunk too small");
            if (r.remaining() < chunk_size) throw TruncatedData("fmt chunk exceeds payload");
            ByteReader f(r.bytes(chunk_size));
            fmt.format = f.u16();
            fmt.channels = f.u16();
            fmt.sample_rate = f.u32();
            f.u32(); // byte rate
            f.u16(); // block align
            fmt.bits_per_sample = f.u16();
            if (fmt.format == kFormatExtensible) {
                // cbSize, valid bits, channel mask, then the sub-format GUID
                // whose first two bytes carry the real format code.
                if (chunk_size < 40) throw MalformedHeader("extensible fmt chunk too small");
                f.u16();
                f.u16();
                f.u32();
                fmt.format = f.u16();
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw MalformedHeader("data chunk precedes fmt chunk");
            if (fmt.channels == 0) throw MalformedHeader("zero channel count");
            if (fmt.sample_rate == 0) throw MalformedHeader("zero sample rate");
            if (fmt.format != kFormatPcm && fmt.format != kFormatIeeeFloat)
                throw UnsupportedEncoding("unsupported format code " + std::to_string(fmt.format));
            if (fmt.format == kFormatIeeeFloat && fmt.bits_per_sample != 32)
                throw UnsupportedEncoding("only 32-bit float data is supported");
            if (fmt.format == kFormatPcm && fmt.bits_per_sample != 8 && fmt.bits_per_sample != 16 &&
                fmt.bits_per_sample != 24 && fmt.bits_per_sample != 32)
                throw UnsupportedEncoding("unsupported PCM depth " +
                                          std::to_string(fmt.bits_per_sample));
            if (r.remaining() < chunk_size)
                throw TruncatedData("data chunk declares " + std::to_string(chunk_size) +
                                    " bytes, only " + std::to_string(r.remaining()) + " present");

            const size_t bytes_per_sample = fmt.bits_per_sample / 8;
            const size_t frame_bytes = bytes_per_sample * fmt.channels;
            const size_t frames = chunk_size / frame_bytes;
            if (frames == 0) throw MalformedHeader("data chunk holds no samples");

            std::span<const uint8_t> data = r.bytes(chunk_size);
            AudioBuffer out;
            out.sample_rate = int(fmt.sample_rate);
            out.samples.resize(frames);

            const double inv_channels = 1.0 / fmt.channels;
            for (size_t i = 0; i < frames; ++i) {
                const uint8_t* p = data.data() + i * frame_bytes;
                double acc = 0.0;
                for (uint16_t c = 0; c < fmt.channels; ++c, p += bytes_per_sample) {
                    double v;
                    if (fmt.format == kFormatIeeeFloat) {
                        float fv;
                        std::memcpy(&fv, p, 4);
                        v = fv;
                    } else if (fmt.bits_per_sample == 8) {
                        v = (double(p[0]) - 128.0) / 128.0;
                    } else if (fmt.bits_per_sample == 16) {
                        int16_t s = int16_t(uint16_t(p[0]) | uint16_t(p[1]) << 8);
                        v = double(s) / 32768.0;
                    } else if (fmt.bits_per_sample == 24) {
                        v = double(read_i24(p)) / 8388608.0;
                    } else {
                        int32_t s = int32_t(uint32_t(p[0]) | uint32_t(p[1]) << 8 |
                                            uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24);
                        v = double(s) / 2147483648.0;
                    }
                    acc += v;
                }
                out.samples[i] = clamp_unit(acc * inv_channels);
            }
            return out;
        } else {
            // Unknown chunk: skip payload plus RIFF pad byte.
            size_t skip = std::min<size_t>(chunk_size, r.remaining());
            if (skip < chunk_size) throw TruncatedData("chunk '" + id + "' exceeds payload");
            r.skip(skip);
        }
        if ((chunk_size & 1) && r.remaining() > 0) r.skip(1);
    }
    throw MalformedHeader(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

AudioBuffer decode_wav_file(const std::string& path) {
    return decode_wav(read_file_bytes(path));
}

namespace {

double bessel_i0(double x) {
    // Power series; converges quickly for the argument range of the window.
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / double(k * k);
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

constexpr int kZeroCrossings = 64;
constexpr double kKaiserBeta = 12.0;
// Kernel samples per unit input-sample spacing in the interpolation table.
// Linear interpolation at this density keeps the kernel error below -100 dB.
constexpr int kTableDensity = 512;

struct SincKernel {
    std::vector<double> table; // h(k / kTableDensity), k >= 0
    double half_width;         // support is [-half_width, half_width]

    double operator()(double t) const {
        double a = std::abs(t) * kTableDensity;
        size_t i = size_t(a);
        if (i + 1 >= table.size()) return 0.0;
        double frac = a - double(i);
        return table[i] + (table[i + 1] - table[i]) * frac;
    }
};

SincKernel make_kernel(double cutoff) {
    SincKernel k;
    k.half_width = double(kZeroCrossings) / cutoff;
    const size_t entries = size_t(k.half_width * kTableDensity) + 2;
    k.table.resize(entries + 1, 0.0);
    const double inv_i0 = 1.0 / bessel_i0(kKaiserBeta);
    constexpr double kPi = 3.14159265358979323846;
    for (size_t i = 0; i <= entries; ++i) {
        double t = double(i) / kTableDensity;
        if (t >= k.half_width) break;
        double u = t / k.half_width;
        double window = bessel_i0(kKaiserBeta * std::sqrt(1.0 - u * u)) * inv_i0;
        double x = kPi * cutoff * t;
        double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
        k.table[i] = cutoff * sinc * window;
    }
    return k;
}

} // namespace

AudioBuffer resample(const AudioBuffer& buf, int target_rate) {
    if (target_rate <= 0) throw Error("target sample rate must be positive");
    if (buf.sample_rate <= 0) throw Error("source sample rate must be positive");
    if (target_rate == buf.sample_rate) return buf;

    const double ratio = double(target_rate) / double(buf.sample_rate);
    const double cutoff = std::min(1.0, ratio); // relative to the input Nyquist
    const SincKernel kernel = make_kernel(cutoff);

    const size_t in_len = buf.samples.size();
    const size_t out_len = size_t(std::llround(double(in_len) * ratio));

    AudioBuffer out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);

    const double step = 1.0 / ratio; // input samples per output sample
    for (size_t j = 0; j < out_len; ++j) {
        const double center = double(j) * step;
        long long lo = (long long)std::ceil(center - kernel.half_width);
        long long hi = (long long)std::floor(center + kernel.half_width);
        lo = std::max<long long>(lo, 0);
        hi = std::min<long long>(hi, (long long)in_len - 1);
        double acc = 0.0;
        for (long long i = lo; i <= hi; ++i)
            acc += buf.samples[size_t(i)] * kernel(double(i) - center);
        out.samples[j] = clamp_unit(acc);
    }
    return out;
}

} // namespace hpser
