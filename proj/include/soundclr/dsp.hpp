#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "soundclr/audio_io.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

struct StftConfig {
    int window_len = 1024; // power of two
    int hop = 512;         // 50% overlap by default
    int n_mels = 128;
    double fmin = 0.0;
    double fmax = 0.0;        // 0 = sample_rate / 2
    double log_eps = 1e-6;    // additive floor inside the log
    bool standardize = false; // per-sample zero-mean / unit-variance
};

struct LogMelSpectrogram {
    std::size_t n_mels = 0;
    std::size_t n_frames = 0;
    std::vector<double> values; // row-major [mel][frame]
    int sample_rate = 0;

    double& at(std::size_t m, std::size_t t) { return values[m * n_frames + t]; }
    double at(std::size_t m, std::size_t t) const { return values[m * n_frames + t]; }
};

namespace dsp_detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 in-place FFT.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

} // namespace dsp_detail

inline std::vector<double> hamming_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n - 1));
    return w;
}

inline std::size_t stft_frame_count(std::size_t signal_len, const StftConfig& cfg) {
    if (signal_len < static_cast<std::size_t>(cfg.window_len)) return 0;
    return 1 + (signal_len - static_cast<std::size_t>(cfg.window_len)) / static_cast<std::size_t>(cfg.hop);
}

// Power STFT: Hamming-windowed frames, squared DFT magnitudes.
// Returns [bins x frames], bins = window_len/2 + 1. Trailing samples shorter
// than one window are dropped.
inline Tensor stft_power(const WaveSample& w, const StftConfig& cfg) {
    if (!dsp_detail::is_pow2(cfg.window_len)) throw ConfigError("stft_power: window_len must be a power of two");
    if (cfg.hop <= 0) throw ConfigError("stft_power: hop must be positive");
    const std::size_t n = w.samples.size();
    const std::size_t win = static_cast<std::size_t>(cfg.window_len);
    if (n < win) throw DataError("stft_power: signal shorter than one window");
    const std::size_t frames = stft_frame_count(n, cfg);
    const std::size_t bins = win / 2 + 1;

    const std::vector<double> window = hamming_window(cfg.window_len);
    Tensor out({bins, frames});
    std::vector<std::complex<double>> buf(win);
    for (std::size_t k = 0; k < frames; ++k) {
        const std::size_t start = k * static_cast<std::size_t>(cfg.hop);
        for (std::size_t i = 0; i < win; ++i)
            buf[i] = std::complex<double>(w.samples[start + i] * window[i], 0.0);
        dsp_detail::fft(buf);
        for (std::size_t b = 0; b < bins; ++b) out.data[b * frames + k] = std::norm(buf[b]);
    }
    return out;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank [n_mels x bins], unnormalized triangles with
// peaks equally spaced on the mel scale between fmin and fmax. A triangle
// narrower than the FFT bin spacing would otherwise be all-zero; such rows
// get unit weight at the bin nearest their center so every filter is
// non-empty and unimodal.
inline Tensor mel_filterbank(const StftConfig& cfg, int sample_rate, int bins = 0) {
    if (cfg.n_mels < 1) throw ConfigError("mel_filterbank: n_mels must be >= 1");
    if (bins == 0) bins = cfg.window_len / 2 + 1;
    const double fmax = cfg.fmax > 0.0 ? cfg.fmax : sample_rate / 2.0;
    if (!(cfg.fmin >= 0.0 && cfg.fmin < fmax && fmax <= sample_rate / 2.0))
        throw ConfigError("mel_filterbank: need 0 <= fmin < fmax <= sample_rate/2");
    if (cfg.n_mels >= bins) throw ConfigError("mel_filterbank: n_mels too large for the bin count");

    const int M = cfg.n_mels;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(M) + 2);
    for (int i = 0; i < M + 2; ++i)
        edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(M + 1));

    const double bin_hz = static_cast<double>(sample_rate) / cfg.window_len;
    Tensor fb({static_cast<std::size_t>(M), static_cast<std::size_t>(bins)});
    for (int m = 0; m < M; ++m) {
        const double left = edges[static_cast<std::size_t>(m)];
        const double center = edges[static_cast<std::size_t>(m) + 1];
        const double right = edges[static_cast<std::size_t>(m) + 2];
        bool any = false;
        for (int b = 0; b < bins; ++b) {
            const double f = b * bin_hz;
            double v = 0.0;
            if (f > left && f < right)
                v = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
            if (v > 0.0) any = true;
            fb.at2(static_cast<std::size_t>(m), static_cast<std::size_t>(b)) = v;
        }
        if (!any) {
            const int nearest = static_cast<int>(std::llround(center / bin_hz));
            const int snap = std::min(std::max(nearest, 0), bins - 1);
            fb.at2(static_cast<std::size_t>(m), static_cast<std::size_t>(snap)) = 1.0;
        }
    }
    return fb;
}

// Precomputed nonzero ranges per filter row; the triangles are narrow, so the
// projection is effectively sparse.
struct MelBank {
    Tensor weights; // [n_mels x bins]
    std::vector<std::size_t> first, last; // inclusive column range per row

    MelBank() = default;
    MelBank(const StftConfig& cfg, int sample_rate) : weights(mel_filterbank(cfg, sample_rate)) {
        const std::size_t M = weights.dim(0), B = weights.dim(1);
        first.assign(M, 0);
        last.assign(M, 0);
        for (std::size_t m = 0; m < M; ++m) {
            std::size_t lo = B, hi = 0;
            for (std::size_t b = 0; b < B; ++b)
                if (weights.at2(m, b) != 0.0) {
                    if (lo == B) lo = b;
                    hi = b;
                }
            first[m] = lo;
            last[m] = hi;
        }
    }
};

inline LogMelSpectrogram log_mel(const WaveSample& w, const StftConfig& cfg, const MelBank& bank) {
    const Tensor power = stft_power(w, cfg);
    const std::size_t frames = power.dim(1);
    const std::size_t M = bank.weights.dim(0);

    LogMelSpectrogram spec;
    spec.n_mels = M;
    spec.n_frames = frames;
    spec.sample_rate = w.sample_rate;
    spec.values.assign(M * frames, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        const double* wrow = &bank.weights.data[m * bank.weights.dim(1)];
        for (std::size_t b = bank.first[m]; b <= bank.last[m]; ++b) {
            const double wv = wrow[b];
            if (wv == 0.0) continue;
            const double* prow = &power.data[b * frames];
            double* orow = &spec.values[m * frames];
            for (std::size_t t = 0; t < frames; ++t) orow[t] += wv * prow[t];
        }
    }
    for (double& v : spec.values) v = std::log(v + cfg.log_eps);

    if (cfg.standardize) {
        double mean = 0.0;
        for (double v : spec.values) mean += v;
        mean /= static_cast<double>(spec.values.size());
        double var = 0.0;
        for (double v : spec.values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(spec.values.size());
        const double sd = std::sqrt(var) + 1e-12;
        for (double& v : spec.values) v = (v - mean) / sd;
    }
    return spec;
}

inline LogMelSpectrogram log_mel(const WaveSample& w, const StftConfig& cfg) {
    return log_mel(w, cfg, MelBank(cfg, w.sample_rate));
}

// Feature cache record: 16-byte magic/version, two u32 LE dims (mels, frames),
// row-major float32 values.
inline constexpr char kFeatureMagic[16] = {'S', 'C', 'L', 'R', 'F', 'E', 'A', 'T',
                                           '0', '0', '0', '1', 0, 0, 0, 0};

inline void save_feature(const std::string& path, const LogMelSpectrogram& spec) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_feature: cannot open " + path);
    f.write(kFeatureMagic, 16);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(spec.n_mels), static_cast<std::uint32_t>(spec.n_frames)};
    unsigned char b[8];
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < 4; ++i) b[d * 4 + i] = static_cast<unsigned char>(dims[d] >> (8 * i));
    f.write(reinterpret_cast<char*>(b), 8);
    for (double v : spec.values) {
        float x = static_cast<float>(v);
        char raw[4];
        std::memcpy(raw, &x, 4);
        f.write(raw, 4);
    }
}

inline LogMelSpectrogram load_feature(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_feature: cannot open " + path);
    char magic[16];
    f.read(magic, 16);
    if (!f || std::memcmp(magic, kFeatureMagic, 16) != 0) throw DataError("load_feature: bad magic in " + path);
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw DataError("load_feature: truncated header in " + path);
    std::uint32_t dims[2];
    for (int d = 0; d < 2; ++d) {
        dims[d] = 0;
        for (int i = 0; i < 4; ++i) dims[d] |= std::uint32_t(b[d * 4 + i]) << (8 * i);
    }
    LogMelSpectrogram spec;
    spec.n_mels = dims[0];
    spec.n_frames = dims[1];
    spec.values.resize(static_cast<std::size_t>(dims[0]) * dims[1]);
    for (double& v : spec.values) {
        char raw[4];
        f.read(raw, 4);
        if (!f) throw DataError("load_feature: truncated payload in " + path);
        float x;
        std::memcpy(&x, raw, 4);
        v = static_cast<double>(x);
    }
    return spec;
}

} // namespace soundclr
