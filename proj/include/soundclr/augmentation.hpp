#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "soundclr/audio_io.hpp"
#include "soundclr/dsp.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/rng.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

struct AugmentConfig {
    double scale_min = 1.0 / 1.25;
    double scale_max = 1.25;
    double silence_threshold = 1e-4;
    long target_len = 220500; // 5 s at 44100 Hz
    int freq_mask_width = 32; // F: max width of a frequency mask, in mel bins
    int time_mask_width = 32; // T: max width of a time mask, in frames
    int freq_masks = 2;       // f
    int time_masks = 1;       // t
    std::uint64_t seed = 0;

    void validate() const {
        if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("augment: need 0 < scale_min <= scale_max");
        if (silence_threshold < 0.0) throw ConfigError("augment: silence_threshold must be >= 0");
        if (target_len <= 0) throw ConfigError("augment: target_len must be > 0");
        if (freq_mask_width < 0 || time_mask_width < 0 || freq_masks < 0 || time_masks < 0)
            throw ConfigError("augment: mask parameters must be >= 0");
    }
};

// Drop leading and trailing runs with |x| < threshold. An entirely silent
// signal collapses to a single zero sample.
inline WaveSample trim_silence(const WaveSample& w, double threshold) {
    std::size_t lo = 0, hi = w.samples.size();
    while (lo < hi && std::fabs(w.samples[lo]) < threshold) ++lo;
    while (hi > lo && std::fabs(w.samples[hi - 1]) < threshold) --hi;
    WaveSample out = w;
    if (lo == hi) {
        out.samples.assign(1, 0.0);
        return out;
    }
    out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(lo),
                       w.samples.begin() + static_cast<std::ptrdiff_t>(hi));
    return out;
}

namespace aug_detail {

// Shared interpolation kernel: out[i] = in at position i * step, end-clamped.
inline std::vector<double> interp_at_step(const std::vector<double>& in, std::size_t out_len, double step) {
    const std::size_t n = in.size();
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = i * step;
        if (pos >= static_cast<double>(n - 1)) {
            out[i] = in[n - 1];
            continue;
        }
        const auto i0 = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i0);
        out[i] = in[i0] * (1.0 - frac) + in[i0 + 1] * frac;
    }
    return out;
}

} // namespace aug_detail

// Combined pitch-shift/time-stretch: draw s uniform in [scale_min, scale_max]
// and resample the wave by linear interpolation at step s.
inline WaveSample random_scale(const WaveSample& w, const AugmentConfig& cfg, Rng& rng) {
    const double s = rng.uniform(cfg.scale_min, cfg.scale_max);
    const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(w.samples.size()) / s));
    WaveSample out = w;
    out.samples = aug_detail::interp_at_step(w.samples, out_len, s);
    return out;
}

// Random zero-padding (short signals) or random contiguous crop (long ones).
inline WaveSample fit_length(const WaveSample& w, long target_len, Rng& rng) {
    if (target_len <= 0) throw ConfigError("fit_length: target_len must be > 0");
    const auto tl = static_cast<std::size_t>(target_len);
    const std::size_t n = w.samples.size();
    WaveSample out = w;
    if (n == tl) return out;
    if (n < tl) {
        const auto front = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tl - n)));
        out.samples.assign(tl, 0.0);
        for (std::size_t i = 0; i < n; ++i) out.samples[front + i] = w.samples[i];
    } else {
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - tl)));
        out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                           w.samples.begin() + static_cast<std::ptrdiff_t>(start + tl));
    }
    return out;
}

// Deterministic eval-time counterpart: centered crop / symmetric zero-pad.
inline WaveSample fit_length_center(const WaveSample& w, long target_len) {
    if (target_len <= 0) throw ConfigError("fit_length_center: target_len must be > 0");
    const auto tl = static_cast<std::size_t>(target_len);
    const std::size_t n = w.samples.size();
    WaveSample out = w;
    if (n == tl) return out;
    if (n < tl) {
        const std::size_t front = (tl - n) / 2;
        out.samples.assign(tl, 0.0);
        for (std::size_t i = 0; i < n; ++i) out.samples[front + i] = w.samples[i];
    } else {
        const std::size_t start = (n - tl) / 2;
        out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                           w.samples.begin() + static_cast<std::ptrdiff_t>(start + tl));
    }
    return out;
}

// SpecAugment-style masking: f frequency masks (rows) then t time masks
// (columns); widths drawn uniformly from [0, F] resp. [0, T], starts uniform
// over the valid range; masked cells set to 0. Rectangles may overlap.
inline LogMelSpectrogram mask_spectrogram(const LogMelSpectrogram& spec, const AugmentConfig& cfg, Rng& rng) {
    const std::size_t M = spec.n_mels, L = spec.n_frames;
    if (cfg.freq_mask_width > static_cast<int>(M)) throw ConfigError("mask_spectrogram: F exceeds mel-bin count");
    if (cfg.time_mask_width > static_cast<int>(L)) throw ConfigError("mask_spectrogram: T exceeds frame count");
    LogMelSpectrogram out = spec;
    for (int i = 0; i < cfg.freq_masks; ++i) {
        const auto w = static_cast<std::size_t>(rng.uniform_int(0, cfg.freq_mask_width));
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(M - w)));
        for (std::size_t m = start; m < start + w; ++m)
            for (std::size_t t = 0; t < L; ++t) out.at(m, t) = 0.0;
    }
    for (int i = 0; i < cfg.time_masks; ++i) {
        const auto w = static_cast<std::size_t>(rng.uniform_int(0, cfg.time_mask_width));
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(L - w)));
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = start; t < start + w; ++t) out.at(m, t) = 0.0;
    }
    return out;
}

// 3-channel copy of a spectrogram, shape (3, mels, frames).
inline Tensor triplicate(const LogMelSpectrogram& spec) {
    Tensor out({3, spec.n_mels, spec.n_frames});
    const std::size_t plane = spec.n_mels * spec.n_frames;
    for (int c = 0; c < 3; ++c)
        std::copy(spec.values.begin(), spec.values.end(), out.data.begin() + static_cast<std::ptrdiff_t>(c) * static_cast<std::ptrdiff_t>(plane));
    return out;
}

// Full training-time pipeline: trim -> scale -> fit -> log-mel -> mask ->
// triplicate. The wave is assumed already normalized at ingestion.
inline Tensor augment_featurize(const WaveSample& w, const AugmentConfig& aug, const StftConfig& stft,
                                const MelBank& bank, Rng& rng) {
    WaveSample x = trim_silence(w, aug.silence_threshold);
    x = random_scale(x, aug, rng);
    x = fit_length(x, aug.target_len, rng);
    LogMelSpectrogram spec = log_mel(x, stft, bank);
    spec = mask_spectrogram(spec, aug, rng);
    return triplicate(spec);
}

// Deterministic eval-time pipeline: centered fit, no masking.
inline Tensor eval_featurize(const WaveSample& w, long target_len, const StftConfig& stft, const MelBank& bank) {
    const WaveSample x = fit_length_center(w, target_len);
    return triplicate(log_mel(x, stft, bank));
}

} // namespace soundclr
