#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "soundclr/audio_io.hpp"
#include "soundclr/dataset.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/rng.hpp"

namespace soundclr {

// Deterministic synthetic corpus for desk-scale end-to-end runs. Four default
// class generators: pure tone, two-tone chord, linear chirp, band-limited
// noise. Per-sample jitter: frequency +-5%, peak amplitude in [0.5, 1],
// phase uniform.
struct SynthClass {
    enum Kind { Tone, Chord, Chirp, NoiseBand } kind = Tone;
    std::string name;
    double f0 = 440.0; // tone / chord base / chirp start / band low edge
    double f1 = 0.0;   // chord second / chirp end / band high edge
};

struct SynthSpec {
    std::vector<SynthClass> classes{
        {SynthClass::Tone, "tone440", 440.0, 0.0},
        {SynthClass::Chord, "chord880_1320", 880.0, 1320.0},
        {SynthClass::Chirp, "chirp200_2000", 200.0, 2000.0},
        {SynthClass::NoiseBand, "noise3k_6k", 3000.0, 6000.0},
    };
    int samples_per_class = 40;
    double clip_seconds = 2.0;
    int sample_rate = 22050;
    int folds = 4;
    std::uint64_t seed = 7;
    double freq_jitter = 0.05;
    double amp_min = 0.5, amp_max = 1.0;

    void validate() const {
        if (classes.empty()) throw ConfigError("synth: no classes");
        if (samples_per_class < folds) throw ConfigError("synth: samples_per_class must be >= folds");
        if (folds < 1 || sample_rate < 1 || clip_seconds <= 0.0) throw ConfigError("synth: bad spec");
        const double nyquist = sample_rate / 2.0;
        for (const SynthClass& c : classes) {
            const double top = std::max(c.f0, c.f1) * (1.0 + freq_jitter);
            if (top >= nyquist) throw ConfigError("synth: class '" + c.name + "' aliases at this sample rate");
        }
    }
};

namespace synth_detail {

inline std::vector<double> render(const SynthClass& cls, const SynthSpec& spec, Rng& rng) {
    const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
    const double dt = 1.0 / spec.sample_rate;
    const double jit = 1.0 + rng.uniform(-spec.freq_jitter, spec.freq_jitter);
    const double amp = rng.uniform(spec.amp_min, spec.amp_max);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> out(n, 0.0);

    switch (cls.kind) {
    case SynthClass::Tone:
        for (std::size_t i = 0; i < n; ++i)
            out[i] = std::sin(2.0 * std::numbers::pi * cls.f0 * jit * i * dt + phase);
        break;
    case SynthClass::Chord: {
        const double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = std::sin(2.0 * std::numbers::pi * cls.f0 * jit * i * dt + phase) +
                     std::sin(2.0 * std::numbers::pi * cls.f1 * jit * i * dt + phase2);
        break;
    }
    case SynthClass::Chirp: {
        const double fa = cls.f0 * jit, fb = cls.f1 * jit;
        const double dur = spec.clip_seconds;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = i * dt;
            out[i] = std::sin(2.0 * std::numbers::pi * (fa * t + (fb - fa) * t * t / (2.0 * dur)) + phase);
        }
        break;
    }
    case SynthClass::NoiseBand: {
        // Sum of random-phase sinusoids inside the band: band-limited by
        // construction and reproducible from the stream.
        constexpr int kComponents = 64;
        for (int k = 0; k < kComponents; ++k) {
            const double f = rng.uniform(cls.f0, cls.f1) * jit;
            const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (std::size_t i = 0; i < n; ++i) out[i] += std::sin(2.0 * std::numbers::pi * f * i * dt + ph);
        }
        break;
    }
    }

    double peak = 0.0;
    for (double v : out) peak = std::max(peak, std::fabs(v));
    if (peak > 0.0)
        for (double& v : out) v *= amp / peak;
    return out;
}

} // namespace synth_detail

// Round-robin fold assignment within each class keeps every fold
// class-balanced.
inline Dataset generate(const SynthSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.num_classes = static_cast<int>(spec.classes.size());
    ds.num_folds = spec.folds;
    for (int c = 0; c < ds.num_classes; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s) {
            Rng rng = Rng::derive(spec.seed, {kStreamSynth, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(s)});
            WaveSample w;
            w.sample_rate = spec.sample_rate;
            w.label = c;
            w.source_id = spec.classes[static_cast<std::size_t>(c)].name + "_" + std::to_string(s);
            w.samples = synth_detail::render(spec.classes[static_cast<std::size_t>(c)], spec, rng);
            w = normalize(std::move(w));
            ds.samples.push_back(std::move(w));
            ds.folds.push_back(s % spec.folds + 1);
        }
    }
    return ds;
}

// Dump as WAV files + manifest CSV so the corpus can round-trip the real
// ingestion path.
inline void dump_dataset(const Dataset& ds, const SynthSpec& spec, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(std::filesystem::path(dir) / "manifest.csv");
    if (!csv) throw DataError("dump_dataset: cannot write manifest in " + dir);
    csv << "filename,fold,target,category\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const WaveSample& w = ds.samples[i];
        const std::string fname = w.source_id + ".wav";
        save_wav((std::filesystem::path(dir) / fname).string(), w.samples, w.sample_rate);
        csv << fname << ',' << ds.folds[i] << ',' << w.label << ','
            << spec.classes[static_cast<std::size_t>(w.label)].name << '\n';
    }
}

} // namespace soundclr
