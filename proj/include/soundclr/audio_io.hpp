#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "soundclr/errors.hpp"

namespace soundclr {

struct WaveSample {
    std::vector<double> samples;
    int sample_rate = 44100;
    int label = 0;
    std::string source_id;
};

struct ManifestEntry {
    std::string filename;
    int fold = 1;
    int label = 0;
    std::string category;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int num_classes = 0; // C = max target + 1
    int num_folds = 0;   // K = max fold
};

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8; }

} // namespace wav_detail

// RIFF/WAVE reader: PCM 16-bit or IEEE float 32-bit, 1 or 2 channels.
// Stereo is reduced to mono by the per-sample channel mean. Chunks other
// than fmt/data are skipped. No normalization is applied here.
inline WaveSample load_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError("load_wav: not a RIFF/WAVE file: " + path);

    using namespace wav_detail;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data_ptr = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        std::uint32_t chunk_len = read_u32(hdr + 4);
        std::size_t body = pos + 8;
        if (body + chunk_len > bytes.size()) chunk_len = static_cast<std::uint32_t>(bytes.size() - body);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw DataError("load_wav: truncated fmt chunk: " + path);
            const unsigned char* p = bytes.data() + body;
            format = read_u16(p);
            channels = read_u16(p + 2);
            rate = read_u32(p + 4);
            bits = read_u16(p + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data_ptr = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    if (!have_fmt || data_ptr == nullptr) throw DataError("load_wav: missing fmt or data chunk: " + path);
    if (channels != 1 && channels != 2) throw DataError("load_wav: unsupported channel count: " + path);
    if (rate == 0) throw DataError("load_wav: zero sample rate: " + path);

    const bool pcm16 = (format == 1 && bits == 16);
    const bool f32 = (format == 3 && bits == 32);
    if (!pcm16 && !f32) throw DataError("load_wav: unsupported encoding (need PCM16 or float32): " + path);

    const std::size_t bytes_per = pcm16 ? 2 : 4;
    const std::size_t n_frames = data_len / (bytes_per * channels);
    if (n_frames == 0) throw DataError("load_wav: zero-length audio: " + path);

    WaveSample w;
    w.sample_rate = static_cast<int>(rate);
    w.source_id = path;
    w.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data_ptr + (i * channels + c) * bytes_per;
            if (pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                acc += static_cast<double>(v);
            }
        }
        w.samples[i] = acc / channels;
    }
    return w;
}

// IEEE float32 mono WAV writer (used by the synthetic-corpus dump).
inline void save_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_wav: cannot open " + path);
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
        f.write(reinterpret_cast<char*>(b), 2);
    };
    const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 4);
    f.write("RIFF", 4);
    put_u32(36 + data_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(3); // IEEE float
    put_u16(1);
    put_u32(static_cast<std::uint32_t>(sample_rate));
    put_u32(static_cast<std::uint32_t>(sample_rate) * 4);
    put_u16(4);
    put_u16(32);
    f.write("data", 4);
    put_u32(data_len);
    for (double s : samples) {
        float v = static_cast<float>(s);
        static_assert(sizeof(float) == 4);
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        f.write(reinterpret_cast<char*>(b), 4);
    }
}

// Peak-normalize to max |amplitude| = 1. All-zero input is returned unchanged.
inline WaveSample normalize(WaveSample w) {
    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::fabs(s));
    if (peak > 0.0)
        for (double& s : w.samples) s /= peak;
    return w;
}

// Linear-interpolation resampler; positions past the last input sample clamp
// to the last sample. Output length = round(len * target / source).
inline WaveSample resample_linear(const WaveSample& w, int target_rate) {
    if (target_rate <= 0) throw ConfigError("resample_linear: target_rate must be positive");
    if (target_rate == w.sample_rate) return w;
    const std::size_t n = w.samples.size();
    const auto out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * target_rate / w.sample_rate));
    WaveSample out = w;
    out.sample_rate = target_rate;
    out.samples.assign(out_len, 0.0);
    const double ratio = static_cast<double>(w.sample_rate) / target_rate;
    for (std::size_t i = 0; i < out_len; ++i) {
        double pos = i * ratio;
        if (pos >= static_cast<double>(n - 1)) {
            out.samples[i] = w.samples[n - 1];
            continue;
        }
        const auto i0 = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = w.samples[i0] * (1.0 - frac) + w.samples[i0 + 1] * frac;
    }
    return out;
}

// CSV manifest mirroring the ESC-50 metadata layout: columns filename, fold,
// target, category; extra columns ignored; C and K inferred from the data.
inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("load_manifest: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("load_manifest: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::stringstream ss(s);
        while (std::getline(ss, cur, ',')) out.push_back(cur);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };

    const std::vector<std::string> header = split(line);
    int col_file = -1, col_fold = -1, col_target = -1, col_cat = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "filename") col_file = i;
        else if (header[i] == "fold") col_fold = i;
        else if (header[i] == "target") col_target = i;
        else if (header[i] == "category") col_cat = i;
    }
    if (col_file < 0 || col_fold < 0 || col_target < 0 || col_cat < 0)
        throw DataError("load_manifest: missing required column in " + path);

    auto parse_int = [&](const std::string& s, const char* what) {
        std::size_t used = 0;
        int v;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            throw DataError(std::string("load_manifest: non-integer ") + what + ": '" + s + "'");
        }
        if (used != s.size()) throw DataError(std::string("load_manifest: non-integer ") + what + ": '" + s + "'");
        return v;
    };

    DatasetManifest m;
    std::set<std::string> seen;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cols = split(line);
        const int need = std::max(std::max(col_file, col_fold), std::max(col_target, col_cat));
        if (static_cast<int>(cols.size()) <= need) throw DataError("load_manifest: short row: " + line);
        ManifestEntry e;
        e.filename = cols[col_file];
        e.fold = parse_int(cols[col_fold], "fold");
        e.label = parse_int(cols[col_target], "target");
        e.category = cols[col_cat];
        if (e.fold < 1) throw DataError("load_manifest: fold must be >= 1: " + line);
        if (e.label < 0) throw DataError("load_manifest: target must be >= 0: " + line);
        if (!seen.insert(e.filename).second) throw DataError("load_manifest: duplicate filename " + e.filename);
        m.num_classes = std::max(m.num_classes, e.label + 1);
        m.num_folds = std::max(m.num_folds, e.fold);
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw DataError("load_manifest: no entries in " + path);
    return m;
}

} // namespace soundclr
