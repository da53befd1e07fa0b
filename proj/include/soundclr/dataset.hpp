#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "soundclr/audio_io.hpp"
#include "soundclr/errors.hpp"

namespace soundclr {

// In-memory corpus: normalized mono waves at a single canonical sample rate.
struct Dataset {
    std::vector<WaveSample> samples;
    std::vector<int> folds; // 1-based, parallel to samples
    int num_classes = 0;
    int num_folds = 0;

    std::vector<int> fold_indices(int fold) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(samples.size()); ++i)
            if (folds[static_cast<std::size_t>(i)] == fold) out.push_back(i);
        return out;
    }

    std::vector<int> except_fold_indices(int fold) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(samples.size()); ++i)
            if (folds[static_cast<std::size_t>(i)] != fold) out.push_back(i);
        return out;
    }
};

// Ingest a manifest: load each wav, downmix happened in load_wav, resample to
// the canonical rate, then peak-normalize. Paths resolve relative to the
// manifest's directory.
inline Dataset load_dataset(const std::string& manifest_path, int canonical_rate = 44100) {
    const DatasetManifest m = load_manifest(manifest_path);
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    Dataset ds;
    ds.num_classes = m.num_classes;
    ds.num_folds = m.num_folds;
    for (const ManifestEntry& e : m.entries) {
        std::filesystem::path p(e.filename);
        if (p.is_relative()) p = base / p;
        WaveSample w = load_wav(p.string());
        if (w.sample_rate != canonical_rate) w = resample_linear(w, canonical_rate);
        w = normalize(std::move(w));
        w.label = e.label;
        ds.samples.push_back(std::move(w));
        ds.folds.push_back(e.fold);
    }
    return ds;
}

} // namespace soundclr
