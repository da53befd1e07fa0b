#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "soundclr/augmentation.hpp"
#include "soundclr/dataset.hpp"
#include "soundclr/dsp.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/losses.hpp"
#include "soundclr/model.hpp"
#include "soundclr/rng.hpp"

namespace soundclr {

struct Metrics {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    double mean_loss = 0.0;
    std::vector<std::size_t> confusion; // row-major [C x C], row = true class
    std::size_t total = 0;

    std::size_t confusion_at(int truth, int pred, int C) const {
        return confusion[static_cast<std::size_t>(truth) * static_cast<std::size_t>(C) +
                         static_cast<std::size_t>(pred)];
    }
};

struct MarginStats {
    double intra = 0.0;  // mean same-class cosine similarity
    double inter = 0.0;  // mean different-class cosine similarity
    double margin = 0.0; // intra - inter
};

// Argmax with lowest-index tie-break.
inline int argmax_row(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return static_cast<int>(best);
}

// Stack per-sample [3 x M x L] feature tensors into one batch tensor.
inline Tensor stack_features(const std::vector<Tensor>& feats, const std::vector<int>& idx) {
    if (idx.empty()) throw DataError("stack_features: empty selection");
    const Tensor& first = feats[static_cast<std::size_t>(idx[0])];
    Tensor out({idx.size(), first.dim(0), first.dim(1), first.dim(2)});
    const std::size_t per = first.numel();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Tensor& t = feats[static_cast<std::size_t>(idx[i])];
        if (!t.same_shape(first)) throw DataError("stack_features: inconsistent feature shapes");
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

// Deterministic, augmentation-free evaluation on precomputed features.
inline Metrics evaluate(const Model& model, const std::vector<Tensor>& feats, const std::vector<int>& labels,
                        int chunk = 32) {
    if (feats.empty()) throw DataError("evaluate: empty dataset slice");
    const int C = model.cfg.num_classes;
    Metrics m;
    m.confusion.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(C), 0);
    m.total = feats.size();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(chunk)) {
        std::vector<int> idx;
        std::vector<int> batch_labels;
        for (std::size_t i = start; i < std::min(feats.size(), start + static_cast<std::size_t>(chunk)); ++i) {
            idx.push_back(static_cast<int>(i));
            batch_labels.push_back(labels[i]);
        }
        const ForwardCache f = model.forward(stack_features(feats, idx));
        const LossValue ce = cross_entropy(f.logits, batch_labels);
        loss_sum += ce.value * static_cast<double>(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int pred = argmax_row(&f.logits.data[i * static_cast<std::size_t>(C)], static_cast<std::size_t>(C));
            const int truth = batch_labels[i];
            m.confusion[static_cast<std::size_t>(truth) * static_cast<std::size_t>(C) + static_cast<std::size_t>(pred)]++;
            if (pred == truth) ++correct;
        }
    }
    m.mean_loss = loss_sum / static_cast<double>(m.total);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
    m.per_class_accuracy.assign(static_cast<std::size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        std::size_t row_total = 0;
        for (int p = 0; p < C; ++p) row_total += m.confusion_at(c, p, C);
        if (row_total > 0)
            m.per_class_accuracy[static_cast<std::size_t>(c)] =
                static_cast<double>(m.confusion_at(c, c, C)) / static_cast<double>(row_total);
    }
    return m;
}

// Unweighted mean of per-model softmax outputs; rows of the result sum to 1.
inline Tensor ensemble_predict(const std::vector<const Model*>& models, const Tensor& input) {
    if (models.empty()) throw ConfigError("ensemble_predict: empty model list");
    const int C = models[0]->cfg.num_classes;
    for (const Model* m : models)
        if (m->cfg.num_classes != C) throw DataError("ensemble_predict: class-count mismatch");
    Tensor mean;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const ForwardCache f = models[i]->forward(input);
        Tensor probs = nn::softmax(f.logits);
        if (i == 0) {
            mean = std::move(probs);
        } else {
            for (std::size_t k = 0; k < mean.numel(); ++k) mean.data[k] += probs.data[k];
        }
    }
    for (double& v : mean.data) v /= static_cast<double>(models.size());
    return mean;
}

inline Metrics evaluate_ensemble(const std::vector<const Model*>& models, const std::vector<Tensor>& feats,
                                 const std::vector<int>& labels, int chunk = 32) {
    if (feats.empty()) throw DataError("evaluate_ensemble: empty dataset slice");
    const int C = models.at(0)->cfg.num_classes;
    Metrics m;
    m.confusion.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(C), 0);
    m.total = feats.size();
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(chunk)) {
        std::vector<int> idx;
        for (std::size_t i = start; i < std::min(feats.size(), start + static_cast<std::size_t>(chunk)); ++i)
            idx.push_back(static_cast<int>(i));
        const Tensor probs = ensemble_predict(models, stack_features(feats, idx));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double* row = &probs.data[i * static_cast<std::size_t>(C)];
            const int pred = argmax_row(row, static_cast<std::size_t>(C));
            const int truth = labels[static_cast<std::size_t>(idx[i])];
            loss_sum += -std::log(std::max(row[truth], 1e-300));
            m.confusion[static_cast<std::size_t>(truth) * static_cast<std::size_t>(C) + static_cast<std::size_t>(pred)]++;
            if (pred == truth) ++correct;
        }
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
    m.mean_loss = loss_sum / static_cast<double>(m.total);
    return m;
}

// Featurize a dataset slice with the deterministic eval pipeline.
inline std::vector<Tensor> eval_features(const Dataset& ds, const std::vector<int>& idx, long target_len,
                                         const StftConfig& stft, const MelBank& bank) {
    std::vector<Tensor> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(eval_featurize(ds.samples[static_cast<std::size_t>(i)], target_len, stft, bank));
    return out;
}

inline std::vector<int> slice_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.samples[static_cast<std::size_t>(i)].label);
    return out;
}

// Accuracy under additive white Gaussian noise on the normalized test waves.
// sigma = 0 reproduces the clean features exactly (no draws are consumed for
// it either, but each sigma has its own derived stream anyway).
inline std::vector<double> noise_sweep(const Model& model, const Dataset& ds, const std::vector<int>& idx,
                                       const std::vector<double>& sigmas, std::uint64_t seed, long target_len,
                                       const StftConfig& stft, const MelBank& bank) {
    std::vector<double> acc;
    const std::vector<int> labels = slice_labels(ds, idx);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        const double sigma = sigmas[si];
        if (sigma < 0.0) throw ConfigError("noise_sweep: sigma must be >= 0");
        std::vector<Tensor> feats;
        feats.reserve(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            WaveSample w = ds.samples[static_cast<std::size_t>(idx[k])];
            if (sigma > 0.0) {
                Rng rng = Rng::derive(seed, {kStreamNoise, si, k});
                for (double& s : w.samples) s += sigma * rng.gaussian();
            }
            feats.push_back(eval_featurize(w, target_len, stft, bank));
        }
        acc.push_back(evaluate(model, feats, labels).accuracy);
    }
    return acc;
}

// Representation-space separation diagnostic: mean intra-class minus mean
// inter-class cosine similarity of the normalized representations h.
inline MarginStats margin_stats(const Model& model, const std::vector<Tensor>& feats,
                                const std::vector<int>& labels, int chunk = 32) {
    std::vector<std::vector<double>> H;
    for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(chunk)) {
        std::vector<int> idx;
        for (std::size_t i = start; i < std::min(feats.size(), start + static_cast<std::size_t>(chunk)); ++i)
            idx.push_back(static_cast<int>(i));
        const ForwardCache f = model.forward(stack_features(feats, idx));
        const std::size_t D = f.h.dim(1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            H.emplace_back(f.h.data.begin() + static_cast<std::ptrdiff_t>(i * D),
                           f.h.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * D));
    }
    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    for (std::size_t i = 0; i < H.size(); ++i)
        for (std::size_t j = i + 1; j < H.size(); ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < H[i].size(); ++d) dot += H[i][d] * H[j][d];
            if (labels[i] == labels[j]) {
                intra += dot;
                ++n_intra;
            } else {
                inter += dot;
                ++n_inter;
            }
        }
    if (n_intra == 0) throw DataError("margin_stats: no same-class pairs in the slice");
    if (n_inter == 0) throw DataError("margin_stats: need at least 2 classes");
    MarginStats s;
    s.intra = intra / static_cast<double>(n_intra);
    s.inter = inter / static_cast<double>(n_inter);
    s.margin = s.intra - s.inter;
    return s;
}

} // namespace soundclr
