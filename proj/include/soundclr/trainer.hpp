#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "soundclr/checkpoint.hpp"
#include "soundclr/config.hpp"
#include "soundclr/dataset.hpp"
#include "soundclr/evaluation.hpp"
#include "soundclr/losses.hpp"
#include "soundclr/model.hpp"
#include "soundclr/optimizer.hpp"
#include "soundclr/rng.hpp"

namespace soundclr {

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    Checkpoint final;
    Checkpoint best;
    int best_epoch = -1;
    std::vector<EpochMetrics> history;
};

// Label-stratified batches: pick C' classes, draw ceil(B/C') samples from
// each, so every class present in a batch has at least 2 members (required by
// the contrastive loss with self-exclusion). Used for every scheme so that
// schemes are comparable step for step under a shared seed.
inline std::vector<std::vector<int>> stratified_batches(const std::vector<int>& indices,
                                                        const std::vector<int>& labels, int batch_size,
                                                        Rng& rng) {
    std::map<int, std::vector<int>> by_class;
    for (int i : indices) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<int> classes;
    for (const auto& [c, v] : by_class) classes.push_back(c);

    const int n_classes = static_cast<int>(classes.size());
    const int c_per_batch = std::min(n_classes, std::max(1, batch_size / 2));
    const int per_class = (batch_size + c_per_batch - 1) / c_per_batch; // >= 2

    const int n_batches = std::max<int>(1, static_cast<int>(indices.size()) / batch_size);
    std::vector<std::vector<int>> batches;
    for (int b = 0; b < n_batches; ++b) {
        // choose classes: shuffled copy, take the first c_per_batch
        std::vector<int> order = classes;
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        std::vector<int> batch;
        for (int ci = 0; ci < c_per_batch; ++ci) {
            const std::vector<int>& pool = by_class[order[static_cast<std::size_t>(ci)]];
            const int pool_n = static_cast<int>(pool.size());
            if (pool_n >= per_class) {
                // partial Fisher-Yates over a copy: per_class distinct draws
                std::vector<int> tmp = pool;
                for (int k = 0; k < per_class; ++k) {
                    const int j = static_cast<int>(rng.uniform_int(k, pool_n - 1));
                    std::swap(tmp[static_cast<std::size_t>(k)], tmp[static_cast<std::size_t>(j)]);
                    batch.push_back(tmp[static_cast<std::size_t>(k)]);
                }
            } else {
                for (int k = 0; k < per_class; ++k)
                    batch.push_back(pool[static_cast<std::size_t>(rng.uniform_int(0, pool_n - 1))]);
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

namespace trainer_detail {

inline std::set<std::string> param_names(const ParamSet& params, bool encoder, bool classifier, bool projection) {
    std::set<std::string> out;
    for (const auto& [name, t] : params) {
        const bool is_classifier = name.rfind("classifier.", 0) == 0;
        const bool is_proj = name.rfind("proj.", 0) == 0;
        const bool is_encoder = !is_classifier && !is_proj;
        if ((is_encoder && encoder) || (is_classifier && classifier) || (is_proj && projection)) out.insert(name);
    }
    return out;
}

inline bool better(double acc, double loss, double best_acc, double best_loss) {
    if (acc != best_acc) return acc > best_acc;
    return loss < best_loss;
}

} // namespace trainer_detail

// Run one of the three training schemes over an explicit train/val split.
// All randomness is derived from (cfg.seed, epoch, ...), so a resumed run
// continues exactly where the uninterrupted one would be.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, const std::vector<int>& train_idx,
                         const std::vector<int>& val_idx, const Checkpoint* resume = nullptr,
                         int stop_after_epochs = -1) {
    cfg.validate();
    if (train_idx.empty() || val_idx.empty()) throw DataError("train: empty train or validation split");

    std::vector<int> labels(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) labels[i] = ds.samples[i].label;

    Model model(cfg.model);
    OptimizerState opt;
    int start_epoch = 0;
    if (resume != nullptr) {
        model.params = resume->params;
        opt = resume->opt;
        // moment tensors are stored in full; shapes must line up with config
        start_epoch = resume->next_epoch;
    } else {
        Rng init_rng = Rng::derive(cfg.seed, {kStreamInit});
        model.init(init_rng);
        opt = OptimizerState::zeros_like(model.params);
    }

    const MelBank bank(cfg.stft, ds.samples[static_cast<std::size_t>(train_idx[0])].sample_rate);
    const std::vector<Tensor> val_feats = eval_features(ds, val_idx, cfg.augment.target_len, cfg.stft, bank);
    const std::vector<int> val_labels = slice_labels(ds, val_idx);

    const bool two_stage = cfg.scheme == "two_stage_contrastive";
    const int stage1 = two_stage ? std::min(cfg.stage1_count(), cfg.epochs) : cfg.epochs;

    TrainResult result;
    double best_acc = -1.0, best_loss = 1e300;

    const int last_epoch = stop_after_epochs > 0 ? std::min(cfg.epochs, start_epoch + stop_after_epochs) : cfg.epochs;
    for (int epoch = start_epoch; epoch < last_epoch; ++epoch) {
        const bool in_stage2 = two_stage && epoch >= stage1;
        // each stage runs its own warmup + decay schedule
        const int sched_epoch = in_stage2 ? epoch - stage1 : epoch;
        const double lr = lr_at(sched_epoch, cfg.base_lr, cfg.warmup_epochs, cfg.decay_factor);

        Model::TrainFlags flags;
        std::set<std::string> trainable;
        if (cfg.scheme == "ce") {
            flags = {true, true, false};
        } else if (cfg.scheme == "hybrid") {
            flags = {true, true, true};
        } else if (!in_stage2) {
            flags = {true, false, true};
        } else {
            flags = {false, true, false};
        }
        trainable = trainer_detail::param_names(model.params, flags.encoder, flags.classifier, flags.projection);

        Rng sampler_rng = Rng::derive(cfg.seed, {kStreamSampler, static_cast<std::uint64_t>(epoch)});
        const std::vector<std::vector<int>> batches =
            stratified_batches(train_idx, labels, cfg.batch_size, sampler_rng);

        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        for (const std::vector<int>& batch : batches) {
            std::vector<Tensor> feats;
            std::vector<int> batch_labels;
            feats.reserve(batch.size());
            for (int i : batch) {
                Rng aug_rng = Rng::derive(cfg.seed, {kStreamAugment, static_cast<std::uint64_t>(epoch),
                                                     static_cast<std::uint64_t>(i)});
                feats.push_back(
                    augment_featurize(ds.samples[static_cast<std::size_t>(i)], cfg.augment, cfg.stft, bank, aug_rng));
                batch_labels.push_back(labels[static_cast<std::size_t>(i)]);
            }
            std::vector<int> all(batch.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            const Tensor input = stack_features(feats, all);

            const ForwardCache f = model.forward(input);

            double batch_loss = 0.0;
            Tensor grad_logits, grad_z;
            if (cfg.scheme == "ce") {
                LossValue ce = cross_entropy(f.logits, batch_labels);
                batch_loss = ce.value;
                grad_logits = std::move(ce.grad);
            } else if (cfg.scheme == "hybrid") {
                HybridLoss h = hybrid(f.logits, f.z, batch_labels, cfg.loss);
                batch_loss = h.value;
                if (cfg.loss.alpha < 1.0) grad_logits = std::move(h.grad_logits);
                if (cfg.loss.alpha > 0.0) grad_z = std::move(h.grad_projections);
            } else if (!in_stage2) {
                LossValue sc = sup_contrastive(f.z, batch_labels, cfg.loss);
                batch_loss = sc.value;
                grad_z = std::move(sc.grad);
            } else {
                LossValue ce = cross_entropy(f.logits, batch_labels);
                batch_loss = ce.value;
                grad_logits = std::move(ce.grad);
            }
            if (!std::isfinite(batch_loss)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));

            const GradSet grads = model.backward(f, grad_logits, grad_z, flags);
            adam_step(model.params, grads, opt, lr, trainable, cfg.adam);

            loss_sum += batch_loss * static_cast<double>(batch.size());
            const std::size_t C = static_cast<std::size_t>(cfg.model.num_classes);
            for (std::size_t i = 0; i < batch.size(); ++i)
                if (argmax_row(&f.logits.data[i * C], C) == batch_labels[i]) ++correct;
            seen += batch.size();
        }

        const Metrics val = evaluate(model, val_feats, val_labels);

        EpochMetrics em;
        em.epoch = epoch;
        em.lr = lr;
        em.train_loss = loss_sum / static_cast<double>(seen);
        em.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        em.val_loss = val.mean_loss;
        em.val_acc = val.accuracy;
        result.history.push_back(em);

        if (trainer_detail::better(val.accuracy, val.mean_loss, best_acc, best_loss)) {
            best_acc = val.accuracy;
            best_loss = val.mean_loss;
            result.best_epoch = epoch;
            result.best.config = cfg;
            result.best.params = model.params;
            result.best.opt = opt;
            result.best.next_epoch = epoch + 1;
            result.best.seed = cfg.seed;
        }
    }

    result.final.config = cfg;
    result.final.params = std::move(model.params);
    result.final.opt = std::move(opt);
    result.final.next_epoch = last_epoch;
    result.final.seed = cfg.seed;
    if (result.best_epoch < 0) result.best = result.final; // resumed tail with no better epoch
    return result;
}

struct FoldResult {
    int fold = 0;
    Metrics metrics;
    TrainResult run;
};

struct CrossValidation {
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0; // sample standard deviation
};

// Official-fold cross-validation: for each fold k, train on the others and
// validate on k; aggregate as mean +- sample std.
inline CrossValidation cross_validate(const Dataset& ds, const TrainConfig& cfg) {
    if (ds.num_folds < 2) throw DataError("cross_validate: need at least 2 folds");
    CrossValidation cv;
    for (int k = 1; k <= ds.num_folds; ++k) {
        FoldResult fr;
        fr.fold = k;
        fr.run = train(ds, cfg, ds.except_fold_indices(k), ds.fold_indices(k));

        Model model(cfg.model);
        model.params = fr.run.best.params;
        const MelBank bank(cfg.stft, ds.samples[0].sample_rate);
        const std::vector<int> vidx = ds.fold_indices(k);
        fr.metrics = evaluate(model, eval_features(ds, vidx, cfg.augment.target_len, cfg.stft, bank),
                              slice_labels(ds, vidx));
        cv.folds.push_back(std::move(fr));
    }
    double sum = 0.0;
    for (const FoldResult& fr : cv.folds) sum += fr.metrics.accuracy;
    cv.mean_accuracy = sum / static_cast<double>(cv.folds.size());
    double ss = 0.0;
    for (const FoldResult& fr : cv.folds) ss += (fr.metrics.accuracy - cv.mean_accuracy) * (fr.metrics.accuracy - cv.mean_accuracy);
    cv.std_accuracy = cv.folds.size() > 1 ? std::sqrt(ss / static_cast<double>(cv.folds.size() - 1)) : 0.0;
    return cv;
}

inline void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
    std::ofstream f(path);
    if (!f) throw DataError("write_metrics_csv: cannot open " + path);
    f << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
    f.precision(12);
    for (const EpochMetrics& m : history)
        f << m.epoch << ',' << m.lr << ',' << m.train_loss << ',' << m.train_acc << ',' << m.val_loss << ','
          << m.val_acc << '\n';
}

} // namespace soundclr
