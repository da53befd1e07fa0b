#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "soundclr/augmentation.hpp"
#include "soundclr/dsp.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/losses.hpp"
#include "soundclr/model.hpp"
#include "soundclr/optimizer.hpp"

namespace soundclr {

// Everything a training run depends on. Struct defaults are the full-scale
// settings; desk_train_config() below shrinks them for the synthetic corpus.
struct TrainConfig {
    std::string scheme = "hybrid"; // ce | two_stage_contrastive | hybrid
    int epochs = 30;
    int stage1_epochs = -1; // two-stage split; -1 = 70% of epochs
    int batch_size = 128;
    double base_lr = 5e-4;
    double decay_factor = 0.98;
    int warmup_epochs = 10;
    AdamConfig adam;
    LossConfig loss;
    AugmentConfig augment;
    StftConfig stft;
    ModelConfig model;
    std::uint64_t seed = 1;

    int stage1_count() const {
        if (stage1_epochs >= 0) return stage1_epochs;
        return static_cast<int>(std::lround(0.7 * epochs));
    }

    void validate() const {
        if (scheme != "ce" && scheme != "two_stage_contrastive" && scheme != "hybrid")
            throw ConfigError("train: unknown scheme '" + scheme + "'");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
        if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("train: decay_factor must be in (0, 1]");
        if (warmup_epochs < 1) throw ConfigError("train: warmup_epochs must be >= 1");
        if (!(base_lr > 0.0)) throw ConfigError("train: base_lr must be > 0");
        loss.validate();
        augment.validate();
        model.validate();
    }
};

// Desk-scale preset used for the synthetic corpus: smaller batches, shorter
// warmup, and a higher learning rate suited to a from-scratch small CNN.
inline TrainConfig desk_train_config() {
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 30;
    cfg.base_lr = 3e-3;
    cfg.warmup_epochs = 3;
    cfg.decay_factor = 0.97;
    return cfg;
}

using json = nlohmann::json;

inline void to_json(json& j, const StftConfig& c) {
    j = json{{"window_len", c.window_len}, {"hop", c.hop},     {"n_mels", c.n_mels},
             {"fmin", c.fmin},             {"fmax", c.fmax},   {"log_eps", c.log_eps},
             {"standardize", c.standardize}};
}
inline void from_json(const json& j, StftConfig& c) {
    c.window_len = j.value("window_len", c.window_len);
    c.hop = j.value("hop", c.hop);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.fmin = j.value("fmin", c.fmin);
    c.fmax = j.value("fmax", c.fmax);
    c.log_eps = j.value("log_eps", c.log_eps);
    c.standardize = j.value("standardize", c.standardize);
}

inline void to_json(json& j, const AugmentConfig& c) {
    j = json{{"scale_min", c.scale_min},
             {"scale_max", c.scale_max},
             {"silence_threshold", c.silence_threshold},
             {"target_len", c.target_len},
             {"freq_mask_width", c.freq_mask_width},
             {"time_mask_width", c.time_mask_width},
             {"freq_masks", c.freq_masks},
             {"time_masks", c.time_masks}};
}
inline void from_json(const json& j, AugmentConfig& c) {
    c.scale_min = j.value("scale_min", c.scale_min);
    c.scale_max = j.value("scale_max", c.scale_max);
    c.silence_threshold = j.value("silence_threshold", c.silence_threshold);
    c.target_len = j.value("target_len", c.target_len);
    c.freq_mask_width = j.value("freq_mask_width", c.freq_mask_width);
    c.time_mask_width = j.value("time_mask_width", c.time_mask_width);
    c.freq_masks = j.value("freq_masks", c.freq_masks);
    c.time_masks = j.value("time_masks", c.time_masks);
}

inline void to_json(json& j, const LossConfig& c) {
    j = json{{"tau", c.tau}, {"alpha", c.alpha}, {"self_in_numerator", c.self_in_numerator}};
}
inline void from_json(const json& j, LossConfig& c) {
    c.tau = j.value("tau", c.tau);
    c.alpha = j.value("alpha", c.alpha);
    c.self_in_numerator = j.value("self_in_numerator", c.self_in_numerator);
}

inline void to_json(json& j, const ModelConfig& c) {
    j = json{{"conv_channels", c.conv_channels},
             {"repr_dim", c.repr_dim},
             {"proj_dim", c.proj_dim},
             {"num_classes", c.num_classes},
             {"in_channels", c.in_channels}};
}
inline void from_json(const json& j, ModelConfig& c) {
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.repr_dim = j.value("repr_dim", c.repr_dim);
    c.proj_dim = j.value("proj_dim", c.proj_dim);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.in_channels = j.value("in_channels", c.in_channels);
}

inline void to_json(json& j, const AdamConfig& c) {
    j = json{{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}
inline void from_json(const json& j, AdamConfig& c) {
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
}

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"scheme", c.scheme},
             {"epochs", c.epochs},
             {"stage1_epochs", c.stage1_epochs},
             {"batch_size", c.batch_size},
             {"base_lr", c.base_lr},
             {"decay_factor", c.decay_factor},
             {"warmup_epochs", c.warmup_epochs},
             {"adam", c.adam},
             {"loss", c.loss},
             {"augment", c.augment},
             {"stft", c.stft},
             {"model", c.model},
             {"seed", c.seed}};
}
inline void from_json(const json& j, TrainConfig& c) {
    c.scheme = j.value("scheme", c.scheme);
    c.epochs = j.value("epochs", c.epochs);
    c.stage1_epochs = j.value("stage1_epochs", c.stage1_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    if (j.contains("adam")) j.at("adam").get_to(c.adam);
    if (j.contains("loss")) j.at("loss").get_to(c.loss);
    if (j.contains("augment")) j.at("augment").get_to(c.augment);
    if (j.contains("stft")) j.at("stft").get_to(c.stft);
    if (j.contains("model")) j.at("model").get_to(c.model);
    c.seed = j.value("seed", c.seed);
}

} // namespace soundclr
