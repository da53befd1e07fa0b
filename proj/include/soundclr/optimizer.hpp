#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "soundclr/errors.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    ParamSet m, v;
    std::int64_t step = 0;

    static OptimizerState zeros_like(const ParamSet& params) {
        OptimizerState s;
        for (const auto& [name, p] : params) {
            s.m.emplace(name, Tensor(p.shape));
            s.v.emplace(name, Tensor(p.shape));
        }
        return s;
    }
};

// Linear warmup to base_lr over warmup_epochs, then exponential decay.
inline double lr_at(int epoch, double base_lr, int warmup_epochs, double decay_factor) {
    if (epoch < warmup_epochs)
        return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
    return base_lr * std::pow(decay_factor, epoch - warmup_epochs);
}

// Standard Adam with bias correction. Parameters outside `trainable` are left
// untouched, including their moment estimates.
inline void adam_step(ParamSet& params, const GradSet& grads, OptimizerState& state, double lr,
                      const std::set<std::string>& trainable, const AdamConfig& cfg = {}) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const std::string& name : trainable) {
        Tensor& p = params.at(name);
        const Tensor& g = grads.at(name);
        Tensor& m = state.m.at(name);
        Tensor& v = state.v.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = g.data[i];
            if (!std::isfinite(gi)) throw NumericError("adam_step: non-finite gradient in " + name);
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace soundclr
