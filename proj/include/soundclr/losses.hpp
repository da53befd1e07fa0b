#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "soundclr/errors.hpp"
#include "soundclr/nn.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

struct LossConfig {
    double tau = 0.1;   // contrastive temperature
    double alpha = 0.5; // hybrid mixing weight
    // Literal reading of the contrastive numerator keeps the anchor itself as
    // a positive; off by default (the anchor term is a constant exp(1/tau)
    // that degenerates for single-positive batches).
    bool self_in_numerator = false;

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("loss: tau must be > 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss: alpha must be in [0, 1]");
    }
};

struct LossValue {
    double value = 0.0;
    Tensor grad; // w.r.t. the loss input (logits or projections)
};

// Mean cross-entropy over the batch via the log-sum-exp stable form;
// grad_logits = (softmax - onehot) / N.
inline LossValue cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t N = logits.dim(0), C = logits.dim(1);
    if (labels.size() != N) throw std::invalid_argument("cross_entropy: label count mismatch");
    LossValue out;
    out.grad = Tensor(logits.shape);
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const int y = labels[n];
        if (y < 0 || static_cast<std::size_t>(y) >= C) throw DataError("cross_entropy: label out of range");
        const double* row = &logits.data[n * C];
        double mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
        const double lse = mx + std::log(sum);
        total += lse - row[static_cast<std::size_t>(y)];
        for (std::size_t c = 0; c < C; ++c)
            out.grad.data[n * C + c] = std::exp(row[c] - mx) / sum / static_cast<double>(N);
        out.grad.data[n * C + static_cast<std::size_t>(y)] -= 1.0 / static_cast<double>(N);
    }
    out.value = total / static_cast<double>(N);
    return out;
}

// Supervised contrastive loss, sum-inside-log variant. Per anchor i:
//   L_i = -(1/N_i) log( sum_{j in P(i)} exp(z_i.z_j / tau)
//                       / sum_{k != i} exp(z_i.z_k / tau) )
// with P(i) the same-label indices (anchor excluded unless
// self_in_numerator) and N_i = |P(i)|; batch loss is the mean over anchors.
// grad is the exact analytic gradient w.r.t. z.
inline LossValue sup_contrastive(const Tensor& z, const std::vector<int>& labels, const LossConfig& cfg) {
    cfg.validate();
    const std::size_t N = z.dim(0), D = z.dim(1);
    if (labels.size() != N) throw std::invalid_argument("sup_contrastive: label count mismatch");
    for (std::size_t n = 0; n < N; ++n) {
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += z.data[n * D + d] * z.data[n * D + d];
        if (std::fabs(std::sqrt(s) - 1.0) > 1e-6) throw NumericError("sup_contrastive: row not unit-norm");
    }

    const double inv_tau = 1.0 / cfg.tau;
    std::vector<double> sim(N * N, 0.0); // z_i . z_j / tau
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < D; ++d) dot += z.data[i * D + d] * z.data[j * D + d];
            sim[i * N + j] = sim[j * N + i] = dot * inv_tau;
        }

    LossValue out;
    out.grad = Tensor(z.shape);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t n_pos = 0;
        double shift = -1e300;
        for (std::size_t j = 0; j < N; ++j) {
            const bool in_denom = j != i;
            const bool in_num = labels[j] == labels[i] && (cfg.self_in_numerator || j != i);
            if (in_num) ++n_pos;
            if (in_denom || in_num) shift = std::max(shift, sim[i * N + j]);
        }
        if (n_pos == 0)
            throw DataError("sup_contrastive: anchor " + std::to_string(i) + " has no positives in the batch");

        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const double e = std::exp(sim[i * N + j] - shift);
            if (labels[j] == labels[i] && (cfg.self_in_numerator || j != i)) num += e;
            if (j != i) den += e;
        }
        const double inv_npos = 1.0 / static_cast<double>(n_pos);
        total += -inv_npos * (std::log(num) - std::log(den));

        // dL/d sim_ij, including the 1/N batch-mean factor
        for (std::size_t j = 0; j < N; ++j) {
            const double e = std::exp(sim[i * N + j] - shift);
            double w = 0.0;
            if (labels[j] == labels[i] && (cfg.self_in_numerator || j != i)) w -= e / num;
            if (j != i) w += e / den;
            w *= inv_npos / static_cast<double>(N);
            if (w == 0.0) continue;
            if (j == i) {
                // sim_ii = |z_i|^2 / tau, so d sim_ii / d z_i = 2 z_i / tau
                for (std::size_t d = 0; d < D; ++d)
                    out.grad.data[i * D + d] += w * 2.0 * z.data[i * D + d] * inv_tau;
            } else {
                for (std::size_t d = 0; d < D; ++d) {
                    out.grad.data[i * D + d] += w * z.data[j * D + d] * inv_tau;
                    out.grad.data[j * D + d] += w * z.data[i * D + d] * inv_tau;
                }
            }
        }
    }
    out.value = total / static_cast<double>(N);
    return out;
}

struct HybridLoss {
    double value = 0.0;
    double ce_value = 0.0;
    double supcon_value = 0.0;
    Tensor grad_logits;
    Tensor grad_projections;
};

// L = alpha * SupCon + (1 - alpha) * CrossEntropy. The endpoints skip the
// unused constituent entirely so alpha = 0 reproduces the pure CE path
// bit-for-bit (and alpha = 1 the pure contrastive path).
inline HybridLoss hybrid(const Tensor& logits, const Tensor& z, const std::vector<int>& labels,
                         const LossConfig& cfg) {
    cfg.validate();
    HybridLoss out;
    out.grad_logits = Tensor(logits.shape);
    out.grad_projections = Tensor(z.shape);
    if (cfg.alpha < 1.0) {
        LossValue ce = cross_entropy(logits, labels);
        out.ce_value = ce.value;
        if (cfg.alpha == 0.0) {
            out.grad_logits = std::move(ce.grad);
        } else {
            for (std::size_t i = 0; i < ce.grad.numel(); ++i)
                out.grad_logits.data[i] = (1.0 - cfg.alpha) * ce.grad.data[i];
        }
    }
    if (cfg.alpha > 0.0) {
        LossValue sc = sup_contrastive(z, labels, cfg);
        out.supcon_value = sc.value;
        if (cfg.alpha == 1.0) {
            out.grad_projections = std::move(sc.grad);
        } else {
            for (std::size_t i = 0; i < sc.grad.numel(); ++i)
                out.grad_projections.data[i] = cfg.alpha * sc.grad.data[i];
        }
    }
    out.value = cfg.alpha * out.supcon_value + (1.0 - cfg.alpha) * out.ce_value;
    return out;
}

} // namespace soundclr
