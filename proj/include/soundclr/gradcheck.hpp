#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "soundclr/losses.hpp"
#include "soundclr/model.hpp"
#include "soundclr/nn.hpp"
#include "soundclr/rng.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr::gradcheck {

// Central finite differences, h = 1e-5 per scalar input, all in 64-bit.
// Relative error uses max(1, |a|, |fd|) in the denominator so near-zero
// gradients compare on an absolute scale.

inline constexpr double kStep = 1e-5;

using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

inline std::vector<Tensor> fd_gradients(const ScalarFn& fn, std::vector<Tensor> inputs, double h = kStep) {
    std::vector<Tensor> grads;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor g(inputs[t].shape);
        for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
            const double orig = inputs[t].data[i];
            inputs[t].data[i] = orig + h;
            const double fp = fn(inputs);
            inputs[t].data[i] = orig - h;
            const double fm = fn(inputs);
            inputs[t].data[i] = orig;
            g.data[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

inline double max_rel_error(const std::vector<Tensor>& analytic, const std::vector<Tensor>& fd) {
    double worst = 0.0;
    for (std::size_t t = 0; t < analytic.size(); ++t)
        for (std::size_t i = 0; i < analytic[t].numel(); ++i) {
            const double a = analytic[t].data[i], f = fd[t].data[i];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(f)});
            worst = std::max(worst, std::fabs(a - f) / denom);
        }
    return worst;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Scalarize an op through a fixed random projection R: s = sum(out .* R).
// The analytic input gradients are then backward(R).

struct Report {
    std::string op;
    double max_rel_err = 0.0;
    bool pass = false;
};

inline Report check_dense(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t I = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const std::size_t O = static_cast<std::size_t>(rng.uniform_int(1, 5));
    Tensor x = random_tensor({N, I}, rng), W = random_tensor({I, O}, rng), b = random_tensor({O}, rng);
    const Tensor R = random_tensor({N, O}, rng);

    nn::DenseGrads g = nn::dense_backward(x, W, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const Tensor out = nn::dense(in[0], in[1], in[2]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g.x, g.W, g.b}, fd_gradients(fn, {x, W, b}));
    return {"dense", err, err < tol};
}

inline Report check_relu(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(2, 6));
    Tensor x = random_tensor({N, N}, rng);
    for (double& v : x.data) // keep inputs away from the kink
        if (std::fabs(v) < 1e-3) v = v < 0 ? v - 1e-2 : v + 1e-2;
    const Tensor R = random_tensor({N, N}, rng);
    const Tensor g = nn::relu_backward(x, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const Tensor out = nn::relu(in[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g}, fd_gradients(fn, {x}));
    return {"relu", err, err < tol};
}

inline Report check_conv2d(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(1, 2));
    const std::size_t Cin = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t Cout = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t H = static_cast<std::size_t>(rng.uniform_int(3, 6));
    const std::size_t W = static_cast<std::size_t>(rng.uniform_int(3, 6));
    Tensor x = random_tensor({N, Cin, H, W}, rng), K = random_tensor({Cout, Cin, 3, 3}, rng),
           b = random_tensor({Cout}, rng);
    const Tensor R = random_tensor({N, Cout, H, W}, rng);
    nn::ConvGrads g = nn::conv2d_backward(x, K, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const Tensor out = nn::conv2d(in[0], in[1], in[2]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g.x, g.K, g.b}, fd_gradients(fn, {x, K, b}));
    return {"conv2d", err, err < tol};
}

inline Report check_maxpool(Rng& rng, double tol) {
    const std::size_t N = 1, C = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t H = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t W = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3));
    // well-separated values keep perturbations away from argmax ties
    Tensor x({N, C, H, W});
    std::vector<double> vals(x.numel());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i) * 0.1;
    for (std::size_t i = vals.size() - 1; i > 0; --i)
        std::swap(vals[i], vals[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    x.data = vals;
    const Tensor R = random_tensor({N, C, H / 2, W / 2}, rng);
    const nn::MaxPoolResult fwd = nn::maxpool2d(x);
    const Tensor g = nn::maxpool2d_backward(x, fwd, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const nn::MaxPoolResult out = nn::maxpool2d(in[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.out.numel(); ++i) s += out.out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g}, fd_gradients(fn, {x}));
    return {"maxpool2d", err, err < tol};
}

inline Report check_gap(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t C = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t H = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const std::size_t W = static_cast<std::size_t>(rng.uniform_int(2, 5));
    Tensor x = random_tensor({N, C, H, W}, rng);
    const Tensor R = random_tensor({N, C}, rng);
    const Tensor g = nn::global_avg_pool_backward(x.shape, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const Tensor out = nn::global_avg_pool(in[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g}, fd_gradients(fn, {x}));
    return {"global_avg_pool", err, err < tol};
}

inline Report check_l2_normalize(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t D = static_cast<std::size_t>(rng.uniform_int(2, 6));
    Tensor x = random_tensor({N, D}, rng, 0.2, 1.5); // rows safely away from zero norm
    const Tensor R = random_tensor({N, D}, rng);
    const Tensor g = nn::l2_normalize_backward(x, R);
    auto fn = [&R](const std::vector<Tensor>& in) {
        const Tensor out = nn::l2_normalize(in[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * R.data[i];
        return s;
    };
    const double err = max_rel_error({g}, fd_gradients(fn, {x}));
    return {"l2_normalize", err, err < tol};
}

inline Report check_cross_entropy(Rng& rng, double tol) {
    const std::size_t N = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const std::size_t C = static_cast<std::size_t>(rng.uniform_int(2, 6));
    Tensor logits = random_tensor({N, C}, rng, -2.0, 2.0);
    std::vector<int> labels(N);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(C) - 1));
    const LossValue lv = cross_entropy(logits, labels);
    auto fn = [&labels](const std::vector<Tensor>& in) { return cross_entropy(in[0], labels).value; };
    const double err = max_rel_error({lv.grad}, fd_gradients(fn, {logits}));
    return {"cross_entropy", err, err < tol};
}

// SupCon gradient through the l2-normalization, as in the training graph:
// raw -> l2_normalize -> loss.
inline Report check_sup_contrastive(Rng& rng, double tol, bool self_in_numerator) {
    const std::size_t D = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const std::size_t pairs = static_cast<std::size_t>(rng.uniform_int(2, 4));
    const std::size_t N = 2 * pairs;
    Tensor raw = random_tensor({N, D}, rng, -1.0, 1.0);
    for (std::size_t n = 0; n < N; ++n) { // keep norms comfortably positive
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += raw.data[n * D + d] * raw.data[n * D + d];
        if (s < 0.25)
            for (std::size_t d = 0; d < D; ++d) raw.data[n * D + d] += 0.5;
    }
    std::vector<int> labels(N);
    for (std::size_t i = 0; i < N; ++i) labels[i] = static_cast<int>(i / 2);
    LossConfig cfg;
    cfg.tau = 0.5;
    cfg.self_in_numerator = self_in_numerator;

    const Tensor z = nn::l2_normalize(raw);
    const LossValue lv = sup_contrastive(z, labels, cfg);
    const Tensor grad_raw = nn::l2_normalize_backward(raw, lv.grad);
    auto fn = [&labels, &cfg](const std::vector<Tensor>& in) {
        return sup_contrastive(nn::l2_normalize(in[0]), labels, cfg).value;
    };
    const double err = max_rel_error({grad_raw}, fd_gradients(fn, {raw}));
    return {self_in_numerator ? "sup_contrastive(self_in)" : "sup_contrastive", err, err < tol};
}

inline Report check_hybrid(Rng& rng, double tol) {
    const std::size_t D = 4, N = 4, C = 3;
    Tensor logits = random_tensor({N, C}, rng, -1.5, 1.5);
    Tensor raw = random_tensor({N, D}, rng, 0.3, 1.2);
    std::vector<int> labels{0, 0, 1, 1};
    LossConfig cfg;
    cfg.alpha = 0.25 + 0.5 * rng.uniform();
    cfg.tau = 0.5;

    const Tensor z = nn::l2_normalize(raw);
    const HybridLoss h = hybrid(logits, z, labels, cfg);
    const Tensor grad_raw = nn::l2_normalize_backward(raw, h.grad_projections);
    auto fn = [&labels, &cfg](const std::vector<Tensor>& in) {
        return hybrid(in[0], nn::l2_normalize(in[1]), labels, cfg).value;
    };
    const double err = max_rel_error({h.grad_logits, grad_raw}, fd_gradients(fn, {logits, raw}));
    return {"hybrid", err, err < tol};
}

// Full-graph composition: parameter gradients of the scalar hybrid loss on a
// tiny encoder, checked against finite differences of that scalar.
inline Report check_composition(Rng& rng, double tol) {
    ModelConfig mc;
    mc.conv_channels = {2};
    mc.repr_dim = 6;
    mc.proj_dim = 3;
    mc.num_classes = 3;
    Model model(mc);
    model.init(rng);

    Tensor input = random_tensor({4, 3, 8, 8}, rng);
    std::vector<int> labels{0, 0, 2, 2};
    LossConfig lc;
    lc.alpha = 0.5;
    lc.tau = 0.5;

    const ForwardCache f = model.forward(input);
    const HybridLoss h = hybrid(f.logits, f.z, labels, lc);
    const GradSet grads = model.backward(f, h.grad_logits, h.grad_projections);

    double worst = 0.0;
    for (auto& [name, p] : model.params) {
        const Tensor& analytic = grads.at(name);
        Tensor fd(p.shape);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double orig = p.data[i];
            p.data[i] = orig + kStep;
            const ForwardCache fp = model.forward(input);
            const double vp = hybrid(fp.logits, fp.z, labels, lc).value;
            p.data[i] = orig - kStep;
            const ForwardCache fm = model.forward(input);
            const double vm = hybrid(fm.logits, fm.z, labels, lc).value;
            p.data[i] = orig;
            fd.data[i] = (vp - vm) / (2.0 * kStep);
        }
        worst = std::max(worst, max_rel_error({analytic}, {fd}));
    }
    return {"composition(hybrid)", worst, worst < tol};
}

// Runs every check `rounds` times and keeps the worst error per op.
inline std::vector<Report> run_suite(std::uint64_t seed, int rounds = 20, double tol = 1e-5,
                                     double composition_tol = 1e-4) {
    Rng rng(seed);
    std::vector<Report> worst;
    auto merge = [&worst](const Report& r) {
        for (Report& w : worst)
            if (w.op == r.op) {
                w.max_rel_err = std::max(w.max_rel_err, r.max_rel_err);
                w.pass = w.pass && r.pass;
                return;
            }
        worst.push_back(r);
    };
    for (int i = 0; i < rounds; ++i) {
        merge(check_dense(rng, tol));
        merge(check_relu(rng, tol));
        merge(check_conv2d(rng, tol));
        merge(check_maxpool(rng, tol));
        merge(check_gap(rng, tol));
        merge(check_l2_normalize(rng, tol));
        merge(check_cross_entropy(rng, tol));
        merge(check_sup_contrastive(rng, tol, false));
        merge(check_sup_contrastive(rng, tol, true));
        merge(check_hybrid(rng, tol));
    }
    merge(check_composition(rng, composition_tol));
    return worst;
}

} // namespace soundclr::gradcheck
