#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "soundclr/errors.hpp"
#include "soundclr/nn.hpp"
#include "soundclr/rng.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

// Small configurable CNN encoder f(.) (conv 3x3 -> relu -> maxpool 2x2 per
// block, then global average pool and a dense layer to the representation),
// plus two linear heads on the normalized representation: the classifier and
// the contrastive projection g(.).
struct ModelConfig {
    std::vector<int> conv_channels{8, 16, 32};
    int repr_dim = 128; // D_f
    int proj_dim = 64;  // D_g, << D_f
    int num_classes = 0;
    int in_channels = 3;

    void validate() const {
        if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
        if (repr_dim < 1 || proj_dim < 1) throw ConfigError("model: dims must be >= 1");
        if (proj_dim >= repr_dim) throw ConfigError("model: proj_dim must be < repr_dim");
        for (int c : conv_channels)
            if (c < 1) throw ConfigError("model: conv channels must be >= 1");
    }
};

namespace model_detail {

inline Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

} // namespace model_detail

// Which parts receive gradients; frozen parts are skipped entirely so their
// GradSet entries stay exactly zero.
struct TrainFlags {
    bool encoder = true;
    bool classifier = true;
    bool projection = true;
};

struct ForwardCache {
    Tensor input; // cropped network input
    std::vector<Tensor> conv_in;   // input to each conv
    std::vector<Tensor> conv_out;  // pre-relu conv output
    std::vector<Tensor> relu_out;  // post-relu (input to pool)
    std::vector<nn::MaxPoolResult> pools;
    Tensor pooled;    // after global average pool [N x C_last]
    Tensor repr_raw;  // dense output before normalization [N x D_f]
    Tensor h;         // normalized representation
    Tensor logits;    // classifier head
    Tensor proj_raw;  // projection head before normalization
    Tensor z;         // normalized projection
};

struct Model {
    ModelConfig cfg;
    ParamSet params;

    Model() = default;
    explicit Model(const ModelConfig& c) : cfg(c) { c.validate(); }

    void init(Rng& rng) {
        params.clear();
        int cin = cfg.in_channels;
        for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
            const int cout = cfg.conv_channels[i];
            const std::string p = "conv" + std::to_string(i);
            params[p + ".K"] = model_detail::glorot_uniform(
                {static_cast<std::size_t>(cout), static_cast<std::size_t>(cin), 3, 3},
                static_cast<std::size_t>(cin) * 9, static_cast<std::size_t>(cout) * 9, rng);
            params[p + ".b"] = Tensor({static_cast<std::size_t>(cout)});
            cin = cout;
        }
        params["repr.W"] = model_detail::glorot_uniform(
            {static_cast<std::size_t>(cin), static_cast<std::size_t>(cfg.repr_dim)},
            static_cast<std::size_t>(cin), static_cast<std::size_t>(cfg.repr_dim), rng);
        params["repr.b"] = Tensor({static_cast<std::size_t>(cfg.repr_dim)});
        params["classifier.W"] = model_detail::glorot_uniform(
            {static_cast<std::size_t>(cfg.repr_dim), static_cast<std::size_t>(cfg.num_classes)},
            static_cast<std::size_t>(cfg.repr_dim), static_cast<std::size_t>(cfg.num_classes), rng);
        params["classifier.b"] = Tensor({static_cast<std::size_t>(cfg.num_classes)});
        params["proj.W"] = model_detail::glorot_uniform(
            {static_cast<std::size_t>(cfg.repr_dim), static_cast<std::size_t>(cfg.proj_dim)},
            static_cast<std::size_t>(cfg.repr_dim), static_cast<std::size_t>(cfg.proj_dim), rng);
        params["proj.b"] = Tensor({static_cast<std::size_t>(cfg.proj_dim)});
    }

    // Spatial dims must survive one 2x2 pool per block; the tail is cropped.
    Tensor crop_input(const Tensor& x) const {
        const std::size_t mult = std::size_t{1} << cfg.conv_channels.size();
        const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        const std::size_t Hc = H - H % mult, Wc = W - W % mult;
        if (Hc == 0 || Wc == 0) throw DataError("model: input too small for the pooling depth");
        if (Hc == H && Wc == W) return x;
        Tensor out({N, C, Hc, Wc});
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < Hc; ++y) {
                    const double* src = &x.data[((n * C + c) * H + y) * W];
                    double* dst = &out.data[((n * C + c) * Hc + y) * Wc];
                    std::copy(src, src + Wc, dst);
                }
        return out;
    }

    ForwardCache forward(const Tensor& input) const {
        ForwardCache f;
        f.input = crop_input(input);
        Tensor cur = f.input;
        for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
            const std::string p = "conv" + std::to_string(i);
            f.conv_in.push_back(cur);
            Tensor c = nn::conv2d(cur, params.at(p + ".K"), params.at(p + ".b"));
            f.conv_out.push_back(c);
            Tensor r = nn::relu(c);
            f.relu_out.push_back(r);
            f.pools.push_back(nn::maxpool2d(r));
            cur = f.pools.back().out;
        }
        f.pooled = nn::global_avg_pool(cur);
        f.repr_raw = nn::dense(f.pooled, params.at("repr.W"), params.at("repr.b"));
        f.h = nn::l2_normalize(f.repr_raw);
        f.logits = nn::dense(f.h, params.at("classifier.W"), params.at("classifier.b"));
        f.proj_raw = nn::dense(f.h, params.at("proj.W"), params.at("proj.b"));
        f.z = nn::l2_normalize(f.proj_raw);
        return f;
    }

    using TrainFlags = soundclr::TrainFlags;

    // grad_logits / grad_z may be empty tensors when that head carries no
    // loss signal; the corresponding branch is then skipped.
    GradSet backward(const ForwardCache& f, const Tensor& grad_logits, const Tensor& grad_z,
                     const TrainFlags& flags = TrainFlags{}) const {
        GradSet g;
        for (const auto& [name, p] : params) g.emplace(name, Tensor(p.shape));

        Tensor grad_h({f.h.dim(0), f.h.dim(1)});
        bool have_grad_h = false;

        if (grad_logits.numel() > 0 && (flags.classifier || flags.encoder)) {
            nn::DenseGrads dg = nn::dense_backward(f.h, params.at("classifier.W"), grad_logits);
            if (flags.classifier) {
                g["classifier.W"] = std::move(dg.W);
                g["classifier.b"] = std::move(dg.b);
            }
            if (flags.encoder) {
                grad_h = std::move(dg.x);
                have_grad_h = true;
            }
        }
        if (grad_z.numel() > 0 && (flags.projection || flags.encoder)) {
            const Tensor grad_proj_raw = nn::l2_normalize_backward(f.proj_raw, grad_z);
            nn::DenseGrads dg = nn::dense_backward(f.h, params.at("proj.W"), grad_proj_raw);
            if (flags.projection) {
                g["proj.W"] = std::move(dg.W);
                g["proj.b"] = std::move(dg.b);
            }
            if (flags.encoder) {
                if (have_grad_h) {
                    for (std::size_t i = 0; i < grad_h.numel(); ++i) grad_h.data[i] += dg.x.data[i];
                } else {
                    grad_h = std::move(dg.x);
                    have_grad_h = true;
                }
            }
        }
        if (!flags.encoder || !have_grad_h) return g;

        const Tensor grad_repr_raw = nn::l2_normalize_backward(f.repr_raw, grad_h);
        nn::DenseGrads rg = nn::dense_backward(f.pooled, params.at("repr.W"), grad_repr_raw);
        g["repr.W"] = std::move(rg.W);
        g["repr.b"] = std::move(rg.b);

        Tensor cur = nn::global_avg_pool_backward(f.pools.back().out.shape, rg.x);
        for (std::size_t i = cfg.conv_channels.size(); i-- > 0;) {
            const std::string p = "conv" + std::to_string(i);
            cur = nn::maxpool2d_backward(f.relu_out[i], f.pools[i], cur);
            cur = nn::relu_backward(f.conv_out[i], cur);
            nn::ConvGrads cg = nn::conv2d_backward(f.conv_in[i], params.at(p + ".K"), cur);
            g[p + ".K"] = std::move(cg.K);
            g[p + ".b"] = std::move(cg.b);
            cur = std::move(cg.x);
        }
        return g;
    }
};

} // namespace soundclr
