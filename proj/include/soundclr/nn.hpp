#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "soundclr/errors.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr::nn {

// Each op provides a forward and an analytic backward. Backward takes the
// forward inputs (and the upstream gradient) and returns input/parameter
// gradients; all verified against central finite differences in the tests.

// ---- dense: out = x W + b ----

inline Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.shape.size() != 2 || W.shape.size() != 2 || b.shape.size() != 1 || x.dim(1) != W.dim(0) ||
        W.dim(1) != b.dim(0))
        throw std::invalid_argument("dense: shape mismatch " + shape_str(x.shape) + " " + shape_str(W.shape));
    const std::size_t N = x.dim(0), I = x.dim(1), O = W.dim(1);
    Tensor out({N, O});
    for (std::size_t n = 0; n < N; ++n) {
        double* orow = &out.data[n * O];
        for (std::size_t o = 0; o < O; ++o) orow[o] = b[o];
        for (std::size_t i = 0; i < I; ++i) {
            const double xv = x.data[n * I + i];
            const double* wrow = &W.data[i * O];
            for (std::size_t o = 0; o < O; ++o) orow[o] += xv * wrow[o];
        }
    }
    return out;
}

struct DenseGrads {
    Tensor x, W, b;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& W, const Tensor& grad_out) {
    const std::size_t N = x.dim(0), I = x.dim(1), O = W.dim(1);
    DenseGrads g{Tensor(x.shape), Tensor(W.shape), Tensor({O})};
    for (std::size_t n = 0; n < N; ++n) {
        const double* grow = &grad_out.data[n * O];
        for (std::size_t i = 0; i < I; ++i) {
            const double xv = x.data[n * I + i];
            const double* wrow = &W.data[i * O];
            double acc = 0.0;
            double* gwrow = &g.W.data[i * O];
            for (std::size_t o = 0; o < O; ++o) {
                acc += grow[o] * wrow[o];
                gwrow[o] += xv * grow[o];
            }
            g.x.data[n * I + i] = acc;
        }
        for (std::size_t o = 0; o < O; ++o) g.b[o] += grow[o];
    }
    return g;
}

// ---- relu ----

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = std::max(v, 0.0);
    return out;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (x.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

// ---- conv2d: 3x3 kernel, stride 1, same padding ----

inline Tensor conv2d(const Tensor& x, const Tensor& K, const Tensor& b) {
    if (x.shape.size() != 4 || K.shape.size() != 4 || K.dim(2) != 3 || K.dim(3) != 3 || K.dim(1) != x.dim(1) ||
        b.dim(0) != K.dim(0))
        throw std::invalid_argument("conv2d: shape mismatch " + shape_str(x.shape) + " " + shape_str(K.shape));
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3), Cout = K.dim(0);
    if (H < 3 || W < 3) throw std::invalid_argument("conv2d: spatial dims must be >= 3");
    Tensor out({N, Cout, H, W});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Cout; ++co) {
            double* oplane = &out.data[((n * Cout + co) * H) * W];
            const double bias = b[co];
            for (std::size_t i = 0; i < H * W; ++i) oplane[i] = bias;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* xplane = &x.data[((n * Cin + ci) * H) * W];
                const double* kk = &K.data[((co * Cin + ci) * 3) * 3];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const double kv = kk[ky * 3 + kx];
                        if (kv == 0.0) continue;
                        const int dy = ky - 1, dx = kx - 1;
                        const std::size_t y0 = dy < 0 ? 1 : 0;
                        const std::size_t y1 = dy > 0 ? H - 1 : H;
                        const std::size_t x0 = dx < 0 ? 1 : 0;
                        const std::size_t x1 = dx > 0 ? W - 1 : W;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* xr = xplane + (y + static_cast<std::size_t>(static_cast<long>(dy))) * W;
                            double* orow = oplane + y * W;
                            for (std::size_t xi = x0; xi < x1; ++xi)
                                orow[xi] += kv * xr[xi + static_cast<std::size_t>(static_cast<long>(dx))];
                        }
                    }
            }
        }
    return out;
}

struct ConvGrads {
    Tensor x, K, b;
};

inline ConvGrads conv2d_backward(const Tensor& x, const Tensor& K, const Tensor& grad_out) {
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3), Cout = K.dim(0);
    ConvGrads g{Tensor(x.shape), Tensor(K.shape), Tensor({Cout})};
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Cout; ++co) {
            const double* gplane = &grad_out.data[((n * Cout + co) * H) * W];
            double gb = 0.0;
            for (std::size_t i = 0; i < H * W; ++i) gb += gplane[i];
            g.b[co] += gb;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* xplane = &x.data[((n * Cin + ci) * H) * W];
                double* gxplane = &g.x.data[((n * Cin + ci) * H) * W];
                const double* kk = &K.data[((co * Cin + ci) * 3) * 3];
                double* gk = &g.K.data[((co * Cin + ci) * 3) * 3];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dy = ky - 1, dx = kx - 1;
                        const std::size_t y0 = dy < 0 ? 1 : 0;
                        const std::size_t y1 = dy > 0 ? H - 1 : H;
                        const std::size_t x0 = dx < 0 ? 1 : 0;
                        const std::size_t x1 = dx > 0 ? W - 1 : W;
                        const double kv = kk[ky * 3 + kx];
                        double gkv = 0.0;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* xr = xplane + (y + static_cast<std::size_t>(static_cast<long>(dy))) * W;
                            double* gxr = gxplane + (y + static_cast<std::size_t>(static_cast<long>(dy))) * W;
                            const double* grow = gplane + y * W;
                            for (std::size_t xi = x0; xi < x1; ++xi) {
                                const std::size_t xs = xi + static_cast<std::size_t>(static_cast<long>(dx));
                                gkv += grow[xi] * xr[xs];
                                gxr[xs] += grow[xi] * kv;
                            }
                        }
                        gk[ky * 3 + kx] += gkv;
                    }
            }
        }
    return g;
}

// ---- maxpool 2x2 stride 2; ties go to the first row-major maximal cell ----

struct MaxPoolResult {
    Tensor out;
    std::vector<std::size_t> argmax; // flat input index per output cell
};

inline MaxPoolResult maxpool2d(const Tensor& x) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 != 0 || W % 2 != 0) throw std::invalid_argument("maxpool2d: spatial dims must be even");
    const std::size_t Ho = H / 2, Wo = W / 2;
    MaxPoolResult r{Tensor({N, C, Ho, Wo}), {}};
    r.argmax.resize(r.out.numel());
    std::size_t oi = 0;
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* plane = &x.data[nc * H * W];
        for (std::size_t y = 0; y < Ho; ++y)
            for (std::size_t xi = 0; xi < Wo; ++xi) {
                const std::size_t base = (2 * y) * W + 2 * xi;
                const std::size_t cand[4] = {base, base + 1, base + W, base + W + 1};
                std::size_t best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (plane[cand[k]] > plane[best]) best = cand[k];
                r.out.data[oi] = plane[best];
                r.argmax[oi] = nc * H * W + best;
                ++oi;
            }
    }
    return r;
}

inline Tensor maxpool2d_backward(const Tensor& x, const MaxPoolResult& fwd, const Tensor& grad_out) {
    Tensor g(x.shape);
    for (std::size_t i = 0; i < grad_out.numel(); ++i) g.data[fwd.argmax[i]] += grad_out.data[i];
    return g;
}

// ---- global average pool over spatial dims ----

inline Tensor global_avg_pool(const Tensor& x) {
    const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor out({N, C});
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        double acc = 0.0;
        const double* plane = &x.data[nc * HW];
        for (std::size_t i = 0; i < HW; ++i) acc += plane[i];
        out.data[nc] = acc / static_cast<double>(HW);
    }
    return out;
}

inline Tensor global_avg_pool_backward(const std::vector<std::size_t>& x_shape, const Tensor& grad_out) {
    Tensor g(x_shape);
    const std::size_t HW = x_shape[2] * x_shape[3];
    for (std::size_t nc = 0; nc < grad_out.numel(); ++nc) {
        const double v = grad_out.data[nc] / static_cast<double>(HW);
        double* plane = &g.data[nc * HW];
        for (std::size_t i = 0; i < HW; ++i) plane[i] = v;
    }
    return g;
}

// ---- row-wise l2 normalization ----

inline Tensor l2_normalize(const Tensor& x) {
    const std::size_t N = x.dim(0), D = x.dim(1);
    Tensor out = x;
    for (std::size_t n = 0; n < N; ++n) {
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += x.data[n * D + d] * x.data[n * D + d];
        const double norm = std::sqrt(s);
        if (norm <= 1e-12) throw NumericError("l2_normalize: near-zero row norm");
        for (std::size_t d = 0; d < D; ++d) out.data[n * D + d] /= norm;
    }
    return out;
}

// Jacobian (I - z z^T) / ||x|| applied row-wise.
inline Tensor l2_normalize_backward(const Tensor& x, const Tensor& grad_out) {
    const std::size_t N = x.dim(0), D = x.dim(1);
    Tensor g(x.shape);
    for (std::size_t n = 0; n < N; ++n) {
        const double* xr = &x.data[n * D];
        const double* gr = &grad_out.data[n * D];
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += xr[d] * xr[d];
        const double norm = std::sqrt(s);
        double dot = 0.0;
        for (std::size_t d = 0; d < D; ++d) dot += gr[d] * xr[d] / norm;
        for (std::size_t d = 0; d < D; ++d) g.data[n * D + d] = (gr[d] - dot * xr[d] / norm) / norm;
    }
    return g;
}

// ---- softmax (forward only; cross-entropy owns the fused backward) ----

inline Tensor softmax(const Tensor& x) {
    const std::size_t N = x.dim(0), C = x.dim(1);
    Tensor out(x.shape);
    for (std::size_t n = 0; n < N; ++n) {
        const double* xr = &x.data[n * C];
        double mx = xr[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            out.data[n * C + c] = std::exp(xr[c] - mx);
            sum += out.data[n * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) out.data[n * C + c] /= sum;
    }
    return out;
}

} // namespace soundclr::nn
