#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dsrl/rng.hpp"
#include "dsrl/tensor.hpp"

namespace dsrl {

/// One layer's trainable state: a weight/bias pair plus matching gradient
/// accumulators.
template <typename T>
struct LayerParams {
    Tensor<T> w, gw;
    Tensor<T> b, gb;

    void init_shapes(std::vector<int> w_dims, std::vector<int> b_dims) {
        w.resize(w_dims);
        gw.resize(w_dims);
        b.resize(b_dims);
        gb.resize(b_dims);
    }

    void zero_grad() {
        gw.zero();
        gb.zero();
    }
};

/// w <- w - lr * grad, then gradients cleared.
template <typename T>
void sgd_step(LayerParams<T>& p, T lr) {
    for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * p.gw[i];
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] -= lr * p.gb[i];
    p.zero_grad();
}

template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

/// 5x5 (or kxk) same-padded cross-correlation, stride 1. The forward pass
/// walks the input sparsely: zero entries contribute nothing, and the game
/// frames are mostly zeros.
template <typename T>
class Conv2D {
public:
    Conv2D() = default;
    /// bias_init seeds every bias; weights are N(0, 1/sqrt(fan_in)).
    Conv2D(int in_channels, int out_channels, int kernel, Rng& rng, T bias_init = T(0))
        : ci_(in_channels), co_(out_channels), k_(kernel), pad_(kernel / 2) {
        if (kernel % 2 == 0) throw std::invalid_argument("Conv2D: kernel must be odd");
        params_.init_shapes({co_, ci_, k_, k_}, {co_});
        T scale = T(1) / std::sqrt(T(ci_ * k_ * k_));
        for (auto& v : params_.w) v = static_cast<T>(rng.normal()) * scale;
        for (auto& v : params_.b) v = bias_init;
    }

    const Tensor<T>& forward(const Tensor<T>& x) {
        if (x.rank() != 4 || x.dim(1) != ci_)
            throw std::invalid_argument("Conv2D::forward: bad input shape");
        x_ = x;
        int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        y_.resize({n, co_, h, w});
        const int plane = h * w;
        // start from the bias map
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < co_; ++c) {
                T* yp = y_.data() + (static_cast<std::size_t>(b) * co_ + c) * plane;
                T bias = params_.b[static_cast<std::size_t>(c)];
                for (int i = 0; i < plane; ++i) yp[i] = bias;
            }
        // scatter contributions of nonzero input pixels
        for (int b = 0; b < n; ++b) {
            for (int c = 0; c < ci_; ++c) {
                const T* xp = x.data() + (static_cast<std::size_t>(b) * ci_ + c) * plane;
                for (int iy = 0; iy < h; ++iy) {
                    for (int ix = 0; ix < w; ++ix) {
                        T v = xp[iy * w + ix];
                        if (v == T(0)) continue;
                        int y0 = iy + pad_, x0 = ix + pad_;
                        for (int oc = 0; oc < co_; ++oc) {
                            const T* wp = params_.w.data() +
                                          (static_cast<std::size_t>(oc) * ci_ + c) * k_ * k_;
                            T* yp = y_.data() + (static_cast<std::size_t>(b) * co_ + oc) * plane;
                            for (int ky = 0; ky < k_; ++ky) {
                                int oy = y0 - ky;
                                if (oy < 0 || oy >= h) continue;
                                T* row = yp + oy * w;
                                const T* wrow = wp + ky * k_;
                                for (int kx = 0; kx < k_; ++kx) {
                                    int ox = x0 - kx;
                                    if (ox < 0 || ox >= w) continue;
                                    row[ox] += v * wrow[kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        return y_;
    }

    /// Accumulates dw/db; returns d(input) unless want_dx is false (first
    /// layer of a net needs no input gradient).
    const Tensor<T>& backward(const Tensor<T>& dy, bool want_dx = true) {
        if (x_.empty()) throw std::logic_error("Conv2D::backward before forward");
        if (!dy.same_shape(y_)) throw std::invalid_argument("Conv2D::backward: bad dy shape");
        int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
        const int plane = h * w;
        // db
        for (int b = 0; b < n; ++b)
            for (int oc = 0; oc < co_; ++oc) {
                const T* dyp = dy.data() + (static_cast<std::size_t>(b) * co_ + oc) * plane;
                T s = T(0);
                for (int i = 0; i < plane; ++i) s += dyp[i];
                params_.gb[static_cast<std::size_t>(oc)] += s;
            }
        // dw: walk input sparsely (mirror of forward)
        for (int b = 0; b < n; ++b) {
            for (int c = 0; c < ci_; ++c) {
                const T* xp = x_.data() + (static_cast<std::size_t>(b) * ci_ + c) * plane;
                for (int iy = 0; iy < h; ++iy) {
                    for (int ix = 0; ix < w; ++ix) {
                        T v = xp[iy * w + ix];
                        if (v == T(0)) continue;
                        int y0 = iy + pad_, x0 = ix + pad_;
                        for (int oc = 0; oc < co_; ++oc) {
                            T* gwp = params_.gw.data() +
                                     (static_cast<std::size_t>(oc) * ci_ + c) * k_ * k_;
                            const T* dyp = dy.data() + (static_cast<std::size_t>(b) * co_ + oc) * plane;
                            for (int ky = 0; ky < k_; ++ky) {
                                int oy = y0 - ky;
                                if (oy < 0 || oy >= h) continue;
                                const T* row = dyp + oy * w;
                                T* gwrow = gwp + ky * k_;
                                for (int kx = 0; kx < k_; ++kx) {
                                    int ox = x0 - kx;
                                    if (ox < 0 || ox >= w) continue;
                                    gwrow[kx] += v * row[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx_.resize({n, ci_, h, w});
        if (!want_dx) return dx_;
        // dx: dense gather
        for (int b = 0; b < n; ++b) {
            for (int c = 0; c < ci_; ++c) {
                T* dxp = dx_.data() + (static_cast<std::size_t>(b) * ci_ + c) * plane;
                for (int oc = 0; oc < co_; ++oc) {
                    const T* dyp = dy.data() + (static_cast<std::size_t>(b) * co_ + oc) * plane;
                    const T* wp = params_.w.data() + (static_cast<std::size_t>(oc) * ci_ + c) * k_ * k_;
                    for (int iy = 0; iy < h; ++iy) {
                        for (int ix = 0; ix < w; ++ix) {
                            T s = T(0);
                            for (int ky = 0; ky < k_; ++ky) {
                                int oy = iy + pad_ - ky;
                                if (oy < 0 || oy >= h) continue;
                                for (int kx = 0; kx < k_; ++kx) {
                                    int ox = ix + pad_ - kx;
                                    if (ox < 0 || ox >= w) continue;
                                    s += dyp[oy * w + ox] * wp[ky * k_ + kx];
                                }
                            }
                            dxp[iy * w + ix] += s;
                        }
                    }
                }
            }
        }
        return dx_;
    }

    LayerParams<T>& params() { return params_; }
    const LayerParams<T>& params() const { return params_; }
    int in_channels() const { return ci_; }
    int out_channels() const { return co_; }
    int kernel() const { return k_; }

private:
    int ci_ = 0, co_ = 0, k_ = 0, pad_ = 0;
    LayerParams<T> params_;
    Tensor<T> x_, y_, dx_;
};

/// 2x2 non-overlapping max pooling; remembers argmax positions so the
/// matching unpool can place values back.
template <typename T>
class MaxPool2 {
public:
    const Tensor<T>& forward(const Tensor<T>& x) {
        if (x.rank() != 4) throw std::invalid_argument("MaxPool2: rank-4 input required");
        int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h % 2 != 0 || w % 2 != 0)
            throw std::invalid_argument("MaxPool2: spatial dims must be even");
        in_dims_ = x.dims();
        y_.resize({n, c, h / 2, w / 2});
        idx_.assign(y_.size(), 0);
        const int plane = h * w;
        std::size_t o = 0;
        for (int b = 0; b < n; ++b) {
            for (int ch = 0; ch < c; ++ch) {
                const T* xp = x.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
                std::size_t base = (static_cast<std::size_t>(b) * c + ch) * static_cast<std::size_t>(plane);
                for (int py = 0; py < h; py += 2) {
                    for (int px = 0; px < w; px += 2) {
                        int best = py * w + px;
                        T bv = xp[best];
                        const int cand[3] = {py * w + px + 1, (py + 1) * w + px, (py + 1) * w + px + 1};
                        for (int ci2 : cand)
                            if (xp[ci2] > bv) {
                                bv = xp[ci2];
                                best = ci2;
                            }
                        y_[o] = bv;
                        idx_[o] = base + static_cast<std::size_t>(best);
                        ++o;
                    }
                }
            }
        }
        return y_;
    }

    const Tensor<T>& backward(const Tensor<T>& dy) {
        if (idx_.empty()) throw std::logic_error("MaxPool2::backward before forward");
        if (dy.size() != y_.size()) throw std::invalid_argument("MaxPool2::backward: bad dy");
        dx_.resize(in_dims_);
        for (std::size_t i = 0; i < idx_.size(); ++i) dx_[idx_[i]] += dy[i];
        return dx_;
    }

    const std::vector<std::size_t>& indices() const { return idx_; }
    const std::vector<int>& input_dims() const { return in_dims_; }

private:
    Tensor<T> y_, dx_;
    std::vector<std::size_t> idx_;
    std::vector<int> in_dims_;
};

/// Unpooling: scatters each value to the argmax position recorded by the
/// paired MaxPool2 call, zeros elsewhere.
template <typename T>
class Unpool2 {
public:
    const Tensor<T>& forward(const Tensor<T>& x, const std::vector<std::size_t>& idx,
                             const std::vector<int>& out_dims) {
        if (x.size() != idx.size()) throw std::invalid_argument("Unpool2: index count mismatch");
        idx_ = &idx;
        small_size_ = x.size();
        y_.resize(out_dims);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= y_.size()) throw std::invalid_argument("Unpool2: index out of range");
            y_[idx[i]] = x[i];
        }
        return y_;
    }

    const Tensor<T>& backward(const Tensor<T>& dy) {
        if (idx_ == nullptr) throw std::logic_error("Unpool2::backward before forward");
        if (dy.size() != y_.size()) throw std::invalid_argument("Unpool2::backward: bad dy");
        dx_.resize({static_cast<int>(small_size_)});
        for (std::size_t i = 0; i < idx_->size(); ++i) dx_[i] = dy[(*idx_)[i]];
        return dx_;
    }

private:
    Tensor<T> y_, dx_;
    const std::vector<std::size_t>* idx_ = nullptr;
    std::size_t small_size_ = 0;
};

/// Fully connected layer on (batch, features) inputs.
template <typename T>
class Dense {
public:
    Dense() = default;
    Dense(int in_features, int out_features, Rng& rng, T bias_init = T(0))
        : in_(in_features), out_(out_features) {
        params_.init_shapes({out_, in_}, {out_});
        T scale = T(1) / std::sqrt(T(in_));
        for (auto& v : params_.w) v = static_cast<T>(rng.normal()) * scale;
        for (auto& v : params_.b) v = bias_init;
    }

    /// x may be any rank; it is read as (n, size/n) with n = dim(0).
    const Tensor<T>& forward(const Tensor<T>& x) {
        int n = x.dim(0);
        if (x.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(in_))
            throw std::invalid_argument("Dense::forward: bad input size");
        x_ = x;
        y_.resize({n, out_});
        for (int b = 0; b < n; ++b) {
            const T* xp = x.data() + static_cast<std::size_t>(b) * in_;
            T* yp = y_.data() + static_cast<std::size_t>(b) * out_;
            for (int o = 0; o < out_; ++o) {
                const T* wp = params_.w.data() + static_cast<std::size_t>(o) * in_;
                T s = params_.b[static_cast<std::size_t>(o)];
                for (int i = 0; i < in_; ++i) s += wp[i] * xp[i];
                yp[o] = s;
            }
        }
        return y_;
    }

    const Tensor<T>& backward(const Tensor<T>& dy, bool want_dx = true) {
        if (x_.empty()) throw std::logic_error("Dense::backward before forward");
        if (!dy.same_shape(y_)) throw std::invalid_argument("Dense::backward: bad dy shape");
        int n = x_.dim(0);
        for (int b = 0; b < n; ++b) {
            const T* xp = x_.data() + static_cast<std::size_t>(b) * in_;
            const T* dyp = dy.data() + static_cast<std::size_t>(b) * out_;
            for (int o = 0; o < out_; ++o) {
                T g = dyp[o];
                params_.gb[static_cast<std::size_t>(o)] += g;
                if (g == T(0)) continue;
                T* gwp = params_.gw.data() + static_cast<std::size_t>(o) * in_;
                for (int i = 0; i < in_; ++i) gwp[i] += g * xp[i];
            }
        }
        dx_.resize(x_.dims());
        if (!want_dx) return dx_;
        for (int b = 0; b < n; ++b) {
            T* dxp = dx_.data() + static_cast<std::size_t>(b) * in_;
            const T* dyp = dy.data() + static_cast<std::size_t>(b) * out_;
            for (int o = 0; o < out_; ++o) {
                T g = dyp[o];
                if (g == T(0)) continue;
                const T* wp = params_.w.data() + static_cast<std::size_t>(o) * in_;
                for (int i = 0; i < in_; ++i) dxp[i] += g * wp[i];
            }
        }
        return dx_;
    }

    LayerParams<T>& params() { return params_; }
    const LayerParams<T>& params() const { return params_; }

private:
    int in_ = 0, out_ = 0;
    LayerParams<T> params_;
    Tensor<T> x_, y_, dx_;
};

/// Elementwise logistic sigmoid.
template <typename T>
class Sigmoid {
public:
    const Tensor<T>& forward(const Tensor<T>& x) {
        y_.resize(x.dims());
        for (std::size_t i = 0; i < x.size(); ++i) y_[i] = sigmoid_scalar(x[i]);
        return y_;
    }

    const Tensor<T>& backward(const Tensor<T>& dy) {
        if (y_.empty()) throw std::logic_error("Sigmoid::backward before forward");
        dx_.resize(y_.dims());
        for (std::size_t i = 0; i < y_.size(); ++i) dx_[i] = dy[i] * y_[i] * (T(1) - y_[i]);
        return dx_;
    }

    const Tensor<T>& output() const { return y_; }

private:
    Tensor<T> y_, dx_;
};

/// Mean squared error over all elements; writes d(loss)/d(pred) into grad.
template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& grad) {
    if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
    grad.resize(pred.dims());
    T inv = T(1) / static_cast<T>(pred.size());
    T loss = T(0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        T d = pred[i] - target[i];
        loss += d * d;
        grad[i] = T(2) * d * inv;
    }
    return loss * inv;
}

} // namespace dsrl
