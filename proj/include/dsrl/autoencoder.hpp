#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/env.hpp"
#include "dsrl/nn.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/tensor.hpp"

namespace dsrl {

/// Random scenes for unsupervised pretraining: 0..30 glyphs of uniform type
/// scattered over distinct cells of a 10x10 board.
inline std::vector<Frame> generate_training_set(int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("generate_training_set: count must be >= 1");
    constexpr int kGrid = 10;
    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(count));
    std::vector<int> cells(kGrid * kGrid);
    for (int i = 0; i < count; ++i) {
        int objects = static_cast<int>(rng.uniform_index(31));
        for (int c = 0; c < kGrid * kGrid; ++c) cells[static_cast<std::size_t>(c)] = c;
        std::vector<std::pair<CellPos, Glyph>> scene;
        for (int o = 0; o < objects; ++o) {
            std::size_t pick = o + rng.uniform_index(static_cast<std::size_t>(kGrid * kGrid - o));
            std::swap(cells[static_cast<std::size_t>(o)], cells[pick]);
            int cell = cells[static_cast<std::size_t>(o)];
            Glyph g = static_cast<Glyph>(rng.uniform_index(3));
            scene.push_back({{cell % kGrid, cell / kGrid}, g});
        }
        frames.push_back(render_scene(kGrid, kGrid, scene));
    }
    return frames;
}

/// Single conv+pool encoder with a mirrored unpool+conv decoder. The encoder's
/// pre-pool sigmoid activations double as the per-pixel feature spectra used
/// downstream, so they are exposed at full frame resolution.
template <typename T>
class Autoencoder {
public:
    Autoencoder() = default;

    Autoencoder(int features, int height, int width, Rng& rng)
        : f_(features), h_(height), w_(width) {
        if (features < 3)
            throw std::invalid_argument("Autoencoder: need at least 3 feature maps");
        if (height % 2 != 0 || width % 2 != 0)
            throw std::invalid_argument("Autoencoder: frame dims must be even");
        enc_ = Conv2D<T>(1, f_, 5, rng);
        dec_ = Conv2D<T>(f_, 1, 5, rng);
    }

    int features() const { return f_; }
    int height() const { return h_; }
    int width() const { return w_; }

    /// Copies a batch of frames into an (n,1,h,w) tensor.
    Tensor<T> to_batch(const std::vector<Frame>& frames, std::size_t first, std::size_t n) const {
        Tensor<T> x({static_cast<int>(n), 1, h_, w_});
        for (std::size_t i = 0; i < n; ++i) {
            const Frame& f = frames[first + i];
            check_frame(f);
            T* dst = x.data() + i * static_cast<std::size_t>(h_ * w_);
            for (int p = 0; p < h_ * w_; ++p) dst[p] = static_cast<T>(f.pixels[static_cast<std::size_t>(p)]);
        }
        return x;
    }

    /// Reconstruction of a batch; input and output share shape.
    const Tensor<T>& forward(const Tensor<T>& x) {
        const auto& a = enc_sig_.forward(enc_.forward(x));
        const auto& pooled = pool_.forward(a);
        const auto& up = unpool_.forward(pooled, pool_.indices(), a.dims());
        return dec_sig_.forward(dec_.forward(up));
    }

    /// One SGD step on pixel MSE; returns the batch loss.
    T train_batch(const Tensor<T>& x, T lr) {
        const auto& recon = forward(x);
        T loss = mse_loss(recon, x, grad_);
        const auto& d1 = dec_.backward(dec_sig_.backward(grad_));
        const auto& d2 = pool_.backward(unpool_.backward(d1));
        enc_.backward(enc_sig_.backward(d2), false);
        sgd_step(enc_.params(), lr);
        sgd_step(dec_.params(), lr);
        return loss;
    }

    /// Shuffled mini-batch training; returns per-epoch mean loss.
    std::vector<T> train(const std::vector<Frame>& frames, int epochs, T lr, int batch_size,
                         Rng& rng) {
        if (frames.empty()) throw std::invalid_argument("Autoencoder::train: no frames");
        if (batch_size < 1) throw std::invalid_argument("Autoencoder::train: bad batch size");
        std::vector<std::size_t> order(frames.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::vector<T> curve;
        std::vector<Frame> batch;
        for (int e = 0; e < epochs; ++e) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_index(i)]);
            T total = 0;
            std::size_t batches = 0;
            for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
                std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - at);
                batch.clear();
                for (std::size_t i = 0; i < n; ++i) batch.push_back(frames[order[at + i]]);
                total += train_batch(to_batch(batch, 0, n), lr);
                ++batches;
            }
            T mean = total / static_cast<T>(batches);
            if (!std::isfinite(mean))
                throw std::runtime_error("Autoencoder::train: loss diverged at epoch " +
                                         std::to_string(e));
            curve.push_back(mean);
        }
        return curve;
    }

    /// Mean per-pixel reconstruction MSE over a frame set (no learning).
    T mean_mse(const std::vector<Frame>& frames) {
        if (frames.empty()) throw std::invalid_argument("Autoencoder::mean_mse: no frames");
        T total = 0;
        for (std::size_t at = 0; at < frames.size(); at += 16) {
            std::size_t n = std::min<std::size_t>(16, frames.size() - at);
            Tensor<T> x = to_batch(frames, at, n);
            const auto& recon = forward(x);
            T s = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                T d = recon[i] - x[i];
                s += d * d;
            }
            total += s; // summed, normalized once at the end
        }
        return total / (static_cast<T>(frames.size()) * static_cast<T>(h_ * w_));
    }

    /// Full-resolution feature stack (F,h,w): sigmoid of the pre-pool conv.
    /// Pixels outside every glyph's receptive field sit exactly at the bias
    /// activation, so their sigmoid is computed once per channel.
    const Tensor<T>& encode(const Frame& frame) {
        check_frame(frame);
        Tensor<T> x({1, 1, h_, w_});
        for (int p = 0; p < h_ * w_; ++p) x[static_cast<std::size_t>(p)] = static_cast<T>(frame.pixels[static_cast<std::size_t>(p)]);
        const auto& y = enc_.forward(x);
        features_.resize({f_, h_, w_});
        const int plane = h_ * w_;
        for (int c = 0; c < f_; ++c) {
            T b = enc_.params().b[static_cast<std::size_t>(c)];
            T sb = sigmoid_scalar(b);
            const T* yp = y.data() + static_cast<std::size_t>(c) * plane;
            T* out = features_.data() + static_cast<std::size_t>(c) * plane;
            for (int p = 0; p < plane; ++p) out[p] = (yp[p] == b) ? sb : sigmoid_scalar(yp[p]);
        }
        return features_;
    }

    void save(const std::string& path) const {
        save_params<T>(path, {&enc_.params().w, &enc_.params().b, &dec_.params().w, &dec_.params().b});
    }

    void load(const std::string& path) {
        load_params<T>(path, {&enc_.params().w, &enc_.params().b, &dec_.params().w, &dec_.params().b});
    }

private:
    void check_frame(const Frame& f) const {
        if (f.width != w_ || f.height != h_)
            throw std::invalid_argument("Autoencoder: frame dims mismatch model");
    }

    int f_ = 0, h_ = 0, w_ = 0;
    Conv2D<T> enc_, dec_;
    Sigmoid<T> enc_sig_, dec_sig_;
    MaxPool2<T> pool_;
    Unpool2<T> unpool_;
    Tensor<T> grad_, features_;
};

} // namespace dsrl
