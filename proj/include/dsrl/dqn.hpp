#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/env.hpp"
#include "dsrl/nn.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/tensor.hpp"

namespace dsrl {

struct Transition {
    Frame frame;
    Action action = Action::Up;
    int reward = 0;
    Frame next;
    bool terminal = false;
};

/// Fixed-capacity ring of transitions; once full, new entries overwrite the
/// oldest. Sampling is uniform over whatever is stored.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return store_.size(); }

    void push(Transition t) {
        std::size_t slot = total_ % capacity_;
        if (store_.size() < capacity_)
            store_.push_back(std::move(t));
        else
            store_[slot] = std::move(t);
        ++total_;
    }

    const Transition& sample(Rng& rng) const {
        if (store_.empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
        return store_[rng.uniform_index(store_.size())];
    }

private:
    std::size_t capacity_;
    std::size_t total_ = 0;
    std::vector<Transition> store_;
};

/// Raw-pixel Q network: 5x5 conv to 8 feature maps with sigmoid, 2x2 max
/// pool, a sigmoid hidden layer, then 4 linear Q outputs. Carries a frozen
/// target copy of every parameter for the TD bootstrap.
template <typename T>
class QNetwork {
public:
    static constexpr int kFeatures = 8;
    static constexpr int kKernel = 5;

    QNetwork(int height, int width, int hidden, Rng& rng)
        : h_(height), w_(width) {
        if (height < 2 || width < 2 || height % 2 != 0 || width % 2 != 0)
            throw std::invalid_argument("QNetwork: spatial dims must be even and positive");
        if (hidden < 1) throw std::invalid_argument("QNetwork: hidden width must be positive");
        conv_ = Conv2D<T>(1, kFeatures, kKernel, rng);
        fc1_ = Dense<T>(kFeatures * (height / 2) * (width / 2), hidden, rng);
        fc2_ = Dense<T>(hidden, kNumActions, rng);
        target_conv_ = conv_;
        target_fc1_ = fc1_;
        target_fc2_ = fc2_;
    }

    int height() const { return h_; }
    int width() const { return w_; }

    Tensor<T> to_batch(const std::vector<const Frame*>& frames) const {
        if (frames.empty()) throw std::invalid_argument("QNetwork::to_batch: empty batch");
        Tensor<T> x({static_cast<int>(frames.size()), 1, h_, w_});
        std::size_t o = 0;
        for (const Frame* f : frames) {
            if (f->height != h_ || f->width != w_)
                throw std::invalid_argument("QNetwork::to_batch: frame shape mismatch");
            for (float p : f->pixels) x[o++] = static_cast<T>(p);
        }
        return x;
    }

    /// Online Q values, (n, 4). Caches for a following backward().
    const Tensor<T>& forward(const Tensor<T>& x) {
        const Tensor<T>& c = act1_.forward(conv_.forward(x));
        const Tensor<T>& p = pool_.forward(c);
        const Tensor<T>& h = act2_.forward(fc1_.forward(p));
        return fc2_.forward(h);
    }

    /// Q values under the frozen parameters.
    const Tensor<T>& target_forward(const Tensor<T>& x) {
        const Tensor<T>& c = target_act1_.forward(target_conv_.forward(x));
        const Tensor<T>& p = target_pool_.forward(c);
        const Tensor<T>& h = target_act2_.forward(target_fc1_.forward(p));
        return target_fc2_.forward(h);
    }

    void zero_grad() {
        conv_.params().zero_grad();
        fc1_.params().zero_grad();
        fc2_.params().zero_grad();
    }

    void backward(const Tensor<T>& dq) {
        const Tensor<T>& g2 = fc2_.backward(dq);
        const Tensor<T>& g1 = fc1_.backward(act2_.backward(g2));
        conv_.backward(act1_.backward(pool_.backward(g1)), false);
    }

    void sgd(T lr) {
        sgd_step(conv_.params(), lr);
        sgd_step(fc1_.params(), lr);
        sgd_step(fc2_.params(), lr);
    }

    void sync_target() {
        target_conv_.params().w = conv_.params().w;
        target_conv_.params().b = conv_.params().b;
        target_fc1_.params().w = fc1_.params().w;
        target_fc1_.params().b = fc1_.params().b;
        target_fc2_.params().w = fc2_.params().w;
        target_fc2_.params().b = fc2_.params().b;
    }

    std::array<LayerParams<T>*, 3> params() { return {&conv_.params(), &fc1_.params(), &fc2_.params()}; }

    void save(const std::string& path) const {
        save_params<T>(path, {&conv_.params().w, &conv_.params().b, &fc1_.params().w,
                              &fc1_.params().b, &fc2_.params().w, &fc2_.params().b});
    }

    void load(const std::string& path) {
        load_params<T>(path, {&conv_.params().w, &conv_.params().b, &fc1_.params().w,
                              &fc1_.params().b, &fc2_.params().w, &fc2_.params().b});
        sync_target();
    }

private:
    int h_ = 0, w_ = 0;
    Conv2D<T> conv_;
    Sigmoid<T> act1_;
    MaxPool2<T> pool_;
    Dense<T> fc1_;
    Sigmoid<T> act2_;
    Dense<T> fc2_;

    Conv2D<T> target_conv_;
    Sigmoid<T> target_act1_;
    MaxPool2<T> target_pool_;
    Dense<T> target_fc1_;
    Sigmoid<T> target_act2_;
    Dense<T> target_fc2_;
};

/// Epsilon-greedy over the online outputs; ties uniform. The exploration
/// draw here covers all four actions, greedy included.
template <typename T>
Action act(QNetwork<T>& net, const Frame& frame, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("act: epsilon must lie in [0,1]");
    if (frame.height != net.height() || frame.width != net.width())
        throw std::invalid_argument("act: frame shape mismatch");
    if (epsilon > 0.0 && rng.bernoulli(epsilon))
        return static_cast<Action>(rng.uniform_index(kNumActions));

    const Tensor<T>& q = net.forward(net.to_batch({&frame}));
    T best = q[0];
    for (int a = 1; a < kNumActions; ++a) best = std::max(best, q[static_cast<std::size_t>(a)]);
    std::array<int, kNumActions> ties{};
    std::size_t n_ties = 0;
    for (int a = 0; a < kNumActions; ++a)
        if (q[static_cast<std::size_t>(a)] == best) ties[n_ties++] = a;
    return static_cast<Action>(ties[rng.uniform_index(n_ties)]);
}

/// One SGD step on the mean squared TD error of a uniform batch; the target
/// network supplies the bootstrap, terminal transitions use the bare reward.
/// Only the taken action's output receives gradient. Returns the batch loss.
template <typename T>
T train_step(QNetwork<T>& net, ReplayBuffer& buffer, int batch_size, T gamma, T lr, Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("train_step: batch size must be positive");
    if (buffer.size() < static_cast<std::size_t>(batch_size))
        throw std::logic_error("train_step: buffer holds fewer transitions than a batch");

    std::vector<const Transition*> batch(static_cast<std::size_t>(batch_size));
    std::vector<const Frame*> frames(batch.size()), nexts(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i] = &buffer.sample(rng);
        frames[i] = &batch[i]->frame;
        nexts[i] = &batch[i]->next;
    }

    const Tensor<T>& tq = net.target_forward(net.to_batch(nexts));
    std::vector<T> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        T boot = 0;
        if (!batch[i]->terminal) {
            const T* row = tq.data() + i * kNumActions;
            boot = gamma * *std::max_element(row, row + kNumActions);
        }
        y[i] = static_cast<T>(batch[i]->reward) + boot;
    }

    const Tensor<T>& q = net.forward(net.to_batch(frames));
    Tensor<T> dq(q.dims());
    T loss = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::size_t at = i * kNumActions + static_cast<std::size_t>(batch[i]->action);
        T diff = q[at] - y[i];
        loss += diff * diff;
        dq[at] = T(2) * diff / static_cast<T>(batch.size());
    }
    loss /= static_cast<T>(batch.size());

    net.zero_grad();
    net.backward(dq);
    net.sgd(lr);
    return loss;
}

/// Linear anneal from 1.0 down to the floor over the first `anneal_epochs`
/// training epochs, flat afterwards.
inline double dqn_epsilon(int epoch, int anneal_epochs, double floor = 0.1) {
    if (anneal_epochs < 1) throw std::invalid_argument("dqn_epsilon: anneal span must be positive");
    if (epoch < 0) throw std::invalid_argument("dqn_epsilon: negative epoch");
    if (epoch >= anneal_epochs) return floor;
    double t = static_cast<double>(epoch) / anneal_epochs;
    return 1.0 + t * (floor - 1.0);
}

} // namespace dsrl
