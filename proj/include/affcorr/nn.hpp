#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affcorr/errors.hpp"
#include "affcorr/rng.hpp"

namespace affcorr {

// Row-major batch matrix. Everything in this header is templated on the
// scalar so training runs in float and gradient checking in double.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{}) {}

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, T{});
    }

    T *row(std::size_t r) { return data.data() + r * cols; }
    const T *row(std::size_t r) const { return data.data() + r * cols; }
    T &at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T &at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// One affine map. Weights are stored input-major ([in][out]) so the batched
// kernels walk contiguous memory in the output index.
template <typename T>
struct DenseLayer {
    Matrix<T> w; // [in][out]
    std::vector<T> b;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out) : w(in, out), b(out, T{}) {}

    std::size_t in_dim() const { return w.rows; }
    std::size_t out_dim() const { return w.cols; }

    // y = x . w + b, batched over rows of x.
    void forward(const Matrix<T> &x, Matrix<T> &y) const {
        if (x.cols != in_dim()) {
            throw ShapeError("dense forward: input has " + std::to_string(x.cols) +
                             " features, layer expects " + std::to_string(in_dim()));
        }
        y.resize(x.rows, out_dim());
        for (std::size_t r = 0; r < x.rows; ++r) {
            T *yr = y.row(r);
            std::copy(b.begin(), b.end(), yr);
            const T *xr = x.row(r);
            for (std::size_t i = 0; i < in_dim(); ++i) {
                const T a = xr[i];
                if (a == T{}) {
                    continue; // ReLU inputs are sparse
                }
                const T *wi = w.row(i);
                for (std::size_t j = 0; j < out_dim(); ++j) {
                    yr[j] += a * wi[j];
                }
            }
        }
    }
};

// Cached intermediates of one training forward pass through a stack.
// acts[0] is the input batch; acts[k+1] the output of layer k after
// activation and dropout. back_scale[k] carries d(output)/d(pre-activation)
// per unit: the ReLU mask times the inverted-dropout scale.
template <typename T>
struct StackActivations {
    std::vector<Matrix<T>> acts;
    std::vector<Matrix<T>> back_scale;

    bool empty() const { return acts.empty(); }
};

// A chain of dense layers with ReLU between them. relu_after_last controls
// the very last layer: true for the embedding subnetworks (non-negative
// embeddings), false for logit-producing heads. Dropout, when enabled at
// training time, follows every layer except the last.
template <typename T>
class DenseStack {
  public:
    DenseStack() = default;

    // dims = {input, hidden..., output}; at least one layer.
    explicit DenseStack(const std::vector<std::size_t> &dims, bool relu_after_last)
        : relu_after_last_(relu_after_last) {
        if (dims.size() < 2) {
            throw InvalidInput("dense stack: need an input and an output dimension");
        }
        for (std::size_t d : dims) {
            if (d == 0) {
                throw InvalidInput("dense stack: zero-width layer");
            }
        }
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            layers_.emplace_back(dims[k], dims[k + 1]);
        }
    }

    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }
    bool relu_after_last() const { return relu_after_last_; }

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d{in_dim()};
        for (const auto &l : layers_) {
            d.push_back(l.out_dim());
        }
        return d;
    }

    std::vector<DenseLayer<T>> &layers() { return layers_; }
    const std::vector<DenseLayer<T>> &layers() const { return layers_; }

    void init_he(Rng &rng) {
        for (auto &layer : layers_) {
            const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim()));
            for (T &w : layer.w.data) {
                w = static_cast<T>(rng.uniform(-limit, limit));
            }
            std::fill(layer.b.begin(), layer.b.end(), T{});
        }
    }

    DenseStack<T> zeros_like() const {
        DenseStack<T> z;
        z.relu_after_last_ = relu_after_last_;
        for (const auto &l : layers_) {
            z.layers_.emplace_back(l.in_dim(), l.out_dim());
        }
        return z;
    }

    // Inference pass: no dropout, no caching.
    void forward(const Matrix<T> &x, Matrix<T> &y) const {
        Matrix<T> cur = x, next;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            layers_[k].forward(cur, next);
            if (k + 1 < layers_.size() || relu_after_last_) {
                for (T &v : next.data) {
                    v = std::max(v, T{});
                }
            }
            std::swap(cur, next);
        }
        y = std::move(cur);
    }

    std::vector<T> forward(std::span<const T> x) const {
        Matrix<T> in(1, x.size());
        std::copy(x.begin(), x.end(), in.data.begin());
        Matrix<T> out;
        forward(in, out);
        return out.data;
    }

    // Training pass: caches per-layer activations and the combined
    // ReLU/dropout backward scale. rng is only consulted when dropout_p > 0.
    void forward_train(const Matrix<T> &x, double dropout_p, Rng *rng,
                       StackActivations<T> &cache) const {
        if (dropout_p < 0.0 || dropout_p >= 1.0) {
            throw InvalidInput("dense stack: dropout probability must be in [0, 1)");
        }
        if (dropout_p > 0.0 && rng == nullptr) {
            throw InvalidInput("dense stack: dropout needs a random source");
        }
        cache.acts.assign(1, x);
        cache.back_scale.assign(layers_.size(), {});

        const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout_p));
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            Matrix<T> z;
            layers_[k].forward(cache.acts.back(), z);

            Matrix<T> &scale = cache.back_scale[k];
            scale.resize(z.rows, z.cols);
            const bool relu = k + 1 < layers_.size() || relu_after_last_;
            const bool drop = dropout_p > 0.0 && k + 1 < layers_.size();
            for (std::size_t i = 0; i < z.data.size(); ++i) {
                T s;
                if (relu && z.data[i] <= T{}) {
                    z.data[i] = T{};
                    s = T{};
                } else {
                    s = T{1};
                }
                if (drop && s != T{}) {
                    if (rng->bernoulli(dropout_p)) {
                        z.data[i] = T{};
                        s = T{};
                    } else {
                        z.data[i] *= keep_scale;
                        s = keep_scale;
                    }
                }
                scale.data[i] = s;
            }
            cache.acts.push_back(std::move(z));
        }
    }

    // Reverse pass. dy is the gradient at the stack output; parameter
    // gradients are accumulated into grads (same architecture), and the
    // gradient at the stack input lands in dx. Throws StateError when the
    // cache does not belong to a matching forward_train call.
    void backward(const StackActivations<T> &cache, const Matrix<T> &dy, DenseStack<T> &grads,
                  Matrix<T> &dx) const {
        if (cache.acts.size() != layers_.size() + 1 ||
            cache.back_scale.size() != layers_.size()) {
            throw StateError("dense stack: backward called without a cached forward pass");
        }
        if (dy.rows != cache.acts.back().rows || dy.cols != out_dim()) {
            throw ShapeError("dense stack: output gradient shape mismatch");
        }
        if (grads.layers_.size() != layers_.size()) {
            throw ShapeError("dense stack: gradient accumulator architecture mismatch");
        }

        Matrix<T> delta = dy;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const Matrix<T> &scale = cache.back_scale[k];
            for (std::size_t i = 0; i < delta.data.size(); ++i) {
                delta.data[i] *= scale.data[i];
            }

            const DenseLayer<T> &layer = layers_[k];
            DenseLayer<T> &g = grads.layers_[k];
            const Matrix<T> &input = cache.acts[k];

            for (std::size_t r = 0; r < delta.rows; ++r) {
                const T *dr = delta.row(r);
                const T *xr = input.row(r);
                for (std::size_t j = 0; j < layer.out_dim(); ++j) {
                    g.b[j] += dr[j];
                }
                for (std::size_t i = 0; i < layer.in_dim(); ++i) {
                    const T a = xr[i];
                    if (a == T{}) {
                        continue;
                    }
                    T *gw = g.w.row(i);
                    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
                        gw[j] += a * dr[j];
                    }
                }
            }

            Matrix<T> prev(delta.rows, layer.in_dim());
            for (std::size_t r = 0; r < delta.rows; ++r) {
                const T *dr = delta.row(r);
                T *pr = prev.row(r);
                for (std::size_t i = 0; i < layer.in_dim(); ++i) {
                    const T *wi = layer.w.row(i);
                    T acc{};
                    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
                        acc += wi[j] * dr[j];
                    }
                    pr[i] = acc;
                }
            }
            delta = std::move(prev);
        }
        dx = std::move(delta);
    }

    // Parameter tensors in declaration order: per layer weights then bias.
    void collect_params(std::vector<std::span<T>> &out) {
        for (auto &layer : layers_) {
            out.emplace_back(layer.w.data);
            out.emplace_back(layer.b);
        }
    }

  private:
    std::vector<DenseLayer<T>> layers_;
    bool relu_after_last_ = false;
};

// Standalone inverted dropout: scales kept units by 1/(1-p) in train mode,
// identity in inference mode. Returns the keep mask.
template <typename T>
std::vector<std::uint8_t> dropout_apply(std::span<T> x, double p_drop, bool train, Rng &rng) {
    if (p_drop < 0.0 || p_drop >= 1.0) {
        throw InvalidInput("dropout: probability must be in [0, 1)");
    }
    std::vector<std::uint8_t> mask(x.size(), 1);
    if (!train || p_drop == 0.0) {
        return mask;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - p_drop));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng.bernoulli(p_drop)) {
            x[i] = T{};
            mask[i] = 0;
        } else {
            x[i] *= scale;
        }
    }
    return mask;
}

template <typename T>
struct SoftmaxCeResult {
    T loss{};
    std::vector<T> probs;
    std::vector<T> grad; // d loss / d logits
};

// Stabilized softmax + cross-entropy against a hard class index.
template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(std::span<const T> logits, std::size_t cls) {
    if (cls >= logits.size()) {
        throw InvalidInput("softmax cross-entropy: class " + std::to_string(cls) +
                           " out of range for " + std::to_string(logits.size()) + " logits");
    }
    SoftmaxCeResult<T> res;
    res.probs.resize(logits.size());
    const T peak = *std::max_element(logits.begin(), logits.end());
    T denom{};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        res.probs[i] = std::exp(logits[i] - peak);
        denom += res.probs[i];
    }
    for (T &p : res.probs) {
        p /= denom;
    }
    res.loss = -std::log(res.probs[cls]);
    res.grad = res.probs;
    res.grad[cls] -= T{1};
    return res;
}

// Batch mean loss; dlogits receives (softmax - onehot) / batch.
template <typename T>
T softmax_ce_batch(const Matrix<T> &logits, std::span<const int> classes, Matrix<T> &dlogits) {
    if (classes.size() != logits.rows) {
        throw ShapeError("softmax batch: " + std::to_string(classes.size()) + " labels for " +
                         std::to_string(logits.rows) + " rows");
    }
    dlogits.resize(logits.rows, logits.cols);
    T total{};
    const T inv_batch = T{1} / static_cast<T>(logits.rows);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto res = softmax_cross_entropy<T>({logits.row(r), logits.cols},
                                                  static_cast<std::size_t>(classes[r]));
        total += res.loss;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            dlogits.at(r, c) = res.grad[c] * inv_batch;
        }
    }
    return total * inv_batch;
}

// Adam with bias correction over an ordered list of parameter tensors.
template <typename T>
class AdamState {
  public:
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void attach(const std::vector<std::span<T>> &params) {
        m_.clear();
        v_.clear();
        for (const auto &p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
        t_ = 0;
    }

    std::uint64_t step_count() const { return t_; }

    void step(const std::vector<std::span<T>> &params,
              const std::vector<std::span<const T>> &grads) {
        if (params.size() != m_.size() || grads.size() != params.size()) {
            throw ShapeError("adam: tensor list does not match attached state");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            if (params[k].size() != m_[k].size() || grads[k].size() != params[k].size()) {
                throw ShapeError("adam: tensor " + std::to_string(k) + " changed size");
            }
            for (std::size_t i = 0; i < params[k].size(); ++i) {
                const double g = static_cast<double>(grads[k][i]);
                m_[k][i] = beta1 * m_[k][i] + (1.0 - beta1) * g;
                v_[k][i] = beta2 * v_[k][i] + (1.0 - beta2) * g * g;
                const double mhat = m_[k][i] / bc1;
                const double vhat = v_[k][i] / bc2;
                params[k][i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

  private:
    // Moments kept in double regardless of the parameter type so float
    // training does not lose small v values to rounding.
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

// h balances truncation against roundoff for double-precision losses of
// order 1, and keeps the window small enough that ReLU gates rarely flip
// between the two sides of the central difference.
struct GradCheckConfig {
    double h = 1e-6;
    // Parameters probed per tensor; 0 probes every parameter.
    std::size_t max_per_tensor = 0;
    std::uint64_t seed = 0;
};

// |a-b| relative to max(1, |a|, |b|).
inline double relative_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central-difference verification of analytic gradients. params and
// analytic line up tensor-by-tensor; loss() re-evaluates the scalar loss at
// the current parameter values. Returns the worst relative gap over the
// probed entries.
template <typename LossFn>
double finite_difference_check(const std::vector<std::span<double>> &params,
                               const std::vector<std::vector<double>> &analytic, LossFn &&loss,
                               const GradCheckConfig &cfg = {}) {
    if (params.size() != analytic.size()) {
        throw ShapeError("gradient check: tensor count mismatch");
    }
    Rng rng(derive_seed(cfg.seed, "grad-check"));
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != analytic[k].size()) {
            throw ShapeError("gradient check: tensor " + std::to_string(k) + " size mismatch");
        }
        std::vector<std::size_t> probe(params[k].size());
        for (std::size_t i = 0; i < probe.size(); ++i) {
            probe[i] = i;
        }
        if (cfg.max_per_tensor > 0 && probe.size() > cfg.max_per_tensor) {
            rng.shuffle(probe);
            probe.resize(cfg.max_per_tensor);
        }
        for (std::size_t i : probe) {
            double &p = params[k][i];
            const double saved = p;
            p = saved + cfg.h;
            const double up = loss();
            p = saved - cfg.h;
            const double down = loss();
            p = saved;
            const double numeric = (up - down) / (2.0 * cfg.h);
            worst = std::max(worst, relative_gap(analytic[k][i], numeric));
        }
    }
    return worst;
}

} // namespace affcorr
