#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "affcorr/features.hpp"
#include "affcorr/nn.hpp"

namespace affcorr {

// Architecture description. Endpoints are pinned by validate(): music input
// 193, both subnetwork outputs equal (the shared embedding space), fusion
// fed by their concatenation and ending in 2 logits. Hidden widths are free.
struct AcpConfig {
    std::size_t image_input_dim = 2048;
    std::vector<std::size_t> image_dims = {1024, 1024};
    std::vector<std::size_t> music_dims = {256, 512, 1024, 1024};
    std::vector<std::size_t> fusion_dims = {512, 128, 32, 2};

    static constexpr std::size_t kMusicInputDim = MusicFeatureVector::kDim;

    std::size_t embed_dim() const { return image_dims.back(); }
    std::size_t fusion_input_dim() const { return image_dims.back() + music_dims.back(); }

    void validate() const;

    bool operator==(const AcpConfig &) const = default;
};

// The correspondence network: an image tower and a music tower projecting
// into a shared space, and a fusion head classifying their concatenation.
template <typename T>
class AcpModel {
  public:
    explicit AcpModel(const AcpConfig &cfg) : cfg_(cfg) {
        cfg_.validate();
        std::vector<std::size_t> dims{cfg_.image_input_dim};
        dims.insert(dims.end(), cfg_.image_dims.begin(), cfg_.image_dims.end());
        image_ = DenseStack<T>(dims, true);

        dims = {AcpConfig::kMusicInputDim};
        dims.insert(dims.end(), cfg_.music_dims.begin(), cfg_.music_dims.end());
        music_ = DenseStack<T>(dims, true);

        dims = {cfg_.fusion_input_dim()};
        dims.insert(dims.end(), cfg_.fusion_dims.begin(), cfg_.fusion_dims.end());
        fusion_ = DenseStack<T>(dims, false);
    }

    static AcpModel random(const AcpConfig &cfg, std::uint64_t seed) {
        AcpModel model(cfg);
        Rng rng(derive_seed(seed, "init"));
        model.image_.init_he(rng);
        model.music_.init_he(rng);
        model.fusion_.init_he(rng);
        return model;
    }

    const AcpConfig &config() const { return cfg_; }
    DenseStack<T> &image_stack() { return image_; }
    DenseStack<T> &music_stack() { return music_; }
    DenseStack<T> &fusion_stack() { return fusion_; }
    const DenseStack<T> &image_stack() const { return image_; }
    const DenseStack<T> &music_stack() const { return music_; }
    const DenseStack<T> &fusion_stack() const { return fusion_; }

    std::vector<T> image_forward(std::span<const T> emb) const {
        check_dim(emb.size(), cfg_.image_input_dim, "image embedding");
        return image_.forward(emb);
    }

    std::vector<T> music_forward(std::span<const T> feat) const {
        check_dim(feat.size(), AcpConfig::kMusicInputDim, "music feature vector");
        return music_.forward(feat);
    }

    struct Prediction {
        T p_true{};
        std::array<T, 2> logits{};
    };

    Prediction fuse_predict(std::span<const T> v_image, std::span<const T> v_music) const {
        check_dim(v_image.size(), cfg_.image_dims.back(), "image-side embedding");
        check_dim(v_music.size(), cfg_.music_dims.back(), "music-side embedding");
        std::vector<T> fused;
        fused.reserve(v_image.size() + v_music.size());
        fused.insert(fused.end(), v_image.begin(), v_image.end());
        fused.insert(fused.end(), v_music.begin(), v_music.end());
        const std::vector<T> logits = fusion_.forward(fused);

        Prediction pred;
        pred.logits = {logits[0], logits[1]};
        const auto sm = softmax_cross_entropy<T>(logits, 1);
        pred.p_true = sm.probs[1];
        return pred;
    }

    Prediction acp_forward(std::span<const T> emb, std::span<const T> feat) const {
        const std::vector<T> vi = image_forward(emb);
        const std::vector<T> vm = music_forward(feat);
        return fuse_predict(vi, vm);
    }

    AcpModel zeros_like() const {
        AcpModel z(cfg_);
        return z; // freshly built stacks are zero-initialized
    }

    void zero_params() {
        for (auto span : parameter_views()) {
            std::fill(span.begin(), span.end(), T{});
        }
    }

    // All parameter tensors in declaration order (image, music, fusion;
    // per layer weights then bias). The order defines the checkpoint layout.
    std::vector<std::span<T>> parameter_views() {
        std::vector<std::span<T>> views;
        image_.collect_params(views);
        music_.collect_params(views);
        fusion_.collect_params(views);
        return views;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto &v : parameter_views()) {
            n += v.size();
        }
        return n;
    }

  private:
    static void check_dim(std::size_t got, std::size_t want, const char *what) {
        if (got != want) {
            throw ShapeError(std::string(what) + " has dimension " + std::to_string(got) +
                             ", expected " + std::to_string(want));
        }
    }

    AcpConfig cfg_;
    DenseStack<T> image_, music_, fusion_;
};

// One training minibatch: image embeddings and music features row-aligned
// with labels (1 = corresponding pair).
template <typename T>
struct AcpBatch {
    Matrix<T> image_in;
    Matrix<T> music_in;
    std::vector<int> labels;
};

// Scratch space reused across minibatches.
template <typename T>
struct AcpTrainScratch {
    StackActivations<T> image_cache, music_cache, fusion_cache;
    Matrix<T> v_image, v_music, fused, logits, dlogits, dfused, dv, dx;
};

// Forward + backward over one batch. Gradients are zeroed and then
// accumulated into grads (mean loss over the batch). Dropout is active when
// dropout_p > 0; pass rng = nullptr for a deterministic pass.
template <typename T>
T acp_train_step(const AcpModel<T> &model, const AcpBatch<T> &batch, double dropout_p, Rng *rng,
                 AcpModel<T> &grads, AcpTrainScratch<T> &ws) {
    const std::size_t n = batch.image_in.rows;
    if (n == 0 || batch.music_in.rows != n || batch.labels.size() != n) {
        throw ShapeError("train step: batch rows disagree");
    }
    grads.zero_params();

    const AcpModel<T> &m = model;
    m.image_stack().forward_train(batch.image_in, dropout_p, rng, ws.image_cache);
    m.music_stack().forward_train(batch.music_in, dropout_p, rng, ws.music_cache);
    const Matrix<T> &vi = ws.image_cache.acts.back();
    const Matrix<T> &vm = ws.music_cache.acts.back();

    ws.fused.resize(n, vi.cols + vm.cols);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(vi.row(r), vi.row(r) + vi.cols, ws.fused.row(r));
        std::copy(vm.row(r), vm.row(r) + vm.cols, ws.fused.row(r) + vi.cols);
    }
    m.fusion_stack().forward_train(ws.fused, dropout_p, rng, ws.fusion_cache);

    const T loss =
        softmax_ce_batch(ws.fusion_cache.acts.back(), batch.labels, ws.dlogits);

    m.fusion_stack().backward(ws.fusion_cache, ws.dlogits, grads.fusion_stack(), ws.dfused);

    ws.dv.resize(n, vi.cols);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(ws.dfused.row(r), ws.dfused.row(r) + vi.cols, ws.dv.row(r));
    }
    m.image_stack().backward(ws.image_cache, ws.dv, grads.image_stack(), ws.dx);

    ws.dv.resize(n, vm.cols);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(ws.dfused.row(r) + vi.cols, ws.dfused.row(r) + vi.cols + vm.cols,
                  ws.dv.row(r));
    }
    m.music_stack().backward(ws.music_cache, ws.dv, grads.music_stack(), ws.dx);

    return loss;
}

// Mean cross-entropy of a batch under plain inference (no dropout).
template <typename T>
T acp_batch_loss(const AcpModel<T> &model, const AcpBatch<T> &batch) {
    T total{};
    for (std::size_t r = 0; r < batch.image_in.rows; ++r) {
        const auto pred = model.acp_forward({batch.image_in.row(r), batch.image_in.cols},
                                            {batch.music_in.row(r), batch.music_in.cols});
        const auto res = softmax_cross_entropy<T>(
            {pred.logits.data(), 2}, static_cast<std::size_t>(batch.labels[r]));
        total += res.loss;
    }
    return total / static_cast<T>(batch.image_in.rows);
}

// Compares backprop gradients of the batch loss against central finite
// differences. Runs entirely in double; returns the worst relative gap.
double acp_grad_check(AcpModel<double> &model, const AcpBatch<double> &batch,
                      const GradCheckConfig &cfg = {});

} // namespace affcorr
