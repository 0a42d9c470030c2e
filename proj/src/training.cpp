#include "affcorr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace affcorr {

void TrainConfig::validate() const {
    if (lr < 0.0 || !std::isfinite(lr)) {
        throw InvalidInput("train config: learning rate must be finite and non-negative");
    }
    if (max_epochs == 0 || batch_size == 0 || patience == 0) {
        throw InvalidInput("train config: epochs, batch size and patience must be positive");
    }
    if (patience > max_epochs) {
        throw InvalidInput("train config: patience exceeds max epochs");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw InvalidInput("train config: dropout probability must be in [0, 1)");
    }
}

void ProbeConfig::validate() const {
    if (hidden.empty()) {
        throw InvalidInput("probe config: need at least one hidden layer");
    }
    if (n_classes < 2) {
        throw InvalidInput("probe config: need at least two classes");
    }
    if (lr < 0.0 || !std::isfinite(lr)) {
        throw InvalidInput("probe config: learning rate must be finite and non-negative");
    }
    if (max_epochs == 0 || batch_size == 0 || patience == 0) {
        throw InvalidInput("probe config: epochs, batch size and patience must be positive");
    }
    if (patience > max_epochs) {
        throw InvalidInput("probe config: patience exceeds max epochs");
    }
    if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0)) {
        throw InvalidInput("probe config: holdout fraction must be in (0, 1)");
    }
}

AcpBatch<float> assemble_batch(std::span<const CorrespondencePair> pairs,
                               const VectorStore &images, const VectorStore &music) {
    AcpBatch<float> batch;
    batch.image_in.resize(pairs.size(), images.dim());
    batch.music_in.resize(pairs.size(), music.dim());
    batch.labels.reserve(pairs.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto emb = images.at(pairs[r].image_id);
        const auto feat = music.at(pairs[r].segment_id);
        std::copy(emb.begin(), emb.end(), batch.image_in.row(r));
        std::copy(feat.begin(), feat.end(), batch.music_in.row(r));
        batch.labels.push_back(pairs[r].label ? 1 : 0);
    }
    return batch;
}

namespace {

// Pairs in a canonical order, so downstream shuffles depend only on the
// seed and the set itself, never on manifest file ordering.
std::vector<CorrespondencePair> canonical(std::span<const CorrespondencePair> pairs) {
    std::vector<CorrespondencePair> out(pairs.begin(), pairs.end());
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
        if (a.image_id != b.image_id) {
            return a.image_id < b.image_id;
        }
        return a.segment_id < b.segment_id;
    });
    return out;
}

void gather_rows(const AcpBatch<float> &all, std::span<const std::size_t> rows,
                 AcpBatch<float> &out) {
    out.image_in.resize(rows.size(), all.image_in.cols);
    out.music_in.resize(rows.size(), all.music_in.cols);
    out.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        std::copy(all.image_in.row(src), all.image_in.row(src) + all.image_in.cols,
                  out.image_in.row(r));
        std::copy(all.music_in.row(src), all.music_in.row(src) + all.music_in.cols,
                  out.music_in.row(r));
        out.labels[r] = all.labels[src];
    }
}

// Folds per-column standardization of the training inputs into an affine
// layer: y = (x - mu)/sigma . W + b becomes y = x . W' + b' with
// W'_ij = W_ij / sigma_i and b'_j = b_j - sum_i mu_i W'_ij. The freshly
// initialized weights then see unit-scale inputs, which is the regime the
// fan-in-based init assumes, while the stored model keeps consuming raw
// features. Near-constant columns are centred but not rescaled.
void fold_standardization(DenseLayer<float> &layer, const Matrix<float> &x) {
    const std::size_t d = x.cols;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const float *row = x.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            mean[i] += row[i];
        }
    }
    for (double &m : mean) {
        m /= static_cast<double>(x.rows);
    }
    for (std::size_t r = 0; r < x.rows; ++r) {
        const float *row = x.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double c = row[i] - mean[i];
            var[i] += c * c;
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double sigma = std::sqrt(var[i] / static_cast<double>(x.rows));
        const double inv = sigma > 1e-6 ? 1.0 / sigma : 1.0;
        float *w = layer.w.row(i);
        for (std::size_t j = 0; j < layer.out_dim(); ++j) {
            w[j] = static_cast<float>(w[j] * inv);
        }
    }
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
        double shift = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            shift += mean[i] * static_cast<double>(layer.w.at(i, j));
        }
        layer.b[j] -= static_cast<float>(shift);
    }
}

// Whole-matrix forward through the three stacks. Each row goes through the
// same per-row loops as acp_forward, so the logits match the per-record
// path bitwise; batching only buys memory locality.
EvalResult evaluate_batch(const AcpModel<float> &model, const AcpBatch<float> &batch) {
    Matrix<float> vi, vm;
    model.image_stack().forward(batch.image_in, vi);
    model.music_stack().forward(batch.music_in, vm);
    Matrix<float> fused(vi.rows, vi.cols + vm.cols);
    for (std::size_t r = 0; r < fused.rows; ++r) {
        float *dst = fused.row(r);
        std::copy_n(vi.row(r), vi.cols, dst);
        std::copy_n(vm.row(r), vm.cols, dst + vi.cols);
    }
    Matrix<float> logits;
    model.fusion_stack().forward(fused, logits);

    EvalResult res;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto sm = softmax_cross_entropy<float>({logits.row(r), 2}, 1);
        const bool said_true = sm.probs[1] > 0.5f;
        if (batch.labels[r] == 1) {
            (said_true ? res.true_pos : res.false_neg) += 1;
        } else {
            (said_true ? res.false_pos : res.true_neg) += 1;
        }
    }
    return res;
}

} // namespace

TrainResult train(const AcpConfig &arch, const DatasetSplit &split, const VectorStore &images,
                  const VectorStore &music, const TrainConfig &cfg) {
    cfg.validate();
    arch.validate();
    if (split.train.empty() || split.val.empty() || split.test.empty()) {
        throw InvalidInput("train: every split partition must be non-empty");
    }
    if (images.dim() != arch.image_input_dim) {
        throw ShapeError("train: image store holds " + std::to_string(images.dim()) +
                         "-dim vectors, architecture expects " +
                         std::to_string(arch.image_input_dim));
    }
    if (music.dim() != AcpConfig::kMusicInputDim) {
        throw ShapeError("train: music store holds " + std::to_string(music.dim()) +
                         "-dim vectors, expected " +
                         std::to_string(AcpConfig::kMusicInputDim));
    }

    const auto started = std::chrono::steady_clock::now();

    const auto train_pairs = canonical(split.train);
    const AcpBatch<float> train_all = assemble_batch(train_pairs, images, music);
    const AcpBatch<float> val_all = assemble_batch(canonical(split.val), images, music);
    const std::size_t n = train_pairs.size();

    auto model = AcpModel<float>::random(arch, cfg.seed);
    fold_standardization(model.image_stack().layers().front(), train_all.image_in);
    fold_standardization(model.music_stack().layers().front(), train_all.music_in);
    auto grads = model.zeros_like();
    AcpTrainScratch<float> ws;

    const auto params = model.parameter_views();
    const auto gviews = grads.parameter_views();
    const std::vector<std::span<const float>> cgrads(gviews.begin(), gviews.end());
    AdamState<float> adam;
    adam.lr = cfg.lr;
    adam.attach(params);

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }

    TrainResult result{model, {}};
    TrainReport &report = result.report;
    double best_val = -1.0;
    std::size_t epochs_since_best = 0;
    AcpBatch<float> batch;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            gather_rows(train_all, {order.data() + start, count}, batch);
            const float loss =
                acp_train_step(model, batch, cfg.dropout_p, &dropout_rng, grads, ws);
            if (!std::isfinite(loss)) {
                throw DivergenceError("train: non-finite loss " + std::to_string(loss) +
                                      " at epoch " + std::to_string(epoch + 1) + ", batch " +
                                      std::to_string(start / cfg.batch_size + 1));
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(count);
            adam.step(params, cgrads);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_accuracy = evaluate_batch(model, train_all).accuracy();
        stats.val_accuracy = evaluate_batch(model, val_all).accuracy();
        report.epochs.push_back(stats);

        if (stats.val_accuracy > best_val) {
            best_val = stats.val_accuracy;
            report.best_epoch = epoch;
            result.model = model;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }

    report.best_val_accuracy = best_val;
    report.test_accuracy =
        evaluate_correspondence(result.model, split.test, images, music).accuracy();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

EvalResult evaluate_correspondence(const AcpModel<float> &model,
                                   std::span<const CorrespondencePair> pairs,
                                   const VectorStore &images, const VectorStore &music) {
    if (pairs.empty()) {
        throw InvalidInput("evaluate: empty pair set");
    }
    return evaluate_batch(model, assemble_batch(pairs, images, music));
}

namespace {

double probe_accuracy(const DenseStack<float> &mlp, const Matrix<float> &x,
                      std::span<const int> classes, std::span<const std::size_t> rows) {
    if (rows.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    Matrix<float> in(1, x.cols), logits;
    for (const std::size_t r : rows) {
        std::copy(x.row(r), x.row(r) + x.cols, in.data.begin());
        mlp.forward(in, logits);
        const auto begin = logits.data.begin();
        const int pred =
            static_cast<int>(std::max_element(begin, logits.data.end()) - begin);
        hits += pred == classes[r] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(rows.size());
}

} // namespace

ProbeResult train_probe(const Matrix<float> &embeddings, std::span<const int> classes,
                        const ProbeConfig &cfg) {
    cfg.validate();
    const std::size_t n = embeddings.rows;
    if (classes.size() != n) {
        throw ShapeError("probe: " + std::to_string(classes.size()) + " labels for " +
                         std::to_string(n) + " embeddings");
    }
    if (n < 2) {
        throw InvalidInput("probe: need at least two samples");
    }
    std::vector<bool> seen(cfg.n_classes, false);
    for (const int c : classes) {
        if (c < 0 || static_cast<std::size_t>(c) >= cfg.n_classes) {
            throw InvalidInput("probe: class " + std::to_string(c) + " out of range");
        }
        seen[static_cast<std::size_t>(c)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        throw InvalidInput("probe: embeddings cover a single class, nothing to separate");
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng split_rng(derive_seed(cfg.seed, "probe-split"));
    split_rng.shuffle(order);
    const std::size_t n_hold =
        std::min(n - 1, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                     cfg.holdout_fraction *
                                                     static_cast<double>(n)))));
    const std::vector<std::size_t> holdout(order.begin(), order.begin() + n_hold);
    std::vector<std::size_t> train_rows(order.begin() + n_hold, order.end());

    std::vector<std::size_t> dims{embeddings.cols};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.n_classes);
    DenseStack<float> mlp(dims, false);
    Rng init_rng(derive_seed(cfg.seed, "probe-init"));
    mlp.init_he(init_rng);

    std::vector<std::span<float>> params;
    mlp.collect_params(params);
    AdamState<float> adam;
    adam.lr = cfg.lr;
    adam.attach(params);

    Rng shuffle_rng(derive_seed(cfg.seed, "probe-shuffle"));
    ProbeResult result{mlp, 0.0, {}, 0};
    double best = -1.0;
    std::size_t since_best = 0;

    Matrix<float> x, logits, dlogits, dx;
    std::vector<int> batch_classes;
    StackActivations<float> cache;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(train_rows);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, train_rows.size() - start);
            x.resize(count, embeddings.cols);
            batch_classes.resize(count);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t src = train_rows[start + r];
                std::copy(embeddings.row(src), embeddings.row(src) + embeddings.cols,
                          x.row(r));
                batch_classes[r] = classes[src];
            }
            mlp.forward_train(x, 0.0, nullptr, cache);
            const float loss = softmax_ce_batch(cache.acts.back(),
                                                std::span<const int>(batch_classes), dlogits);
            if (!std::isfinite(loss)) {
                throw DivergenceError("probe: non-finite loss at epoch " +
                                      std::to_string(epoch + 1));
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(count);
            DenseStack<float> grads = mlp.zeros_like();
            mlp.backward(cache, dlogits, grads, dx);
            std::vector<std::span<float>> gviews;
            grads.collect_params(gviews);
            adam.step(params, {gviews.begin(), gviews.end()});
        }
        result.epoch_losses.push_back(loss_sum / static_cast<double>(train_rows.size()));

        const double acc = probe_accuracy(mlp, embeddings, classes, holdout);
        if (acc > best) {
            best = acc;
            result.best_epoch = epoch;
            result.mlp = mlp;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    result.holdout_accuracy = best;
    return result;
}

std::vector<RetrievalHit> retrieve(const AcpModel<float> &model,
                                   std::span<const float> image_embedding,
                                   const VectorStore &library, std::size_t k) {
    if (library.size() == 0) {
        throw InvalidInput("retrieve: empty music library");
    }
    if (k == 0 || k > library.size()) {
        throw InvalidInput("retrieve: k = " + std::to_string(k) +
                           " outside [1, " + std::to_string(library.size()) + "]");
    }

    const auto v_image = model.image_forward(image_embedding);
    std::vector<RetrievalHit> hits;
    hits.reserve(library.size());
    for (std::size_t i = 0; i < library.size(); ++i) {
        const auto v_music = model.music_forward(library.row(i));
        const auto pred = model.fuse_predict(v_image, v_music);
        hits.push_back({library.id(i), static_cast<double>(pred.p_true)});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit &a, const RetrievalHit &b) {
        if (a.p_true != b.p_true) {
            return a.p_true > b.p_true;
        }
        return a.segment_id < b.segment_id;
    });
    hits.resize(k);
    return hits;
}

} // namespace affcorr
