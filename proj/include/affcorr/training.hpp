#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affcorr/acpnet.hpp"
#include "affcorr/dataset.hpp"
#include "affcorr/store.hpp"

namespace affcorr {

struct TrainConfig {
    double lr = 1e-4;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::size_t batch_size = 64;
    double dropout_p = 0.4;
    std::uint64_t seed = 0;

    // lr may be zero (frozen training is well-defined); everything else
    // must be positive, patience at most max_epochs, dropout in [0, 1).
    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0; // index into epochs
    double best_val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double wall_seconds = 0.0;
};

// Binary confusion counts for the correspondence task ("positive" = the
// pair is claimed to correspond).
struct EvalResult {
    std::size_t true_pos = 0;
    std::size_t true_neg = 0;
    std::size_t false_pos = 0;
    std::size_t false_neg = 0;

    std::size_t total() const { return true_pos + true_neg + false_pos + false_neg; }
    double accuracy() const {
        return total() == 0 ? 0.0
                            : static_cast<double>(true_pos + true_neg) /
                                  static_cast<double>(total());
    }
};

struct TrainResult {
    AcpModel<float> model; // parameters of the best validation epoch
    TrainReport report;
};

// Gathers the pairs' embeddings and features into row-aligned batch
// matrices. A pair referencing an id absent from its store throws DataError.
AcpBatch<float> assemble_batch(std::span<const CorrespondencePair> pairs,
                               const VectorStore &images, const VectorStore &music);

// Minibatch Adam on the correspondence cross-entropy. Pairs are put in a
// canonical order before the seeded shuffles, so the result depends only on
// the pair set, the stores, and the config. Early stopping monitors
// validation accuracy; the best parameters are kept and test accuracy is
// computed once, on those. A non-finite loss aborts with DivergenceError.
TrainResult train(const AcpConfig &arch, const DatasetSplit &split, const VectorStore &images,
                  const VectorStore &music, const TrainConfig &cfg);

// Fraction of pairs whose thresholded prediction (p_true > 0.5) matches the
// label, plus the confusion counts. Empty input throws InvalidInput.
EvalResult evaluate_correspondence(const AcpModel<float> &model,
                                   std::span<const CorrespondencePair> pairs,
                                   const VectorStore &images, const VectorStore &music);

struct ProbeConfig {
    std::vector<std::size_t> hidden = {512, 32};
    std::size_t n_classes = 3;
    double lr = 1e-4;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::size_t batch_size = 64;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ProbeResult {
    DenseStack<float> mlp; // input -> hidden... -> n_classes logits
    double holdout_accuracy = 0.0;
    std::vector<double> epoch_losses;
    std::size_t best_epoch = 0;
};

// Trains a small classifier on frozen embeddings and reports held-out
// accuracy (seeded split, early stopping on the held-out score). Inputs
// containing fewer than two distinct classes throw InvalidInput.
ProbeResult train_probe(const Matrix<float> &embeddings, std::span<const int> classes,
                        const ProbeConfig &cfg);

struct RetrievalHit {
    std::string segment_id;
    double p_true = 0.0;

    bool operator==(const RetrievalHit &) const = default;
};

// Scores every library record against the query image and returns the k
// best, ordered by descending p_true with ties broken by ascending segment
// id. Scores equal acp_forward run pairwise. Empty library or k outside
// [1, library size] throws InvalidInput.
std::vector<RetrievalHit> retrieve(const AcpModel<float> &model,
                                   std::span<const float> image_embedding,
                                   const VectorStore &library, std::size_t k);

} // namespace affcorr
