#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "affcorr/dataset.hpp"

namespace affcorr {

// Recipe for a self-labelling toy corpus: each emotion class gets its own
// audio texture (register, pitch-class set, tremolo rate) and its own
// Gaussian cluster in embedding space, so correspondence is learnable by
// construction and the strength of the signal is tunable via the spread.
struct SyntheticSpec {
    std::size_t n_songs = 60;
    std::size_t n_images = 600;
    // Indexed by EmotionClass value: Negative, Neutral, Positive.
    std::array<double, 3> class_priors = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    double song_duration_s = 120.0;
    int sample_rate = 22050;
    std::size_t embedding_dim = 256;
    double cluster_spread = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticSong {
    std::string id;
    EmotionClass cls = EmotionClass::Neutral;
    std::vector<std::string> tags;
    double duration_s = 0.0;
    std::vector<double> samples; // mono, sample_rate from the spec
};

struct SyntheticImage {
    std::string id;
    EmotionClass cls = EmotionClass::Neutral;
    std::string original_label;
    std::vector<float> embedding;
};

struct SyntheticDataset {
    std::vector<SyntheticSong> songs;
    std::vector<SyntheticImage> images;
};

// Fully deterministic under spec.seed. Song tags are drawn from per-class
// phrase pools that the tag classifier resolves to the intended class;
// image labels cycle through the fine-grained names that regroup to the
// intended class.
SyntheticDataset gen_synthetic(const SyntheticSpec &spec);

} // namespace affcorr
