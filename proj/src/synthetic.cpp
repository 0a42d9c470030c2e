#include "affcorr/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "affcorr/errors.hpp"
#include "affcorr/rng.hpp"

namespace affcorr {

void SyntheticSpec::validate() const {
    if (n_songs == 0 || n_images == 0) {
        throw InvalidInput("synthetic spec: need at least one song and one image");
    }
    double prior_sum = 0.0;
    for (const double p : class_priors) {
        if (p < 0.0) {
            throw InvalidInput("synthetic spec: negative class prior");
        }
        prior_sum += p;
    }
    if (std::abs(prior_sum - 1.0) > 1e-9) {
        throw InvalidInput("synthetic spec: class priors must sum to 1");
    }
    if (song_duration_s <= 0.0) {
        throw InvalidInput("synthetic spec: song duration must be positive");
    }
    if (sample_rate <= 0) {
        throw InvalidInput("synthetic spec: sample rate must be positive");
    }
    if (embedding_dim == 0) {
        throw InvalidInput("synthetic spec: zero-width embeddings");
    }
    if (cluster_spread < 0.0) {
        throw InvalidInput("synthetic spec: negative cluster spread");
    }
}

namespace {

struct ClassProfile {
    std::array<double, 3> tone_hz;
    double tremolo_hz;
    std::vector<std::string> tag_pool;
    std::vector<std::string> image_labels;
};

// Registers an octave-plus apart and mostly disjoint pitch-class sets keep
// the three textures separable in every feature family.
const std::array<ClassProfile, 3> &profiles() {
    static const std::array<ClassProfile, 3> p = {{
        // Negative: low register A2/C3/E3, slow tremolo.
        {{110.00, 130.81, 164.81},
         1.5,
         {"sad song", "makes me sad", "painful memories", "so sad", "heartbreak and pain"},
         {"anger", "disgust", "fear", "sadness"}},
        // Neutral: mid register D4/F4/A4.
        {{293.66, 349.23, 440.00},
         3.5,
         {"soothing strings", "relaxing evening", "calm waters", "deeply relaxing",
          "soothing and calm"},
         {"contentment"}},
        // Positive: high register E5/G5/B5, fast tremolo.
        {{659.26, 783.99, 987.77},
         7.0,
         {"happy vibes", "feeling happy", "energetic beat", "joyous celebration",
          "upbeat and energetic"},
         {"amusement", "awe", "excitement"}},
    }};
    return p;
}

// Tags that the classifier resolves to no class at all.
const std::vector<std::string> &filler_tags() {
    static const std::vector<std::string> t = {"live recording", "instrumental",
                                               "great production"};
    return t;
}

EmotionClass draw_class(Rng &rng, const std::array<double, 3> &priors) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        acc += priors[c];
        if (u < acc) {
            return static_cast<EmotionClass>(c);
        }
    }
    return EmotionClass::Positive;
}

std::string padded(const char *prefix, std::size_t i, int width) {
    std::string num = std::to_string(i);
    std::string out = prefix;
    out.append(static_cast<std::size_t>(width) - std::min<std::size_t>(num.size(),
                                                                       static_cast<std::size_t>(width)),
               '0');
    out += num;
    return out;
}

std::vector<double> render_song(const ClassProfile &profile, double duration_s,
                                int sample_rate, Rng &rng) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::array<double, 3> gain{}, freq{}, phase{};
    for (std::size_t j = 0; j < 3; ++j) {
        gain[j] = rng.uniform(0.15, 0.25);
        freq[j] = profile.tone_hz[j] * (1.0 + rng.uniform(-0.01, 0.01));
        phase[j] = rng.uniform(0.0, two_pi);
    }
    const double noise_amp = rng.uniform(0.005, 0.02);

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    std::vector<double> samples(n);
    const double dt = 1.0 / sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double env = 1.0 - 0.25 * (1.0 + std::sin(two_pi * profile.tremolo_hz * t));
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            s += gain[j] * std::sin(two_pi * freq[j] * t + phase[j]);
        }
        samples[i] = env * s + noise_amp * rng.uniform(-1.0, 1.0);
    }
    return samples;
}

} // namespace

SyntheticDataset gen_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    SyntheticDataset out;

    Rng song_class_rng(derive_seed(spec.seed, "song-classes"));
    Rng image_class_rng(derive_seed(spec.seed, "image-classes"));
    Rng tag_rng(derive_seed(spec.seed, "tags"));
    Rng audio_rng(derive_seed(spec.seed, "audio"));
    Rng center_rng(derive_seed(spec.seed, "centers"));
    Rng embed_rng(derive_seed(spec.seed, "embeddings"));

    std::array<std::vector<double>, 3> centers;
    for (auto &center : centers) {
        center.resize(spec.embedding_dim);
        for (double &v : center) {
            v = center_rng.normal();
        }
    }

    out.songs.reserve(spec.n_songs);
    for (std::size_t i = 0; i < spec.n_songs; ++i) {
        SyntheticSong song;
        song.id = padded("song-", i, 3);
        song.cls = draw_class(song_class_rng, spec.class_priors);
        song.duration_s = spec.song_duration_s;

        const ClassProfile &profile = profiles()[static_cast<std::size_t>(song.cls)];
        std::vector<std::size_t> pool(profile.tag_pool.size());
        for (std::size_t k = 0; k < pool.size(); ++k) {
            pool[k] = k;
        }
        tag_rng.shuffle(pool);
        const std::size_t n_tags = 1 + tag_rng.uniform_int(3);
        for (std::size_t k = 0; k < n_tags && k < pool.size(); ++k) {
            song.tags.push_back(profile.tag_pool[pool[k]]);
        }
        if (tag_rng.bernoulli(0.3)) {
            song.tags.push_back(filler_tags()[tag_rng.uniform_int(filler_tags().size())]);
        }

        song.samples = render_song(profile, spec.song_duration_s, spec.sample_rate, audio_rng);
        out.songs.push_back(std::move(song));
    }

    out.images.reserve(spec.n_images);
    std::array<std::size_t, 3> label_cursor{};
    for (std::size_t i = 0; i < spec.n_images; ++i) {
        SyntheticImage image;
        image.id = padded("img-", i, 4);
        image.cls = draw_class(image_class_rng, spec.class_priors);

        const std::size_t c = static_cast<std::size_t>(image.cls);
        const auto &labels = profiles()[c].image_labels;
        image.original_label = labels[label_cursor[c]++ % labels.size()];

        image.embedding.resize(spec.embedding_dim);
        for (std::size_t d = 0; d < spec.embedding_dim; ++d) {
            image.embedding[d] = static_cast<float>(centers[c][d] +
                                                    spec.cluster_spread * embed_rng.normal());
        }
        out.images.push_back(std::move(image));
    }

    return out;
}

} // namespace affcorr
