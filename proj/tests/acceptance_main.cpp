// End-to-end acceptance gate: eight numbered checks covering the DSP
// oracles, the feature contract, gradients, weak labeling, synthetic
// training, probe transfer, determinism, and retrieval. Each prints one
// PASS/FAIL line; the process exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "affcorr/acpnet.hpp"
#include "affcorr/audio.hpp"
#include "affcorr/checkpoint.hpp"
#include "affcorr/dataset.hpp"
#include "affcorr/dsp.hpp"
#include "affcorr/errors.hpp"
#include "affcorr/pipeline.hpp"
#include "affcorr/rng.hpp"
#include "affcorr/store.hpp"
#include "affcorr/synthetic.hpp"
#include "affcorr/training.hpp"

#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace affcorr;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *format, ...) {
    va_list args;
    va_start(args, format);
    char buf[256];
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

std::vector<char> slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- criterion 1: DSP feature families vs the brute-force oracle ----------

bool dsp_oracle_sweep(std::string &detail) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double duration = 1.0 + i; // 1..10 s
        Rng rng(500 + static_cast<std::uint64_t>(i));
        AudioClip clip;
        clip.sample_rate = kWorkingSampleRate;
        clip.samples.resize(static_cast<std::size_t>(duration * clip.sample_rate));
        const double tone_hz = rng.uniform(80.0, 4000.0);
        for (std::size_t n = 0; n < clip.samples.size(); ++n) {
            const double t = static_cast<double>(n) / clip.sample_rate;
            clip.samples[n] = 0.5 * rng.uniform(-1.0, 1.0) +
                              0.3 * std::sin(2.0 * M_PI * tone_hz * t);
        }

        const Spectrogram sp = stft(clip);
        const oracle::Spectro ref = oracle::spectrogram(clip.samples, clip.sample_rate);

        worst = std::max(worst, oracle::max_mixed_rel_err(mfcc(sp), oracle::mfcc40(ref)));
        worst = std::max(worst, oracle::max_mixed_rel_err(chroma(sp), oracle::chroma12(ref)));
        worst = std::max(worst, oracle::max_mixed_rel_err(spectral_contrast(sp),
                                                          oracle::contrast7(ref)));
        worst = std::max(worst,
                         oracle::max_mixed_rel_err(tonal_centroid(sp), oracle::tonnetz6(ref)));
        worst = std::max(worst,
                         oracle::max_mixed_rel_err(mel_features(sp), oracle::mel128(ref)));
    }
    const double secs = seconds_since(t0);
    detail = fmt("5 families x 10 clips, worst rel err %.2e in %.1f s (limits 1e-6, 60 s)",
                 worst, secs);
    return worst < 1e-6 && secs < 60.0;
}

// ---- criterion 2: 193-value contract and forced silence values ------------

bool feature_contract(std::string &detail) {
    AudioClip clip;
    clip.sample_rate = kWorkingSampleRate;
    clip.samples.resize(static_cast<std::size_t>(60) * kWorkingSampleRate);
    Rng rng(77);
    for (std::size_t n = 0; n < clip.samples.size(); ++n) {
        const double t = static_cast<double>(n) / clip.sample_rate;
        clip.samples[n] = 0.4 * std::sin(2.0 * M_PI * 330.0 * t) + 0.1 * rng.uniform(-1, 1);
    }

    bool ok = MusicFeatureVector::kDim == 193 && MusicFeatureVector::kMfccOffset == 0 &&
              MusicFeatureVector::kChromaOffset == 40 &&
              MusicFeatureVector::kContrastOffset == 52 &&
              MusicFeatureVector::kTonnetzOffset == 59 && MusicFeatureVector::kMelOffset == 65;

    const MusicFeatureVector v = extract_segment_features(clip);
    ok = ok && v.values.size() == 193;
    ok = ok && SegmentSpec{}.windows_per_segment() == 11;
    ok = ok && extract_segment_windows(clip).size() == 11;

    AudioClip silence;
    silence.sample_rate = kWorkingSampleRate;
    silence.samples.assign(clip.samples.size(), 0.0);
    const MusicFeatureVector s = extract_segment_features(silence);

    const double floor_log = std::log(kLogFloor);
    ok = ok && oracle::mixed_rel_err(s.mfcc()[0], std::sqrt(128.0) * floor_log) < 1e-12;
    for (std::size_t k = 1; k < 40; ++k) {
        ok = ok && std::abs(s.mfcc()[k]) < 1e-9;
    }
    for (const double x : s.chroma()) {
        ok = ok && x == 0.0;
    }
    for (const double x : s.contrast()) {
        ok = ok && x == 0.0;
    }
    for (const double x : s.tonnetz()) {
        ok = ok && x == 0.0;
    }
    for (const double x : s.mel()) {
        ok = ok && oracle::mixed_rel_err(x, floor_log) < 1e-12;
    }

    detail = "193 values at offsets {0,40,52,59,65}, 11 windows, silence forced values";
    return ok;
}

// ---- criterion 3: gradient check at production dimensions -----------------

bool gradient_check(std::string &detail) {
    const auto t0 = Clock::now();
    const AcpConfig arch; // default dims: 2048 | 1024x1024 | 256..1024 | 512..2
    auto model = AcpModel<double>::random(arch, 0);

    Rng rng(derive_seed(0, "grad-check-data"));
    AcpBatch<double> batch;
    batch.image_in.resize(5, arch.image_input_dim);
    for (auto &v : batch.image_in.data) {
        v = rng.normal();
    }
    batch.music_in.resize(5, AcpConfig::kMusicInputDim);
    for (auto &v : batch.music_in.data) {
        v = rng.normal();
    }
    batch.labels = {1, 0, 1, 0, 1};

    GradCheckConfig cfg;
    cfg.max_per_tensor = 60; // seeded coordinate sample per tensor
    const double worst = acp_grad_check(model, batch, cfg);
    const double secs = seconds_since(t0);
    detail = fmt("%zu params, 5 pairs, 64-bit, max rel gap %.2e in %.1f s (limits 1e-4, 300 s)",
                 model.parameter_count(), worst, secs);
    return worst < 1e-4 && secs < 300.0;
}

// ---- criterion 4: weak labeling rules --------------------------------------

bool labeling_rules(std::string &detail) {
    bool ok = true;
    const std::map<std::string, EmotionClass> regroup = {
        {"awe", EmotionClass::Positive},        {"amusement", EmotionClass::Positive},
        {"excitement", EmotionClass::Positive}, {"contentment", EmotionClass::Neutral},
        {"fear", EmotionClass::Negative},       {"disgust", EmotionClass::Negative},
        {"anger", EmotionClass::Negative},      {"sadness", EmotionClass::Negative},
    };
    for (const auto &[label, cls] : regroup) {
        ok = ok && regroup_image_label(label) == cls;
    }

    const std::map<std::string, EmotionClass> tags = {
        {"this will always make me happy", EmotionClass::Positive},
        {"so energetic", EmotionClass::Positive},
        {"makes me energetic and wanna dance", EmotionClass::Positive},
        {"joyous", EmotionClass::Positive},
        {"soothing for the ear to hear", EmotionClass::Neutral},
        {"cool and relaxing music", EmotionClass::Neutral},
        {"calmness", EmotionClass::Neutral},
        {"sad", EmotionClass::Negative},
        {"makes me sad", EmotionClass::Negative},
        {"for the painfully alone", EmotionClass::Negative},
    };
    for (const auto &[tag, cls] : tags) {
        const auto got = classify_tag(tag);
        ok = ok && got.has_value() && *got == cls;
    }

    ok = ok && !classify_tag("happysad").has_value();
    ok = ok && resolve_song_label({0, 2, 2}) == EmotionClass::Positive;

    detail = "8 regroupings, 10 example tags, ambiguity rejection, tie-break";
    return ok;
}

// ---- criteria 5-8 share one end-to-end pipeline ----------------------------

struct EndToEnd {
    SyntheticDataset corpus;
    VectorStore music;
    BuiltDataset built;
    TrainResult trained;
    double seconds;
};

EndToEnd run_end_to_end(const fs::path &dir, std::uint64_t seed) {
    const auto t0 = Clock::now();
    fs::remove_all(dir);

    SyntheticSpec spec;
    spec.seed = seed;
    SyntheticDataset corpus = write_synthetic(spec, dir);

    const auto songs = load_song_manifest(dir / "songs.json");
    std::vector<std::pair<std::string, fs::path>> jobs;
    for (const SongManifestEntry &s : songs) {
        jobs.emplace_back(s.id, dir / s.wav_path);
    }
    std::vector<std::string> warnings;
    VectorStore music = extract_features_store(jobs, SegmentSpec{}, configured_threads(),
                                               warnings);
    music.save(dir / "music.afcf");
    if (!warnings.empty()) {
        throw DataError("unexpected extraction warnings: " + warnings.front());
    }

    const auto images = load_image_manifest(dir / "images.json");
    PairGenConfig pair_cfg;
    pair_cfg.false_ratio = 1.0;
    pair_cfg.seed = seed;
    pair_cfg.max_true_pairs = 4000;
    BuiltDataset built = build_dataset(songs, images, {}, pair_cfg, seed);

    const VectorStore embeddings = VectorStore::load(dir / "images.afcf");
    AcpConfig arch;
    arch.image_input_dim = embeddings.dim();
    TrainConfig cfg; // stock hyperparameters: lr 1e-4, 50 epochs, dropout 0.4
    cfg.seed = seed;
    TrainResult trained = train(arch, built.split, embeddings, music, cfg);
    save_checkpoint(dir / "model.afck", trained.model, seed,
                    static_cast<std::uint32_t>(trained.report.best_epoch));

    return EndToEnd{std::move(corpus), std::move(music), std::move(built), std::move(trained),
                    seconds_since(t0)};
}

bool synthetic_end_to_end(const EndToEnd &run, std::string &detail) {
    const double acc = run.trained.report.test_accuracy;
    detail = fmt("%zu/%zu/%zu pairs, test accuracy %.2f%% in %.0f s (limits 95%%, 600 s)",
                 run.built.split.train.size(), run.built.split.val.size(),
                 run.built.split.test.size(), 100.0 * acc, run.seconds);
    return acc >= 0.95 && run.seconds < 600.0;
}

bool probe_transfer(const EndToEnd &run, std::string &detail) {
    std::map<std::string, EmotionClass> segment_class;
    for (const SegmentRecord &seg : run.built.segments) {
        segment_class[seg.id] = seg.cls;
    }

    const std::size_t emb_dim = run.trained.model.config().music_dims.back();
    Matrix<float> emb(run.music.size(), emb_dim);
    std::vector<int> classes(run.music.size());
    for (std::size_t i = 0; i < run.music.size(); ++i) {
        const auto v = run.trained.model.music_forward(run.music.row(i));
        std::copy(v.begin(), v.end(), emb.row(i));
        classes[i] = static_cast<int>(segment_class.at(run.music.id(i)));
    }

    ProbeConfig cfg;
    cfg.seed = 11;
    const ProbeResult probe = train_probe(emb, classes, cfg);
    detail = fmt("%zu->512->32->3 probe on %zu segments, held-out accuracy %.2f%% (limit 90%%)",
                 emb_dim, emb.rows, 100.0 * probe.holdout_accuracy);
    return probe.holdout_accuracy >= 0.90;
}

bool determinism(const EndToEnd &a, const fs::path &dir_a, const fs::path &dir_b,
                 std::uint64_t seed, std::string &detail) {
    const EndToEnd b = run_end_to_end(dir_b, seed);

    const bool stores_equal = slurp(dir_a / "music.afcf") == slurp(dir_b / "music.afcf") &&
                              slurp(dir_a / "images.afcf") == slurp(dir_b / "images.afcf");
    const bool ckpt_equal = slurp(dir_a / "model.afck") == slurp(dir_b / "model.afck");

    bool losses_equal = a.trained.report.epochs.size() == b.trained.report.epochs.size();
    for (std::size_t i = 0; losses_equal && i < a.trained.report.epochs.size(); ++i) {
        losses_equal = a.trained.report.epochs[i].train_loss ==
                           b.trained.report.epochs[i].train_loss &&
                       a.trained.report.epochs[i].val_accuracy ==
                           b.trained.report.epochs[i].val_accuracy;
    }

    detail = fmt("rerun: stores %s, checkpoint %s, %zu epoch losses %s",
                 stores_equal ? "byte-identical" : "DIFFER",
                 ckpt_equal ? "byte-identical" : "DIFFER", a.trained.report.epochs.size(),
                 losses_equal ? "bit-identical" : "DIFFER");
    return stores_equal && ckpt_equal && losses_equal;
}

bool retrieval_sanity(const EndToEnd &run, const fs::path &dir, std::string &detail) {
    std::map<std::string, EmotionClass> image_class, segment_class;
    for (const ImageRecord &img : run.built.images) {
        image_class[img.id] = img.cls;
    }
    for (const SegmentRecord &seg : run.built.segments) {
        segment_class[seg.id] = seg.cls;
    }

    std::set<std::string> queries;
    for (const CorrespondencePair &p : run.built.split.test) {
        queries.insert(p.image_id);
    }

    const VectorStore embeddings = VectorStore::load(dir / "images.afcf");
    std::size_t matched = 0, total = 0, exact = 0, compared = 0;
    std::size_t score_checks_left = 3;
    for (const std::string &id : queries) {
        const auto query = embeddings.at(id);
        const auto top5 = retrieve(run.trained.model, query, run.music, 5);
        for (const RetrievalHit &hit : top5) {
            matched += segment_class.at(hit.segment_id) == image_class.at(id) ? 1 : 0;
            total += 1;
        }
        if (score_checks_left > 0) {
            score_checks_left -= 1;
            const auto all = retrieve(run.trained.model, query, run.music, run.music.size());
            for (const RetrievalHit &hit : all) {
                const auto pred =
                    run.trained.model.acp_forward(query, run.music.at(hit.segment_id));
                exact += hit.p_true == static_cast<double>(pred.p_true) ? 1 : 0;
                compared += 1;
            }
        }
    }

    const double frac = total == 0 ? 0.0 : static_cast<double>(matched) / total;
    detail = fmt("%zu queries: %.2f%% of top-5 share the class (limit 90%%); "
                 "%zu/%zu scores equal acp_forward",
                 queries.size(), 100.0 * frac, exact, compared);
    return frac >= 0.90 && compared > 0 && exact == compared;
}

} // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "affcorr_acceptance";
    const fs::path dir_a = root / "run-a";
    const fs::path dir_b = root / "run-b";
    const std::uint64_t seed = 11;

    int failed = 0;
    const auto report = [&failed](int id, bool pass, const std::string &detail) {
        std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail
                  << std::endl;
        failed += pass ? 0 : 1;
    };
    const auto guarded = [&report](int id, auto &&fn) {
        std::string detail;
        bool pass = false;
        try {
            pass = fn(detail);
        } catch (const std::exception &err) {
            detail = std::string("unexpected error: ") + err.what();
        }
        report(id, pass, detail);
    };

    guarded(1, [](std::string &d) { return dsp_oracle_sweep(d); });
    guarded(2, [](std::string &d) { return feature_contract(d); });
    guarded(3, [](std::string &d) { return gradient_check(d); });
    guarded(4, [](std::string &d) { return labeling_rules(d); });

    std::optional<EndToEnd> run;
    try {
        run.emplace(run_end_to_end(dir_a, seed));
    } catch (const std::exception &err) {
        const std::string detail = std::string("pipeline failed: ") + err.what();
        for (int id = 5; id <= 8; ++id) {
            report(id, false, detail);
        }
    }
    if (run.has_value()) {
        guarded(5, [&](std::string &d) { return synthetic_end_to_end(*run, d); });
        guarded(6, [&](std::string &d) { return probe_transfer(*run, d); });
        guarded(7, [&](std::string &d) { return determinism(*run, dir_a, dir_b, seed, d); });
        guarded(8, [&](std::string &d) { return retrieval_sanity(*run, dir_a, d); });
    }

    std::cout << (8 - failed) << " criteria passed, " << failed << " failed" << std::endl;
    fs::remove_all(root);
    return failed == 0 ? 0 : 1;
}
