#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "affcorr/checkpoint.hpp"
#include "affcorr/errors.hpp"
#include "affcorr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace affcorr;

namespace {

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.good()) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    out << text;
}

// --- extract-features ------------------------------------------------------

struct ExtractArgs {
    std::vector<std::string> wavs;
    std::string out;
    double segment_len = 60.0;
    double window_len = 10.0;
    double window_hop = 5.0;
};

int run_extract(const ExtractArgs &args) {
    SegmentSpec spec{args.segment_len, args.window_len, args.window_hop};
    std::vector<std::pair<std::string, fs::path>> jobs;
    for (const auto &wav : args.wavs) {
        const fs::path path(wav);
        jobs.emplace_back(path.stem().string(), path);
    }
    std::vector<std::string> warnings;
    const VectorStore store =
        extract_features_store(jobs, spec, configured_threads(), warnings);
    for (const auto &warning : warnings) {
        std::cerr << "warning: " << warning << "\n";
    }
    store.save(args.out);
    std::cout << store.size() << " segment records (" << store.dim() << " dims) -> "
              << args.out << "\n";
    return 0;
}

// --- gen-synthetic ----------------------------------------------------------

struct GenArgs {
    std::string out;
    SyntheticSpec spec;
    std::vector<double> priors;
};

int run_gen(GenArgs args) {
    if (!args.priors.empty()) {
        if (args.priors.size() != 3) {
            throw InvalidInput("gen-synthetic: expected exactly 3 class priors");
        }
        std::copy(args.priors.begin(), args.priors.end(), args.spec.class_priors.begin());
    }
    const SyntheticDataset data = write_synthetic(args.spec, args.out);
    std::cout << data.songs.size() << " songs, " << data.images.size() << " images -> "
              << args.out << "\n";
    return 0;
}

// --- build-dataset ----------------------------------------------------------

struct BuildArgs {
    std::string songs;
    std::string images;
    std::string out;
    std::string blocklist;
    std::string embeddings; // optional cross-check of embedding_index
    double false_ratio = 1.0;
    std::uint64_t seed = 0;
    std::size_t max_true_pairs = 0;
};

int run_build(const BuildArgs &args) {
    const auto songs = load_song_manifest(args.songs);
    const auto images = load_image_manifest(args.images);
    std::set<std::string> blocklist;
    if (!args.blocklist.empty()) {
        blocklist = load_blocklist(args.blocklist);
    }
    if (!args.embeddings.empty()) {
        const VectorStore store = VectorStore::load(args.embeddings);
        for (const auto &image : images) {
            if (image.embedding_index >= store.size() ||
                store.id(image.embedding_index) != image.id) {
                throw DataError("image '" + image.id + "': embedding_index " +
                                std::to_string(image.embedding_index) +
                                " does not point at its record in " + args.embeddings);
            }
        }
    }

    PairGenConfig pair_cfg;
    pair_cfg.false_ratio = args.false_ratio;
    pair_cfg.seed = args.seed;
    pair_cfg.max_true_pairs = args.max_true_pairs;
    const BuiltDataset built = build_dataset(songs, images, blocklist, pair_cfg, args.seed);

    fs::create_directories(args.out);
    const fs::path out(args.out);
    save_pairs_csv(out / "train.csv", built.split.train);
    save_pairs_csv(out / "val.csv", built.split.val);
    save_pairs_csv(out / "test.csv", built.split.test);

    std::vector<std::pair<std::string, std::string>> music_labels;
    for (const auto &segment : built.segments) {
        music_labels.emplace_back(segment.id, std::string(to_string(segment.cls)));
    }
    save_labels_csv(out / "labels-music.csv", music_labels);
    std::vector<std::pair<std::string, std::string>> image_labels;
    for (const auto &image : built.images) {
        image_labels.emplace_back(image.id, image.original_label);
    }
    save_labels_csv(out / "labels-images.csv", image_labels);

    const auto &s = built.summary;
    std::ostringstream summary;
    summary << "{\n"
            << "  \"songs_total\": " << s.songs_total << ",\n"
            << "  \"songs_labelled\": " << s.songs_labelled << ",\n"
            << "  \"segments\": " << built.segments.size() << ",\n"
            << "  \"images\": " << built.images.size() << ",\n"
            << "  \"true_pairs\": " << s.true_pairs << ",\n"
            << "  \"false_pairs\": " << s.false_pairs << ",\n"
            << "  \"train_pairs\": " << built.split.train.size() << ",\n"
            << "  \"val_pairs\": " << built.split.val.size() << ",\n"
            << "  \"test_pairs\": " << built.split.test.size() << ",\n"
            << "  \"seed\": " << args.seed << "\n"
            << "}\n";
    write_text(out / "summary.json", summary.str());

    std::cout << "pairs: " << s.true_pairs << " true + " << s.false_pairs << " false, split "
              << built.split.train.size() << "/" << built.split.val.size() << "/"
              << built.split.test.size() << " -> " << args.out << "\n";
    if (!s.unlabelled_song_ids.empty()) {
        std::cerr << "warning: " << s.unlabelled_song_ids.size()
                  << " songs had no classifiable tags\n";
    }
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string music_features;
    std::string image_embeddings;
    std::string out;
    std::string config;
    TrainConfig cfg;
    std::size_t image_input_dim = 0; // 0 = use the store's dimension
    std::vector<std::size_t> image_dims;
    std::vector<std::size_t> music_dims;
    std::vector<std::size_t> fusion_dims;
};

int run_train(const TrainArgs &args) {
    const VectorStore images = VectorStore::load(args.image_embeddings);
    const VectorStore music = VectorStore::load(args.music_features);

    const fs::path dataset(args.dataset);
    DatasetSplit split;
    split.train = load_pairs_csv(dataset / "train.csv");
    split.val = load_pairs_csv(dataset / "val.csv");
    split.test = load_pairs_csv(dataset / "test.csv");

    AcpConfig arch;
    arch.image_input_dim = args.image_input_dim == 0 ? images.dim() : args.image_input_dim;
    if (!args.image_dims.empty()) {
        arch.image_dims = args.image_dims;
    }
    if (!args.music_dims.empty()) {
        arch.music_dims = args.music_dims;
    }
    if (!args.fusion_dims.empty()) {
        arch.fusion_dims = args.fusion_dims;
    }

    TrainResult result = train(arch, split, images, music, args.cfg);

    fs::create_directories(args.out);
    const fs::path out(args.out);
    save_checkpoint(out / "model.afck", result.model, args.cfg.seed,
                    static_cast<std::uint32_t>(result.report.best_epoch + 1));
    write_text(out / "report.json", report_to_json(result.report));
    const std::string table = report_to_table(result.report);
    write_text(out / "report.txt", table);
    std::cout << table;
    return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt;
    std::string pairs;
    std::string music_features;
    std::string image_embeddings;
};

int run_eval(const EvalArgs &args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const VectorStore images = VectorStore::load(args.image_embeddings);
    const VectorStore music = VectorStore::load(args.music_features);
    const auto pairs = load_pairs_csv(args.pairs);

    const EvalResult res = evaluate_correspondence(ckpt.model, pairs, images, music);
    std::printf("pairs: %zu\naccuracy: %.4f\n", res.total(), res.accuracy());
    std::printf("confusion: tp=%zu tn=%zu fp=%zu fn=%zu\n", res.true_pos, res.true_neg,
                res.false_pos, res.false_neg);
    return 0;
}

// --- probe ------------------------------------------------------------------

struct ProbeArgs {
    std::string ckpt;
    std::string modality;
    std::string labels;
    std::string music_features;
    std::string image_embeddings;
    std::string out;
    ProbeConfig cfg;
};

int run_probe(const ProbeArgs &args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const bool is_music = args.modality == "music";
    const std::string &store_path = is_music ? args.music_features : args.image_embeddings;
    if (store_path.empty()) {
        throw InvalidInput("probe: the " + args.modality + " modality needs --" +
                           (is_music ? std::string("music-features")
                                     : std::string("image-embeddings")));
    }
    const VectorStore store = VectorStore::load(store_path);
    const auto rows = load_labels_csv(args.labels);

    // Deterministic class indexing: sorted unique label names.
    std::map<std::string, int> class_index;
    for (const auto &[id, cls] : rows) {
        class_index.emplace(cls, 0);
    }
    int next = 0;
    for (auto &[name, idx] : class_index) {
        idx = next++;
    }

    std::vector<std::vector<float>> embedded;
    std::vector<int> classes;
    std::size_t skipped = 0;
    for (const auto &[id, cls] : rows) {
        if (!store.contains(id)) {
            ++skipped;
            continue;
        }
        embedded.push_back(is_music ? ckpt.model.music_forward(store.at(id))
                                    : ckpt.model.image_forward(store.at(id)));
        classes.push_back(class_index.at(cls));
    }
    if (skipped > 0) {
        std::cerr << "warning: " << skipped << " labelled ids missing from " << store_path
                  << "\n";
    }
    if (embedded.empty()) {
        throw DataError("probe: no labelled ids found in " + store_path);
    }

    Matrix<float> inputs(embedded.size(), embedded.front().size());
    for (std::size_t r = 0; r < embedded.size(); ++r) {
        std::copy(embedded[r].begin(), embedded[r].end(), inputs.row(r));
    }

    ProbeConfig cfg = args.cfg;
    cfg.n_classes = static_cast<std::size_t>(class_index.size());
    const ProbeResult result = train_probe(inputs, classes, cfg);

    std::ostringstream report;
    report << "{\n  \"modality\": \"" << args.modality << "\",\n  \"classes\": {";
    bool first = true;
    for (const auto &[name, idx] : class_index) {
        report << (first ? "" : ", ") << '"' << name << "\": " << idx;
        first = false;
    }
    report << "},\n  \"samples\": " << embedded.size() << ",\n  \"best_epoch\": "
           << result.best_epoch + 1 << ",\n  \"holdout_accuracy\": "
           << result.holdout_accuracy << "\n}\n";
    if (!args.out.empty()) {
        write_text(args.out, report.str());
    }
    std::cout << report.str();
    return 0;
}

// --- retrieve ---------------------------------------------------------------

struct RetrieveArgs {
    std::string ckpt;
    std::string query;
    std::string image_embeddings;
    std::string library;
    std::size_t k = 10;
};

int run_retrieve(const RetrieveArgs &args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const VectorStore images = VectorStore::load(args.image_embeddings);
    const VectorStore library = VectorStore::load(args.library);

    const auto hits = retrieve(ckpt.model, images.at(args.query), library, args.k);
    for (const auto &hit : hits) {
        std::printf("%s,%.9g\n", hit.segment_id.c_str(), hit.p_true);
    }
    return 0;
}

// --- grad-check ------------------------------------------------------------

struct GradCheckArgs {
    std::uint64_t seed = 0;
    std::size_t samples = 60;
    std::size_t batch = 5;
    std::size_t image_input_dim = 2048;
    double tolerance = 1e-4;
};

int run_grad_check(const GradCheckArgs &args) {
    AcpConfig arch;
    arch.image_input_dim = args.image_input_dim;
    auto model = AcpModel<double>::random(arch, args.seed);

    Rng rng(derive_seed(args.seed, "grad-check-data"));
    AcpBatch<double> batch;
    batch.image_in.resize(args.batch, arch.image_input_dim);
    for (auto &v : batch.image_in.data) {
        v = rng.normal();
    }
    batch.music_in.resize(args.batch, AcpConfig::kMusicInputDim);
    for (auto &v : batch.music_in.data) {
        v = rng.normal();
    }
    for (std::size_t i = 0; i < args.batch; ++i) {
        batch.labels.push_back(static_cast<int>(i % 2));
    }

    GradCheckConfig cfg;
    cfg.max_per_tensor = args.samples;
    cfg.seed = args.seed;
    const double worst = acp_grad_check(model, batch, cfg);
    std::printf("max relative gap: %.3e (tolerance %.1e, %zu samples/tensor)\n", worst,
                args.tolerance, args.samples);
    if (worst >= args.tolerance) {
        std::cerr << "gradient check FAILED\n";
        return 2;
    }
    std::cout << "gradient check passed\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"affective correspondence toolkit"};
    app.require_subcommand(1);
    std::function<int()> action;

    ExtractArgs extract;
    auto *cmd = app.add_subcommand("extract-features",
                                   "Extract per-segment acoustic feature vectors from WAVs");
    cmd->add_option("wavs", extract.wavs, "input WAV files")->required()->expected(-1);
    cmd->add_option("--out", extract.out, "output feature store")->required();
    cmd->add_option("--segment-len", extract.segment_len, "segment length, seconds");
    cmd->add_option("--window-len", extract.window_len, "analysis window length, seconds");
    cmd->add_option("--window-hop", extract.window_hop, "analysis window hop, seconds");
    cmd->callback([&] { action = [&] { return run_extract(extract); }; });

    GenArgs gen;
    cmd = app.add_subcommand("gen-synthetic", "Generate a labelled synthetic corpus");
    cmd->add_option("--out", gen.out, "output directory")->required();
    cmd->add_option("--songs", gen.spec.n_songs, "number of songs");
    cmd->add_option("--images", gen.spec.n_images, "number of images");
    cmd->add_option("--duration", gen.spec.song_duration_s, "song duration, seconds");
    cmd->add_option("--sample-rate", gen.spec.sample_rate, "sample rate, Hz");
    cmd->add_option("--dim", gen.spec.embedding_dim, "image embedding dimension");
    cmd->add_option("--spread", gen.spec.cluster_spread, "embedding cluster spread");
    cmd->add_option("--seed", gen.spec.seed, "random seed");
    cmd->add_option("--priors", gen.priors,
                    "class priors: negative neutral positive")->expected(3);
    cmd->callback([&] { action = [&] { return run_gen(gen); }; });

    BuildArgs build;
    cmd = app.add_subcommand("build-dataset",
                             "Label songs and images, sample pairs, write the split");
    cmd->add_option("--songs", build.songs, "song manifest JSON")->required();
    cmd->add_option("--images", build.images, "image manifest JSON")->required();
    cmd->add_option("--out", build.out, "output directory")->required();
    cmd->add_option("--blocklist", build.blocklist, "tag blocklist file");
    cmd->add_option("--embeddings", build.embeddings,
                    "embedding store for index cross-checking");
    cmd->add_option("--false-ratio", build.false_ratio, "false pairs per true pair");
    cmd->add_option("--max-true-pairs", build.max_true_pairs,
                    "cap on sampled true pairs (0 = keep all)");
    cmd->add_option("--seed", build.seed, "random seed");
    cmd->callback([&] { action = [&] { return run_build(build); }; });

    TrainArgs tr;
    auto *train_cmd = app.add_subcommand("train", "Train the correspondence network");
    cmd = train_cmd;
    cmd->add_option("--dataset", tr.dataset, "directory with train/val/test.csv")->required();
    cmd->add_option("--music-features", tr.music_features, "music feature store")->required();
    cmd->add_option("--image-embeddings", tr.image_embeddings, "image embedding store")
        ->required();
    cmd->add_option("--out", tr.out, "output directory")->required();
    cmd->add_option("--config", tr.config,
                    "TOML config with hyperparameter defaults (command line wins)")
        ->configurable(false);
    cmd->allow_config_extras(false);
    cmd->add_option("--lr", tr.cfg.lr, "learning rate");
    cmd->add_option("--max-epochs", tr.cfg.max_epochs, "epoch cap");
    cmd->add_option("--patience", tr.cfg.patience, "early-stopping patience, epochs");
    cmd->add_option("--batch-size", tr.cfg.batch_size, "minibatch size");
    cmd->add_option("--dropout", tr.cfg.dropout_p, "dropout probability");
    cmd->add_option("--seed", tr.cfg.seed, "random seed");
    cmd->add_option("--image-input-dim", tr.image_input_dim,
                    "image embedding input width (0 = from store)");
    cmd->add_option("--image-dims", tr.image_dims, "image tower widths")->delimiter(',');
    cmd->add_option("--music-dims", tr.music_dims, "music tower widths")->delimiter(',');
    cmd->add_option("--fusion-dims", tr.fusion_dims, "fusion head widths")->delimiter(',');
    cmd->callback([&] { action = [&] { return run_train(tr); }; });

    EvalArgs ev;
    cmd = app.add_subcommand("eval", "Evaluate correspondence accuracy on a pair list");
    cmd->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
    cmd->add_option("--pairs", ev.pairs, "pair CSV")->required();
    cmd->add_option("--music-features", ev.music_features, "music feature store")->required();
    cmd->add_option("--image-embeddings", ev.image_embeddings, "image embedding store")
        ->required();
    cmd->callback([&] { action = [&] { return run_eval(ev); }; });

    ProbeArgs probe;
    cmd = app.add_subcommand("probe",
                             "Train an emotion classifier on frozen embeddings");
    cmd->add_option("--ckpt", probe.ckpt, "checkpoint file")->required();
    cmd->add_option("--modality", probe.modality, "music or image")
        ->required()
        ->check(CLI::IsMember({"music", "image"}));
    cmd->add_option("--labels", probe.labels, "id,class CSV")->required();
    cmd->add_option("--music-features", probe.music_features, "music feature store");
    cmd->add_option("--image-embeddings", probe.image_embeddings, "image embedding store");
    cmd->add_option("--out", probe.out, "write the JSON report here too");
    cmd->add_option("--lr", probe.cfg.lr, "learning rate");
    cmd->add_option("--max-epochs", probe.cfg.max_epochs, "epoch cap");
    cmd->add_option("--patience", probe.cfg.patience, "early-stopping patience, epochs");
    cmd->add_option("--batch-size", probe.cfg.batch_size, "minibatch size");
    cmd->add_option("--holdout", probe.cfg.holdout_fraction, "held-out fraction");
    cmd->add_option("--seed", probe.cfg.seed, "random seed");
    cmd->callback([&] { action = [&] { return run_probe(probe); }; });

    RetrieveArgs ret;
    cmd = app.add_subcommand("retrieve", "Rank music segments against a query image");
    cmd->add_option("--ckpt", ret.ckpt, "checkpoint file")->required();
    cmd->add_option("--query", ret.query, "query image id")->required();
    cmd->add_option("--image-embeddings", ret.image_embeddings, "image embedding store")
        ->required();
    cmd->add_option("--library", ret.library, "music feature store to rank")->required();
    cmd->add_option("-k,--k", ret.k, "results to return");
    cmd->callback([&] { action = [&] { return run_retrieve(ret); }; });

    GradCheckArgs gc;
    cmd = app.add_subcommand("grad-check",
                             "Verify backprop against central finite differences");
    cmd->add_option("--seed", gc.seed, "random seed");
    cmd->add_option("--samples", gc.samples, "parameters probed per tensor (0 = all)");
    cmd->add_option("--batch", gc.batch, "batch rows");
    cmd->add_option("--image-input-dim", gc.image_input_dim, "image embedding input width");
    cmd->add_option("--tolerance", gc.tolerance, "maximum relative gap");
    cmd->callback([&] { action = [&] { return run_grad_check(gc); }; });

    try {
        app.parse(argc, argv);
        // Subcommand set_config is inert in CLI11 2.4.2; feed the file through the
        // stream parser instead. Options already given on the command line keep
        // their values, unknown keys abort the parse.
        if (!tr.config.empty()) {
            if (!fs::is_regular_file(tr.config)) {
                throw CLI::FileError::Missing(tr.config);
            }
            std::ifstream stream(tr.config);
            train_cmd->parse_from_stream(stream);
        }
    } catch (const CLI::ParseError &err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        return action();
    } catch (const Error &err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}
