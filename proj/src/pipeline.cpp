#include "affcorr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "affcorr/audio.hpp"
#include "affcorr/errors.hpp"

namespace affcorr {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in.good()) {
        throw FormatError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error &err) {
        throw FormatError(path.string() + ": " + err.what());
    }
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.good()) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out.good()) {
        throw FormatError("write failed for " + path.string());
    }
}

template <typename T>
T require_field(const json &obj, const char *key, const std::filesystem::path &path) {
    if (!obj.contains(key)) {
        throw FormatError(path.string() + ": missing field '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception &err) {
        throw FormatError(path.string() + ": field '" + key + "': " + err.what());
    }
}

} // namespace

std::vector<SongManifestEntry> load_song_manifest(const std::filesystem::path &path) {
    const json doc = parse_json_file(path);
    if (!doc.is_array()) {
        throw FormatError(path.string() + ": song manifest must be a JSON array");
    }
    std::vector<SongManifestEntry> songs;
    for (const auto &item : doc) {
        SongManifestEntry entry;
        entry.id = require_field<std::string>(item, "id", path);
        entry.tags = require_field<std::vector<std::string>>(item, "tags", path);
        entry.duration_s = require_field<double>(item, "duration_s", path);
        entry.wav_path = require_field<std::string>(item, "wav_path", path);
        songs.push_back(std::move(entry));
    }
    return songs;
}

std::vector<ImageManifestEntry> load_image_manifest(const std::filesystem::path &path) {
    const json doc = parse_json_file(path);
    if (!doc.is_array()) {
        throw FormatError(path.string() + ": image manifest must be a JSON array");
    }
    std::vector<ImageManifestEntry> images;
    for (const auto &item : doc) {
        ImageManifestEntry entry;
        entry.id = require_field<std::string>(item, "id", path);
        entry.original_label = require_field<std::string>(item, "original_label", path);
        entry.embedding_index = require_field<std::size_t>(item, "embedding_index", path);
        images.push_back(std::move(entry));
    }
    return images;
}

void save_song_manifest(const std::filesystem::path &path,
                        const std::vector<SongManifestEntry> &songs) {
    json doc = json::array();
    for (const auto &song : songs) {
        doc.push_back({{"id", song.id},
                       {"tags", song.tags},
                       {"duration_s", song.duration_s},
                       {"wav_path", song.wav_path}});
    }
    write_text_file(path, doc.dump(2) + "\n");
}

void save_image_manifest(const std::filesystem::path &path,
                         const std::vector<ImageManifestEntry> &images) {
    json doc = json::array();
    for (const auto &image : images) {
        doc.push_back({{"id", image.id},
                       {"original_label", image.original_label},
                       {"embedding_index", image.embedding_index}});
    }
    write_text_file(path, doc.dump(2) + "\n");
}

std::set<std::string> load_blocklist(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in.good()) {
        throw FormatError("cannot open " + path.string());
    }
    std::set<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto last = line.find_last_not_of(" \t");
        entries.insert(line.substr(first, last - first + 1));
    }
    return entries;
}

void save_pairs_csv(const std::filesystem::path &path,
                    const std::vector<CorrespondencePair> &pairs) {
    std::ostringstream out;
    out << "image_id,segment_id,label\n";
    for (const auto &p : pairs) {
        out << p.image_id << ',' << p.segment_id << ',' << (p.label ? 1 : 0) << '\n';
    }
    write_text_file(path, out.str());
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &path,
                                               std::size_t n_cols, const char *header) {
    std::ifstream in(path);
    if (!in.good()) {
        throw FormatError("cannot open " + path.string());
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (first) {
            first = false;
            if (line == header) {
                continue; // header row
            }
        }
        if (fields.size() != n_cols) {
            throw FormatError(path.string() + ": expected " + std::to_string(n_cols) +
                              " columns, got " + std::to_string(fields.size()) + " in '" +
                              line + "'");
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace

std::vector<CorrespondencePair> load_pairs_csv(const std::filesystem::path &path) {
    std::vector<CorrespondencePair> pairs;
    for (auto &row : read_csv(path, 3, "image_id,segment_id,label")) {
        CorrespondencePair pair;
        pair.image_id = std::move(row[0]);
        pair.segment_id = std::move(row[1]);
        if (row[2] == "1") {
            pair.label = true;
        } else if (row[2] == "0") {
            pair.label = false;
        } else {
            throw FormatError(path.string() + ": label must be 0 or 1, got '" + row[2] + "'");
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

void save_labels_csv(const std::filesystem::path &path,
                     const std::vector<std::pair<std::string, std::string>> &rows) {
    std::ostringstream out;
    out << "id,class\n";
    for (const auto &[id, cls] : rows) {
        out << id << ',' << cls << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<std::pair<std::string, std::string>> load_labels_csv(
    const std::filesystem::path &path) {
    std::vector<std::pair<std::string, std::string>> rows;
    for (auto &row : read_csv(path, 2, "id,class")) {
        rows.emplace_back(std::move(row[0]), std::move(row[1]));
    }
    return rows;
}

std::vector<std::pair<std::string, MusicFeatureVector>> extract_song_features(
    const std::filesystem::path &wav, const std::string &song_id, const SegmentSpec &spec) {
    spec.validate();
    const AudioClip clip = resample_mono(read_wav(wav), 22050, song_id);
    const auto spans = segment_song(clip.duration_s(), spec.segment_len_s);
    if (spans.empty()) {
        throw InvalidInput(wav.string() + ": shorter than one segment (" +
                           std::to_string(clip.duration_s()) + " s)");
    }
    const auto seg_samples =
        static_cast<std::size_t>(std::llround(spec.segment_len_s * clip.sample_rate));
    std::vector<std::pair<std::string, MusicFeatureVector>> records;
    for (std::size_t k = 0; k < spans.size(); ++k) {
        AudioClip segment;
        segment.sample_rate = clip.sample_rate;
        segment.id = song_id + "#" + std::to_string(k);
        const std::size_t begin = k * seg_samples;
        segment.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                               clip.samples.begin() +
                                   static_cast<std::ptrdiff_t>(begin + seg_samples));
        records.emplace_back(segment.id, extract_segment_features(segment, spec));
    }
    return records;
}

int configured_threads() {
    if (const char *env = std::getenv("AFCORR_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) {
            return n;
        }
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

VectorStore extract_features_store(
    const std::vector<std::pair<std::string, std::filesystem::path>> &jobs,
    const SegmentSpec &spec, int threads, std::vector<std::string> &warnings) {
    if (jobs.empty()) {
        throw InvalidInput("feature extraction: no input files");
    }

    struct JobResult {
        std::vector<std::pair<std::string, MusicFeatureVector>> records;
        std::string warning;
    };
    std::vector<JobResult> results(jobs.size());

    const auto worker = [&](std::size_t i) {
        try {
            results[i].records = extract_song_features(jobs[i].second, jobs[i].first, spec);
        } catch (const Error &err) {
            results[i].warning = jobs[i].first + ": " + err.what();
        }
    };

    const std::size_t n_threads = std::min<std::size_t>(
        jobs.size(), static_cast<std::size_t>(std::max(1, threads)));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            worker(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < jobs.size();
                     i = next.fetch_add(1)) {
                    worker(i);
                }
            });
        }
        for (auto &thread : pool) {
            thread.join();
        }
    }

    std::vector<std::pair<std::string, const MusicFeatureVector *>> records;
    for (auto &result : results) {
        if (!result.warning.empty()) {
            warnings.push_back(result.warning);
        }
        for (const auto &[id, vec] : result.records) {
            records.emplace_back(id, &vec);
        }
    }
    if (records.empty()) {
        throw InvalidInput("feature extraction: every input file failed");
    }
    std::sort(records.begin(), records.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });

    VectorStore store(MusicFeatureVector::kDim);
    std::vector<float> row(MusicFeatureVector::kDim);
    for (const auto &[id, vec] : records) {
        for (std::size_t d = 0; d < MusicFeatureVector::kDim; ++d) {
            row[d] = static_cast<float>(vec->values[d]);
        }
        store.add(id, row);
    }
    return store;
}

BuiltDataset build_dataset(const std::vector<SongManifestEntry> &songs,
                           const std::vector<ImageManifestEntry> &images,
                           const std::set<std::string> &blocklist,
                           const PairGenConfig &pair_cfg, std::uint64_t split_seed) {
    BuiltDataset out;
    out.summary.songs_total = songs.size();

    for (const auto &song : songs) {
        const auto cls = label_from_tags(song.tags, blocklist);
        if (!cls) {
            out.summary.unlabelled_song_ids.push_back(song.id);
            continue;
        }
        ++out.summary.songs_labelled;
        const auto spans = segment_song(song.duration_s);
        for (std::size_t k = 0; k < spans.size(); ++k) {
            SegmentRecord seg;
            seg.id = song.id + "#" + std::to_string(k);
            seg.song_id = song.id;
            seg.cls = *cls;
            ++out.summary.segment_class_counts[static_cast<std::size_t>(*cls)];
            out.segment_song.emplace(seg.id, seg.song_id);
            out.segments.push_back(std::move(seg));
        }
    }

    for (const auto &image : images) {
        ImageRecord rec;
        rec.id = image.id;
        rec.original_label = image.original_label;
        rec.cls = regroup_image_label(image.original_label);
        ++out.summary.image_class_counts[static_cast<std::size_t>(rec.cls)];
        out.images.push_back(std::move(rec));
    }

    const auto pairs = generate_pairs(out.images, out.segments, pair_cfg);
    for (const auto &pair : pairs) {
        (pair.label ? out.summary.true_pairs : out.summary.false_pairs) += 1;
    }
    out.split = split_dataset(pairs, out.segment_song, split_seed);
    return out;
}

SyntheticDataset write_synthetic(const SyntheticSpec &spec,
                                 const std::filesystem::path &out_dir) {
    SyntheticDataset data = gen_synthetic(spec);

    std::filesystem::create_directories(out_dir / "wav");

    std::vector<SongManifestEntry> song_manifest;
    for (const auto &song : data.songs) {
        const std::string rel = "wav/" + song.id + ".wav";
        write_wav_mono16(out_dir / rel, song.samples, spec.sample_rate);
        song_manifest.push_back({song.id, song.tags, song.duration_s, rel});
    }
    save_song_manifest(out_dir / "songs.json", song_manifest);

    VectorStore embeddings(static_cast<std::uint32_t>(spec.embedding_dim));
    std::vector<ImageManifestEntry> image_manifest;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const auto &image = data.images[i];
        embeddings.add(image.id, image.embedding);
        image_manifest.push_back({image.id, image.original_label, i});
    }
    save_image_manifest(out_dir / "images.json", image_manifest);
    embeddings.save(out_dir / "images.afcf");

    return data;
}

std::string report_to_json(const TrainReport &report) {
    json epochs = json::array();
    for (const auto &e : report.epochs) {
        epochs.push_back({{"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"val_accuracy", e.val_accuracy}});
    }
    const json doc = {{"epochs", epochs},
                      {"best_epoch", report.best_epoch + 1},
                      {"best_val_accuracy", report.best_val_accuracy},
                      {"test_accuracy", report.test_accuracy},
                      {"wall_seconds", report.wall_seconds}};
    return doc.dump(2) + "\n";
}

std::string report_to_table(const TrainReport &report) {
    std::ostringstream out;
    out << "epoch  train_loss  train_acc  val_acc\n";
    char line[80];
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto &s = report.epochs[e];
        std::snprintf(line, sizeof line, "%5zu  %10.4f  %8.2f%%  %6.2f%%%s\n", e + 1,
                      s.train_loss, 100.0 * s.train_accuracy, 100.0 * s.val_accuracy,
                      e == report.best_epoch ? "  *" : "");
        out << line;
    }
    std::snprintf(line, sizeof line, "best epoch %zu, test accuracy %.2f%% (%.1f s)\n",
                  report.best_epoch + 1, 100.0 * report.test_accuracy, report.wall_seconds);
    out << line;
    return out.str();
}

} // namespace affcorr
