#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "affcorr/dataset.hpp"
#include "affcorr/dsp.hpp"
#include "affcorr/store.hpp"
#include "affcorr/synthetic.hpp"
#include "affcorr/training.hpp"

namespace affcorr {

struct SongManifestEntry {
    std::string id;
    std::vector<std::string> tags;
    double duration_s = 0.0;
    std::string wav_path;
};

struct ImageManifestEntry {
    std::string id;
    std::string original_label;
    std::size_t embedding_index = 0;
};

// JSON manifests. Malformed JSON or missing fields throw FormatError;
// unknown fields are ignored. Paths inside the manifest are interpreted
// relative to the manifest file by the callers that open them.
std::vector<SongManifestEntry> load_song_manifest(const std::filesystem::path &path);
std::vector<ImageManifestEntry> load_image_manifest(const std::filesystem::path &path);
void save_song_manifest(const std::filesystem::path &path,
                        const std::vector<SongManifestEntry> &songs);
void save_image_manifest(const std::filesystem::path &path,
                         const std::vector<ImageManifestEntry> &images);

// One lowercase tag per line; blank lines and '#' comments skipped.
std::set<std::string> load_blocklist(const std::filesystem::path &path);

// Pair lists as "image_id,segment_id,label" CSV with a header row.
void save_pairs_csv(const std::filesystem::path &path,
                    const std::vector<CorrespondencePair> &pairs);
std::vector<CorrespondencePair> load_pairs_csv(const std::filesystem::path &path);

// "id,class" CSV with a header row, for probe training.
void save_labels_csv(const std::filesystem::path &path,
                     const std::vector<std::pair<std::string, std::string>> &rows);
std::vector<std::pair<std::string, std::string>> load_labels_csv(
    const std::filesystem::path &path);

// All 60 s segments of one song file: ids "<song_id>#<k>" with their
// feature vectors, in segment order. The file is decoded, downmixed and
// resampled to 22050 Hz before feature extraction.
std::vector<std::pair<std::string, MusicFeatureVector>> extract_song_features(
    const std::filesystem::path &wav, const std::string &song_id,
    const SegmentSpec &spec = {});

// Batch driver over (song id, wav path) jobs. Files that fail to decode or
// are shorter than one segment produce a warning string instead of records.
// Records land in the store sorted by id regardless of job order or thread
// count, so reruns are byte-identical. Throws InvalidInput when every job
// failed.
VectorStore extract_features_store(
    const std::vector<std::pair<std::string, std::filesystem::path>> &jobs,
    const SegmentSpec &spec, int threads, std::vector<std::string> &warnings);

// Number of worker threads to use: the AFCORR_THREADS environment variable
// when set (minimum 1), otherwise the hardware concurrency.
int configured_threads();

struct BuildSummary {
    std::size_t songs_total = 0;
    std::size_t songs_labelled = 0;
    std::vector<std::string> unlabelled_song_ids;
    std::array<std::size_t, 3> image_class_counts{};
    std::array<std::size_t, 3> segment_class_counts{};
    std::size_t true_pairs = 0;
    std::size_t false_pairs = 0;
};

struct BuiltDataset {
    std::vector<ImageRecord> images;
    std::vector<SegmentRecord> segments;
    std::unordered_map<std::string, std::string> segment_song;
    DatasetSplit split;
    BuildSummary summary;
};

// Weak labelling + pair generation + the song/image-disjoint split. Songs
// whose tags resolve to no class are dropped (recorded in the summary);
// images with unknown labels throw InvalidInput.
BuiltDataset build_dataset(const std::vector<SongManifestEntry> &songs,
                           const std::vector<ImageManifestEntry> &images,
                           const std::set<std::string> &blocklist, const PairGenConfig &pair_cfg,
                           std::uint64_t split_seed);

// Writes wav/<song>.wav, songs.json, images.json and images.afcf under
// out_dir. Returns the generated dataset so callers can keep working
// in-memory.
SyntheticDataset write_synthetic(const SyntheticSpec &spec,
                                 const std::filesystem::path &out_dir);

// TrainReport serialization: a JSON document and a plain-text table.
std::string report_to_json(const TrainReport &report);
std::string report_to_table(const TrainReport &report);

} // namespace affcorr
