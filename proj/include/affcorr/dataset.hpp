#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace affcorr {

// Broad emotion classes. Numeric order encodes the tie-break preference:
// greater value = more positive.
enum class EmotionClass : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr std::array<EmotionClass, 3> kAllClasses = {
    EmotionClass::Negative, EmotionClass::Neutral, EmotionClass::Positive};

std::string_view to_string(EmotionClass c);
EmotionClass emotion_from_string(std::string_view name); // throws InvalidInput

// Collapses the 8-label image alphabet onto the three classes:
// awe/amusement/excitement -> Positive, contentment -> Neutral,
// fear/disgust/anger/sadness -> Negative. Unknown labels throw InvalidInput.
EmotionClass regroup_image_label(std::string_view original);

// Case-insensitive substring classification of a user tag. Returns nothing
// for blocklisted tags, tags matching strings from two or more classes
// (e.g. "happysad"), and tags matching nothing.
std::optional<EmotionClass> classify_tag(std::string_view tag,
                                         const std::set<std::string> &blocklist = {});

// Dominant class by count; ties broken towards the more positive class.
// Throws NoLabelError when every count is zero. Indexed by EmotionClass value.
EmotionClass resolve_song_label(const std::array<std::size_t, 3> &counts);

// Tag counts -> song label in one step; nullopt when no tag classifies.
std::optional<EmotionClass> label_from_tags(const std::vector<std::string> &tags,
                                            const std::set<std::string> &blocklist = {});

// Non-overlapping [60k, 60(k+1)) second spans; the trailing remainder is
// dropped. Negative durations throw InvalidInput.
std::vector<std::pair<double, double>> segment_song(double duration_s,
                                                    double segment_len_s = 60.0);

struct ImageRecord {
    std::string id;
    std::string original_label;
    EmotionClass cls = EmotionClass::Neutral;
};

struct SegmentRecord {
    std::string id;
    std::string song_id;
    EmotionClass cls = EmotionClass::Neutral;
};

struct CorrespondencePair {
    std::string image_id;
    std::string segment_id;
    bool label = false;

    bool operator==(const CorrespondencePair &) const = default;
};

struct PairGenConfig {
    double false_ratio = 1.0;
    std::uint64_t seed = 0;
    // Upper bound on sampled true pairs; 0 keeps the whole same-class
    // cross product.
    std::size_t max_true_pairs = 0;
};

// Samples true pairs from the same-class cross product and
// round(false_ratio * count(true)) false pairs from the differing-class
// cross product, both uniformly without replacement. Record order within
// a class follows sorted ids, so output is a pure function of inputs + seed.
std::vector<CorrespondencePair> generate_pairs(const std::vector<ImageRecord> &images,
                                               const std::vector<SegmentRecord> &segments,
                                               const PairGenConfig &cfg = {});

struct DatasetSplit {
    std::vector<CorrespondencePair> train;
    std::vector<CorrespondencePair> val;
    std::vector<CorrespondencePair> test;
    std::uint64_t seed = 0;
};

// Partitions songs and images 70:10:20 (independently, by deterministic
// seeded shuffles of the sorted id lists) and keeps only pairs whose two
// endpoints land in the same partition. segment_song maps segment id ->
// parent song id; a pair referencing an unmapped segment throws DataError.
// Too few songs or images to give every partition at least one member
// throws InvalidInput.
DatasetSplit split_dataset(const std::vector<CorrespondencePair> &pairs,
                           const std::unordered_map<std::string, std::string> &segment_song,
                           std::uint64_t seed);

} // namespace affcorr
