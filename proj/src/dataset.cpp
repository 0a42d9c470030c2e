#include "affcorr/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <span>

#include "affcorr/errors.hpp"
#include "affcorr/rng.hpp"

namespace affcorr {

std::string_view to_string(EmotionClass c) {
    switch (c) {
    case EmotionClass::Negative:
        return "negative";
    case EmotionClass::Neutral:
        return "neutral";
    case EmotionClass::Positive:
        return "positive";
    }
    return "?";
}

EmotionClass emotion_from_string(std::string_view name) {
    for (EmotionClass c : kAllClasses) {
        if (name == to_string(c)) {
            return c;
        }
    }
    throw InvalidInput("unknown emotion class '" + std::string(name) + "'");
}

EmotionClass regroup_image_label(std::string_view original) {
    if (original == "awe" || original == "amusement" || original == "excitement") {
        return EmotionClass::Positive;
    }
    if (original == "contentment") {
        return EmotionClass::Neutral;
    }
    if (original == "fear" || original == "disgust" || original == "anger" ||
        original == "sadness") {
        return EmotionClass::Negative;
    }
    throw InvalidInput("unknown image label '" + std::string(original) + "'");
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

constexpr std::string_view kPositiveStrings[] = {"happy", "joyous", "energetic"};
constexpr std::string_view kNeutralStrings[] = {"soothing", "relax", "calm"};
constexpr std::string_view kNegativeStrings[] = {"sad", "pain"};

bool matches_any(const std::string &tag, std::span<const std::string_view> needles) {
    return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) {
        return tag.find(n) != std::string::npos;
    });
}

} // namespace

std::optional<EmotionClass> classify_tag(std::string_view tag,
                                         const std::set<std::string> &blocklist) {
    const std::string low = lowercase(tag);
    if (blocklist.contains(low)) {
        return std::nullopt;
    }
    int hits = 0;
    std::optional<EmotionClass> cls;
    if (matches_any(low, kPositiveStrings)) {
        ++hits;
        cls = EmotionClass::Positive;
    }
    if (matches_any(low, kNeutralStrings)) {
        ++hits;
        cls = EmotionClass::Neutral;
    }
    if (matches_any(low, kNegativeStrings)) {
        ++hits;
        cls = EmotionClass::Negative;
    }
    return hits == 1 ? cls : std::nullopt;
}

EmotionClass resolve_song_label(const std::array<std::size_t, 3> &counts) {
    if (counts[0] == 0 && counts[1] == 0 && counts[2] == 0) {
        throw NoLabelError("no classifiable tags: all class counts are zero");
    }
    // Scanning from Positive down makes ">" implement the positive tie-break.
    EmotionClass best = EmotionClass::Positive;
    for (EmotionClass c : {EmotionClass::Neutral, EmotionClass::Negative}) {
        if (counts[static_cast<int>(c)] > counts[static_cast<int>(best)]) {
            best = c;
        }
    }
    return best;
}

std::optional<EmotionClass> label_from_tags(const std::vector<std::string> &tags,
                                            const std::set<std::string> &blocklist) {
    std::array<std::size_t, 3> counts{};
    for (const std::string &tag : tags) {
        if (const auto cls = classify_tag(tag, blocklist)) {
            ++counts[static_cast<int>(*cls)];
        }
    }
    if (counts[0] == 0 && counts[1] == 0 && counts[2] == 0) {
        return std::nullopt;
    }
    return resolve_song_label(counts);
}

std::vector<std::pair<double, double>> segment_song(double duration_s, double segment_len_s) {
    if (duration_s < 0.0) {
        throw InvalidInput("segment_song: negative duration");
    }
    if (segment_len_s <= 0.0) {
        throw InvalidInput("segment_song: segment length must be positive");
    }
    const auto count = static_cast<std::size_t>(duration_s / segment_len_s);
    std::vector<std::pair<double, double>> spans;
    spans.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        spans.emplace_back(segment_len_s * static_cast<double>(k),
                           segment_len_s * static_cast<double>(k + 1));
    }
    return spans;
}

namespace {

// Uniform k-subset of [0, n) by Floyd's algorithm; returned sorted.
std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k,
                                                      Rng &rng) {
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = n - k; j < n; ++j) {
        const std::uint64_t t = rng.uniform_int(j + 1);
        chosen.insert(chosen.contains(t) ? j : t);
    }
    return {chosen.begin(), chosen.end()};
}

struct ClassBuckets {
    std::array<std::vector<std::size_t>, 3> by_class;
};

template <typename Rec>
ClassBuckets bucket_by_class(const std::vector<Rec> &records) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
    ClassBuckets buckets;
    for (std::size_t i : order) {
        buckets.by_class[static_cast<int>(records[i].cls)].push_back(i);
    }
    return buckets;
}

} // namespace

std::vector<CorrespondencePair> generate_pairs(const std::vector<ImageRecord> &images,
                                               const std::vector<SegmentRecord> &segments,
                                               const PairGenConfig &cfg) {
    if (images.empty() || segments.empty()) {
        throw InvalidInput("generate_pairs: need at least one image and one segment");
    }
    if (cfg.false_ratio < 0.0) {
        throw InvalidInput("generate_pairs: false_ratio must be non-negative");
    }

    const ClassBuckets img = bucket_by_class(images);
    const ClassBuckets seg = bucket_by_class(segments);

    // Flattened cross products: blocks of (image class, segment class),
    // same-class blocks for true pairs, ordered differing-class blocks for
    // false pairs.
    struct Block {
        int ic, sc;
        std::uint64_t size;
    };
    std::vector<Block> true_blocks, false_blocks;
    std::uint64_t true_total = 0, false_total = 0;
    for (int ic = 0; ic < 3; ++ic) {
        for (int sc = 0; sc < 3; ++sc) {
            const auto size = static_cast<std::uint64_t>(img.by_class[ic].size()) *
                              seg.by_class[sc].size();
            if (ic == sc) {
                true_blocks.push_back({ic, sc, size});
                true_total += size;
            } else {
                false_blocks.push_back({ic, sc, size});
                false_total += size;
            }
        }
    }
    if (true_total == 0) {
        throw InvalidInput("generate_pairs: no same-class (image, segment) combination exists");
    }

    const std::uint64_t want_true =
        cfg.max_true_pairs > 0 ? std::min<std::uint64_t>(cfg.max_true_pairs, true_total)
                               : true_total;
    const auto want_false =
        static_cast<std::uint64_t>(std::llround(cfg.false_ratio * static_cast<double>(want_true)));
    if (want_false > false_total) {
        throw InvalidInput("generate_pairs: need " + std::to_string(want_false) +
                           " false pairs but only " + std::to_string(false_total) +
                           " differing-class combinations exist");
    }

    Rng rng(derive_seed(cfg.seed, "pairs"));
    const auto emit = [&](const std::vector<Block> &blocks, std::uint64_t total,
                          std::uint64_t want, bool label,
                          std::vector<CorrespondencePair> &out) {
        std::vector<std::uint64_t> picks;
        if (want == total) {
            picks.resize(total);
            for (std::uint64_t i = 0; i < total; ++i) {
                picks[i] = i;
            }
        } else {
            picks = sample_without_replacement(total, want, rng);
        }
        for (std::uint64_t flat : picks) {
            std::uint64_t local = flat;
            const Block *block = nullptr;
            for (const Block &b : blocks) {
                if (local < b.size) {
                    block = &b;
                    break;
                }
                local -= b.size;
            }
            const auto &simg = img.by_class[block->ic];
            const auto &sseg = seg.by_class[block->sc];
            const std::size_t ii = static_cast<std::size_t>(local / sseg.size());
            const std::size_t si = static_cast<std::size_t>(local % sseg.size());
            out.push_back({images[simg[ii]].id, segments[sseg[si]].id, label});
        }
    };

    std::vector<CorrespondencePair> pairs;
    pairs.reserve(want_true + want_false);
    emit(true_blocks, true_total, want_true, true, pairs);
    emit(false_blocks, false_total, want_false, false, pairs);
    return pairs;
}

namespace {

// id -> partition index (0 train, 1 val, 2 test) over a 70:10:20 split of
// the shuffled sorted id list.
std::unordered_map<std::string, int> partition_ids(std::vector<std::string> ids,
                                                   std::uint64_t seed, const char *what) {
    std::sort(ids.begin(), ids.end());
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(0.7 * n));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= ids.size()) {
        throw InvalidInput(std::string("split_dataset: too few ") + what + " (" +
                           std::to_string(ids.size()) + ") to fill all three partitions");
    }
    Rng rng(seed);
    rng.shuffle(ids);

    std::unordered_map<std::string, int> part;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        part[ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }
    return part;
}

} // namespace

DatasetSplit split_dataset(const std::vector<CorrespondencePair> &pairs,
                           const std::unordered_map<std::string, std::string> &segment_song,
                           std::uint64_t seed) {
    std::set<std::string> song_set, image_set;
    for (const CorrespondencePair &p : pairs) {
        const auto it = segment_song.find(p.segment_id);
        if (it == segment_song.end()) {
            throw DataError("split_dataset: segment '" + p.segment_id + "' has no parent song");
        }
        song_set.insert(it->second);
        image_set.insert(p.image_id);
    }

    const auto songs = partition_ids({song_set.begin(), song_set.end()},
                                     derive_seed(seed, "split-songs"), "songs");
    const auto images = partition_ids({image_set.begin(), image_set.end()},
                                      derive_seed(seed, "split-images"), "images");

    DatasetSplit split;
    split.seed = seed;
    for (const CorrespondencePair &p : pairs) {
        const int song_part = songs.at(segment_song.at(p.segment_id));
        const int image_part = images.at(p.image_id);
        if (song_part != image_part) {
            continue; // straddles partitions
        }
        (song_part == 0 ? split.train : song_part == 1 ? split.val : split.test).push_back(p);
    }
    return split;
}

} // namespace affcorr
