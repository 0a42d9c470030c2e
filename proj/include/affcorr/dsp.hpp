#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "affcorr/audio.hpp"
#include "affcorr/features.hpp"

namespace affcorr {

// Analysis defaults shared by the feature extractors.
inline constexpr int kWorkingSampleRate = 22050;
inline constexpr std::size_t kStftFrameLen = 2048;
inline constexpr std::size_t kStftHop = 512;
inline constexpr std::size_t kMelBands = 128;
inline constexpr std::size_t kMfccCoeffs = 40;
inline constexpr double kLogFloor = 1e-10;

// Outer windowing of a song: 60 s segments, features on 10 s windows
// hopped by 5 s.
struct SegmentSpec {
    double segment_len_s = 60.0;
    double window_len_s = 10.0;
    double window_hop_s = 5.0;

    // Throws InvalidInput unless window_len <= segment_len, hop > 0, and
    // (segment_len - window_len) is a whole number of hops.
    void validate() const;

    std::size_t windows_per_segment() const {
        return static_cast<std::size_t>((segment_len_s - window_len_s) / window_hop_s) + 1;
    }
};

// Magnitude short-time spectrum; frames x bins, bins = frame_len/2 + 1.
struct Spectrogram {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::size_t frame_len = 0;
    std::size_t hop = 0;
    int sample_rate = 0;
    std::vector<double> mag; // row-major, frames x bins

    std::span<const double> frame(std::size_t f) const { return {mag.data() + f * bins, bins}; }
    double bin_hz(std::size_t k) const {
        return static_cast<double>(k) * sample_rate / static_cast<double>(frame_len);
    }
};

// Hann-windowed STFT magnitudes (symmetric window, one-sided spectrum).
// frames = 1 + floor((len - frame_len) / hop). Throws InvalidInput when the
// clip is shorter than one frame.
Spectrogram stft(const AudioClip &clip, std::size_t frame_len = kStftFrameLen,
                 std::size_t hop = kStftHop);

// HTK-scale triangular mel filterbank spanning 0..sr/2 with unit-peak rows.
struct MelFilterbank {
    std::size_t n_mels = 0;
    std::size_t bins = 0;
    std::vector<double> weights;       // dense, n_mels x bins
    std::vector<std::size_t> start;    // first nonzero bin per row
    std::vector<std::size_t> length;   // nonzero run length per row
    std::vector<double> center_hz;     // peak frequency per row

    double at(std::size_t m, std::size_t k) const { return weights[m * bins + k]; }

    // Mel power of one frame: filterbank . magnitude^2, using the sparse runs.
    void apply_power(std::span<const double> frame_mag, std::span<double> out) const;
};

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t frame_len, int sample_rate);

// Feature families, each returned as a mean over the spectrogram's frames.
std::vector<double> mfcc(const Spectrogram &spec, std::size_t n_mels = kMelBands,
                         std::size_t n_coeffs = kMfccCoeffs);
std::vector<double> chroma(const Spectrogram &spec);             // 12
std::vector<double> spectral_contrast(const Spectrogram &spec);  // 7
std::vector<double> tonal_centroid(const Spectrogram &spec);     // 6
std::vector<double> mel_features(const Spectrogram &spec);       // 128

// Per-frame pitch-class magnitude accumulations (before max-normalization);
// frames x 12, row-major. Shared by chroma and tonal_centroid.
std::vector<double> chroma_frames(const Spectrogram &spec);

// The 6x12 projection of pitch classes onto the fifth / minor-third /
// major-third circles (radii 1, 1, 0.5). Row-major.
std::array<double, 72> tonnetz_projection();

// One 10 s analysis window -> 193 features in the fixed layout.
MusicFeatureVector extract_window_features(const AudioClip &window,
                                           const SegmentSpec &spec = {});

// One 60 s segment -> per-window features (spec.windows_per_segment() of them).
std::vector<MusicFeatureVector> extract_segment_windows(const AudioClip &segment,
                                                        const SegmentSpec &spec = {});

// One 60 s segment -> arithmetic mean of its window features.
MusicFeatureVector extract_segment_features(const AudioClip &segment,
                                            const SegmentSpec &spec = {});

} // namespace affcorr
