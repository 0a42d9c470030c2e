#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace affcorr {

// Mono audio buffer; amplitudes nominally in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;
    std::string id;

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Decoded audio as it comes off disk: interleaved, any channel count.
struct RawAudio {
    std::vector<double> samples; // interleaved frames
    int channels = 0;
    int sample_rate = 0;

    std::size_t frame_count() const {
        return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
    }
};

// Downmixes to mono (channel mean) and resamples by linear interpolation.
// Output length is round(frames * target_rate / source_rate); identical rates
// return the downmixed samples untouched. No anti-alias filtering is applied,
// so callers feeding wide-band content above target/2 get aliased energy.
AudioClip resample_mono(const RawAudio &raw, int target_rate, std::string id = {});

// 16-bit PCM WAV codec. Reading accepts any channel count at 16 bits/sample;
// other encodings raise FormatError.
RawAudio read_wav(const std::filesystem::path &path);
void write_wav_mono16(const std::filesystem::path &path, std::span<const double> samples,
                      int sample_rate);

} // namespace affcorr
