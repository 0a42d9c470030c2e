#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "affcorr/audio.hpp"
#include "affcorr/errors.hpp"
#include "oracle.hpp"

using namespace affcorr;

namespace {

std::filesystem::path temp_file(const char *name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("resample at the source rate is the identity") {
    RawAudio raw;
    raw.channels = 1;
    raw.sample_rate = 22050;
    raw.samples = {0.1, -0.2, 0.3, 0.0};
    const AudioClip clip = resample_mono(raw, 22050, "x");
    CHECK(clip.samples == raw.samples);
    CHECK(clip.sample_rate == 22050);
    CHECK(clip.id == "x");
}

TEST_CASE("opposite stereo channels cancel to silence") {
    RawAudio raw;
    raw.channels = 2;
    raw.sample_rate = 44100;
    for (int i = 0; i < 1000; ++i) {
        const double s = std::sin(0.01 * i);
        raw.samples.push_back(s);
        raw.samples.push_back(-s);
    }
    const AudioClip clip = resample_mono(raw, 22050);
    for (double s : clip.samples) {
        CHECK(s == 0.0);
    }
}

TEST_CASE("downsampling a sine keeps its dominant frequency") {
    RawAudio raw;
    raw.channels = 1;
    raw.sample_rate = 44100;
    raw.samples.resize(44100);
    for (std::size_t i = 0; i < raw.samples.size(); ++i) {
        raw.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * i / 44100.0);
    }
    const AudioClip clip = resample_mono(raw, 22050);
    CHECK(clip.samples.size() == 22050);
    CHECK(std::abs(clip.duration_s() - 1.0) < 1.0 / 22050.0);

    const oracle::Spectro sp = oracle::spectrogram(clip.samples, 22050);
    std::size_t best = 0;
    for (std::size_t k = 1; k < sp.bins; ++k) {
        if (sp.frame(0)[k] > sp.frame(0)[best]) {
            best = k;
        }
    }
    CHECK(std::abs(sp.bin_hz(best) - 440.0) < 22050.0 / 2048.0);
}

TEST_CASE("resample rejects empty input") {
    RawAudio raw;
    raw.channels = 1;
    raw.sample_rate = 22050;
    CHECK_THROWS_AS(resample_mono(raw, 22050), InvalidInput);
}

TEST_CASE("wav round-trip is quantization-exact") {
    const auto path = temp_file("affcorr_test_roundtrip.wav");
    std::vector<double> samples(4096);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = 0.8 * std::sin(0.05 * static_cast<double>(i));
    }
    write_wav_mono16(path, samples, 22050);

    const RawAudio raw = read_wav(path);
    CHECK(raw.channels == 1);
    CHECK(raw.sample_rate == 22050);
    REQUIRE(raw.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(std::abs(raw.samples[i] - samples[i]) <= 1.0 / 32768.0);
    }
    std::filesystem::remove(path);
}

TEST_CASE("wav reader rejects non-wav bytes") {
    const auto path = temp_file("affcorr_test_bogus.wav");
    std::ofstream(path, std::ios::binary) << "definitely not RIFF data";
    CHECK_THROWS_AS(read_wav(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("wav reader rejects missing files and truncated data") {
    CHECK_THROWS_AS(read_wav("/nonexistent/affcorr.wav"), FormatError);

    const auto path = temp_file("affcorr_test_truncated.wav");
    std::vector<double> samples(64, 0.25);
    write_wav_mono16(path, samples, 22050);
    std::filesystem::resize_file(path, 60); // cut into the data chunk
    CHECK_THROWS_AS(read_wav(path), FormatError);
    std::filesystem::remove(path);
}
