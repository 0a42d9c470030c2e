#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace affcorr {

// Fixed layout of the 193-dimensional acoustic feature vector:
//   [ 40 mfcc | 12 chroma | 7 contrast | 6 tonnetz | 128 mel ]
struct MusicFeatureVector {
    static constexpr std::size_t kMfccOffset = 0;
    static constexpr std::size_t kChromaOffset = 40;
    static constexpr std::size_t kContrastOffset = 52;
    static constexpr std::size_t kTonnetzOffset = 59;
    static constexpr std::size_t kMelOffset = 65;
    static constexpr std::size_t kDim = 193;

    std::array<double, kDim> values{};

    std::span<const double> mfcc() const { return {values.data() + kMfccOffset, 40}; }
    std::span<const double> chroma() const { return {values.data() + kChromaOffset, 12}; }
    std::span<const double> contrast() const { return {values.data() + kContrastOffset, 7}; }
    std::span<const double> tonnetz() const { return {values.data() + kTonnetzOffset, 6}; }
    std::span<const double> mel() const { return {values.data() + kMelOffset, 128}; }

    // Throws InvalidInput on non-finite entries or negative chroma.
    void validate() const;
};

} // namespace affcorr
