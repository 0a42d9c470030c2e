#include "affcorr/features.hpp"

#include <cmath>

#include "affcorr/errors.hpp"

namespace affcorr {

void MusicFeatureVector::validate() const {
    for (std::size_t i = 0; i < kDim; ++i) {
        if (!std::isfinite(values[i])) {
            throw InvalidInput("feature vector has non-finite entry at index " +
                               std::to_string(i));
        }
    }
    for (double c : chroma()) {
        if (c < 0.0) {
            throw InvalidInput("negative chroma entry in feature vector");
        }
    }
}

} // namespace affcorr
