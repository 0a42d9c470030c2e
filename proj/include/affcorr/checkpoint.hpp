#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "affcorr/acpnet.hpp"

namespace affcorr {

struct Checkpoint {
    AcpModel<float> model;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
};

// Binary little-endian container: magic "AFCK", version, the architecture
// descriptor (input dim + per-stack layer widths), seed, epoch, then the
// raw float32 parameter blobs in declaration order.
void save_checkpoint(const std::filesystem::path &path, AcpModel<float> &model,
                     std::uint64_t seed, std::uint32_t epoch);

// Throws FormatError on bad magic/version/truncation. When expected is
// given and the stored descriptor disagrees, throws FormatError naming both
// architectures.
Checkpoint load_checkpoint(const std::filesystem::path &path,
                           const std::optional<AcpConfig> &expected = {});

} // namespace affcorr
