#include "affcorr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "affcorr/errors.hpp"

namespace affcorr {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ofstream &out, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    }
    out.write(reinterpret_cast<char *>(b), sizeof(T));
}

template <typename T>
T get_le(std::ifstream &in, const char *what) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(b), sizeof(T))) {
        throw FormatError(std::string("checkpoint: truncated reading ") + what);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

void put_dims(std::ofstream &out, const std::vector<std::size_t> &dims) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
}

std::vector<std::size_t> get_dims(std::ifstream &in, const char *what) {
    const auto count = get_le<std::uint32_t>(in, what);
    if (count == 0 || count > 64) {
        throw FormatError(std::string("checkpoint: implausible layer count in ") + what);
    }
    std::vector<std::size_t> dims(count);
    for (auto &d : dims) {
        d = get_le<std::uint32_t>(in, what);
    }
    return dims;
}

std::string describe(const AcpConfig &cfg) {
    std::ostringstream os;
    os << "image " << cfg.image_input_dim;
    for (std::size_t d : cfg.image_dims) {
        os << "->" << d;
    }
    os << ", music " << AcpConfig::kMusicInputDim;
    for (std::size_t d : cfg.music_dims) {
        os << "->" << d;
    }
    os << ", fusion " << cfg.fusion_input_dim();
    for (std::size_t d : cfg.fusion_dims) {
        os << "->" << d;
    }
    return os.str();
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, AcpModel<float> &model,
                     std::uint64_t seed, std::uint32_t epoch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("checkpoint: cannot open for writing: " + path.string());
    }
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);

    const AcpConfig &cfg = model.config();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.image_input_dim));
    put_dims(out, cfg.image_dims);
    put_dims(out, cfg.music_dims);
    put_dims(out, cfg.fusion_dims);
    put_le<std::uint64_t>(out, seed);
    put_le<std::uint32_t>(out, epoch);

    for (const auto view : model.parameter_views()) {
        for (float v : view) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_le<std::uint32_t>(out, bits);
        }
    }
    if (!out) {
        throw FormatError("checkpoint: write failed: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path &path,
                           const std::optional<AcpConfig> &expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("checkpoint: cannot open: " + path.string());
    }
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("checkpoint: bad magic in " + path.string());
    }
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }

    AcpConfig cfg;
    cfg.image_input_dim = get_le<std::uint32_t>(in, "image input dim");
    cfg.image_dims = get_dims(in, "image dims");
    cfg.music_dims = get_dims(in, "music dims");
    cfg.fusion_dims = get_dims(in, "fusion dims");
    cfg.validate();

    if (expected && !(*expected == cfg)) {
        throw FormatError("checkpoint: architecture mismatch: file has [" + describe(cfg) +
                          "], caller expects [" + describe(*expected) + "]");
    }

    Checkpoint ckpt{AcpModel<float>(cfg), 0, 0};
    ckpt.seed = get_le<std::uint64_t>(in, "seed");
    ckpt.epoch = get_le<std::uint32_t>(in, "epoch");

    for (auto view : ckpt.model.parameter_views()) {
        for (float &v : view) {
            const auto bits = get_le<std::uint32_t>(in, "parameters");
            std::memcpy(&v, &bits, 4);
        }
    }
    in.peek();
    if (!in.eof()) {
        throw FormatError("checkpoint: trailing bytes in " + path.string());
    }
    return ckpt;
}

} // namespace affcorr
