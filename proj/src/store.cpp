#include "affcorr/store.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "affcorr/errors.hpp"

namespace affcorr {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'C', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ofstream &out, const void *p, std::size_t n) {
    out.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ofstream &out, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    }
    put_bytes(out, b, sizeof(T));
}

template <typename T>
T get_le(std::ifstream &in, const char *what) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(b), sizeof(T))) {
        throw FormatError(std::string("vector store: truncated reading ") + what);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

} // namespace

std::span<const float> VectorStore::at(const std::string &id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        throw DataError("vector store: no record with id '" + id + "'");
    }
    return row(it->second);
}

void VectorStore::add(std::string id, std::span<const float> values) {
    if (values.size() != dim_) {
        throw ShapeError("vector store: record has " + std::to_string(values.size()) +
                         " values, store dim is " + std::to_string(dim_));
    }
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw InvalidInput("vector store: id longer than 65535 bytes");
    }
    if (index_.contains(id)) {
        throw InvalidInput("vector store: duplicate id '" + id + "'");
    }
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), values.begin(), values.end());
}

void VectorStore::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("vector store: cannot open for writing: " + path.string());
    }
    put_bytes(out, kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, ids_.size());
    put_le<std::uint32_t>(out, dim_);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ids_[i].size()));
        put_bytes(out, ids_[i].data(), ids_[i].size());
        for (float v : row(i)) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_le<std::uint32_t>(out, bits);
        }
    }
    if (!out) {
        throw FormatError("vector store: write failed: " + path.string());
    }
}

VectorStore VectorStore::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("vector store: cannot open: " + path.string());
    }
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("vector store: bad magic in " + path.string());
    }
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw FormatError("vector store: unsupported version " + std::to_string(version));
    }
    const auto count = get_le<std::uint64_t>(in, "record count");
    const auto dim = get_le<std::uint32_t>(in, "dim");

    VectorStore store(dim);
    std::vector<float> values(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto id_len = get_le<std::uint16_t>(in, "id length");
        std::string id(id_len, '\0');
        if (!in.read(id.data(), id_len)) {
            throw FormatError("vector store: truncated id in " + path.string());
        }
        for (std::uint32_t k = 0; k < dim; ++k) {
            const auto bits = get_le<std::uint32_t>(in, "record values");
            std::memcpy(&values[k], &bits, 4);
        }
        if (store.contains(id)) {
            throw FormatError("vector store: duplicate id '" + id + "' in " + path.string());
        }
        store.add(std::move(id), values);
    }
    return store;
}

} // namespace affcorr
