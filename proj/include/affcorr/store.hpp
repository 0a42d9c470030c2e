#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace affcorr {

// Flat id -> float-vector container, used for both 193-d music features and
// D_img image embeddings. On disk: magic "AFCF", version u32, count u64,
// dim u32, then per record a u16 id length, the id bytes, and dim f32 values.
// Everything little-endian. Records keep insertion order, so writers that
// insert deterministically produce byte-identical files.
class VectorStore {
  public:
    VectorStore() = default;
    explicit VectorStore(std::uint32_t dim) : dim_(dim) {}

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool contains(const std::string &id) const { return index_.contains(id); }

    const std::string &id(std::size_t i) const { return ids_[i]; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    // Throws DataError when the id is absent.
    std::span<const float> at(const std::string &id) const;

    // Throws ShapeError on a dimension mismatch and InvalidInput on a
    // duplicate or oversized id.
    void add(std::string id, std::span<const float> values);

    void save(const std::filesystem::path &path) const;
    static VectorStore load(const std::filesystem::path &path);

  private:
    std::uint32_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace affcorr
