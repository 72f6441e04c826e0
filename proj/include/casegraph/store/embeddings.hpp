#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace casegraph::store {

// Row-major embedding table. Stored on disk as 32-bit floats, held as doubles.
//
// File layout (little-endian):
//   "MKGE" | version u32 | rows u32 | dim u32 | flags u32 | rows*dim f32
// flags bit 0 = rows are L2-normalized.
class EmbeddingMatrix {
 public:
  static constexpr std::uint32_t kVersion = 1;

  EmbeddingMatrix() = default;
  // Throws ErrorKind::Validation if l2_normalized is claimed but some row
  // norm falls outside [1 - 1e-4, 1 + 1e-4].
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values,
                  bool l2_normalized = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool l2_normalized() const noexcept { return l2_normalized_; }
  std::span<const double> row(std::size_t r) const;
  const std::vector<double>& values() const noexcept { return values_; }

  // Copy with every row scaled to unit norm. Zero rows are rejected.
  EmbeddingMatrix normalized() const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  bool l2_normalized_ = false;
};

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes);

// Loads and, unless already flagged, L2-normalizes.
EmbeddingMatrix load_normalized_embeddings(const std::filesystem::path& path);

}  // namespace casegraph::store
