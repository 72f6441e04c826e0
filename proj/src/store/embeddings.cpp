#include "casegraph/store/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "casegraph/error.hpp"

namespace casegraph::store {

namespace {

constexpr char kMagic[4] = {'M', 'K', 'G', 'E'};
constexpr std::size_t kHeaderBytes = 20;
constexpr double kNormTolerance = 1e-4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values,
                                 bool l2_normalized)
    : rows_(rows), dim_(dim), values_(std::move(values)), l2_normalized_(l2_normalized) {
  if (values_.size() != rows_ * dim_) {
    fail(ErrorKind::Shape, "embedding payload has " + std::to_string(values_.size()) +
                               " values, expected " + std::to_string(rows_ * dim_));
  }
  if (l2_normalized_) {
    for (std::size_t r = 0; r < rows_; ++r) {
      double sq = 0.0;
      for (double v : row(r)) sq += v * v;
      const double norm = std::sqrt(sq);
      if (std::fabs(norm - 1.0) > kNormTolerance) {
        fail(ErrorKind::Validation, "embedding row " + std::to_string(r) +
                                        " is flagged normalized but has norm " +
                                        std::to_string(norm));
      }
    }
  }
}

std::span<const double> EmbeddingMatrix::row(std::size_t r) const {
  if (r >= rows_) {
    fail(ErrorKind::Lookup, "embedding row " + std::to_string(r) + " out of range (rows=" +
                                std::to_string(rows_) + ")");
  }
  return std::span<const double>(values_).subspan(r * dim_, dim_);
}

EmbeddingMatrix EmbeddingMatrix::normalized() const {
  if (l2_normalized_) return *this;
  std::vector<double> out(values_);
  for (std::size_t r = 0; r < rows_; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) sq += out[r * dim_ + c] * out[r * dim_ + c];
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorKind::Data, "embedding row " + std::to_string(r) + " cannot be normalized");
    }
    for (std::size_t c = 0; c < dim_; ++c) out[r * dim_ + c] /= norm;
  }
  return EmbeddingMatrix(rows_, dim_, std::move(out), true);
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& matrix) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + matrix.values().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, EmbeddingMatrix::kVersion);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.dim()));
  put_u32(out, matrix.l2_normalized() ? 1u : 0u);
  for (double v : matrix.values()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) fail(ErrorKind::Format, "embedding file shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorKind::Format, "bad embedding magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != EmbeddingMatrix::kVersion) {
    fail(ErrorKind::Format, "unsupported embedding version " + std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes, 8);
  const std::size_t dim = get_u32(bytes, 12);
  const std::uint32_t flags = get_u32(bytes, 16);
  const std::size_t expected = kHeaderBytes + rows * dim * 4;
  if (bytes.size() != expected) {
    fail(ErrorKind::Format, "embedding header declares " + std::to_string(rows) + "x" +
                                std::to_string(dim) + " but payload has " +
                                std::to_string(bytes.size() - kHeaderBytes) + " bytes");
  }
  std::vector<double> values(rows * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i)));
  }
  return EmbeddingMatrix(rows, dim, std::move(values), (flags & 1u) != 0);
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  const auto bytes = encode_embeddings(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_embeddings(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

EmbeddingMatrix load_normalized_embeddings(const std::filesystem::path& path) {
  return load_embeddings(path).normalized();
}

}  // namespace casegraph::store
