#include "casegraph/numerics/random.hpp"

#include "casegraph/error.hpp"

namespace casegraph::numerics {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return splitmix64(splitmix64(root) ^ h);
}

std::vector<double> dropout_mask(Rng& rng, std::size_t n, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::Config, "dropout rate must lie in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  return mask;
}

}  // namespace casegraph::numerics
