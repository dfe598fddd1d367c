#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kronsketch {

/// Tags for the independent random components of every object. A stream is
/// keyed by (master seed, tag, index) so that two objects built from the same
/// seed draw identical parameters regardless of construction order.
enum class StreamTag : std::uint64_t {
  sign_diagonal = 1,
  gaussian_diagonal = 2,
  hadamard_pre = 3,
  hadamard_post = 4,
  orth_factor = 5,
  dense_matrix = 6,
  sparse_matrix = 7,
  ffd_block = 8,
  start_vector = 9,
  oracle = 10,
  test_vectors = 11,
  pair_sampling = 12,
  chunked_dense = 13,
  preconditioner_factor = 14,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index = 0);

/// Deterministic random stream. Distributions are implemented here rather than
/// taken from <random> so that the values are identical across standard
/// library implementations.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, StreamTag tag, std::uint64_t index = 0)
      : engine_(derive_seed(master, tag, index)) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }
  double normal();
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }
  /// Uniform on {0, ..., bound - 1}; bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Fisher-Yates shuffle of the identity.
  std::vector<std::uint32_t> permutation(std::uint32_t n);
  std::vector<double> normals(std::size_t n);
  std::vector<double> signs(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kronsketch
