#pragma once

// Seeded random linear maps R^N -> R^D with exact transposes.
//
//   dense  y = G x / sqrt(D)                    G: D x N Gaussian
//   fjl    y = sqrt(N/D) G_s P B x              G_s sparse Gaussian
//   ffd    y = sum_b B_b H Pi_b^T G_b H x_b     transpose of the Fastfood feature map
//   affd   y = R_D sqrt(N/D) P2 G P1 B x        P1 row-permuted, P2 col-permuted
//   afjl   y = R_D sqrt(N/D) G P1 B x
//   qk     y = R_D sqrt(N/D) Q x                Q a Kronecker product of Haar factors
//
// P denotes the preconditioner: a Kronecker product of (permuted) Hadamard
// factors, the real orthogonal Fourier map, or a Kronecker product of Haar
// factors (in which case B is dropped). N is zero-padded to a power of two
// for every algorithm but dense; sqrt(N/D) uses the padded N.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kronsketch/kron.hpp"

namespace kronsketch {

enum class Algorithm { dense, fjl, ffd, affd, afjl, qk };
enum class Preconditioner { hadamard, fft, kron_orthogonal };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::dense, Algorithm::fjl,  Algorithm::ffd,
                                               Algorithm::affd,  Algorithm::afjl, Algorithm::qk};

std::string_view to_string(Algorithm a);
std::string_view to_string(Preconditioner p);
Algorithm parse_algorithm(std::string_view name);
Preconditioner parse_preconditioner(std::string_view name);

struct SketchSpec {
  Algorithm algorithm = Algorithm::affd;
  std::size_t n = 0;
  std::size_t d = 0;
  Preconditioner preconditioner = Preconditioner::hadamard;
  std::uint64_t seed = 0;
  /// FJL sparsity parameter: about D * ln(m)^2 non-zeros in G_s.
  std::size_t m = 4096;
  std::size_t max_block = kDefaultMaxBlock;

  friend bool operator==(const SketchSpec&, const SketchSpec&) = default;
};

/// Canonical JSON object {algorithm, n, d, preconditioner, seed, m}; max_block
/// is added only when it differs from the default.
nlohmann::json spec_to_json(const SketchSpec& spec);
SketchSpec spec_from_json(const nlohmann::json& j);

/// Orthogonal N x N mixing transform used as a preconditioner.
struct OrthogonalTransform {
  std::vector<KronFactor> factors;                       // hadamard / kron_orthogonal
  std::shared_ptr<const FourierPreconditioner> fourier;  // fft

  template <typename T>
  std::vector<T> apply(std::span<const T> x, bool transpose) const;
};

struct FfdBlock {
  std::vector<double> signs;
  std::vector<std::uint32_t> permutation;  // (Pi u)_i = u_{permutation[i]}
  std::vector<double> gaussian;
};

/// Row-compressed sparse D x N matrix.
struct SparseRows {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> cols;
  std::vector<double> values;
};

/// Everything sampled at construction. Fields not used by an algorithm stay empty.
struct SketchComponents {
  std::size_t padded_dim = 0;
  double sigma = 1.0;
  std::vector<double> signs;
  std::vector<double> gaussian;
  OrthogonalTransform pre;
  OrthogonalTransform post;
  std::vector<double> dense;  // D x N row-major, already divided by sqrt(D)
  SparseRows sparse;
  std::vector<FfdBlock> ffd_blocks;
  std::shared_ptr<const FourierPreconditioner> ffd_fourier;
  std::vector<KronFactor> qk_factors;  // square; the first D outputs are kept
  KronShape qk_shape;                  // row-restricted view of qk_factors
};

/// Immutable, shareable sketch. Copies share the sampled components.
class Sketcher {
 public:
  explicit Sketcher(const SketchSpec& spec);

  const SketchSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.n; }
  std::size_t target_dim() const { return spec_.d; }
  const SketchComponents& components() const { return *components_; }

  template <typename T>
  std::vector<T> forward(std::span<const T> x) const;
  template <typename T>
  std::vector<T> transpose(std::span<const T> v) const;

  std::vector<double> forward(const std::vector<double>& x) const {
    return forward<double>(std::span<const double>(x));
  }
  std::vector<double> transpose(const std::vector<double>& v) const {
    return transpose<double>(std::span<const double>(v));
  }

 private:
  struct Mirrors;

  SketchSpec spec_;
  std::shared_ptr<const SketchComponents> components_;
  std::shared_ptr<const Mirrors> mirrors_;
};

inline Sketcher build_sketcher(const SketchSpec& spec) { return Sketcher(spec); }

/// |‖forward(x)‖ − 1| for a unit vector x.
double jl_distortion_trial(const Sketcher& sketcher, std::span<const double> x);

/// Unit vectors with `nonzeros` standard Gaussian entries at uniformly random
/// distinct positions, drawn from (seed, test_vectors).
std::vector<std::vector<double>> sparse_unit_vectors(std::size_t n, std::size_t count, std::size_t nonzeros,
                                                     std::uint64_t seed);

/// Fraction of unit inputs with |‖forward(x)‖ − 1| ≥ eps.
double jl_failure_rate(const Sketcher& sketcher, std::span<const std::vector<double>> unit_vectors, double eps);

/// Unit vector whose first D-block is the first column of the orthonormal
/// H_D and which vanishes elsewhere. FFD sends it to a vector of norm |g|
/// for a single standard Gaussian g, so its sketched norm cannot concentrate.
std::vector<double> ffd_adversarial_input(std::size_t n, std::size_t d);

}  // namespace kronsketch
