#pragma once

// Explicit and implicit sketches of gradients and Hessian-vector products.
//
//   explicit  grad: Phi g(theta0)            hvp: Phi H(theta0) Phi^T v
//   implicit  differentiate w -> L(theta0 + Phi^T w) at w = 0
//
// The two are equal as linear algebra. The implicit path goes through the
// reparameterized point and pushes tangents through Phi^T and cotangents back
// through Phi, the way an autodiff framework would.

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "kronsketch/oracle.hpp"
#include "kronsketch/sketch.hpp"

namespace kronsketch {

enum class SketchMode { explicit_mode, implicit_mode };

std::string_view to_string(SketchMode m);
SketchMode parse_sketch_mode(std::string_view name);

std::vector<double> explicit_grad_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                         std::span<const double> theta0, std::size_t batch = kFullBatch);
std::vector<double> implicit_grad_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                         std::span<const double> theta0, std::size_t batch = kFullBatch);
std::vector<double> explicit_hvp_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                        std::span<const double> theta0, std::span<const double> v,
                                        std::size_t batch = kFullBatch);
std::vector<double> implicit_hvp_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                        std::span<const double> theta0, std::span<const double> v,
                                        std::size_t batch = kFullBatch);

/// Gradient of w -> L(theta0 + Phi^T w) at an arbitrary w; the implicit
/// gradient sketch is the case w = 0.
std::vector<double> reparameterized_gradient(const Sketcher& sketcher, const ModelOracle& oracle,
                                             std::span<const double> theta0, std::span<const double> w,
                                             std::size_t batch = kFullBatch);

/// The D x D map v -> Phi H(theta0) Phi^T v.
class SketchedOperator {
 public:
  SketchedOperator(Sketcher sketcher, std::shared_ptr<const ModelOracle> oracle, std::vector<double> theta0,
                   std::size_t batch = kFullBatch, SketchMode mode = SketchMode::explicit_mode);

  std::size_t dim() const { return sketcher_.target_dim(); }
  SketchMode mode() const { return mode_; }
  const Sketcher& sketcher() const { return sketcher_; }
  const ModelOracle& oracle() const { return *oracle_; }
  std::span<const double> theta0() const { return theta0_; }
  std::size_t batch() const { return batch_; }

  std::vector<double> apply(std::span<const double> v) const;

 private:
  Sketcher sketcher_;
  std::shared_ptr<const ModelOracle> oracle_;
  std::vector<double> theta0_;
  std::size_t batch_;
  SketchMode mode_;
};

/// Throws InvalidArgument for non-finite or wrongly sized v and NumericError
/// (iteration 0) when the oracle produces a non-finite result.
std::vector<double> apply_sketched_operator(const SketchedOperator& op, std::span<const double> v);

/// Contiguous coordinate block [begin, end) used to model a layer.
using CoordinateBlock = std::pair<std::size_t, std::size_t>;

/// g with every coordinate outside the block set to zero.
std::vector<double> mask_to_block(std::span<const double> g, CoordinateBlock block);

}  // namespace kronsketch
