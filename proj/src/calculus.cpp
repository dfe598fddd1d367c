#include "kronsketch/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kronsketch/errors.hpp"

namespace kronsketch {

using detail::require;

std::string_view to_string(SketchMode m) { return m == SketchMode::explicit_mode ? "explicit" : "implicit"; }

SketchMode parse_sketch_mode(std::string_view name) {
  if (name == "explicit") return SketchMode::explicit_mode;
  if (name == "implicit") return SketchMode::implicit_mode;
  throw InvalidArgument("unknown sketch mode '" + std::string(name) + "'");
}

namespace {

void check_dims(const Sketcher& sketcher, const ModelOracle& oracle, std::span<const double> theta0) {
  require(sketcher.input_dim() == oracle.dim(), "sketch dimension " + std::to_string(sketcher.input_dim()) +
                                                    " != oracle dimension " + std::to_string(oracle.dim()));
  require(theta0.size() == oracle.dim(), "theta0 has length " + std::to_string(theta0.size()) + ", expected " +
                                             std::to_string(oracle.dim()));
}

void check_sketch_vector(const Sketcher& sketcher, std::span<const double> v) {
  require(v.size() == sketcher.target_dim(), "sketched vector has length " + std::to_string(v.size()) +
                                                 ", expected " + std::to_string(sketcher.target_dim()));
}

// Oracle outputs feed forward(), which rejects non-finite input as a usage
// error; report them as numeric failures instead.
std::vector<double> finite(std::vector<double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " returned a non-finite value", 0);
  return v;
}

// theta0 + Phi^T w
std::vector<double> reparameterize(const Sketcher& sketcher, std::span<const double> theta0,
                                   std::span<const double> w) {
  auto theta = sketcher.transpose<double>(w);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += theta0[i];
  return theta;
}

}  // namespace

std::vector<double> explicit_grad_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                         std::span<const double> theta0, std::size_t batch) {
  check_dims(sketcher, oracle, theta0);
  return sketcher.forward<double>(finite(oracle.gradient(theta0, batch), "oracle gradient"));
}

std::vector<double> reparameterized_gradient(const Sketcher& sketcher, const ModelOracle& oracle,
                                             std::span<const double> theta0, std::span<const double> w,
                                             std::size_t batch) {
  check_dims(sketcher, oracle, theta0);
  check_sketch_vector(sketcher, w);
  const auto theta = reparameterize(sketcher, theta0, w);
  // Pull the cotangent back through w -> Phi^T w.
  return sketcher.forward<double>(finite(oracle.gradient(theta, batch), "oracle gradient"));
}

std::vector<double> implicit_grad_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                         std::span<const double> theta0, std::size_t batch) {
  const std::vector<double> zero(sketcher.target_dim(), 0.0);
  return reparameterized_gradient(sketcher, oracle, theta0, zero, batch);
}

std::vector<double> explicit_hvp_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                        std::span<const double> theta0, std::span<const double> v,
                                        std::size_t batch) {
  check_dims(sketcher, oracle, theta0);
  check_sketch_vector(sketcher, v);
  const auto u = sketcher.transpose<double>(v);
  return sketcher.forward<double>(finite(oracle.hvp(theta0, u, batch), "oracle hvp"));
}

std::vector<double> implicit_hvp_sketch(const Sketcher& sketcher, const ModelOracle& oracle,
                                        std::span<const double> theta0, std::span<const double> v,
                                        std::size_t batch) {
  check_dims(sketcher, oracle, theta0);
  check_sketch_vector(sketcher, v);
  // Forward-over-reverse at w = 0: the tangent v enters through Phi^T, the
  // Hessian acts at the reparameterized point, the result leaves through Phi.
  const std::vector<double> zero(sketcher.target_dim(), 0.0);
  const auto theta = reparameterize(sketcher, theta0, zero);
  const auto tangent = sketcher.transpose<double>(v);
  return sketcher.forward<double>(finite(oracle.hvp(theta, tangent, batch), "oracle hvp"));
}

SketchedOperator::SketchedOperator(Sketcher sketcher, std::shared_ptr<const ModelOracle> oracle,
                                   std::vector<double> theta0, std::size_t batch, SketchMode mode)
    : sketcher_(std::move(sketcher)), oracle_(std::move(oracle)), theta0_(std::move(theta0)), batch_(batch),
      mode_(mode) {
  require(oracle_ != nullptr, "SketchedOperator: null oracle");
  check_dims(sketcher_, *oracle_, theta0_);
}

std::vector<double> SketchedOperator::apply(std::span<const double> v) const {
  return mode_ == SketchMode::explicit_mode ? explicit_hvp_sketch(sketcher_, *oracle_, theta0_, v, batch_)
                                            : implicit_hvp_sketch(sketcher_, *oracle_, theta0_, v, batch_);
}

std::vector<double> apply_sketched_operator(const SketchedOperator& op, std::span<const double> v) {
  require(v.size() == op.dim(), "apply_sketched_operator: length mismatch");
  for (double x : v) require(std::isfinite(x), "apply_sketched_operator: non-finite input");
  auto out = op.apply(v);
  for (double x : out)
    if (!std::isfinite(x)) throw NumericError("sketched operator produced a non-finite value", 0);
  return out;
}

std::vector<double> mask_to_block(std::span<const double> g, CoordinateBlock block) {
  require(block.first < block.second && block.second <= g.size(), "mask_to_block: empty or out-of-range block");
  std::vector<double> out(g.size(), 0.0);
  std::copy(g.begin() + static_cast<std::ptrdiff_t>(block.first), g.begin() + static_cast<std::ptrdiff_t>(block.second),
            out.begin() + static_cast<std::ptrdiff_t>(block.first));
  return out;
}

}  // namespace kronsketch
