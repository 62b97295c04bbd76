#pragma once

// Central finite-difference verification of reverse-mode gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dan/autodiff.hpp"
#include "dan/random.hpp"

namespace dan::gradcheck {

inline constexpr double kStep = 1e-5;
inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kEndToEndTolerance = 1e-3;

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are
// zero up to rounding from being judged relative to noise.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct OpSpec {
  std::string name;
  // Draws a random problem instance (shapes are part of the draw).
  std::function<std::vector<Tensor>(Rng&)> make_inputs;
  std::function<Var(const std::vector<Var>&)> apply;
};

struct OpReport {
  std::string name;
  std::size_t cases = 0;
  std::size_t checked_entries = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Every differentiable operation of the engine, one entry each.
std::vector<OpSpec> standard_ops();

// Runs `cases` random instances. The scalar probed is sum(w * op(x)) for
// fixed random weights w, so every output entry contributes.
OpReport check_op(const OpSpec& spec, std::size_t cases, std::uint64_t seed, double tolerance = kOpTolerance,
                  double step = kStep);

}  // namespace dan::gradcheck
