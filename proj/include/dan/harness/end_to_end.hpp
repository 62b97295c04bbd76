#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dan/gradcheck.hpp"
#include "dan/nets/model.hpp"

namespace dan::harness {

// A reduced model geometry that keeps finite differences cheap.
nets::ModelConfig tiny_model(nets::AttentionSource source, nets::Application application, bool policy_lstm);

// Runs the agent for a few steps on random images with a fixed action
// sequence and compares reverse-mode parameter gradients of
// sum_t (w_t . log_softmax(logits_t) + u_t * value_t) against central
// differences on up to `entries_per_tensor` entries of every parameter.
gradcheck::OpReport check_model(const nets::ModelConfig& config, std::uint64_t seed, std::size_t steps = 3,
                                std::size_t entries_per_tensor = 6, double tolerance = gradcheck::kEndToEndTolerance);

// Every attention source with conv1d and hadamard_fc, plus concat and the
// recurrent policy core.
std::vector<gradcheck::OpReport> check_all_models(std::uint64_t seed);

}  // namespace dan::harness
