#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dan/nets/model.hpp"

namespace dan::nets {

// Per-step graph handles produced by Agent::step.
struct StepVars {
  Var features;
  Var attention;  // invalid for concat fusion
  Var state;
  Var logits;
  Var probs;
  Var value;
};

// Runs the full network over an episode, one graph segment at a time.
// Recurrent state is carried as plain tensors between segments, so
// gradients are truncated at segment boundaries.
class Agent {
 public:
  explicit Agent(ModelConfig config);

  // Starts an episode: stores the instruction and resets recurrent state
  // (attention C = ones, h = zeros; policy core zeros).
  void reset(std::vector<std::string> tokens);

  // Binds a new segment to `params` and encodes the instruction on it.
  void begin_segment(const BoundParams& params);

  // Forward pass for one observation. With commit=false the recurrent
  // state is left as it was (used for bootstrap values).
  StepVars step(const Tensor& image, bool commit = true);

  // Detaches the recurrent state from the current graph.
  void end_segment();

  const ModelConfig& config() const { return config_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Attention vector C (or h) as currently carried.
  const Tensor& attention_c() const { return attn_c_; }
  const Tensor& attention_h() const { return attn_h_; }

 private:
  ModelConfig config_;
  std::vector<std::string> tokens_;
  Tensor attn_h_, attn_c_, pol_h_, pol_c_;

  const BoundParams* params_ = nullptr;
  Var x_l_;
  std::optional<AttentionState> attn_;
  std::optional<PolicyState> pol_;
};

}  // namespace dan::nets
