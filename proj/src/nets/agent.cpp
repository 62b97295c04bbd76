#include "dan/nets/agent.hpp"

#include <stdexcept>

namespace dan::nets {

Agent::Agent(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  reset({});
}

void Agent::reset(std::vector<std::string> tokens) {
  tokens_ = std::move(tokens);
  attn_h_ = Tensor({config_.d()}, 0.0);
  attn_c_ = Tensor({config_.d()}, 1.0);
  pol_h_ = Tensor({config_.policy_hidden}, 0.0);
  pol_c_ = Tensor({config_.policy_hidden}, 0.0);
  params_ = nullptr;
}

void Agent::begin_segment(const BoundParams& params) {
  params_ = &params;
  Graph& g = params.graph();
  x_l_ = encode_instruction(params, config_, tokens_);
  attn_ = AttentionState{g.constant(attn_h_), g.constant(attn_c_)};
  pol_ = PolicyState{g.constant(pol_h_), g.constant(pol_c_)};
}

StepVars Agent::step(const Tensor& image, bool commit) {
  if (!params_) throw std::logic_error("Agent::step outside a segment");
  const BoundParams& p = *params_;
  Graph& g = p.graph();
  StepVars out;
  out.features = encode_image(p, config_, g.constant(image));
  std::optional<AttentionState> next_attn = attn_;
  if (config_.application == Application::concat) {
    out.state = concat_fusion(p, config_, x_l_, out.features);
  } else {
    auto r = compute_attention(config_.attention_source, config_.application, p, config_, x_l_, out.features, attn_);
    out.attention = r.attention;
    out.state = r.state;
    next_attn = r.next;
  }
  auto head = policy_forward(p, config_, out.state, config_.policy_lstm ? pol_ : std::nullopt);
  out.logits = head.logits;
  out.probs = head.probs;
  out.value = head.value;
  if (commit) {
    attn_ = next_attn;
    if (head.next) pol_ = head.next;
  }
  return out;
}

void Agent::end_segment() {
  if (attn_) {
    attn_h_ = attn_->h.value();
    attn_c_ = attn_->c.value();
  }
  if (pol_) {
    pol_h_ = pol_->h.value();
    pol_c_ = pol_->c.value();
  }
  attn_.reset();
  pol_.reset();
  params_ = nullptr;
}

}  // namespace dan::nets
