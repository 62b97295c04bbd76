#include "dan/rl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dan::rl {

std::vector<double> compute_returns(const std::vector<double>& rewards, const std::vector<bool>& dones,
                                    double bootstrap_value, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("compute_returns: empty rollout");
  if (rewards.size() != dones.size()) throw std::invalid_argument("compute_returns: rewards and done flags differ in length");
  std::vector<double> out(rewards.size());
  double next = bootstrap_value;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    if (dones[t]) next = 0.0;
    next = rewards[t] + gamma * next;
    out[t] = next;
  }
  return out;
}

std::vector<double> compute_returns(const RolloutBuffer& buffer, double bootstrap_value, double gamma) {
  std::vector<double> rewards;
  std::vector<bool> dones;
  for (const auto& s : buffer) {
    rewards.push_back(s.reward);
    dones.push_back(s.done);
  }
  return compute_returns(rewards, dones, bootstrap_value, gamma);
}

Losses compute_losses(const RolloutBuffer& buffer, const std::vector<double>& returns, const LossCoefficients& coefs) {
  if (buffer.empty()) throw std::invalid_argument("compute_losses: empty rollout");
  if (buffer.size() != returns.size()) throw std::invalid_argument("compute_losses: returns do not align with rollout");
  Graph& g = *buffer.front().logits.graph;
  Var policy = g.constant(Tensor::scalar(0.0));
  Var value = policy, entropy = policy;
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    const RolloutStep& s = buffer[t];
    Var logp = log_softmax(s.logits);
    Var probs = softmax(s.logits);
    const double advantage = returns[t] - s.value.value()[0];
    policy = add(policy, scale(pick(logp, static_cast<std::size_t>(s.action)), -advantage));
    value = add(value, square(sub(g.constant(Tensor::scalar(returns[t])), reshape(s.value, {1}))));
    entropy = add(entropy, scale(sum(mul(probs, logp)), -1.0));
  }
  Var total = add(add(policy, scale(value, coefs.value_coef)), scale(entropy, -coefs.entropy_coef));
  return {policy, value, entropy, total};
}

double entropy_of(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace dan::rl
