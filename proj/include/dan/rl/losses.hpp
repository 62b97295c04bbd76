#pragma once

#include <vector>

#include "dan/autodiff.hpp"

namespace dan::rl {

struct RolloutStep {
  Var logits;  // policy logits for the observed state
  int action = 0;
  Var value;   // scalar V(s_t)
  double reward = 0.0;
  bool done = false;
};

// At most n_steps records; cleared after every update.
using RolloutBuffer = std::vector<RolloutStep>;

// R_t = r_t + gamma * R_{t+1}, with R_{T} = bootstrap_value and the
// recursion cut after any step flagged done.
std::vector<double> compute_returns(const std::vector<double>& rewards, const std::vector<bool>& dones,
                                    double bootstrap_value, double gamma);
std::vector<double> compute_returns(const RolloutBuffer& buffer, double bootstrap_value, double gamma);

struct LossCoefficients {
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct Losses {
  Var policy_loss;  // -sum log pi(a_t|s_t) * A_t, A_t held constant
  Var value_loss;   // sum (R_t - V(s_t))^2
  Var entropy;      // sum H(pi(.|s_t))
  Var total;        // policy + value_coef * value - entropy_coef * entropy
};

Losses compute_losses(const RolloutBuffer& buffer, const std::vector<double>& returns, const LossCoefficients& coefs);

// Shannon entropy (nats) of a probability vector.
double entropy_of(const std::vector<double>& probs);

}  // namespace dan::rl
