#pragma once

#include <vector>

#include "dan/env/gridnav.hpp"
#include "dan/nets/agent.hpp"
#include "dan/rl/trainer.hpp"

namespace dan::rl {

// Trains an Agent on GridNav episodes whose instructions are drawn
// uniformly from a fixed list.
class GridNavTask : public Task {
 public:
  GridNavTask(nets::ModelConfig model, env::EnvConfig env, env::Difficulty difficulty,
              std::vector<env::Instruction> instructions);

  void start_episode(Rng& rng) override;
  void begin_segment(const BoundParams& params) override;
  PolicyStep forward(bool commit) override;
  Transition act(int action) override;
  void end_segment() override;

  const env::Environment& environment() const { return env_; }

 private:
  nets::Agent agent_;
  env::Environment env_;
  env::Difficulty difficulty_;
  std::vector<env::Instruction> instructions_;
};

}  // namespace dan::rl
