#include "dan/rl/gridnav_task.hpp"

#include <stdexcept>

namespace dan::rl {

GridNavTask::GridNavTask(nets::ModelConfig model, env::EnvConfig env, env::Difficulty difficulty,
                         std::vector<env::Instruction> instructions)
    : agent_(std::move(model)), env_(env), difficulty_(difficulty), instructions_(std::move(instructions)) {
  if (instructions_.empty()) throw std::invalid_argument("GridNavTask needs at least one instruction");
}

void GridNavTask::start_episode(Rng& rng) {
  const env::Instruction& ins = instructions_[uniform_index(rng, instructions_.size())];
  env_.reset(rng(), difficulty_, ins);
  agent_.reset(ins.tokens);
}

void GridNavTask::begin_segment(const BoundParams& params) { agent_.begin_segment(params); }

PolicyStep GridNavTask::forward(bool commit) {
  const nets::StepVars v = agent_.step(env_.observation().image, commit);
  return {v.logits, v.probs, v.value};
}

Transition GridNavTask::act(int action) {
  const env::Observation& obs = env_.step(env::action_from_index(action));
  return {obs.reward, obs.done, env_.state().outcome == env::Outcome::correct};
}

void GridNavTask::end_segment() { agent_.end_segment(); }

}  // namespace dan::rl
