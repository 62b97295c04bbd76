#include "dan/harness/evaluate.hpp"

#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "dan/nets/agent.hpp"
#include "dan/random.hpp"
#include "dan/rl/trainer.hpp"

namespace dan::harness {

EvalReport evaluate(const EvalSetup& setup, const ParamStore& params, const env::Corpus& corpus,
                    std::vector<EpisodeTrace>* traces) {
  const auto& split = setup.mode == EvalMode::multitask ? corpus.train : corpus.test;
  if (split.empty()) throw std::invalid_argument("evaluation split is empty");
  EvalReport report;
  report.mode = setup.mode;
  report.difficulty = setup.difficulty;
  report.episodes = setup.episodes;
  std::map<std::string, std::size_t> index;
  for (const auto& ins : split) {
    index[ins.text()] = report.per_instruction.size();
    report.per_instruction.push_back({ins.text(), 0, 0});
  }

  Rng pick(mix_seed(setup.seed, 0));
  nets::Agent agent(setup.model);
  env::Environment environment(setup.env);
  double reward_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t e = 0; e < setup.episodes; ++e) {
    const env::Instruction& ins = split[uniform_index(pick, split.size())];
    if (setup.mode == EvalMode::zeroshot &&
        std::find(corpus.test.begin(), corpus.test.end(), ins) == corpus.test.end()) {
      throw std::logic_error("zeroshot episode drew a non-test instruction");
    }
    environment.reset(mix_seed(setup.seed, e + 1), setup.difficulty, ins);
    agent.reset(ins.tokens);
    EpisodeTrace trace{e, ins.text(), {}, env::Outcome::running};
    double episode_reward = 0.0;
    while (!environment.state().done()) {
      // One short graph per step: evaluation needs no gradients.
      Graph graph;
      BoundParams bound(graph, params);
      agent.begin_segment(bound);
      const nets::StepVars v = agent.step(environment.observation().image);
      const int action = rl::greedy_action(v.probs.value().data());
      agent.end_segment();
      const env::Observation& obs = environment.step(env::action_from_index(action));
      episode_reward += obs.reward;
      if (traces) {
        const auto& s = environment.state();
        trace.steps.push_back({s.step_count, action, obs.reward, obs.done, s.agent_pos, s.agent_heading});
      }
    }
    trace.outcome = environment.state().outcome;
    const bool ok = trace.outcome == env::Outcome::correct;
    auto& stat = report.per_instruction[index.at(ins.text())];
    ++stat.episodes;
    stat.correct += ok ? 1 : 0;
    correct += ok ? 1 : 0;
    reward_sum += episode_reward;
    if (traces) traces->push_back(std::move(trace));
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(setup.episodes);
  report.mean_reward = reward_sum / static_cast<double>(setup.episodes);
  return report;
}

double accuracy_from_traces(const std::vector<EpisodeTrace>& traces) {
  if (traces.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& t : traces) correct += t.outcome == env::Outcome::correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(traces.size());
}

void write_report_json(std::ostream& os, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(report.mode));
  j["difficulty"] = std::string(env::to_string(report.difficulty));
  j["episodes"] = report.episodes;
  j["accuracy"] = report.accuracy;
  j["mean_reward"] = report.mean_reward;
  auto table = nlohmann::ordered_json::array();
  for (const auto& s : report.per_instruction) {
    table.push_back({{"instruction", s.instruction},
                     {"episodes", s.episodes},
                     {"correct", s.correct},
                     {"accuracy", s.accuracy()}});
  }
  j["per_instruction"] = table;
  os << j.dump(2) << '\n';
}

void write_traces_jsonl(std::ostream& os, const std::vector<EpisodeTrace>& traces) {
  for (const auto& tr : traces) {
    for (const auto& s : tr.steps) {
      nlohmann::ordered_json j;
      j["episode"] = tr.episode;
      j["instruction"] = tr.instruction;
      j["t"] = s.t;
      j["action"] = std::string(env::to_string(env::action_from_index(s.action)));
      j["reward"] = s.reward;
      j["done"] = s.done;
      j["agent_pos"] = {s.agent_pos.row, s.agent_pos.col};
      j["heading"] = std::string(env::to_string(s.heading));
      if (s.done) j["outcome"] = std::string(env::to_string(tr.outcome));
      os << j.dump() << '\n';
    }
  }
}

}  // namespace dan::harness
