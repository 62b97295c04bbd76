#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dan/env/corpus.hpp"
#include "dan/env/gridnav.hpp"
#include "dan/harness/config.hpp"
#include "dan/nets/model.hpp"
#include "dan/params.hpp"

namespace dan::harness {

struct TraceStep {
  int t = 0;
  int action = 0;
  double reward = 0.0;
  bool done = false;
  env::Cell agent_pos;
  env::Heading heading = env::Heading::north;
};

struct EpisodeTrace {
  std::size_t episode = 0;
  std::string instruction;
  std::vector<TraceStep> steps;
  env::Outcome outcome = env::Outcome::running;
};

struct InstructionStat {
  std::string instruction;
  std::size_t episodes = 0;
  std::size_t correct = 0;
  double accuracy() const { return episodes ? static_cast<double>(correct) / static_cast<double>(episodes) : 0.0; }
};

struct EvalReport {
  EvalMode mode = EvalMode::multitask;
  env::Difficulty difficulty = env::Difficulty::easy;
  std::size_t episodes = 0;
  double accuracy = 0.0;
  double mean_reward = 0.0;
  std::vector<InstructionStat> per_instruction;  // split order
};

struct EvalSetup {
  nets::ModelConfig model;
  env::EnvConfig env;
  env::Difficulty difficulty = env::Difficulty::easy;
  EvalMode mode = EvalMode::multitask;
  std::size_t episodes = 500;
  std::uint64_t seed = 0;
};

// Greedy rollouts. Multitask draws instructions from the train split,
// zeroshot only from the test split; every episode uses a fresh map seed.
EvalReport evaluate(const EvalSetup& setup, const ParamStore& params, const env::Corpus& corpus,
                    std::vector<EpisodeTrace>* traces = nullptr);

// Accuracy recounted from traces: episodes whose outcome is correct.
double accuracy_from_traces(const std::vector<EpisodeTrace>& traces);

void write_report_json(std::ostream& os, const EvalReport& report);
// One JSON object per step, tagged with episode and instruction.
void write_traces_jsonl(std::ostream& os, const std::vector<EpisodeTrace>& traces);

}  // namespace dan::harness
