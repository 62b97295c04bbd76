#pragma once

// Flat `key = value` experiment configuration.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dan/env/gridnav.hpp"
#include "dan/nets/model.hpp"
#include "dan/rl/trainer.hpp"

namespace dan::harness {

enum class EvalMode { multitask, zeroshot };
std::string_view to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view name);

struct ExperimentConfig {
  env::Difficulty difficulty = env::Difficulty::easy;
  nets::AttentionSource attention_source = nets::AttentionSource::lstm_cellstate;
  nets::Application application = nets::Application::conv1d;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t corpus_seed = 7;

  env::EnvConfig env;
  // Model dimensions; the vocabulary comes from the corpus.
  std::size_t d = 16;
  std::size_t embed = 32;
  std::size_t l = 64;
  std::size_t policy_hidden = 64;
  bool policy_lstm = false;
  bool forget_gate_sees_input = true;

  rl::TrainerConfig trainer;

  EvalMode eval_mode = EvalMode::multitask;
  std::size_t eval_episodes = 500;
  std::uint64_t eval_seed = 12345;

  std::string visualize_instruction;  // empty: first test instruction
  std::string checkpoint;             // empty: <out>/seed<k>.ckpt

  std::filesystem::path out = "runs/default";

  // Throws std::invalid_argument on inconsistent values.
  void validate() const;
  // Model configuration for a given vocabulary.
  nets::ModelConfig model(std::vector<std::string> vocab) const;
};

// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
// keys and malformed values throw std::invalid_argument naming the line.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value, one per line, in a fixed order.
void write_config(std::ostream& os, const ExperimentConfig& config);

}  // namespace dan::harness
