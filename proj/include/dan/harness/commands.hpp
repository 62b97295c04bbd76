#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dan/env/corpus.hpp"
#include "dan/harness/config.hpp"

namespace dan::harness {

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

// Loads the config and applies --seed (single seed) and --out overrides.
ExperimentConfig resolve(const CommandOptions& options);

// Creates the output directory and writes config.resolved into it.
void prepare_output(const ExperimentConfig& config);

env::Corpus corpus_for(const ExperimentConfig& config);
nets::ModelConfig model_for(const ExperimentConfig& config, const env::Corpus& corpus);

std::filesystem::path checkpoint_path(const ExperimentConfig& config, std::uint64_t seed);
std::filesystem::path train_log_path(const ExperimentConfig& config, std::uint64_t seed);

// Each returns a process exit code and writes progress to `log`.
int cmd_gen_corpus(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_eval(const ExperimentConfig& config, std::ostream& log);
int cmd_visualize(const ExperimentConfig& config, std::ostream& log);
int cmd_gradcheck(std::uint64_t seed, std::ostream& log, std::size_t cases_per_op = 100);

struct AblationCell {
  nets::AttentionSource source;
  env::Difficulty difficulty;
  EvalMode mode;
};

// Attention source {current_frame, lstm_output, lstm_cellstate} x
// difficulty x evaluation mode.
std::vector<AblationCell> ablation_matrix();

}  // namespace dan::harness
