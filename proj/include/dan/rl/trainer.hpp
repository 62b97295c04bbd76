#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

#include "dan/params.hpp"
#include "dan/random.hpp"
#include "dan/rl/losses.hpp"
#include "dan/rl/shared_model.hpp"

namespace dan::rl {

enum class Mode { async, sync };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct TrainerConfig {
  double gamma = 0.99;
  std::size_t n_steps = 20;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double grad_clip_norm = 40.0;
  double learning_rate = 1e-3;
  std::size_t workers = 1;
  Mode mode = Mode::sync;
  std::uint64_t max_episodes = 0;
  std::uint64_t max_frames = 0;  // 0: no frame limit
  std::uint64_t log_every = 100;
  std::uint64_t checkpoint_every = 0;  // 0: none

  void validate() const;
};

struct PolicyStep {
  Var logits;
  Var probs;
  Var value;
};

struct Transition {
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// One worker's view of an environment plus the model that acts in it.
class Task {
 public:
  virtual ~Task() = default;
  virtual void start_episode(Rng& rng) = 0;
  virtual void begin_segment(const BoundParams& params) = 0;
  // Forward pass on the current observation; commit=false must leave any
  // recurrent state untouched.
  virtual PolicyStep forward(bool commit) = 0;
  virtual Transition act(int action) = 0;
  virtual void end_segment() = 0;
};

using TaskFactory = std::function<std::unique_ptr<Task>(std::size_t worker)>;

struct LogRow {
  std::uint64_t episodes = 0;
  std::uint64_t frames = 0;
  double mean_reward = 0.0;
  double accuracy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainCallbacks {
  std::function<void(const LogRow&)> on_row;
  std::function<void(std::uint64_t episodes, const ParamStore&)> on_checkpoint;
};

struct TrainResult {
  std::vector<LogRow> log;
  ParamStore params;
  std::uint64_t episodes = 0;
  std::uint64_t frames = 0;
  std::uint64_t updates = 0;
  std::uint64_t optimizer_steps = 0;
  std::uint64_t skipped_updates = 0;
};

// Samples an index from a probability vector with one uniform draw.
int sample_action(std::span<const double> probs, Rng& rng);
// Highest probability; ties go to the lowest index.
int greedy_action(std::span<const double> probs);

// Runs workers until max_episodes episodes have completed or max_frames
// environment steps were taken. Sync mode runs one worker on the calling
// thread and is bit-reproducible for a given seed.
TrainResult train(const TrainerConfig& config, ParamStore initial, const TaskFactory& make_task, std::uint64_t seed,
                  const TrainCallbacks& callbacks = {});

inline constexpr std::string_view kLogHeader = "episodes,frames,mean_reward,accuracy,policy_loss,value_loss,entropy";

void write_log_csv(std::ostream& os, const std::vector<LogRow>& rows);
std::vector<LogRow> read_log_csv(std::istream& is);
// Row-wise mean over runs, truncated to the shortest run.
std::vector<LogRow> mean_log(const std::vector<std::vector<LogRow>>& runs);

}  // namespace dan::rl
