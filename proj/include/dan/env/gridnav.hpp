#pragma once

// Egocentric grid navigation with instruction-specified goals.
//
// The agent turns in 90 degree steps and moves one cell at a time. Moving
// into or next to (4-neighbourhood) an object ends the episode: +1 for the
// correct object, -0.2 if any touched object is incorrect. After
// kMaxEpisodeSteps steps without contact the episode ends with reward 0.

#include <cstdint>
#include <string_view>
#include <vector>

#include "dan/env/instruction.hpp"
#include "dan/random.hpp"
#include "dan/tensor.hpp"

namespace dan::env {

inline constexpr int kMaxEpisodeSteps = 30;
inline constexpr int kObjectsPerEpisode = 5;
inline constexpr double kCorrectReward = 1.0;
inline constexpr double kIncorrectReward = -0.2;

enum class Heading { north, east, south, west };
enum class Action { turn_left, turn_right, move_forward };
enum class Difficulty { easy, medium, hard };
enum class Outcome { running, correct, incorrect, timeout };

inline constexpr int kActionCount = 3;

std::string_view to_string(Heading h);
std::string_view to_string(Action a);
std::string_view to_string(Difficulty d);
std::string_view to_string(Outcome o);
Difficulty parse_difficulty(std::string_view name);
Action action_from_index(int index);

struct RenderConfig {
  int height = 48;
  int width = 64;
  double object_width = 1.0;   // world units (one cell)
  double short_height = 0.8;   // tall objects are twice as high
  double camera_height = 0.5;
  double background = 0.5;
};

struct EnvConfig {
  int rows = 12;
  int cols = 16;
  int easy_object_rows_ahead = 3;  // easy-mode object line distance
  int easy_object_spacing = 1;     // columns between neighbouring easy-mode objects
  RenderConfig render;
};

struct WorldState {
  int rows = 0;
  int cols = 0;
  Cell agent_pos;
  Heading agent_heading = Heading::north;
  std::vector<ObjectSpec> objects;
  std::vector<std::size_t> correct_ids;
  int step_count = 0;
  Outcome outcome = Outcome::running;
  Rng rng;

  bool done() const { return outcome != Outcome::running; }
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct Observation {
  Tensor image;  // [3 x height x width], values in [0, 1]
  bool done = false;
  double reward = 0.0;
};

struct StepResult {
  WorldState state;
  Observation observation;
};

// Fixed easy-mode pose: two rows above the bottom wall, centre column, facing north.
Cell easy_agent_cell(const EnvConfig& config);
// Cells of the five easy-mode object slots, left to right.
std::vector<Cell> easy_object_slots(const EnvConfig& config);

// Whether a cell lies in the 90 degree view frustum of the given pose.
bool in_view(Cell agent, Heading heading, Cell target);

StepResult reset(const EnvConfig& config, std::uint64_t seed, Difficulty difficulty, const Instruction& instruction);
StepResult step(const EnvConfig& config, const WorldState& state, Action action);
Observation render(const EnvConfig& config, const WorldState& state);

// Stateful convenience wrapper owning one episode at a time.
class Environment {
 public:
  explicit Environment(EnvConfig config = {}) : config_(config) {}

  const Observation& reset(std::uint64_t seed, Difficulty difficulty, const Instruction& instruction);
  const Observation& step(Action action);

  const WorldState& state() const { return state_; }
  const Observation& observation() const { return observation_; }
  const EnvConfig& config() const { return config_; }

 private:
  EnvConfig config_;
  WorldState state_;
  Observation observation_;
};

}  // namespace dan::env
