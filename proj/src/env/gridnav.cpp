#include "dan/env/gridnav.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dan::env {

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::north: return "N";
    case Heading::east: return "E";
    case Heading::south: return "S";
    case Heading::west: return "W";
  }
  throw std::invalid_argument("bad heading");
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::turn_left: return "turn_left";
    case Action::turn_right: return "turn_right";
    case Action::move_forward: return "move_forward";
  }
  throw std::invalid_argument("bad action");
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  throw std::invalid_argument("bad difficulty");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::running: return "running";
    case Outcome::correct: return "correct";
    case Outcome::incorrect: return "incorrect";
    case Outcome::timeout: return "timeout";
  }
  throw std::invalid_argument("bad outcome");
}

Difficulty parse_difficulty(std::string_view name) {
  for (auto d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    if (to_string(d) == name) return d;
  }
  throw std::invalid_argument("unknown difficulty '" + std::string(name) + "'");
}

Action action_from_index(int index) {
  if (index < 0 || index >= kActionCount) throw std::out_of_range("action index " + std::to_string(index));
  return static_cast<Action>(index);
}

namespace {

Cell forward_of(Heading h) {
  switch (h) {
    case Heading::north: return {-1, 0};
    case Heading::east: return {0, 1};
    case Heading::south: return {1, 0};
    case Heading::west: return {0, -1};
  }
  return {0, 0};
}

// Unit vector pointing to the agent's right.
Cell right_of(Heading h) { return forward_of(static_cast<Heading>((static_cast<int>(h) + 1) % 4)); }

// (forward, lateral) coordinates of `target` in the agent frame.
std::pair<int, int> to_agent_frame(Cell agent, Heading heading, Cell target) {
  const Cell rel{target.row - agent.row, target.col - agent.col};
  const Cell f = forward_of(heading), r = right_of(heading);
  return {rel.row * f.row + rel.col * f.col, rel.row * r.row + rel.col * r.col};
}

bool inside(const WorldState& s, Cell c) { return c.row >= 0 && c.row < s.rows && c.col >= 0 && c.col < s.cols; }

std::vector<ObjectSpec> all_kinds() {
  std::vector<ObjectSpec> kinds;
  for (ObjectShape shape : kAllShapes) {
    for (Color color : kAllColors) {
      for (Size size : kAllSizes) kinds.push_back(ObjectSpec{color, shape, size, {}});
    }
  }
  return kinds;
}

template <class T>
const T& pick_one(const std::vector<T>& items, Rng& rng) {
  return items[static_cast<std::size_t>(uniform_index(rng, items.size()))];
}

// Attributes of one correct and four incorrect objects.
std::vector<ObjectSpec> draw_objects(const Predicate& predicate, Rng& rng) {
  const auto kinds = all_kinds();
  std::vector<ObjectSpec> correct_pool, wrong_pool;
  std::vector<ObjectSpec> forced;

  if (const auto* a = std::get_if<AttributePredicate>(&predicate)) {
    for (const auto& k : kinds) (matches(*a, k) ? correct_pool : wrong_pool).push_back(k);
  } else {
    const auto& s = std::get<SuperlativePredicate>(predicate);
    const Size wanted = s.kind == Superlative::tallest ? Size::tall : Size::short_;
    const Size other = wanted == Size::tall ? Size::short_ : Size::tall;
    for (const auto& k : kinds) {
      if (k.shape == s.shape && k.size == wanted) {
        correct_pool.push_back(k);
      } else {
        wrong_pool.push_back(k);
      }
    }
    // One same-shape object of the other size makes the comparison matter.
    forced.push_back(ObjectSpec{pick_one(std::vector<Color>(std::begin(kAllColors), std::end(kAllColors)), rng),
                                s.shape, other, {}});
  }
  if (correct_pool.empty()) throw std::invalid_argument("instruction predicate is unsatisfiable");

  std::vector<ObjectSpec> out{pick_one(correct_pool, rng)};
  for (const auto& f : forced) {
    out.push_back(f);
    std::erase(wrong_pool, f);
  }
  shuffle(wrong_pool, rng);
  for (std::size_t i = 0; out.size() < static_cast<std::size_t>(kObjectsPerEpisode); ++i) {
    if (i >= wrong_pool.size()) throw std::invalid_argument("not enough distractor kinds for instruction");
    out.push_back(wrong_pool[i]);
  }
  return out;
}

// Greedy placement over shuffled candidates, objects pairwise at Manhattan
// distance >= 3 so that no cell touches two of them.
std::vector<Cell> place_spread(std::vector<Cell> candidates, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    shuffle(candidates, rng);
    std::vector<Cell> chosen;
    for (Cell c : candidates) {
      bool ok = std::all_of(chosen.begin(), chosen.end(), [&](Cell o) { return manhattan(o, c) >= 3; });
      if (ok) chosen.push_back(c);
      if (chosen.size() == static_cast<std::size_t>(kObjectsPerEpisode)) return chosen;
    }
  }
  throw std::invalid_argument("grid too small to place 5 non-overlapping objects");
}

void check_grid(const EnvConfig& config) {
  if (config.rows < 8 || config.cols < 10) {
    throw std::invalid_argument("grid " + std::to_string(config.rows) + "x" + std::to_string(config.cols) +
                                " too small to place 5 non-overlapping objects");
  }
  const int ahead = config.easy_object_rows_ahead;
  const int spacing = config.easy_object_spacing;
  if (spacing < 1 || 4 * spacing + 1 > config.cols) {
    throw std::invalid_argument("easy_object_spacing must be in [1, (cols - 1) / 4]");
  }
  if (ahead < std::max(2, 2 * spacing) || ahead > config.rows - 2) {
    throw std::invalid_argument("easy_object_rows_ahead must be in [max(2, 2 * spacing), rows - 2] so the object line is in view");
  }
}

}  // namespace

Cell easy_agent_cell(const EnvConfig& config) { return {config.rows - 2, config.cols / 2}; }

std::vector<Cell> easy_object_slots(const EnvConfig& config) {
  const Cell a = easy_agent_cell(config);
  std::vector<Cell> slots;
  for (int k = -2; k <= 2; ++k) slots.push_back({a.row - config.easy_object_rows_ahead, a.col + config.easy_object_spacing * k});
  return slots;
}

bool in_view(Cell agent, Heading heading, Cell target) {
  auto [z, x] = to_agent_frame(agent, heading, target);
  return z > 0 && std::abs(x) <= z;
}

StepResult reset(const EnvConfig& config, std::uint64_t seed, Difficulty difficulty, const Instruction& instruction) {
  check_grid(config);
  WorldState s;
  s.rows = config.rows;
  s.cols = config.cols;
  s.rng.seed(seed);

  std::vector<ObjectSpec> kinds = draw_objects(instruction.predicate, s.rng);

  std::vector<Cell> cells;
  if (difficulty == Difficulty::hard) {
    s.agent_pos = {static_cast<int>(uniform_index(s.rng, s.rows)), static_cast<int>(uniform_index(s.rng, s.cols))};
    s.agent_heading = static_cast<Heading>(uniform_index(s.rng, 4));
  } else {
    s.agent_pos = easy_agent_cell(config);
    s.agent_heading = Heading::north;
  }
  if (difficulty == Difficulty::easy) {
    cells = easy_object_slots(config);
  } else {
    std::vector<Cell> candidates;
    for (int r = 0; r < s.rows; ++r) {
      for (int c = 0; c < s.cols; ++c) {
        const Cell cell{r, c};
        if (manhattan(cell, s.agent_pos) < 2) continue;
        if (difficulty == Difficulty::medium && !in_view(s.agent_pos, s.agent_heading, cell)) continue;
        candidates.push_back(cell);
      }
    }
    cells = place_spread(std::move(candidates), s.rng);
  }

  // Spawn order is random; cells follow spawn order.
  std::vector<std::size_t> order(kinds.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, s.rng);
  std::vector<ObjectSpec> objects;
  for (std::size_t i = 0; i < order.size(); ++i) {
    ObjectSpec o = kinds[order[i]];
    o.position = cells[i];
    objects.push_back(o);
  }
  s.objects = std::move(objects);
  s.correct_ids = resolve(instruction.predicate, s.objects);
  if (s.correct_ids.size() != 1) throw std::logic_error("spawner produced " + std::to_string(s.correct_ids.size()) + " correct objects");

  Observation obs = render(config, s);
  return {std::move(s), std::move(obs)};
}

StepResult step(const EnvConfig& config, const WorldState& state, Action action) {
  if (state.done()) throw std::logic_error("step() called on a finished episode");
  WorldState s = state;
  double reward = 0.0;
  switch (action) {
    case Action::turn_left:
      s.agent_heading = static_cast<Heading>((static_cast<int>(s.agent_heading) + 3) % 4);
      break;
    case Action::turn_right:
      s.agent_heading = static_cast<Heading>((static_cast<int>(s.agent_heading) + 1) % 4);
      break;
    case Action::move_forward: {
      const Cell f = forward_of(s.agent_heading);
      const Cell next{s.agent_pos.row + f.row, s.agent_pos.col + f.col};
      if (!inside(s, next)) break;
      s.agent_pos = next;
      bool touched = false, touched_wrong = false;
      for (std::size_t i = 0; i < s.objects.size(); ++i) {
        if (manhattan(s.objects[i].position, next) > 1) continue;
        touched = true;
        if (std::find(s.correct_ids.begin(), s.correct_ids.end(), i) == s.correct_ids.end()) touched_wrong = true;
      }
      if (touched) {
        s.outcome = touched_wrong ? Outcome::incorrect : Outcome::correct;
        reward = touched_wrong ? kIncorrectReward : kCorrectReward;
      }
      break;
    }
  }
  ++s.step_count;
  if (!s.done() && s.step_count >= kMaxEpisodeSteps) s.outcome = Outcome::timeout;

  Observation obs = render(config, s);
  obs.reward = reward;
  return {std::move(s), std::move(obs)};
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb color_rgb(Color c) {
  switch (c) {
    case Color::red: return {0.9, 0.1, 0.1};
    case Color::green: return {0.1, 0.8, 0.1};
    case Color::blue: return {0.1, 0.2, 0.9};
    case Color::yellow: return {0.9, 0.9, 0.1};
  }
  return {0, 0, 0};
}

// Whether texture coordinate (u, v) in [0,1]^2 shows the object color or
// its dark shade. Band counts are odd so patterns are mirror-symmetric.
bool lit(ObjectShape shape, double u, double v) {
  constexpr int kBands = 3;
  const int bu = std::clamp(static_cast<int>(std::floor(u * kBands)), 0, kBands - 1);
  const int bv = std::clamp(static_cast<int>(std::floor(v * kBands)), 0, kBands - 1);
  switch (shape) {
    case ObjectShape::pillar: return true;
    case ObjectShape::torch: return bu % 2 == 0;
    case ObjectShape::keycard: return bv % 2 == 0;
    case ObjectShape::skullkey: return (bu + bv) % 2 == 0;
    case ObjectShape::armor: return u < 0.25 || u > 0.75 || v < 0.25 || v > 0.75;
  }
  return true;
}

}  // namespace

Observation render(const EnvConfig& config, const WorldState& state) {
  const RenderConfig& rc = config.render;
  const int H = rc.height, W = rc.width;
  Observation obs;
  obs.image = Tensor({3, static_cast<std::size_t>(H), static_cast<std::size_t>(W)}, rc.background);
  obs.done = state.done();

  struct Visible {
    int z;
    std::size_t index;
    int x;
  };
  std::vector<Visible> visible;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    auto [z, x] = to_agent_frame(state.agent_pos, state.agent_heading, state.objects[i].position);
    if (z > 0 && std::abs(x) <= z) visible.push_back({z, i, x});
  }
  // Painter's order: far to near, so nearer objects overwrite.
  std::stable_sort(visible.begin(), visible.end(), [](const Visible& a, const Visible& b) { return a.z > b.z; });

  const double focal = W / 2.0;  // 90 degree horizontal field of view
  for (const Visible& v : visible) {
    const ObjectSpec& o = state.objects[v.index];
    const double cx = W / 2.0 + focal * v.x / v.z;
    const double half_w = focal * rc.object_width / 2.0 / v.z;
    const double height = rc.short_height * (o.size == Size::tall ? 2.0 : 1.0);
    const double bottom = H / 2.0 + focal * rc.camera_height / v.z;
    const double top = bottom - focal * height / v.z;
    const double x0 = cx - half_w, x1 = cx + half_w;
    const Rgb c = color_rgb(o.color);
    for (int py = std::max(0, static_cast<int>(std::floor(top))); py < H; ++py) {
      const double yc = py + 0.5;
      if (yc < top) continue;
      if (yc > bottom) break;
      const double vtex = (yc - top) / (bottom - top);
      for (int px = std::max(0, static_cast<int>(std::floor(x0))); px < W; ++px) {
        const double xc = px + 0.5;
        if (xc < x0) continue;
        if (xc > x1) break;
        const double utex = (xc - x0) / (x1 - x0);
        const double shade = lit(o.shape, utex, vtex) ? 1.0 : 0.25;
        obs.image.at(0, py, px) = c.r * shade;
        obs.image.at(1, py, px) = c.g * shade;
        obs.image.at(2, py, px) = c.b * shade;
      }
    }
  }
  return obs;
}

const Observation& Environment::reset(std::uint64_t seed, Difficulty difficulty, const Instruction& instruction) {
  auto r = env::reset(config_, seed, difficulty, instruction);
  state_ = std::move(r.state);
  observation_ = std::move(r.observation);
  return observation_;
}

const Observation& Environment::step(Action action) {
  auto r = env::step(config_, state_, action);
  state_ = std::move(r.state);
  observation_ = std::move(r.observation);
  return observation_;
}

}  // namespace dan::env
