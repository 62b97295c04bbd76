#include "dan/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dan::harness {

std::string_view to_string(EvalMode m) { return m == EvalMode::multitask ? "multitask" : "zeroshot"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "multitask") return EvalMode::multitask;
  if (name == "zeroshot") return EvalMode::zeroshot;
  throw std::invalid_argument("unknown eval mode '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::uint64_t> parse_seeds(const std::string& v) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) seeds.push_back(parse_number<std::uint64_t>(trim(item)));
  if (seeds.empty()) throw std::invalid_argument("seeds list is empty");
  return seeds;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

template <class T>
Field trainer_number(T rl::TrainerConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.trainer.*member = parse_number<T>(v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.trainer.*member); }};
}

Field trainer_real(double rl::TrainerConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.trainer.*member = parse_number<double>(v); },
          [member](const ExperimentConfig& c) { return fmt_double(c.trainer.*member); }};
}

Field flag(bool ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(v); },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field env_int(int env::EnvConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.env.*member = parse_number<int>(v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.env.*member); }};
}

Field render_int(int env::RenderConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.env.render.*member = parse_number<int>(v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.env.render.*member); }};
}

// Declaration order is the order of the resolved config file.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"difficulty",
       {[](ExperimentConfig& c, const std::string& v) { c.difficulty = env::parse_difficulty(v); },
        [](const ExperimentConfig& c) { return std::string(env::to_string(c.difficulty)); }}},
      {"attention_source",
       {[](ExperimentConfig& c, const std::string& v) { c.attention_source = nets::parse_attention_source(v); },
        [](const ExperimentConfig& c) { return std::string(nets::to_string(c.attention_source)); }}},
      {"application",
       {[](ExperimentConfig& c, const std::string& v) { c.application = nets::parse_application(v); },
        [](const ExperimentConfig& c) { return std::string(nets::to_string(c.application)); }}},
      {"seeds",
       {[](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seeds(v); },
        [](const ExperimentConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
          return s;
        }}},
      {"corpus_seed", number(&ExperimentConfig::corpus_seed)},
      {"grid_rows", env_int(&env::EnvConfig::rows)},
      {"grid_cols", env_int(&env::EnvConfig::cols)},
      {"easy_object_rows_ahead", env_int(&env::EnvConfig::easy_object_rows_ahead)},
      {"easy_object_spacing", env_int(&env::EnvConfig::easy_object_spacing)},
      {"render_height", render_int(&env::RenderConfig::height)},
      {"render_width", render_int(&env::RenderConfig::width)},
      {"d", number(&ExperimentConfig::d)},
      {"embed", number(&ExperimentConfig::embed)},
      {"l", number(&ExperimentConfig::l)},
      {"policy_hidden", number(&ExperimentConfig::policy_hidden)},
      {"policy_lstm", flag(&ExperimentConfig::policy_lstm)},
      {"forget_gate_sees_input", flag(&ExperimentConfig::forget_gate_sees_input)},
      {"mode",
       {[](ExperimentConfig& c, const std::string& v) { c.trainer.mode = rl::parse_mode(v); },
        [](const ExperimentConfig& c) { return std::string(rl::to_string(c.trainer.mode)); }}},
      {"workers", trainer_number(&rl::TrainerConfig::workers)},
      {"gamma", trainer_real(&rl::TrainerConfig::gamma)},
      {"n_steps", trainer_number(&rl::TrainerConfig::n_steps)},
      {"entropy_coef", trainer_real(&rl::TrainerConfig::entropy_coef)},
      {"value_coef", trainer_real(&rl::TrainerConfig::value_coef)},
      {"grad_clip_norm", trainer_real(&rl::TrainerConfig::grad_clip_norm)},
      {"learning_rate", trainer_real(&rl::TrainerConfig::learning_rate)},
      {"max_episodes", trainer_number(&rl::TrainerConfig::max_episodes)},
      {"max_frames", trainer_number(&rl::TrainerConfig::max_frames)},
      {"log_every", trainer_number(&rl::TrainerConfig::log_every)},
      {"checkpoint_every", trainer_number(&rl::TrainerConfig::checkpoint_every)},
      {"eval_mode",
       {[](ExperimentConfig& c, const std::string& v) { c.eval_mode = parse_eval_mode(v); },
        [](const ExperimentConfig& c) { return std::string(to_string(c.eval_mode)); }}},
      {"eval_episodes", number(&ExperimentConfig::eval_episodes)},
      {"eval_seed", number(&ExperimentConfig::eval_seed)},
      {"visualize_instruction",
       {[](ExperimentConfig& c, const std::string& v) { c.visualize_instruction = v; },
        [](const ExperimentConfig& c) { return c.visualize_instruction; }}},
      {"checkpoint",
       {[](ExperimentConfig& c, const std::string& v) { c.checkpoint = v; },
        [](const ExperimentConfig& c) { return c.checkpoint; }}},
      {"out",
       {[](ExperimentConfig& c, const std::string& v) { c.out = v; },
        [](const ExperimentConfig& c) { return c.out.string(); }}},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (eval_episodes == 0) throw std::invalid_argument("eval_episodes must be positive");
  if (out.empty()) throw std::invalid_argument("out must not be empty");
  trainer.validate();
  model({std::string(nets::kUnknownToken)}).validate();
}

nets::ModelConfig ExperimentConfig::model(std::vector<std::string> vocab) const {
  nets::ModelConfig m;
  m.image_h = static_cast<std::size_t>(env.render.height);
  m.image_w = static_cast<std::size_t>(env.render.width);
  m.conv[2].channels = d;
  m.embed = embed;
  m.l = l;
  m.vocab = std::move(vocab);
  m.attention_source = attention_source;
  m.application = application;
  m.policy_hidden = policy_hidden;
  m.policy_lstm = policy_lstm;
  m.forget_gate_sees_input = forget_gate_sees_input;
  return m;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw std::invalid_argument(where + "unknown key '" + key + "'");
    if (seen[key]++) throw std::invalid_argument(where + "key '" + key + "' given twice");
    try {
      it->second.set(config, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& os, const ExperimentConfig& config) {
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(config) << '\n';
}

}  // namespace dan::harness
