#include "dan/harness/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "dan/harness/end_to_end.hpp"
#include "dan/harness/evaluate.hpp"
#include "dan/harness/visualize.hpp"
#include "dan/nets/agent.hpp"
#include "dan/nets/checkpoint.hpp"
#include "dan/rl/gridnav_task.hpp"

namespace fs = std::filesystem;

namespace dan::harness {

ExperimentConfig resolve(const CommandOptions& options) {
  ExperimentConfig config = load_config(options.config);
  if (options.seed) config.seeds = {*options.seed};
  if (options.out) config.out = *options.out;
  config.validate();
  return config;
}

void prepare_output(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  std::ofstream out(config.out / "config.resolved");
  if (ec || !out) throw std::runtime_error("cannot write to output directory " + config.out.string());
  write_config(out, config);
}

env::Corpus corpus_for(const ExperimentConfig& config) { return env::build_corpus(config.corpus_seed); }

nets::ModelConfig model_for(const ExperimentConfig& config, const env::Corpus& corpus) {
  return config.model(nets::make_vocab(env::corpus_words(corpus)));
}

fs::path checkpoint_path(const ExperimentConfig& config, std::uint64_t seed) {
  if (!config.checkpoint.empty()) return config.checkpoint;
  return config.out / ("seed" + std::to_string(seed) + ".ckpt");
}

fs::path train_log_path(const ExperimentConfig& config, std::uint64_t seed) {
  return config.out / ("train_seed" + std::to_string(seed) + ".csv");
}

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ParamStore load_for(const ExperimentConfig& config, const nets::ModelConfig& model, std::uint64_t seed) {
  const fs::path path = checkpoint_path(config, seed);
  if (!fs::exists(path)) throw std::runtime_error("checkpoint " + path.string() + " not found; run train first");
  return nets::load_checkpoint(path, model);
}

}  // namespace

int cmd_gen_corpus(const ExperimentConfig& config, std::ostream& log) {
  prepare_output(config);
  const env::Corpus corpus = corpus_for(config);
  const env::SplitAudit audit = env::audit_split(corpus);
  write_file(config.out / "corpus.txt", [&](std::ostream& os) { env::write_corpus(os, corpus); });
  log << "corpus: " << corpus.train.size() << " train, " << corpus.test.size() << " test instructions -> "
      << (config.out / "corpus.txt").string() << '\n';
  log << "split audit: " << (audit.ok() ? "ok" : "FAILED") << '\n';
  for (const auto& p : audit.problems) log << "  " << p << '\n';
  return audit.ok() ? 0 : 1;
}

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  prepare_output(config);
  const env::Corpus corpus = corpus_for(config);
  const nets::ModelConfig model = model_for(config, corpus);
  write_file(config.out / "corpus.txt", [&](std::ostream& os) { env::write_corpus(os, corpus); });

  nets::ModelConfig conv = model, hadamard = model;
  conv.application = nets::Application::conv1d;
  hadamard.application = nets::Application::hadamard_fc;
  log << "parameters: " << nets::count_parameters(model) << " (" << nets::to_string(model.application)
      << "); conv1d " << nets::count_parameters(conv) << ", hadamard_fc " << nets::count_parameters(hadamard)
      << " under the same config\n";

  std::vector<std::vector<rl::LogRow>> logs;
  for (const std::uint64_t seed : config.seeds) {
    log << "seed " << seed << ": training\n";
    rl::TrainCallbacks callbacks;
    callbacks.on_row = [&](const rl::LogRow& r) {
      log << "  seed " << seed << " episodes " << r.episodes << " frames " << r.frames << " accuracy "
          << std::fixed << std::setprecision(3) << r.accuracy << " reward " << r.mean_reward << std::defaultfloat
          << '\n';
    };
    callbacks.on_checkpoint = [&](std::uint64_t episodes, const ParamStore& params) {
      nets::save_checkpoint(config.out / ("seed" + std::to_string(seed) + "_ep" + std::to_string(episodes) + ".ckpt"),
                            model, params);
    };
    const rl::TaskFactory factory = [&](std::size_t) {
      return std::make_unique<rl::GridNavTask>(model, config.env, config.difficulty, corpus.train);
    };
    rl::TrainResult result =
        rl::train(config.trainer, nets::init_params(model, mix_seed(seed, 0)), factory, seed, callbacks);
    write_file(train_log_path(config, seed), [&](std::ostream& os) { rl::write_log_csv(os, result.log); });
    nets::save_checkpoint(checkpoint_path(config, seed), model, result.params);
    log << "seed " << seed << ": " << result.episodes << " episodes, " << result.frames << " frames, "
        << result.updates << " updates";
    if (result.skipped_updates) log << ", " << result.skipped_updates << " skipped";
    log << " -> " << checkpoint_path(config, seed).string() << '\n';
    logs.push_back(std::move(result.log));
  }
  if (logs.size() > 1) {
    write_file(config.out / "train_mean.csv", [&](std::ostream& os) { rl::write_log_csv(os, rl::mean_log(logs)); });
  }
  return 0;
}

int cmd_eval(const ExperimentConfig& config, std::ostream& log) {
  prepare_output(config);
  const env::Corpus corpus = corpus_for(config);
  const nets::ModelConfig model = model_for(config, corpus);
  const std::string tag = std::string(to_string(config.eval_mode)) + "_" + std::string(env::to_string(config.difficulty));
  nlohmann::ordered_json summary;
  summary["mode"] = std::string(to_string(config.eval_mode));
  summary["difficulty"] = std::string(env::to_string(config.difficulty));
  summary["episodes"] = config.eval_episodes;
  double mean = 0.0;
  for (const std::uint64_t seed : config.seeds) {
    const ParamStore params = load_for(config, model, seed);
    EvalSetup setup{model, config.env, config.difficulty, config.eval_mode, config.eval_episodes, config.eval_seed};
    std::vector<EpisodeTrace> traces;
    const EvalReport report = evaluate(setup, params, corpus, &traces);
    const std::string stem = "eval_" + tag + "_seed" + std::to_string(seed);
    write_file(config.out / (stem + ".json"), [&](std::ostream& os) { write_report_json(os, report); });
    write_file(config.out / (stem + ".jsonl"), [&](std::ostream& os) { write_traces_jsonl(os, traces); });
    log << "seed " << seed << ": " << tag << " accuracy " << std::fixed << std::setprecision(3) << report.accuracy
        << " mean reward " << report.mean_reward << std::defaultfloat << " over " << report.episodes << " episodes\n";
    summary["seeds"].push_back({{"seed", seed}, {"accuracy", report.accuracy}, {"mean_reward", report.mean_reward}});
    mean += report.accuracy / static_cast<double>(config.seeds.size());
  }
  summary["mean_accuracy"] = mean;
  write_file(config.out / ("eval_" + tag + ".json"), [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  if (config.seeds.size() > 1) log << "mean accuracy " << std::fixed << std::setprecision(3) << mean << '\n';
  return 0;
}

int cmd_visualize(const ExperimentConfig& config, std::ostream& log) {
  prepare_output(config);
  const env::Corpus corpus = corpus_for(config);
  const nets::ModelConfig model = model_for(config, corpus);
  const std::uint64_t seed = config.seeds.front();
  const ParamStore params = load_for(config, model, seed);
  const env::Instruction instruction = config.visualize_instruction.empty()
                                           ? corpus.test.front()
                                           : env::parse_instruction(config.visualize_instruction);

  const fs::path dir = config.out / ("visualize_seed" + std::to_string(seed));
  fs::create_directories(dir);
  env::Environment environment(config.env);
  environment.reset(config.eval_seed, config.difficulty, instruction);
  nets::Agent agent(model);
  agent.reset(instruction.tokens);

  const bool native = model.application == nets::Application::conv1d;
  nlohmann::ordered_json index;
  index["instruction"] = instruction.text();
  index["checkpoint"] = checkpoint_path(config, seed).string();
  index["application"] = std::string(nets::to_string(model.application));
  index["heatmap_source"] = native ? "conv1d attended map"
                                   : "channel mean of attention-scaled features (no conv1d map for this model)";
  index["normalization"] = "absolute value, min-max to [0,1], constant map -> 0.5";
  index["alpha"] = 0.5;
  index["steps"] = nlohmann::ordered_json::array();

  const auto h = static_cast<std::size_t>(config.env.render.height);
  const auto w = static_cast<std::size_t>(config.env.render.width);
  for (int t = 0; !environment.state().done(); ++t) {
    Graph graph;
    BoundParams bound(graph, params);
    agent.begin_segment(bound);
    const Tensor frame = environment.observation().image;
    const nets::StepVars v = agent.step(frame);
    const Tensor map = nets::attended_map(model.application, v.attention, v.features).value();
    const int action = rl::greedy_action(v.probs.value().data());
    agent.end_segment();

    const Tensor heat = upsample_nearest(normalize_heatmap(map), h, w);
    char name[32];
    std::snprintf(name, sizeof name, "%03d", t);
    const std::string frame_file = std::string("frame_") + name + ".ppm";
    const std::string heat_file = std::string("heat_") + name + ".ppm";
    write_ppm(dir / frame_file, frame);
    write_ppm(dir / heat_file, overlay_heatmap(frame, heat, 0.5));
    const env::Observation& obs = environment.step(env::action_from_index(action));
    index["steps"].push_back({{"t", t},
                              {"frame", frame_file},
                              {"heatmap", heat_file},
                              {"action", std::string(env::to_string(env::action_from_index(action)))},
                              {"reward", obs.reward}});
  }
  index["outcome"] = std::string(env::to_string(environment.state().outcome));
  write_file(dir / "index.json", [&](std::ostream& os) { os << index.dump(2) << '\n'; });
  log << "visualize: " << index["steps"].size() << " steps, outcome " << env::to_string(environment.state().outcome)
      << " -> " << dir.string() << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& log, std::size_t cases_per_op) {
  bool ok = true;
  std::uint64_t tag = 0;
  auto print = [&](const gradcheck::OpReport& r, double tol) {
    log << std::left << std::setw(44) << r.name << std::right << " entries " << std::setw(6) << r.checked_entries
        << "  max rel err " << std::scientific << std::setprecision(2) << r.max_rel_error << std::defaultfloat
        << "  (tol " << tol << ")  " << (r.passed ? "ok" : "FAIL") << '\n';
    ok = ok && r.passed;
  };
  for (const auto& spec : gradcheck::standard_ops()) {
    print(gradcheck::check_op(spec, cases_per_op, mix_seed(seed, tag++)), gradcheck::kOpTolerance);
  }
  for (const auto& r : check_all_models(seed)) print(r, gradcheck::kEndToEndTolerance);
  log << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
  return ok ? 0 : 1;
}

std::vector<AblationCell> ablation_matrix() {
  std::vector<AblationCell> cells;
  for (auto source : {nets::AttentionSource::current_frame, nets::AttentionSource::lstm_output,
                      nets::AttentionSource::lstm_cellstate}) {
    for (auto difficulty : {env::Difficulty::easy, env::Difficulty::medium, env::Difficulty::hard}) {
      for (auto mode : {EvalMode::zeroshot, EvalMode::multitask}) cells.push_back({source, difficulty, mode});
    }
  }
  return cells;
}

}  // namespace dan::harness
