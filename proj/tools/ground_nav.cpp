#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "dan/harness/commands.hpp"

int main(int argc, char** argv) {
  using namespace dan::harness;
  CLI::App app{"Instruction-following navigation agents: training, evaluation and tooling"};
  app.require_subcommand(1);

  CommandOptions options;
  std::uint64_t seed = 0;
  std::string out;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", options.config, "experiment config (key = value lines)");
    if (config_required) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run a single seed instead of the configured list");
    sub->add_option("--out", out, "output directory (overrides the config)");
  };
  auto* gen = app.add_subcommand("gen-corpus", "write the 55/15 instruction split and audit it");
  auto* train = app.add_subcommand("train", "train every configured seed");
  auto* eval = app.add_subcommand("eval", "greedy multitask or zeroshot evaluation of trained checkpoints");
  auto* vis = app.add_subcommand("visualize", "export frames and attention heatmaps for one greedy episode");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op and the full model");
  for (auto* sub : {gen, train, eval, vis}) add_common(sub, true);
  add_common(grad, false);

  CLI11_PARSE(app, argc, argv);

  try {
    auto* used = app.get_subcommands().front();
    if (used->count("--seed")) options.seed = seed;
    if (used->count("--out")) options.out = out;
    if (used == grad) return cmd_gradcheck(options.seed.value_or(1), std::cout);
    const ExperimentConfig config = resolve(options);
    if (used == gen) return cmd_gen_corpus(config, std::cout);
    if (used == train) return cmd_train(config, std::cout);
    if (used == eval) return cmd_eval(config, std::cout);
    return cmd_visualize(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
