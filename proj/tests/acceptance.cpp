// Acceptance checks. Prints one PASS/FAIL line per criterion and copies the
// lines to <work>/acceptance_report.txt. Exit status is 0 once every
// criterion has been evaluated, whatever the outcomes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dan/autodiff.hpp"
#include "dan/env/corpus.hpp"
#include "dan/env/gridnav.hpp"
#include "dan/gradcheck.hpp"
#include "dan/harness/commands.hpp"
#include "dan/harness/config.hpp"
#include "dan/harness/end_to_end.hpp"
#include "dan/harness/evaluate.hpp"
#include "dan/nets/agent.hpp"
#include "dan/nets/checkpoint.hpp"
#include "dan/nets/model.hpp"
#include "dan/random.hpp"
#include "dan/rl/trainer.hpp"
#include "oracles.hpp"
#include "toy_tasks.hpp"

using namespace dan;
namespace fs = std::filesystem;

#ifndef DAN_SOURCE_DIR
#define DAN_SOURCE_DIR "."
#endif

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst_op = 0.0, worst_model = 0.0;
  std::string failed;
  for (const auto& spec : gradcheck::standard_ops()) {
    const auto r = gradcheck::check_op(spec, 100, 1);
    worst_op = std::max(worst_op, r.max_rel_error);
    if (!r.passed) failed += " " + r.name;
    ok = ok && r.passed;
  }
  for (const auto& r : harness::check_all_models(1)) {
    worst_model = std::max(worst_model, r.max_rel_error);
    if (!r.passed) failed += " " + r.name;
    ok = ok && r.passed;
  }
  const double secs = seconds_since(t0);
  ok = ok && worst_op < 1e-4 && worst_model < 1e-3 && secs < 60.0;
  return {ok, "max op rel err " + fmt("%.2e", worst_op) + " (< 1e-4), max model rel err " + fmt("%.2e", worst_model) +
                  " (< 1e-3), " + fmt("%.1f", secs) + "s (< 60s)" + (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  constexpr int kCases = 100;
  Rng rng(2);
  double conv2 = 0.0, conv1 = 0.0, gru_err = 0.0, lstm_err = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const std::size_t cin = 1 + uniform_index(rng, 3), cout = 1 + uniform_index(rng, 3);
    const std::size_t k = 1 + uniform_index(rng, 3), stride = 1 + uniform_index(rng, 2);
    const std::size_t h = k + uniform_index(rng, 6), w = k + uniform_index(rng, 6);
    const Tensor in = random_tensor({cin, h, w}, rng), ker = random_tensor({cout, cin, k, k}, rng);
    Graph g;
    const Tensor got = conv2d(g.constant(in), g.constant(ker), stride).value();
    const Tensor want = oracle::conv2d(in, ker, stride);
    for (std::size_t j = 0; j < want.size(); ++j) conv2 = std::max(conv2, std::abs(got[j] - want[j]));

    const Tensor f = random_tensor({cin, h, w}, rng), a = random_tensor({cin}, rng);
    const Tensor got1 = conv1d_channels(g.constant(f), g.constant(a)).value();
    const Tensor want1 = oracle::conv1d_channels(f, a);
    for (std::size_t j = 0; j < want1.size(); ++j) conv1 = std::max(conv1, std::abs(got1[j] - want1[j]));
  }

  const nets::ModelConfig c =
      harness::tiny_model(nets::AttentionSource::lstm_cellstate, nets::Application::conv1d, false);
  for (int i = 0; i < kCases; ++i) {
    ParamStore params = nets::init_params(c, 0);
    for (std::size_t j = 0; j < params.size(); ++j) params.value(j) = random_tensor(params.value(j).shape(), rng);
    Graph g;
    BoundParams p(g, params);

    std::vector<std::string> tokens;
    const std::size_t len = 1 + uniform_index(rng, 5);
    for (std::size_t j = 0; j < len; ++j) tokens.push_back(c.vocab[uniform_index(rng, c.vocab.size())]);
    const Tensor got = nets::encode_instruction(p, c, tokens).value();
    const oracle::Gru gru{params["gru.w_r"], params["gru.b_r"], params["gru.w_z"], params["gru.b_z"],
                          params["gru.w_nx"], params["gru.b_n"], params["gru.w_nh"], params["gru.b_nh"]};
    std::vector<double> h(c.l, 0.0);
    for (const auto& t : tokens) {
      std::vector<double> x(c.embed);
      for (std::size_t j = 0; j < c.embed; ++j) x[j] = params["embedding"].at(c.token_id(t), j);
      h = gru.step(x, h);
    }
    for (std::size_t u = 0; u < c.l; ++u) gru_err = std::max(gru_err, std::abs(got[u] - h[u]));

    const Tensor h0 = random_tensor({c.d()}, rng), c0 = random_tensor({c.d()}, rng);
    const Tensor x = random_tensor({c.state_size() + c.l}, rng);
    const auto next = nets::attention_step(p, c, {g.constant(h0), g.constant(c0)}, g.constant(x));
    const oracle::Lstm lstm{params["attn.w_f"], params["attn.b_f"], params["attn.w_i"], params["attn.b_i"],
                            params["attn.w_c"], params["attn.b_c"], params["attn.w_o"], params["attn.b_o"], true};
    auto hv = h0.values(), cv = c0.values();
    lstm.step(hv, cv, x.values());
    for (std::size_t u = 0; u < c.d(); ++u) {
      lstm_err = std::max(lstm_err, std::abs(next.h.value()[u] - hv[u]));
      lstm_err = std::max(lstm_err, std::abs(next.c.value()[u] - cv[u]));
    }
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({conv2, conv1, gru_err, lstm_err});
  return {worst <= 1e-12 && secs < 60.0,
          std::to_string(kCases) + " cases each; max abs err conv2d " + fmt("%.1e", conv2) + ", conv1d " +
              fmt("%.1e", conv1) + ", GRU " + fmt("%.1e", gru_err) + ", LSTM " + fmt("%.1e", lstm_err) +
              " (<= 1e-12), " + fmt("%.1f", secs) + "s (< 60s)"};
}

Outcome rl_sanity() {
  const auto t0 = Clock::now();
  rl::TrainerConfig c;
  c.learning_rate = 0.05;
  c.n_steps = 1;
  c.max_episodes = 200;
  const auto quick = rl::train(c, toy::bandit_params(2), toy::bandit({1.0, 0.0}), 1);
  const double p200 = toy::probs_of(quick.params)[0];

  c.learning_rate = 0.01;
  c.max_episodes = 2000;
  const auto longer = rl::train(c, toy::bandit_params(2), toy::bandit({1.0, 0.0}), 2);
  const double p = toy::probs_of(longer.params)[0];
  const double v = longer.params["value"][0];
  const double secs = seconds_since(t0);
  return {quick.updates == 200 && p200 > 0.9 && std::abs(v - p) < 0.05,
          "P(rewarded) after 200 sync updates " + fmt("%.3f", p200) + " (> 0.9); value " + fmt("%.3f", v) +
              " vs true " + fmt("%.3f", p) + " (|diff| < 0.05); " + fmt("%.1f", secs) + "s"};
}

Outcome environment_baseline(const harness::ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const env::Corpus corpus = env::build_corpus(cfg.corpus_seed);
  Rng rng(2024);
  int correct = 0;
  constexpr int kEpisodes = 10000;
  for (int e = 0; e < kEpisodes; ++e) {
    const auto& ins = corpus.train[uniform_index(rng, corpus.train.size())];
    env::StepResult r = env::reset(cfg.env, static_cast<std::uint64_t>(e), env::Difficulty::easy, ins);
    while (!r.state.done()) r = env::step(cfg.env, r.state, env::action_from_index(static_cast<int>(uniform_index(rng, 3))));
    correct += r.state.outcome == env::Outcome::correct ? 1 : 0;
  }
  const double acc = static_cast<double>(correct) / kEpisodes;

  bool identical = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto difficulty = static_cast<env::Difficulty>(seed % 3);
    auto a = env::reset(cfg.env, seed, difficulty, corpus.train[seed % corpus.train.size()]);
    auto b = env::reset(cfg.env, seed, difficulty, corpus.train[seed % corpus.train.size()]);
    Rng actions(seed);
    identical = identical && a.state == b.state && a.observation.image == b.observation.image;
    while (!a.state.done()) {
      const auto act = env::action_from_index(static_cast<int>(uniform_index(actions, 3)));
      a = env::step(cfg.env, a.state, act);
      b = env::step(cfg.env, b.state, act);
      identical = identical && a.state == b.state && a.observation.image == b.observation.image &&
                  a.observation.reward == b.observation.reward;
    }
  }
  const double secs = seconds_since(t0);
  return {acc < 0.25 && identical && secs < 60.0,
          "random easy accuracy " + fmt("%.4f", acc) + " over 10000 episodes (< 0.25); replay " +
              (identical ? "bit-identical" : "DIVERGED") + "; " + fmt("%.1f", secs) + "s (< 60s)"};
}

struct RunSummary {
  std::vector<double> accuracies;
  double mean = 0.0;
  std::uint64_t frames = 0;
};

RunSummary train_and_evaluate(harness::ExperimentConfig cfg, const fs::path& out) {
  cfg.out = out;
  std::ostringstream log;
  if (harness::cmd_train(cfg, log) != 0) throw std::runtime_error("training failed");
  const env::Corpus corpus = harness::corpus_for(cfg);
  const nets::ModelConfig model = harness::model_for(cfg, corpus);
  RunSummary s;
  for (std::uint64_t seed : cfg.seeds) {
    const ParamStore params = nets::load_checkpoint(harness::checkpoint_path(cfg, seed), model);
    harness::EvalSetup setup{model, cfg.env, cfg.difficulty, harness::EvalMode::multitask, cfg.eval_episodes,
                             cfg.eval_seed};
    s.accuracies.push_back(harness::evaluate(setup, params, corpus).accuracy);
    s.mean += s.accuracies.back() / static_cast<double>(cfg.seeds.size());
  }
  s.frames = cfg.trainer.max_frames;
  return s;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt("%.3f", x);
  return "[" + s + "]";
}

Outcome headline(const harness::ExperimentConfig& dan_cfg, const harness::ExperimentConfig& ga_cfg,
                 const fs::path& work) {
  const auto t0 = Clock::now();
  const RunSummary dan = train_and_evaluate(dan_cfg, work / "dan");
  const RunSummary ga = train_and_evaluate(ga_cfg, work / "gated_attention");
  const double secs = seconds_since(t0);
  const bool reached = dan.mean >= 0.85;
  const bool ordered = dan.mean >= ga.mean - 0.02;
  std::string detail = "budget " + std::to_string(dan_cfg.trainer.max_frames) + " frames/seed; DAN cell-state conv1d MT " +
                       fmt("%.3f", dan.mean) + " " + list(dan.accuracies) + " (>= 0.85); GA MT " + fmt("%.3f", ga.mean) +
                       " " + list(ga.accuracies) + " (DAN >= GA - 0.02: " + (ordered ? "yes" : "no") + "); " +
                       fmt("%.0f", secs) + "s";
  return {reached && ordered, detail};
}

Outcome parameter_inequality(const harness::ExperimentConfig& cfg) {
  const env::Corpus corpus = harness::corpus_for(cfg);
  nets::ModelConfig m = harness::model_for(cfg, corpus);
  m.application = nets::Application::conv1d;
  const std::size_t conv = nets::count_parameters(m);
  m.application = nets::Application::hadamard_fc;
  const std::size_t had = nets::count_parameters(m);
  nets::ModelConfig paper = nets::ModelConfig::paper();
  paper.vocab = m.vocab;
  paper.application = nets::Application::conv1d;
  const std::size_t pconv = nets::count_parameters(paper);
  paper.application = nets::Application::hadamard_fc;
  const std::size_t phad = nets::count_parameters(paper);
  return {conv < had && pconv < phad, "default config conv1d " + std::to_string(conv) + " < hadamard_fc " +
                                          std::to_string(had) + "; full-size geometry conv1d " +
                                          std::to_string(pconv) + " < hadamard_fc " + std::to_string(phad)};
}

Outcome corpus_contract(const harness::ExperimentConfig& cfg) {
  const env::Corpus corpus = env::build_corpus(cfg.corpus_seed);
  const env::SplitAudit audit = env::audit_split(corpus);
  std::string detail = std::to_string(corpus.train.size()) + " train / " + std::to_string(corpus.test.size()) +
                       " test; audit " + (audit.ok() ? "clean" : "found problems");
  for (const auto& p : audit.problems) detail += "; " + p;
  return {audit.ok() && corpus.train.size() == 55 && corpus.test.size() == 15, detail};
}

Outcome static_attention_invariance() {
  Rng rng(17);
  const std::vector<std::string> tokens{"go", "to", "the", "red", "pillar"};
  std::vector<Tensor> frames;
  for (int t = 0; t < 30; ++t) frames.push_back(random_tensor({3, 20, 24}, rng, 0, 1));
  auto attentions = [&](nets::AttentionSource source) {
    const nets::ModelConfig c = harness::tiny_model(source, nets::Application::conv1d, false);
    ParamStore params = nets::init_params(c, 0);
    for (std::size_t j = 0; j < params.size(); ++j) params.value(j) = random_tensor(params.value(j).shape(), rng, -0.5, 0.5);
    nets::Agent agent(c);
    agent.reset(tokens);
    Graph g;
    BoundParams p(g, params);
    agent.begin_segment(p);
    std::vector<Tensor> out;
    for (const auto& f : frames) out.push_back(agent.step(f).attention.value());
    return out;
  };
  const auto st = attentions(nets::AttentionSource::static_instruction);
  const auto dyn = attentions(nets::AttentionSource::lstm_cellstate);
  std::size_t same_static = 0, changed_dynamic = 0;
  for (std::size_t t = 1; t < st.size(); ++t) {
    same_static += st[t] == st[0] ? 1 : 0;
    changed_dynamic += dyn[t] != dyn[t - 1] ? 1 : 0;
  }
  const std::size_t n = st.size() - 1;
  return {same_static == n && changed_dynamic == n,
          "static attention identical on " + std::to_string(same_static) + "/" + std::to_string(n) +
              " steps; cell-state attention changed on " + std::to_string(changed_dynamic) + "/" + std::to_string(n)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path source = argc > 1 ? fs::path(argv[1]) : fs::path(DAN_SOURCE_DIR);
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "ground_nav_acceptance";
  const harness::ExperimentConfig dan_cfg = harness::load_config(source / "configs" / "default.cfg");
  const harness::ExperimentConfig ga_cfg = harness::load_config(source / "configs" / "gated_attention.cfg");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-suite", gradient_suite},
      {"oracle-equivalence", oracle_equivalence},
      {"rl-sanity", rl_sanity},
      {"environment-baseline", [&] { return environment_baseline(dan_cfg); }},
      {"parameter-inequality", [&] { return parameter_inequality(dan_cfg); }},
      {"corpus-contract", [&] { return corpus_contract(dan_cfg); }},
      {"static-attention-invariance", static_attention_invariance},
      {"headline-learning", [&] { return headline(dan_cfg, ga_cfg, work); }},
  };
  fs::create_directories(work);
  std::ofstream report(work / "acceptance_report.txt");
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    const std::string line = std::string(o.pass ? "PASS " : "FAIL ") + name + ": " + o.detail;
    std::cout << line << std::endl;
    report << line << std::endl;
  }
  const std::string summary = failures == 0 ? std::string("all criteria passed")
                                            : std::to_string(failures) + " of " + std::to_string(criteria.size()) +
                                                  " criteria failed";
  std::cout << summary << std::endl;
  report << summary << std::endl;
  return 0;
}
