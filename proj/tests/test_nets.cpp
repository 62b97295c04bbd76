#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dan/harness/end_to_end.hpp"
#include "dan/nets/agent.hpp"
#include "dan/nets/checkpoint.hpp"
#include "dan/nets/model.hpp"
#include "dan/random.hpp"
#include "oracles.hpp"

using namespace dan;
using namespace dan::nets;

namespace {

ParamStore random_params(const ModelConfig& config, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ParamStore p = init_params(config, 0);
  for (std::size_t i = 0; i < p.size(); ++i) p.value(i) = random_tensor(p.value(i).shape(), rng, lo, hi);
  return p;
}

std::vector<double> vec(const Tensor& t) { return t.values(); }

ModelConfig small(AttentionSource source, Application application, bool policy_lstm = false) {
  return harness::tiny_model(source, application, policy_lstm);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dan_test_" + name);
}

}  // namespace

TEST_CASE("feature geometry") {
  const ModelConfig paper = ModelConfig::paper();
  CHECK(paper.d() == 64);
  CHECK(paper.feat_h() == 8);
  CHECK(paper.feat_w() == 17);
  CHECK(paper.state_size() == 136);
  CHECK(paper.l == 256);

  ModelConfig bad;
  bad.vocab = make_vocab(std::vector<std::string>{"go"});
  bad.image_h = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("encoded image has d x feat_h x feat_w entries") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  Rng rng(1);
  Graph g;
  const ParamStore params = init_params(c, 3);
  BoundParams p(g, params);
  const Var f = encode_image(p, c, g.constant(random_tensor({3, c.image_h, c.image_w}, rng, 0, 1)));
  CHECK(f.value().shape() == Shape{c.d(), c.feat_h(), c.feat_w()});
}

TEST_CASE("vocabulary puts the unknown token first") {
  const auto v = make_vocab(std::vector<std::string>{"go", "to", "go", "red"});
  CHECK(v == std::vector<std::string>{std::string(kUnknownToken), "go", "to", "red"});
  ModelConfig c;
  c.vocab = v;
  CHECK(c.token_id("red") == 3);
  CHECK(c.token_id("purple") == 0);
}

TEST_CASE("GRU matches the scalar oracle") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  Rng rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ParamStore params = random_params(c, rng);
    const std::size_t len = 1 + uniform_index(rng, 6);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < len; ++i) tokens.push_back(c.vocab[uniform_index(rng, c.vocab.size())]);

    Graph g;
    BoundParams p(g, params);
    const auto got = vec(encode_instruction(p, c, tokens).value());

    const oracle::Gru gru{params["gru.w_r"], params["gru.b_r"], params["gru.w_z"], params["gru.b_z"],
                          params["gru.w_nx"], params["gru.b_n"], params["gru.w_nh"], params["gru.b_nh"]};
    std::vector<double> h(c.l, 0.0);
    const Tensor& emb = params["embedding"];
    for (const auto& tok : tokens) {
      const std::size_t id = c.token_id(tok);
      std::vector<double> x(c.embed);
      for (std::size_t j = 0; j < c.embed; ++j) x[j] = emb.at(id, j);
      h = gru.step(x, h);
    }
    for (std::size_t u = 0; u < c.l; ++u) worst = std::max(worst, std::abs(got[u] - h[u]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("attention LSTM matches the scalar oracle") {
  for (bool sees_input : {true, false}) {
    ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
    c.forget_gate_sees_input = sees_input;
    const std::size_t d = c.d(), in = c.state_size() + c.l;
    Rng rng(12);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const ParamStore params = random_params(c, rng);
      const Tensor h0 = random_tensor({d}, rng), c0 = random_tensor({d}, rng), x = random_tensor({in}, rng);
      Graph g;
      BoundParams p(g, params);
      const AttentionState next = attention_step(p, c, {g.constant(h0), g.constant(c0)}, g.constant(x));

      const oracle::Lstm lstm{params["attn.w_f"], params["attn.b_f"], params["attn.w_i"], params["attn.b_i"],
                              params["attn.w_c"], params["attn.b_c"], params["attn.w_o"], params["attn.b_o"],
                              sees_input};
      auto h = vec(h0), cs = vec(c0);
      lstm.step(h, cs, vec(x));
      for (std::size_t u = 0; u < d; ++u) {
        worst = std::max(worst, std::abs(next.h.value()[u] - h[u]));
        worst = std::max(worst, std::abs(next.c.value()[u] - cs[u]));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("saturated gates carry or overwrite the cell state") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  const std::size_t d = c.d(), in = c.state_size() + c.l;
  Rng rng(5);
  ParamStore params = random_params(c, rng);
  for (const char* w : {"attn.w_f", "attn.w_i"}) params[w].fill(0.0);
  const Tensor h0 = random_tensor({d}, rng), c0 = random_tensor({d}, rng), x = random_tensor({in}, rng);

  SUBCASE("forget open, input closed keeps C") {
    params["attn.b_f"].fill(50.0);
    params["attn.b_i"].fill(-50.0);
    Graph g;
    BoundParams p(g, params);
    const auto next = attention_step(p, c, {g.constant(h0), g.constant(c0)}, g.constant(x));
    for (std::size_t u = 0; u < d; ++u) CHECK(next.c.value()[u] == doctest::Approx(c0[u]).epsilon(1e-15));
  }
  SUBCASE("forget closed, input open writes the candidate") {
    params["attn.b_f"].fill(-50.0);
    params["attn.b_i"].fill(50.0);
    Graph g;
    BoundParams p(g, params);
    const auto next = attention_step(p, c, {g.constant(h0), g.constant(c0)}, g.constant(x));
    const auto hx = oracle::join(vec(h0), vec(x));
    for (std::size_t u = 0; u < d; ++u) {
      const double cand = std::tanh(oracle::dot_row(params["attn.w_c"], u, hx) + params["attn.b_c"][u]);
      CHECK(next.c.value()[u] == doctest::Approx(cand).epsilon(1e-15));
    }
  }
}

TEST_CASE("1D convolution fusion matches the oracle and keeps feat_h * feat_w entries") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor f = random_tensor({c.d(), c.feat_h(), c.feat_w()}, rng);
    const Tensor a = random_tensor({c.d()}, rng);
    Graph g;
    const ParamStore params = init_params(c, 1);
    BoundParams p(g, params);
    const Var s = apply_attention(Application::conv1d, p, c, g.constant(a), g.constant(f));
    const Tensor want = oracle::conv1d_channels(f, a);
    REQUIRE(s.value().size() == c.state_size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(s.value()[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("static attention is identical across steps, cell-state attention is not") {
  Rng rng(21);
  const std::vector<std::string> tokens{"go", "to", "the", "red", "pillar"};
  std::vector<Tensor> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_tensor({3, 20, 24}, rng, 0, 1));

  for (auto app : {Application::conv1d, Application::hadamard_fc}) {
    const ModelConfig st = small(AttentionSource::static_instruction, app);
    const ParamStore ps = random_params(st, rng, -0.5, 0.5);
    Agent agent(st);
    agent.reset(tokens);
    Graph g;
    BoundParams p(g, ps);
    agent.begin_segment(p);
    const Tensor first = agent.step(frames[0]).attention.value();
    for (std::size_t t = 1; t < frames.size(); ++t) CHECK(agent.step(frames[t]).attention.value() == first);

    const ModelConfig dyn = small(AttentionSource::lstm_cellstate, app);
    const ParamStore pd = random_params(dyn, rng, -0.5, 0.5);
    Agent dagent(dyn);
    dagent.reset(tokens);
    Graph g2;
    BoundParams p2(g2, pd);
    dagent.begin_segment(p2);
    const Tensor a0 = dagent.step(frames[0]).attention.value();
    CHECK(a0 == Tensor({dyn.d()}, 1.0));
    const Tensor a1 = dagent.step(frames[1]).attention.value();
    const Tensor a2 = dagent.step(frames[2]).attention.value();
    CHECK(a1 != a0);
    CHECK(a2 != a1);
  }
}

TEST_CASE("recurrent attention applies the previous step's vector") {
  Rng rng(22);
  const ModelConfig c = small(AttentionSource::lstm_output, Application::conv1d);
  const ParamStore params = random_params(c, rng, -0.5, 0.5);
  Agent agent(c);
  agent.reset({"go", "to", "the", "torch"});
  Graph g;
  BoundParams p(g, params);
  agent.begin_segment(p);
  const Tensor frame = random_tensor({3, 20, 24}, rng, 0, 1);
  CHECK(agent.step(frame).attention.value() == Tensor({c.d()}, 0.0));
  const Tensor produced = agent.attention_h();
  agent.end_segment();
  CHECK(agent.attention_h() != Tensor({c.d()}, 0.0));
  Graph g2;
  BoundParams p2(g2, params);
  agent.begin_segment(p2);
  const Tensor carried = agent.attention_h();
  CHECK(agent.step(frame).attention.value() == carried);
  (void)produced;
}

TEST_CASE("bootstrap step leaves the recurrent state alone") {
  Rng rng(23);
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d, true);
  const ParamStore params = random_params(c, rng, -0.5, 0.5);
  Agent a(c), b(c);
  a.reset({"go", "to", "the", "torch"});
  b.reset({"go", "to", "the", "torch"});
  Graph ga, gb;
  BoundParams pa(ga, params), pb(gb, params);
  a.begin_segment(pa);
  b.begin_segment(pb);
  const Tensor f0 = random_tensor({3, 20, 24}, rng, 0, 1), f1 = random_tensor({3, 20, 24}, rng, 0, 1);
  a.step(f0);
  b.step(f0);
  b.step(f1, false);
  CHECK(a.step(f1).probs.value() == b.step(f1).probs.value());
}

TEST_CASE("zero policy weights give a uniform policy and zero value") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  Rng rng(4);
  ParamStore params = random_params(c, rng);
  for (const char* n : {"policy.actor.weight", "policy.actor.bias", "policy.critic.weight", "policy.critic.bias"}) {
    params[n].fill(0.0);
  }
  Graph g;
  BoundParams p(g, params);
  const auto out = policy_forward(p, c, g.constant(random_tensor({c.state_size()}, rng)));
  for (double v : out.probs.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(out.value.value()[0] == 0.0);
  CHECK_THROWS_AS(policy_forward(p, c, g.constant(Tensor({c.state_size() + 1}))), std::invalid_argument);
}

TEST_CASE("concatenation fusion with zero weights gives a zero state") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::concat);
  Rng rng(6);
  ParamStore params = random_params(c, rng);
  params["fuse.weight"].fill(0.0);
  params["fuse.bias"].fill(0.0);
  Agent agent(c);
  agent.reset({"go", "to", "the", "red", "pillar"});
  Graph g;
  BoundParams p(g, params);
  agent.begin_segment(p);
  const StepVars s = agent.step(random_tensor({3, 20, 24}, rng, 0, 1));
  CHECK(s.state.value() == Tensor({c.state_size()}, 0.0));
  CHECK_FALSE(params.contains("attn.w_f"));
}

TEST_CASE("initialization") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d, true);
  const ParamStore a = init_params(c, 9), b = init_params(c, 9), other = init_params(c, 10);
  CHECK(a == b);
  CHECK_FALSE(a == other);
  CHECK(a.all_finite());
  CHECK(a["attn.b_f"] == Tensor({c.d()}, 1.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string& n = a.name(i);
    if (n.find(".b_") != std::string::npos || n.ends_with(".bias")) {
      if (n != "attn.b_f") CHECK(a.value(i) == Tensor(a.value(i).shape(), 0.0));
    } else {
      const std::size_t fan_in = a.value(i).size() / a.value(i).dim(0);
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      if (n.starts_with("conv") || n == "policy.trunk.weight") bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      if (n == "policy.actor.weight") bound *= 0.1;
      if (n == "embedding") continue;
      for (double v : a.value(i).data()) CHECK(std::abs(v) <= bound);
    }
  }
  std::size_t total = 0;
  for (const auto& [name, shape] : param_layout(c)) total += shape_size(shape);
  CHECK(total == count_parameters(c));
  CHECK(total == a.parameter_count());
}

TEST_CASE("1D convolution needs fewer parameters than the Hadamard product with FC") {
  for (ModelConfig c : {ModelConfig::paper(), small(AttentionSource::lstm_cellstate, Application::conv1d)}) {
    if (c.vocab.empty()) c.vocab = make_vocab(std::vector<std::string>{"go", "to", "the"});
    for (auto src : {AttentionSource::static_instruction, AttentionSource::current_frame,
                     AttentionSource::lstm_output, AttentionSource::lstm_cellstate}) {
      c.attention_source = src;
      c.application = Application::conv1d;
      const std::size_t conv = count_parameters(c);
      c.application = Application::hadamard_fc;
      const std::size_t had = count_parameters(c);
      CHECK(conv < had);
      CHECK(had - conv == c.state_size() * c.d() * c.state_size() + c.state_size());
    }
  }
}

TEST_CASE("checkpoints round-trip and reject a different model") {
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  Rng rng(30);
  const ParamStore params = random_params(c, rng);
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(path, c, params);
  CHECK(load_checkpoint(path, c) == params);
  CHECK(read_checkpoint_digest(path) == c.digest());
  CHECK(std::filesystem::exists(manifest_path(path)));

  ModelConfig other = c;
  other.application = Application::hadamard_fc;
  CHECK(other.digest() != c.digest());
  CHECK_THROWS_AS(load_checkpoint(path, other), std::runtime_error);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path, c), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt"), c), std::runtime_error);
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path, c), std::runtime_error);
  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path(path));
}

TEST_CASE("end-to-end gradients of every model variant") {
  for (const auto& r : harness::check_all_models(5)) {
    INFO(r.name << " max rel err " << r.max_rel_error);
    CHECK(r.passed);
    CHECK(r.checked_entries > 0);
  }
}

TEST_CASE("cell-state attention over a two-step episode matches a step-by-step oracle") {
  Rng rng(40);
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  const ParamStore params = random_params(c, rng, -0.5, 0.5);
  const std::vector<std::string> tokens{"go", "to", "the", "red", "pillar"};
  const Tensor f0 = random_tensor({3, 20, 24}, rng, 0, 1), f1 = random_tensor({3, 20, 24}, rng, 0, 1);

  Agent agent(c);
  agent.reset(tokens);
  Graph g;
  BoundParams p(g, params);
  agent.begin_segment(p);
  const StepVars s0 = agent.step(f0);
  const StepVars s1 = agent.step(f1);

  Graph ref;
  BoundParams rp(ref, params);
  const auto x_l = vec(encode_instruction(rp, c, tokens).value());
  const Tensor feat0 = encode_image(rp, c, ref.constant(f0)).value();
  const Tensor feat1 = encode_image(rp, c, ref.constant(f1)).value();
  const oracle::Lstm lstm{params["attn.w_f"], params["attn.b_f"], params["attn.w_i"], params["attn.b_i"],
                          params["attn.w_c"], params["attn.b_c"], params["attn.w_o"], params["attn.b_o"], true};

  std::vector<double> h(c.d(), 0.0), cs(c.d(), 1.0);
  const Tensor state0 = oracle::conv1d_channels(feat0, Tensor::vector(cs));
  lstm.step(h, cs, oracle::join(state0.values(), x_l));
  const Tensor state1 = oracle::conv1d_channels(feat1, Tensor::vector(cs));

  auto close = [](const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
  };
  CHECK(close(s0.state.value(), state0) <= 1e-12);
  CHECK(close(s1.attention.value(), Tensor::vector(cs)) <= 1e-12);
  CHECK(close(s1.state.value(), state1) <= 1e-12);
}

TEST_CASE("repeating a token changes the instruction encoding") {
  Rng rng(41);
  const ModelConfig c = small(AttentionSource::lstm_cellstate, Application::conv1d);
  const ParamStore params = random_params(c, rng);
  Graph g;
  BoundParams p(g, params);
  const std::vector<std::string> one{"red"}, two{"red", "red"};
  CHECK(encode_instruction(p, c, one).value() != encode_instruction(p, c, two).value());
  CHECK_THROWS_AS(encode_instruction(p, c, std::vector<std::string>{}), std::invalid_argument);
}
