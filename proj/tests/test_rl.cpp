#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dan/random.hpp"
#include "dan/rl/losses.hpp"
#include "dan/rl/shared_model.hpp"
#include "dan/rl/trainer.hpp"
#include "toy_tasks.hpp"

using namespace dan;
using namespace dan::rl;
using toy::bandit;
using toy::bandit_params;
using toy::probs_of;

namespace {

RolloutStep make_step(Graph& g, std::vector<double> logits, int action, double value, double reward, bool done) {
  return {g.constant(Tensor::vector(std::move(logits))), action, g.constant(Tensor::vector({value})), reward, done};
}

}  // namespace

TEST_CASE("n-step returns") {
  const auto r = compute_returns({0.0, 0.0, -0.2}, {false, false, true}, 123.0, 0.99);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(-0.19602).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(-0.198).epsilon(1e-12));
  CHECK(r[2] == doctest::Approx(-0.2).epsilon(1e-12));

  const auto zero = compute_returns({0.0, 0.0, 0.0}, {false, false, true}, 5.0, 0.9);
  CHECK(zero == std::vector<double>{0.0, 0.0, 0.0});

  const auto boot = compute_returns({1.0, 0.0}, {false, false}, 2.0, 0.5);
  CHECK(boot[1] == 1.0);
  CHECK(boot[0] == 1.5);

  // The recursion restarts after a terminal step inside the segment.
  const auto cut = compute_returns({1.0, 2.0, 3.0}, {true, false, false}, 10.0, 0.5);
  CHECK(cut[0] == 1.0);
  CHECK(cut[2] == 8.0);
  CHECK(cut[1] == 6.0);
}

TEST_CASE("returns satisfy R_t - gamma R_t+1 = r_t within a span") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 20);
    std::vector<double> rewards(n);
    std::vector<bool> dones(n);
    for (std::size_t i = 0; i < n; ++i) {
      rewards[i] = uniform(rng, -1, 1);
      dones[i] = uniform01(rng) < 0.2;
    }
    const double gamma = uniform(rng, 0.5, 1.0);
    const auto R = compute_returns(rewards, dones, uniform(rng, -1, 1), gamma);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      if (dones[t]) {
        CHECK(R[t] == doctest::Approx(rewards[t]).epsilon(1e-12));
      } else {
        CHECK(R[t] - gamma * R[t + 1] == doctest::Approx(rewards[t]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("loss terms") {
  SUBCASE("uniform policy has entropy ln 3 per step") {
    Graph g;
    RolloutBuffer b{make_step(g, {0.0, 0.0, 0.0}, 1, 0.0, 0.0, true)};
    const Losses l = compute_losses(b, {0.0}, {});
    CHECK(l.entropy.value()[0] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(l.policy_loss.value()[0] == 0.0);
    CHECK(l.value_loss.value()[0] == 0.0);
  }
  SUBCASE("zero advantage gives zero policy loss") {
    Graph g;
    RolloutBuffer b{make_step(g, {0.3, -1.0, 2.0}, 2, 0.7, 0.0, false), make_step(g, {1.0, 0.0, 0.0}, 0, -0.1, 0.0, true)};
    CHECK(compute_losses(b, {0.7, -0.1}, {}).policy_loss.value()[0] == 0.0);
  }
  SUBCASE("two-step example against a hand oracle") {
    Graph g;
    const std::vector<double> l0{0.5, -0.5, 0.0}, l1{1.0, 2.0, -1.0};
    RolloutBuffer b{make_step(g, l0, 0, 0.2, 0.0, false), make_step(g, l1, 2, -0.3, 1.0, true)};
    const std::vector<double> R{0.99, 1.0};
    const LossCoefficients coefs{0.5, 0.01};
    const Losses l = compute_losses(b, R, coefs);

    auto logp = [](const std::vector<double>& z, std::size_t a) {
      double m = std::max({z[0], z[1], z[2]}), s = 0.0;
      for (double v : z) s += std::exp(v - m);
      return z[a] - m - std::log(s);
    };
    auto ent = [&](const std::vector<double>& z) {
      double h = 0.0;
      for (std::size_t a = 0; a < 3; ++a) h -= std::exp(logp(z, a)) * logp(z, a);
      return h;
    };
    const double policy = -(logp(l0, 0) * (0.99 - 0.2) + logp(l1, 2) * (1.0 + 0.3));
    const double value = (0.99 - 0.2) * (0.99 - 0.2) + 1.3 * 1.3;
    const double entropy = ent(l0) + ent(l1);
    CHECK(l.policy_loss.value()[0] == doctest::Approx(policy).epsilon(1e-13));
    CHECK(l.value_loss.value()[0] == doctest::Approx(value).epsilon(1e-13));
    CHECK(l.entropy.value()[0] == doctest::Approx(entropy).epsilon(1e-13));
    CHECK(l.total.value()[0] == doctest::Approx(policy + 0.5 * value - 0.01 * entropy).epsilon(1e-13));
  }
  SUBCASE("advantage is a constant in the policy term") {
    Graph g;
    Var logits = g.variable(Tensor::vector({0.0, 0.0}));
    Var value = g.variable(Tensor::vector({0.25}));
    RolloutBuffer b{{logits, 0, value, 1.0, true}};
    g.backward(compute_losses(b, {1.0}, {}).policy_loss);
    CHECK(g.grad(value)[0] == 0.0);
    CHECK(g.grad(logits)[0] == doctest::Approx(-0.75 * 0.5));
  }
  SUBCASE("misaligned returns are rejected") {
    Graph g;
    RolloutBuffer b{make_step(g, {0.0, 0.0}, 0, 0.0, 0.0, true)};
    CHECK_THROWS_AS(compute_losses(b, {0.0, 1.0}, {}), std::invalid_argument);
  }
}

TEST_CASE("uniform maximizes entropy") {
  Rng rng(9);
  const double uniform3 = entropy_of({1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(uniform3 == doctest::Approx(std::log(3.0)));
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p(3);
    double s = 0.0;
    for (double& v : p) s += v = uniform01(rng);
    for (double& v : p) v /= s;
    CHECK(entropy_of(p) <= uniform3 + 1e-15);
  }
}

TEST_CASE("action selection") {
  Rng rng(1);
  const std::vector<double> p{0.2, 0.5, 0.3};
  std::vector<int> counts(3);
  for (int i = 0; i < 30000; ++i) ++counts[sample_action(p, rng)];
  for (std::size_t a = 0; a < 3; ++a) CHECK(counts[a] / 30000.0 == doctest::Approx(p[a]).epsilon(0.05));
  CHECK(greedy_action(p) == 1);
  CHECK(greedy_action(std::vector<double>{0.4, 0.4, 0.2}) == 0);
}

TEST_CASE("gradient clipping and worker updates") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore p;
    p.add("w", Tensor::vector({1.0, -2.0}));
    SharedModel shared(p, {});
    CHECK(worker_update(shared, {Tensor({2}, 0.0)}, 1.0) == UpdateStatus::applied);
    CHECK(shared.snapshot() == p);
  }
  SUBCASE("clipping rescales to the clip norm") {
    std::vector<Tensor> g{Tensor::vector({3.0}), Tensor::vector({4.0})};
    CHECK(clip_global_norm(g, 1.0) == 5.0);
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(g[1][0] == doctest::Approx(0.8));
    CHECK(global_norm(g) == doctest::Approx(1.0));
    std::vector<Tensor> small{Tensor::vector({0.3})};
    clip_global_norm(small, 1.0);
    CHECK(small[0][0] == 0.3);
  }
  SUBCASE("a clipped gradient and its pre-scaled twin give the same step") {
    ParamStore p;
    p.add("w", Tensor::vector({0.5, 0.5}));
    SharedModel a(p, {}), b(p, {});
    a.apply({Tensor::vector({30.0, -40.0})}, 5.0);
    b.apply({Tensor::vector({3.0, -4.0})}, 5.0);
    CHECK(a.snapshot() == b.snapshot());
  }
  SUBCASE("non-finite gradients are skipped") {
    ParamStore p;
    p.add("w", Tensor::vector({0.5}));
    SharedModel shared(p, {});
    Tensor bad = Tensor::vector({0.0});
    bad[0] = std::nan("");
    CHECK(shared.apply({bad}, 1.0) == UpdateStatus::skipped_nonfinite);
    CHECK(shared.skipped() == 1);
    CHECK(shared.steps() == 0);
    CHECK(shared.snapshot() == p);
  }
}

TEST_CASE("optimizer reduces a quadratic") {
  ParamStore p;
  p.add("w", Tensor::vector({3.0, -2.0, 1.0}));
  SharedModel shared(p, AdamConfig{0.02});
  auto loss = [](const ParamStore& s) {
    double l = 0.0;
    for (double v : s["w"].data()) l += v * v;
    return l;
  };
  double previous = loss(shared.snapshot());
  const double start = previous;
  for (int step = 0; step < 150; ++step) {
    Tensor g = shared.snapshot()["w"];
    for (double& v : g.data()) v *= 2.0;
    shared.apply({g}, 100.0);
    if (step % 10 == 9) {
      const double now = loss(shared.snapshot());
      CHECK(now < previous);
      previous = now;
    }
  }
  CHECK(previous < 0.25 * start);
  CHECK(shared.second_moment(0)[0] > 0.0);
}

TEST_CASE("policy gradient on a two-armed bandit") {
  TrainerConfig c;
  c.learning_rate = 0.05;
  c.max_episodes = 200;
  c.n_steps = 1;
  c.log_every = 50;
  const TrainResult r = train(c, bandit_params(2), bandit({1.0, 0.0}), 1);
  CHECK(r.updates == 200);
  CHECK(r.episodes == 200);
  CHECK(probs_of(r.params)[0] > 0.9);

  c.max_episodes = 2000;
  c.learning_rate = 0.01;
  const TrainResult longer = train(c, bandit_params(2), bandit({1.0, 0.0}), 2);
  const double p = probs_of(longer.params)[0];
  CHECK(longer.params["value"][0] == doctest::Approx(p).epsilon(0.05));
  CHECK(std::abs(longer.params["value"][0] - p) < 0.05);
}

TEST_CASE("without entropy the policy collapses onto the only paying action") {
  TrainerConfig c;
  c.learning_rate = 0.05;
  c.entropy_coef = 0.0;
  c.max_episodes = 1000;
  c.n_steps = 1;
  const TrainResult r = train(c, bandit_params(3), bandit({1.0, 0.0, 0.0}), 4);
  CHECK(probs_of(r.params)[0] > 0.99);
}

TEST_CASE("sync training is reproducible") {
  TrainerConfig c;
  c.learning_rate = 0.02;
  c.max_episodes = 300;
  c.log_every = 30;
  const auto a = train(c, bandit_params(3), bandit({0.2, 1.0, -0.2}), 7);
  const auto b = train(c, bandit_params(3), bandit({0.2, 1.0, -0.2}), 7);
  CHECK(a.params == b.params);
  REQUIRE(a.log.size() == 10);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].episodes == (i + 1) * 30);
    CHECK(a.log[i].accuracy == b.log[i].accuracy);
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
  }
  const auto other = train(c, bandit_params(3), bandit({0.2, 1.0, -0.2}), 8);
  CHECK_FALSE(other.params == a.params);
}

TEST_CASE("asynchronous workers") {
  for (std::size_t k : {2u, 4u}) {
    TrainerConfig c;
    c.mode = Mode::async;
    c.workers = k;
    c.learning_rate = 0.02;
    c.max_episodes = 400;
    c.log_every = 50;
    std::vector<std::uint64_t> checkpoints;
    TrainCallbacks cb;
    c.checkpoint_every = 100;
    cb.on_checkpoint = [&](std::uint64_t n, const ParamStore& p) {
      checkpoints.push_back(n);
      CHECK(p.all_finite());
    };
    const TrainResult r = train(c, bandit_params(2), bandit({1.0, 0.0}), 3, cb);
    CHECK(r.params.all_finite());
    CHECK(r.episodes == 400);
    CHECK(r.updates == r.optimizer_steps + r.skipped_updates);
    CHECK(r.updates >= 400);
    CHECK(r.frames >= 400);
    REQUIRE(r.log.size() == 8);
    for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].frames >= r.log[i - 1].frames);
    CHECK(checkpoints == std::vector<std::uint64_t>{100, 200, 300, 400});
    CHECK(probs_of(r.params)[0] > 0.9);
  }
}

TEST_CASE("frame budget and configuration checks") {
  TrainerConfig c;
  c.max_episodes = 1000;
  c.max_frames = 50;
  const TrainResult r = train(c, bandit_params(2), bandit({1.0, 0.0}), 1);
  CHECK(r.frames == 50);
  CHECK(r.episodes == 50);

  TrainerConfig bad;
  bad.workers = 2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_mode("async") == Mode::async);
  CHECK_THROWS_AS(parse_mode("turbo"), std::invalid_argument);

  c.max_frames = 0;
  c.max_episodes = 0;
  const TrainResult none = train(c, bandit_params(2), bandit({1.0, 0.0}), 1);
  CHECK(none.log.empty());
  CHECK(none.params == bandit_params(2));
}

TEST_CASE("training log CSV") {
  std::vector<LogRow> rows{{100, 2000, 0.25, 0.5, 0.1, 0.2, 1.0}, {200, 4100, 0.125, 0.75, -0.3, 0.05, 0.9}};
  std::stringstream ss;
  write_log_csv(ss, rows);
  CHECK(ss.str().starts_with(std::string(kLogHeader) + "\n"));
  const auto back = read_log_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].frames == 4100);
  CHECK(back[1].accuracy == 0.75);

  std::stringstream bad("episodes,frames\n1,2\n");
  CHECK_THROWS_AS(read_log_csv(bad), std::runtime_error);

  std::vector<LogRow> other{{100, 1000, 0.75, 0.0, 0.1, 0.2, 1.0}};
  const auto mean = mean_log({rows, other});
  REQUIRE(mean.size() == 1);
  CHECK(mean[0].accuracy == 0.25);
  CHECK(mean[0].frames == 1500);
}
