#include "dan/rl/trainer.hpp"

#include <condition_variable>
#include <deque>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

namespace dan::rl {

std::string_view to_string(Mode m) { return m == Mode::async ? "async" : "sync"; }

Mode parse_mode(std::string_view name) {
  if (name == "async") return Mode::async;
  if (name == "sync") return Mode::sync;
  throw std::invalid_argument("unknown trainer mode '" + std::string(name) + "'");
}

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (mode == Mode::sync && workers != 1) throw std::invalid_argument("sync mode runs exactly one worker");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
  if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
}

int sample_action(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

int greedy_action(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

struct Event {
  enum class Kind { episode, update } kind = Kind::episode;
  double reward = 0.0;
  bool success = false;
  std::uint64_t frames = 0;
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
  bool applied = true;
};

// Turns the ordered event stream into log rows and checkpoints.
class Collector {
 public:
  Collector(const TrainerConfig& config, const TrainCallbacks& callbacks, const SharedModel& shared,
            std::atomic<std::uint64_t>& episodes)
      : config_(config), callbacks_(callbacks), shared_(shared), episodes_(episodes) {}

  void consume(const Event& e) {
    if (e.kind == Event::Kind::update) {
      ++updates_;
      pl_ += e.policy_loss;
      vl_ += e.value_loss;
      ent_ += e.entropy;
      ++window_updates_;
      return;
    }
    if (episodes_.load() >= config_.max_episodes) return;  // overshoot from other workers
    const std::uint64_t n = episodes_.fetch_add(1) + 1;
    last_frames_ = std::max(last_frames_, e.frames);
    reward_sum_ += e.reward;
    successes_ += e.success ? 1 : 0;
    ++window_episodes_;
    if (n % config_.log_every == 0) {
      LogRow row;
      row.episodes = n;
      row.frames = last_frames_;
      row.mean_reward = reward_sum_ / static_cast<double>(window_episodes_);
      row.accuracy = static_cast<double>(successes_) / static_cast<double>(window_episodes_);
      if (window_updates_ > 0) {
        row.policy_loss = pl_ / static_cast<double>(window_updates_);
        row.value_loss = vl_ / static_cast<double>(window_updates_);
        row.entropy = ent_ / static_cast<double>(window_updates_);
      }
      rows_.push_back(row);
      if (callbacks_.on_row) callbacks_.on_row(row);
      reward_sum_ = 0.0;
      successes_ = 0;
      window_episodes_ = 0;
      pl_ = vl_ = ent_ = 0.0;
      window_updates_ = 0;
    }
    if (config_.checkpoint_every > 0 && n % config_.checkpoint_every == 0 && callbacks_.on_checkpoint) {
      callbacks_.on_checkpoint(n, shared_.snapshot());
    }
  }

  std::vector<LogRow>& rows() { return rows_; }
  std::uint64_t updates() const { return updates_; }

 private:
  const TrainerConfig& config_;
  const TrainCallbacks& callbacks_;
  const SharedModel& shared_;
  std::atomic<std::uint64_t>& episodes_;
  std::vector<LogRow> rows_;
  std::uint64_t updates_ = 0, last_frames_ = 0, successes_ = 0, window_episodes_ = 0, window_updates_ = 0;
  double reward_sum_ = 0.0, pl_ = 0.0, vl_ = 0.0, ent_ = 0.0;
};

struct Counters {
  std::atomic<std::uint64_t> episodes{0};
  std::atomic<std::uint64_t> frames{0};
  std::atomic<bool> abort{false};
};

bool budget_spent(const TrainerConfig& config, const Counters& c) {
  if (c.abort.load()) return true;
  if (c.episodes.load() >= config.max_episodes) return true;
  return config.max_frames > 0 && c.frames.load() >= config.max_frames;
}

void run_worker(std::size_t id, const TrainerConfig& config, SharedModel& shared, Task& task, std::uint64_t seed,
                Counters& counters, const std::function<void(const Event&)>& emit) {
  Rng rng(mix_seed(seed, 1000 + id));
  const LossCoefficients coefs{config.value_coef, config.entropy_coef};
  bool need_reset = true;
  double episode_reward = 0.0;
  while (!budget_spent(config, counters)) {
    if (need_reset) {
      task.start_episode(rng);
      episode_reward = 0.0;
      need_reset = false;
    }
    const ParamStore params = shared.snapshot();
    Graph graph;
    BoundParams bound(graph, params);
    task.begin_segment(bound);

    RolloutBuffer buffer;
    bool done = false;
    for (std::size_t t = 0; t < config.n_steps && !done; ++t) {
      PolicyStep out = task.forward(true);
      const int action = sample_action(out.probs.value().data(), rng);
      const Transition tr = task.act(action);
      const std::uint64_t frames = counters.frames.fetch_add(1) + 1;
      buffer.push_back({out.logits, action, out.value, tr.reward, tr.done});
      episode_reward += tr.reward;
      done = tr.done;
      if (done) {
        Event e;
        e.kind = Event::Kind::episode;
        e.reward = episode_reward;
        e.success = tr.success;
        e.frames = frames;
        emit(e);
      }
      if (config.max_frames > 0 && frames >= config.max_frames) break;
    }
    const double bootstrap = done ? 0.0 : task.forward(false).value.value()[0];
    const auto returns = compute_returns(buffer, bootstrap, config.gamma);
    const Losses losses = compute_losses(buffer, returns, coefs);
    graph.backward(losses.total);
    task.end_segment();

    Event u;
    u.kind = Event::Kind::update;
    u.policy_loss = losses.policy_loss.value()[0];
    u.value_loss = losses.value_loss.value()[0];
    u.entropy = losses.entropy.value()[0];
    u.applied = worker_update(shared, bound.gradients(), config.grad_clip_norm) == UpdateStatus::applied;
    emit(u);
    need_reset = done;
  }
}

std::string diagnostic(const std::exception& e, const Counters& c) {
  std::ostringstream os;
  os << "training aborted after " << c.episodes.load() << " episodes / " << c.frames.load()
     << " frames: " << e.what();
  return os.str();
}

}  // namespace

TrainResult train(const TrainerConfig& config, ParamStore initial, const TaskFactory& make_task, std::uint64_t seed,
                  const TrainCallbacks& callbacks) {
  config.validate();
  if (!initial.all_finite()) throw std::invalid_argument("initial parameters are not finite");
  SharedModel shared(std::move(initial), AdamConfig{config.learning_rate});
  Counters counters;
  Collector collector(config, callbacks, shared, counters.episodes);

  if (config.mode == Mode::sync) {
    auto task = make_task(0);
    try {
      run_worker(0, config, shared, *task, seed, counters, [&](const Event& e) { collector.consume(e); });
    } catch (const std::domain_error& e) {
      throw std::runtime_error(diagnostic(e, counters));
    }
  } else {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Event> queue;
    std::size_t running = config.workers;
    std::exception_ptr failure;
    std::string failure_text;

    auto emit = [&](const Event& e) {
      {
        std::lock_guard<std::mutex> lock(mu);
        queue.push_back(e);
      }
      cv.notify_one();
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < config.workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          auto task = make_task(w);
          run_worker(w, config, shared, *task, seed, counters, emit);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) {
            failure = std::current_exception();
            failure_text = diagnostic(e, counters);
          }
          counters.abort = true;
        }
        {
          std::lock_guard<std::mutex> lock(mu);
          --running;
        }
        cv.notify_one();
      });
    }
    for (;;) {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return !queue.empty() || running == 0; });
      if (queue.empty() && running == 0) break;
      Event e = queue.front();
      queue.pop_front();
      lock.unlock();
      collector.consume(e);
    }
    for (auto& t : threads) t.join();
    if (failure) throw std::runtime_error(failure_text);
  }

  TrainResult result;
  result.log = std::move(collector.rows());
  result.params = shared.snapshot();
  result.episodes = counters.episodes.load();
  result.frames = counters.frames.load();
  result.updates = collector.updates();
  result.optimizer_steps = shared.steps();
  result.skipped_updates = shared.skipped();
  return result;
}

void write_log_csv(std::ostream& os, const std::vector<LogRow>& rows) {
  os << kLogHeader << '\n';
  os.precision(17);
  for (const auto& r : rows) {
    os << r.episodes << ',' << r.frames << ',' << r.mean_reward << ',' << r.accuracy << ',' << r.policy_loss << ','
       << r.value_loss << ',' << r.entropy << '\n';
  }
}

std::vector<LogRow> read_log_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kLogHeader) throw std::runtime_error("training log has an unexpected header");
  std::vector<LogRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    LogRow r;
    char comma;
    ls >> r.episodes >> comma >> r.frames >> comma >> r.mean_reward >> comma >> r.accuracy >> comma >> r.policy_loss >>
        comma >> r.value_loss >> comma >> r.entropy;
    if (!ls) throw std::runtime_error("malformed training log row: " + line);
    rows.push_back(r);
  }
  return rows;
}

std::vector<LogRow> mean_log(const std::vector<std::vector<LogRow>>& runs) {
  if (runs.empty()) return {};
  std::size_t n = runs.front().size();
  for (const auto& r : runs) n = std::min(n, r.size());
  std::vector<LogRow> out(n);
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    double episodes = 0, frames = 0;
    for (const auto& run : runs) {
      const LogRow& r = run[i];
      episodes += static_cast<double>(r.episodes);
      frames += static_cast<double>(r.frames);
      out[i].mean_reward += r.mean_reward / k;
      out[i].accuracy += r.accuracy / k;
      out[i].policy_loss += r.policy_loss / k;
      out[i].value_loss += r.value_loss / k;
      out[i].entropy += r.entropy / k;
    }
    out[i].episodes = static_cast<std::uint64_t>(episodes / k + 0.5);
    out[i].frames = static_cast<std::uint64_t>(frames / k + 0.5);
  }
  return out;
}

}  // namespace dan::rl
