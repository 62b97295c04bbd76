#include "dan/harness/end_to_end.hpp"

#include "dan/nets/agent.hpp"
#include "dan/random.hpp"

namespace dan::harness {

nets::ModelConfig tiny_model(nets::AttentionSource source, nets::Application application, bool policy_lstm) {
  nets::ModelConfig c;
  c.image_h = 20;
  c.image_w = 24;
  c.conv = {{{4, 4, 2}, {4, 3, 2}, {4, 2, 1}}};
  c.embed = 5;
  c.l = 6;
  c.policy_hidden = 8;
  c.vocab = nets::make_vocab(std::vector<std::string>{"go", "to", "the", "red", "pillar"});
  c.attention_source = source;
  c.application = application;
  c.policy_lstm = policy_lstm;
  return c;
}

namespace {

struct Probe {
  std::vector<Tensor> images;
  std::vector<Tensor> weights;  // per step, over the actions
  std::vector<double> value_weights;
  std::vector<std::string> tokens{"go", "to", "the", "red", "pillar"};
};

// Loss of one episode prefix. With `grads`, also backpropagates.
double run(const nets::ModelConfig& config, const ParamStore& params, const Probe& probe,
           std::vector<Tensor>* grads) {
  nets::Agent agent(config);
  agent.reset(probe.tokens);
  Graph g;
  BoundParams bound(g, params);
  agent.begin_segment(bound);
  Var loss = g.constant(Tensor::scalar(0.0));
  for (std::size_t t = 0; t < probe.images.size(); ++t) {
    const nets::StepVars v = agent.step(probe.images[t]);
    loss = add(loss, sum(mul(log_softmax(v.logits), g.constant(probe.weights[t]))));
    loss = add(loss, scale(reshape(v.value, {1}), probe.value_weights[t]));
  }
  const double value = loss.value()[0];
  if (grads) {
    g.backward(loss);
    *grads = bound.gradients();
  }
  return value;
}

}  // namespace

gradcheck::OpReport check_model(const nets::ModelConfig& config, std::uint64_t seed, std::size_t steps,
                                std::size_t entries_per_tensor, double tolerance) {
  Rng rng(seed);
  ParamStore params = nets::init_params(config, mix_seed(seed, 1));
  // Zero biases put ReLU inputs exactly on the kink whenever the state is
  // zero (lstm_output starts from h = 0); probe a generic point instead.
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params.value(k).rank() != 1) continue;
    for (double& v : params.value(k).data()) v += uniform(rng, -0.1, 0.1);
  }
  Probe probe;
  for (std::size_t t = 0; t < steps; ++t) {
    probe.images.push_back(random_tensor({3, config.image_h, config.image_w}, rng, 0.0, 1.0));
    probe.weights.push_back(random_tensor({config.action_count}, rng, 0.5, 1.5));
    probe.value_weights.push_back(uniform(rng, 0.5, 1.5));
  }
  std::vector<Tensor> analytic;
  run(config, params, probe, &analytic);

  gradcheck::OpReport report;
  report.name = "model/" + std::string(nets::to_string(config.attention_source)) + "+" +
                std::string(nets::to_string(config.application)) + (config.policy_lstm ? "+policy_lstm" : "");
  report.cases = 1;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& tensor = params.value(k);
    const std::size_t n = std::min(entries_per_tensor, tensor.size());
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = n == tensor.size() ? j : static_cast<std::size_t>(uniform_index(rng, tensor.size()));
      const double orig = tensor[i];
      tensor[i] = orig + gradcheck::kStep;
      const double up = run(config, params, probe, nullptr);
      tensor[i] = orig - gradcheck::kStep;
      const double down = run(config, params, probe, nullptr);
      tensor[i] = orig;
      const double numeric = (up - down) / (2.0 * gradcheck::kStep);
      report.max_rel_error = std::max(report.max_rel_error, gradcheck::relative_error(analytic[k][i], numeric));
      ++report.checked_entries;
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

std::vector<gradcheck::OpReport> check_all_models(std::uint64_t seed) {
  using nets::Application;
  using nets::AttentionSource;
  std::vector<gradcheck::OpReport> out;
  std::uint64_t tag = 0;
  for (auto source : {AttentionSource::static_instruction, AttentionSource::current_frame, AttentionSource::lstm_output,
                      AttentionSource::lstm_cellstate}) {
    for (auto application : {Application::conv1d, Application::hadamard_fc}) {
      out.push_back(check_model(tiny_model(source, application, false), mix_seed(seed, tag++)));
    }
  }
  out.push_back(check_model(tiny_model(AttentionSource::static_instruction, Application::concat, false),
                            mix_seed(seed, tag++)));
  out.push_back(
      check_model(tiny_model(AttentionSource::lstm_cellstate, Application::conv1d, true), mix_seed(seed, tag++)));
  return out;
}

}  // namespace dan::harness
