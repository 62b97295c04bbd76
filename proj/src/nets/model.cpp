#include "dan/nets/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dan/random.hpp"

namespace dan::nets {

std::string_view to_string(AttentionSource s) {
  switch (s) {
    case AttentionSource::static_instruction: return "static_instruction";
    case AttentionSource::current_frame: return "current_frame";
    case AttentionSource::lstm_output: return "lstm_output";
    case AttentionSource::lstm_cellstate: return "lstm_cellstate";
  }
  throw std::invalid_argument("bad attention source");
}

std::string_view to_string(Application a) {
  switch (a) {
    case Application::hadamard_fc: return "hadamard_fc";
    case Application::conv1d: return "conv1d";
    case Application::concat: return "concat";
  }
  throw std::invalid_argument("unknown application kind");
}

AttentionSource parse_attention_source(std::string_view name) {
  for (auto s : {AttentionSource::static_instruction, AttentionSource::current_frame, AttentionSource::lstm_output,
                 AttentionSource::lstm_cellstate}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown attention source '" + std::string(name) + "'");
}

Application parse_application(std::string_view name) {
  for (auto a : {Application::hadamard_fc, Application::conv1d, Application::concat}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown application kind '" + std::string(name) + "'");
}

bool is_recurrent(AttentionSource s) {
  return s == AttentionSource::lstm_output || s == AttentionSource::lstm_cellstate;
}

// ---------------------------------------------------------------------------
// ModelConfig

namespace {

std::size_t conv_out(std::size_t in, const ConvLayer& layer) {
  if (layer.kernel == 0 || layer.stride == 0 || layer.kernel > in) return 0;
  return (in - layer.kernel) / layer.stride + 1;
}

}  // namespace

std::size_t ModelConfig::feat_h() const {
  std::size_t h = image_h;
  for (const auto& layer : conv) h = conv_out(h, layer);
  return h;
}

std::size_t ModelConfig::feat_w() const {
  std::size_t w = image_w;
  for (const auto& layer : conv) w = conv_out(w, layer);
  return w;
}

void ModelConfig::validate() const {
  std::size_t h = image_h, w = image_w;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (conv[i].channels == 0) throw std::invalid_argument("conv layer " + std::to_string(i + 1) + " has no channels");
    h = conv_out(h, conv[i]);
    w = conv_out(w, conv[i]);
    if (h == 0 || w == 0) {
      throw std::invalid_argument("conv layer " + std::to_string(i + 1) + " does not fit a " + std::to_string(image_h) +
                                  "x" + std::to_string(image_w) + " image");
    }
  }
  if (embed == 0 || l == 0 || policy_hidden == 0) throw std::invalid_argument("model sizes must be positive");
  if (action_count != 3) throw std::invalid_argument("action_count must be 3");
  if (vocab.empty() || vocab.front() != kUnknownToken) {
    throw std::invalid_argument("vocabulary must start with the unknown token");
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "image=" << image_h << 'x' << image_w;
  for (const auto& c : conv) os << ";conv=" << c.channels << '/' << c.kernel << '/' << c.stride;
  os << ";embed=" << embed << ";l=" << l << ";source=" << to_string(attention_source)
     << ";application=" << to_string(application) << ";policy_hidden=" << policy_hidden
     << ";policy_lstm=" << policy_lstm << ";forget_gate_sees_input=" << forget_gate_sees_input
     << ";actions=" << action_count << ";vocab=";
  for (const auto& w : vocab) os << w << ',';
  return os.str();
}

std::uint64_t ModelConfig::digest() const {
  // FNV-1a, 64 bit
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t ModelConfig::token_id(std::string_view word) const {
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    if (vocab[i] == word) return i;
  }
  return 0;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.image_h = 168;
  c.image_w = 300;
  c.conv = {{{128, 8, 4}, {64, 4, 2}, {64, 4, 2}}};
  c.l = 256;
  c.policy_hidden = 256;
  return c;
}

std::vector<std::string> make_vocab(std::span<const std::string> words) {
  std::vector<std::string> vocab{std::string(kUnknownToken)};
  for (const auto& w : words) {
    if (w == kUnknownToken) continue;
    bool seen = false;
    for (const auto& v : vocab) seen = seen || v == w;
    if (!seen) vocab.push_back(w);
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t d = config.d(), S = config.state_size(), l = config.l, e = config.embed;

  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < config.conv.size(); ++i) {
    const auto& c = config.conv[i];
    const std::string prefix = "conv" + std::to_string(i + 1);
    out.push_back({prefix + ".weight", {c.channels, in_ch, c.kernel, c.kernel}});
    out.push_back({prefix + ".bias", {c.channels}});
    in_ch = c.channels;
  }

  out.push_back({"embedding", {config.vocab.size(), e}});
  out.push_back({"gru.w_r", {l, e + l}});
  out.push_back({"gru.b_r", {l}});
  out.push_back({"gru.w_z", {l, e + l}});
  out.push_back({"gru.b_z", {l}});
  out.push_back({"gru.w_nx", {l, e}});
  out.push_back({"gru.b_n", {l}});
  out.push_back({"gru.w_nh", {l, l}});
  out.push_back({"gru.b_nh", {l}});

  if (config.application != Application::concat) {
    switch (config.attention_source) {
      case AttentionSource::static_instruction:
        out.push_back({"attn.gate.weight", {d, l}});
        out.push_back({"attn.gate.bias", {d}});
        break;
      case AttentionSource::current_frame:
        out.push_back({"attn.gate.weight", {d, l + d * S}});
        out.push_back({"attn.gate.bias", {d}});
        break;
      case AttentionSource::lstm_output:
      case AttentionSource::lstm_cellstate: {
        const std::size_t in = d + S + l;
        out.push_back({"attn.w_f", {d, config.forget_gate_sees_input ? in : d}});
        out.push_back({"attn.b_f", {d}});
        out.push_back({"attn.w_i", {d, in}});
        out.push_back({"attn.b_i", {d}});
        out.push_back({"attn.w_c", {d, in}});
        out.push_back({"attn.b_c", {d}});
        out.push_back({"attn.w_o", {d, in}});
        out.push_back({"attn.b_o", {d}});
        break;
      }
    }
  }

  if (config.application == Application::hadamard_fc) {
    out.push_back({"fuse.weight", {S, d * S}});
    out.push_back({"fuse.bias", {S}});
  } else if (config.application == Application::concat) {
    out.push_back({"fuse.weight", {S, d * S + l}});
    out.push_back({"fuse.bias", {S}});
  }

  const std::size_t P = config.policy_hidden;
  out.push_back({"policy.trunk.weight", {P, S}});
  out.push_back({"policy.trunk.bias", {P}});
  if (config.policy_lstm) {
    for (const char* g : {"f", "i", "c", "o"}) {
      out.push_back({std::string("policy.lstm.w_") + g, {P, 2 * P}});
      out.push_back({std::string("policy.lstm.b_") + g, {P}});
    }
  }
  out.push_back({"policy.actor.weight", {config.action_count, P}});
  out.push_back({"policy.actor.bias", {config.action_count}});
  out.push_back({"policy.critic.weight", {1, P}});
  out.push_back({"policy.critic.bias", {1}});
  return out;
}

std::size_t count_parameters(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : param_layout(config)) n += shape_size(shape);
  return n;
}

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  for (auto& [name, shape] : param_layout(config)) {
    if (shape.size() == 1) {
      const double fill = name == "attn.b_f" ? 1.0 : 0.0;
      store.add(name, Tensor(shape, fill));
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const bool feeds_relu = name.starts_with("conv") || name == "policy.trunk.weight";
    if (feeds_relu) bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    if (name == "policy.actor.weight") bound *= 0.1;
    store.add(name, random_tensor(shape, rng, -bound, bound));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Forward

Var encode_image(const BoundParams& p, const ModelConfig& config, Var image) {
  const Shape expected{3, config.image_h, config.image_w};
  if (image.shape() != expected) {
    throw std::invalid_argument("encode_image: expected image " + shape_string(expected) + ", got " +
                                shape_string(image.shape()));
  }
  Var x = image;
  for (std::size_t i = 0; i < config.conv.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    x = relu(add_channel_bias(conv2d(x, p[prefix + ".weight"], config.conv[i].stride), p[prefix + ".bias"]));
  }
  return x;
}

Var encode_instruction(const BoundParams& p, const ModelConfig& config, std::span<const std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_instruction: empty token sequence");
  Graph& g = p.graph();
  Var h = g.constant(Tensor({config.l}));
  const Var emb = p["embedding"];
  const Var w_r = p["gru.w_r"], b_r = p["gru.b_r"], w_z = p["gru.w_z"], b_z = p["gru.b_z"];
  const Var w_nx = p["gru.w_nx"], b_n = p["gru.b_n"], w_nh = p["gru.w_nh"], b_nh = p["gru.b_nh"];
  for (const auto& tok : tokens) {
    Var x = row(emb, config.token_id(tok));
    Var xh = concat({x, h});
    Var r = sigmoid(linear(w_r, xh, b_r));
    Var z = sigmoid(linear(w_z, xh, b_z));
    Var n = tanh(add(linear(w_nx, x, b_n), mul(r, linear(w_nh, h, b_nh))));
    // (1 - z) * n + z * h
    h = add(n, mul(z, sub(h, n)));
  }
  return h;
}

namespace {

struct LstmWeights {
  Var w_f, b_f, w_i, b_i, w_c, b_c, w_o, b_o;
};

LstmWeights lstm_weights(const BoundParams& p, const std::string& prefix) {
  return {p[prefix + "w_f"], p[prefix + "b_f"], p[prefix + "w_i"], p[prefix + "b_i"],
          p[prefix + "w_c"], p[prefix + "b_c"], p[prefix + "w_o"], p[prefix + "b_o"]};
}

std::pair<Var, Var> lstm_cell(const LstmWeights& w, Var h_prev, Var c_prev, Var x, bool forget_sees_input) {
  Var hx = concat({h_prev, x});
  Var f = sigmoid(linear(w.w_f, forget_sees_input ? hx : h_prev, w.b_f));
  Var i = sigmoid(linear(w.w_i, hx, w.b_i));
  Var candidate = tanh(linear(w.w_c, hx, w.b_c));
  Var c = add(mul(f, c_prev), mul(i, candidate));
  Var o = sigmoid(linear(w.w_o, hx, w.b_o));
  Var h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace

AttentionState attention_step(const BoundParams& p, const ModelConfig& config, const AttentionState& prev, Var x_t) {
  auto [h, c] = lstm_cell(lstm_weights(p, "attn."), prev.h, prev.c, x_t, config.forget_gate_sees_input);
  return {h, c};
}

Var apply_attention(Application application, const BoundParams& p, const ModelConfig& config, Var attention,
                    Var features) {
  (void)config;
  switch (application) {
    case Application::conv1d:
      return flatten(conv1d_channels(features, attention));
    case Application::hadamard_fc:
      return linear(p["fuse.weight"], flatten(channel_scale(features, attention)), p["fuse.bias"]);
    case Application::concat:
      break;
  }
  throw std::invalid_argument("apply_attention: application '" + std::string(to_string(application)) +
                              "' does not apply an attention vector");
}

AttentionResult compute_attention(AttentionSource source, Application application, const BoundParams& p,
                                  const ModelConfig& config, Var x_l, Var features,
                                  const std::optional<AttentionState>& prev) {
  AttentionResult r;
  switch (source) {
    case AttentionSource::static_instruction:
      r.attention = sigmoid(linear(p["attn.gate.weight"], x_l, p["attn.gate.bias"]));
      break;
    case AttentionSource::current_frame:
      r.attention = sigmoid(linear(p["attn.gate.weight"], concat({x_l, features}), p["attn.gate.bias"]));
      break;
    case AttentionSource::lstm_output:
    case AttentionSource::lstm_cellstate:
      if (!prev) throw std::invalid_argument("compute_attention: recurrent source needs the previous state");
      r.attention = source == AttentionSource::lstm_output ? prev->h : prev->c;
      break;
  }
  r.state = apply_attention(application, p, config, r.attention, features);
  if (is_recurrent(source)) {
    r.next = attention_step(p, config, *prev, concat({r.state, x_l}));
  } else if (prev) {
    r.next = *prev;
  }
  return r;
}

Var concat_fusion(const BoundParams& p, const ModelConfig& config, Var x_l, Var features) {
  (void)config;
  return linear(p["fuse.weight"], concat({features, x_l}), p["fuse.bias"]);
}

PolicyOutput policy_forward(const BoundParams& p, const ModelConfig& config, Var state,
                            const std::optional<PolicyState>& prev) {
  if (state.size() != config.state_size()) {
    throw std::invalid_argument("policy_forward: state length " + std::to_string(state.size()) + ", expected " +
                                std::to_string(config.state_size()));
  }
  PolicyOutput out;
  Var hidden = relu(linear(p["policy.trunk.weight"], state, p["policy.trunk.bias"]));
  if (config.policy_lstm) {
    Graph& g = p.graph();
    PolicyState ps = prev ? *prev
                          : PolicyState{g.constant(Tensor({config.policy_hidden})),
                                        g.constant(Tensor({config.policy_hidden}))};
    auto [h, c] = lstm_cell(lstm_weights(p, "policy.lstm."), ps.h, ps.c, hidden, true);
    out.next = PolicyState{h, c};
    hidden = h;
  }
  out.logits = linear(p["policy.actor.weight"], hidden, p["policy.actor.bias"]);
  out.probs = softmax(out.logits);
  out.value = linear(p["policy.critic.weight"], hidden, p["policy.critic.bias"]);
  return out;
}

Var attended_map(Application application, Var attention, Var features) {
  Graph& g = *features.graph;
  const std::size_t d = features.shape()[0];
  if (application == Application::conv1d) return conv1d_channels(features, attention);
  Var scaled = application == Application::hadamard_fc ? channel_scale(features, attention) : features;
  return conv1d_channels(scaled, g.constant(Tensor({d}, 1.0 / static_cast<double>(d))));
}

}  // namespace dan::nets
