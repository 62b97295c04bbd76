#pragma once

// Network components: image CNN, instruction GRU, attention generators,
// fusion of attention with image features, and actor-critic heads.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dan/autodiff.hpp"
#include "dan/params.hpp"

namespace dan::nets {

enum class AttentionSource { static_instruction, current_frame, lstm_output, lstm_cellstate };
// concat ignores the attention source and fuses by concatenation + FC.
enum class Application { hadamard_fc, conv1d, concat };

std::string_view to_string(AttentionSource s);
std::string_view to_string(Application a);
AttentionSource parse_attention_source(std::string_view name);
Application parse_application(std::string_view name);
bool is_recurrent(AttentionSource s);

struct ConvLayer {
  std::size_t channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

inline constexpr std::string_view kUnknownToken = "<unk>";

struct ModelConfig {
  std::size_t image_h = 48;
  std::size_t image_w = 64;
  std::array<ConvLayer, 3> conv{{{16, 4, 2}, {16, 3, 2}, {16, 3, 2}}};
  std::size_t embed = 32;          // token embedding width
  std::size_t l = 64;              // instruction encoding (GRU hidden) size
  std::vector<std::string> vocab;  // vocab[0] is kUnknownToken
  AttentionSource attention_source = AttentionSource::lstm_cellstate;
  Application application = Application::conv1d;
  std::size_t policy_hidden = 64;
  bool policy_lstm = false;
  // false reproduces a forget gate that sees only h_{t-1}
  bool forget_gate_sees_input = true;
  std::size_t action_count = 3;

  std::size_t d() const { return conv[2].channels; }
  std::size_t feat_h() const;
  std::size_t feat_w() const;
  std::size_t state_size() const { return feat_h() * feat_w(); }

  // Throws std::invalid_argument on inconsistent geometry or sizes.
  void validate() const;
  // Stable textual form covering every field; basis of the digest.
  std::string canonical() const;
  std::uint64_t digest() const;

  std::size_t token_id(std::string_view word) const;

  // Published geometry: 168x300 input, 64 final channels of 8x17, GRU 256.
  static ModelConfig paper();
};

// Builds a vocabulary with the unknown token first.
std::vector<std::string> make_vocab(std::span<const std::string> words);

// ---------------------------------------------------------------------------
// Parameters

// Weights uniform in [-b, b] with b = 1/sqrt(fan_in); layers followed by a
// ReLU use b = sqrt(6/fan_in) and the actor head b/10. Biases are zero
// except the attention LSTM forget-gate bias, which starts at +1.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

// Names and shapes in declaration order, without allocating values.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config);
std::size_t count_parameters(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Forward components. All operate on parameters bound to one graph.

struct AttentionState {
  Var h;  // LSTM output h_t
  Var c;  // cell state C_t, the attention vector
};

// Three conv2d + ReLU stages -> [d x feat_h x feat_w].
Var encode_image(const BoundParams& p, const ModelConfig& config, Var image);

// Final GRU hidden state over the embedded tokens -> [l].
Var encode_instruction(const BoundParams& p, const ModelConfig& config, std::span<const std::string> tokens);

// One standard LSTM step with cell size d over input x_t.
AttentionState attention_step(const BoundParams& p, const ModelConfig& config, const AttentionState& prev, Var x_t);

// Fuses an attention vector with image features into the policy state
// vector of length feat_h * feat_w.
Var apply_attention(Application application, const BoundParams& p, const ModelConfig& config, Var attention,
                    Var features);

struct AttentionResult {
  Var attention;  // applied at this step
  Var state;      // policy input
  AttentionState next;
};

// For recurrent sources the attention applied now is the one produced on
// the previous step; the recurrent state then advances on [state, x_L].
AttentionResult compute_attention(AttentionSource source, Application application, const BoundParams& p,
                                  const ModelConfig& config, Var x_l, Var features,
                                  const std::optional<AttentionState>& prev);

Var concat_fusion(const BoundParams& p, const ModelConfig& config, Var x_l, Var features);

// Optional recurrent core of the policy.
struct PolicyState {
  Var h;
  Var c;
};

struct PolicyOutput {
  Var logits;
  Var probs;
  Var value;  // scalar
  std::optional<PolicyState> next;
};

PolicyOutput policy_forward(const BoundParams& p, const ModelConfig& config, Var state,
                            const std::optional<PolicyState>& prev = std::nullopt);

// Spatial map to visualise: the conv1d attended map, or the channel mean of
// the attention-scaled features for other applications.
Var attended_map(Application application, Var attention, Var features);

}  // namespace dan::nets
