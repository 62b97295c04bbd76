#pragma once

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Graph is an append-only list of nodes. Leaves hold caller-supplied
// values; every other node records the operation that produced it and a
// backward rule. Because inputs always precede outputs, reverse append
// order is a valid reverse topological order.
//
// Gradients of requires_grad leaves accumulate across backward() calls
// until zero_grad(); intermediate adjoints are scratch and discarded.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dan/tensor.hpp"

namespace dan {

class Graph;

// Lightweight handle to a node on a graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  bool valid() const { return graph != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

struct BackwardContext {
  const Tensor& out;
  const Tensor& grad_out;
  std::span<const Tensor* const> in;
  // nullptr for inputs that do not require gradients
  std::span<Tensor* const> in_grad;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Appends an operation node. `backward` is dropped when no input
  // requires gradients. Throws if `value` contains NaN or Inf.
  Var push(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op_name(Var v) const;
  std::span<const std::size_t> inputs(Var v) const;

  // Accumulated gradient of a leaf; zeros if nothing has flowed yet.
  Tensor grad(Var v) const;

  void backward(Var loss);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    bool leaf = false;
    BackwardFn backward;
    Tensor grad;
  };

  const Node& node(Var v) const;
  Var append(Node node);

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations

enum class ElementwiseKind { sigmoid, tanh, relu, exp, log, square, add, sub, mul, scale };

std::string_view to_string(ElementwiseKind kind);
ElementwiseKind parse_elementwise_kind(std::string_view name);
bool is_binary(ElementwiseKind kind);

// Unary kinds ignore `b`; binary kinds require it with identical shape.
// `factor` is used by `scale` only.
Var elementwise(ElementwiseKind kind, Var a, std::optional<Var> b = std::nullopt, double factor = 1.0);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

// [m x k] . [k x n] -> [m x n]
Var matmul(Var a, Var b);
// weight [m x k], x [k], bias [m] -> [m]
Var linear(Var weight, Var x, Var bias);

// Valid (unpadded) cross-correlation: input [c_in x H x W],
// kernels [c_out x c_in x k x k] -> [c_out x H' x W'].
Var conv2d(Var input, Var kernels, std::size_t stride);
// x [c x H x W] + bias[c] broadcast over each map
Var add_channel_bias(Var x, Var bias);
// sum_c attention[c] * features[c] -> [1 x H x W]
Var conv1d_channels(Var features, Var attention);
// features[c] * attention[c], channel-broadcast Hadamard product
Var channel_scale(Var features, Var attention);

Var softmax(Var logits);
Var log_softmax(Var logits);

Var sum(Var a);
Var reshape(Var a, Shape shape);
Var flatten(Var a);
// Concatenation of the flattened inputs.
Var concat(const std::vector<Var>& parts);
Var slice(Var a, std::size_t offset, std::size_t length);
Var pick(Var a, std::size_t index);
// Row `index` of a matrix, as a vector.
Var row(Var matrix, std::size_t index);

// Reference forward implementations shared with the gradient tooling.
Tensor softmax_values(std::span<const double> logits);

}  // namespace dan
