#include "dan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dan {

const Tensor& Var::value() const {
  if (!graph) throw std::logic_error("value() on an unbound Var");
  return graph->value(*this);
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::append(Node node) {
  if (!node.value.all_finite()) {
    throw std::domain_error(std::string("non-finite value produced by op '") + std::string(node.op) + "'");
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  n.leaf = true;
  return append(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = true;
  return append(std::move(n));
}

Var Graph::push(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph != this) throw std::invalid_argument(std::string("op '") + std::string(op) + "' mixes graphs");
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return append(std::move(n));
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw std::invalid_argument("Var does not belong to this graph");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }
std::string_view Graph::op_name(Var v) const { return node(v).op; }
std::span<const std::size_t> Graph::inputs(Var v) const { return node(v).inputs; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) {
    if (n.leaf) n.grad = Tensor();
  }
}

void Graph::backward(Var loss) {
  if (loss.graph != this || loss.id >= nodes_.size()) throw std::invalid_argument("backward: loss is not on this graph");
  const Node& ln = nodes_[loss.id];
  if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_string(ln.value.shape()));
  if (!ln.requires_grad) return;

  std::vector<Tensor> adj(loss.id + 1);
  adj[loss.id] = Tensor(ln.value.shape(), 1.0);

  std::vector<const Tensor*> in;
  std::vector<Tensor*> in_grad;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (adj[i].empty() || !n.requires_grad) continue;
    if (n.leaf) {
      if (n.grad.empty()) {
        n.grad = std::move(adj[i]);
      } else {
        n.grad.accumulate(adj[i]);
      }
      adj[i] = Tensor();
      continue;
    }
    in.clear();
    in_grad.clear();
    for (std::size_t id : n.inputs) {
      in.push_back(&nodes_[id].value);
      if (nodes_[id].requires_grad) {
        if (adj[id].empty()) adj[id] = Tensor(nodes_[id].value.shape());
        in_grad.push_back(&adj[id]);
      } else {
        in_grad.push_back(nullptr);
      }
    }
    n.backward(BackwardContext{n.value, adj[i], in, in_grad});
    adj[i] = Tensor();
  }
}

// ---------------------------------------------------------------------------
// Elementwise

std::string_view to_string(ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::sigmoid: return "sigmoid";
    case ElementwiseKind::tanh: return "tanh";
    case ElementwiseKind::relu: return "relu";
    case ElementwiseKind::exp: return "exp";
    case ElementwiseKind::log: return "log";
    case ElementwiseKind::square: return "square";
    case ElementwiseKind::add: return "add";
    case ElementwiseKind::sub: return "sub";
    case ElementwiseKind::mul: return "mul";
    case ElementwiseKind::scale: return "scale";
  }
  throw std::invalid_argument("unknown elementwise kind");
}

ElementwiseKind parse_elementwise_kind(std::string_view name) {
  for (auto k : {ElementwiseKind::sigmoid, ElementwiseKind::tanh, ElementwiseKind::relu, ElementwiseKind::exp,
                 ElementwiseKind::log, ElementwiseKind::square, ElementwiseKind::add, ElementwiseKind::sub,
                 ElementwiseKind::mul, ElementwiseKind::scale}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown elementwise kind '" + std::string(name) + "'");
}

bool is_binary(ElementwiseKind kind) {
  return kind == ElementwiseKind::add || kind == ElementwiseKind::sub || kind == ElementwiseKind::mul;
}

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var unary(ElementwiseKind kind, Var a, double factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  auto o = out.data();
  auto xi = x.data();
  switch (kind) {
    case ElementwiseKind::sigmoid:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = sigmoid_scalar(xi[i]);
      return a.graph->push("sigmoid", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = c.out[i];
          g[i] += c.grad_out[i] * y * (1.0 - y);
        }
      });
    case ElementwiseKind::tanh:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(xi[i]);
      return a.graph->push("tanh", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = c.out[i];
          g[i] += c.grad_out[i] * (1.0 - y * y);
        }
      });
    case ElementwiseKind::relu:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = xi[i] > 0.0 ? xi[i] : 0.0;
      return a.graph->push("relu", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        const Tensor& x = *c.in[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) g[i] += c.grad_out[i];
        }
      });
    case ElementwiseKind::exp:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::exp(xi[i]);
      return a.graph->push("exp", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c.grad_out[i] * c.out[i];
      });
    case ElementwiseKind::log:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::log(xi[i]);
      return a.graph->push("log", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        const Tensor& x = *c.in[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c.grad_out[i] / x[i];
      });
    case ElementwiseKind::square:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = xi[i] * xi[i];
      return a.graph->push("square", {a}, std::move(out), [](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        const Tensor& x = *c.in[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * c.grad_out[i];
      });
    case ElementwiseKind::scale:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * xi[i];
      return a.graph->push("scale", {a}, std::move(out), [factor](const BackwardContext& c) {
        auto g = c.in_grad[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * c.grad_out[i];
      });
    default:
      break;
  }
  throw std::invalid_argument("elementwise: '" + std::string(to_string(kind)) + "' is not unary");
}

Var binary(ElementwiseKind kind, Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) {
    throw std::invalid_argument("elementwise " + std::string(to_string(kind)) + ": shape mismatch " +
                                shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  Tensor out(x.shape());
  auto o = out.data();
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
      return a.graph->push("add", {a, b}, std::move(out), [](const BackwardContext& c) {
        for (int k = 0; k < 2; ++k) {
          if (c.in_grad[k]) c.in_grad[k]->accumulate(c.grad_out);
        }
      });
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
      return a.graph->push("sub", {a, b}, std::move(out), [](const BackwardContext& c) {
        if (c.in_grad[0]) c.in_grad[0]->accumulate(c.grad_out);
        if (c.in_grad[1]) c.in_grad[1]->accumulate(c.grad_out, -1.0);
      });
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
      return a.graph->push("mul", {a, b}, std::move(out), [](const BackwardContext& c) {
        for (int k = 0; k < 2; ++k) {
          if (!c.in_grad[k]) continue;
          auto g = c.in_grad[k]->data();
          const Tensor& other = *c.in[1 - k];
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += c.grad_out[i] * other[i];
        }
      });
    default:
      break;
  }
  throw std::invalid_argument("elementwise: '" + std::string(to_string(kind)) + "' is not binary");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                                shape_string(t.shape()));
  }
}

}  // namespace

Var elementwise(ElementwiseKind kind, Var a, std::optional<Var> b, double factor) {
  switch (kind) {
    case ElementwiseKind::sigmoid:
    case ElementwiseKind::tanh:
    case ElementwiseKind::relu:
    case ElementwiseKind::exp:
    case ElementwiseKind::log:
    case ElementwiseKind::square:
    case ElementwiseKind::scale:
      return unary(kind, a, factor);
    case ElementwiseKind::add:
    case ElementwiseKind::sub:
    case ElementwiseKind::mul:
      if (!b) throw std::invalid_argument("elementwise " + std::string(to_string(kind)) + " needs two operands");
      return binary(kind, a, *b);
  }
  throw std::invalid_argument("unknown elementwise kind");
}

Var sigmoid(Var a) { return elementwise(ElementwiseKind::sigmoid, a); }
Var tanh(Var a) { return elementwise(ElementwiseKind::tanh, a); }
Var relu(Var a) { return elementwise(ElementwiseKind::relu, a); }
Var exp(Var a) { return elementwise(ElementwiseKind::exp, a); }
Var log(Var a) { return elementwise(ElementwiseKind::log, a); }
Var square(Var a) { return elementwise(ElementwiseKind::square, a); }
Var add(Var a, Var b) { return elementwise(ElementwiseKind::add, a, b); }
Var sub(Var a, Var b) { return elementwise(ElementwiseKind::sub, a, b); }
Var mul(Var a, Var b) { return elementwise(ElementwiseKind::mul, a, b); }
Var scale(Var a, double factor) { return elementwise(ElementwiseKind::scale, a, std::nullopt, factor); }

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "matmul", "left operand");
  require_rank(y, 2, "matmul", "right operand");
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions differ " + shape_string(x.shape()) + " . " +
                                shape_string(y.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += xv * y[p * n + j];
    }
  }
  return a.graph->push("matmul", {a, b}, std::move(out), [m, k, n](const BackwardContext& c) {
    const Tensor& x = *c.in[0];
    const Tensor& y = *c.in[1];
    const Tensor& g = c.grad_out;
    if (Tensor* gx = c.in_grad[0]) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
          (*gx)[i * k + p] += acc;
        }
      }
    }
    if (Tensor* gy = c.in_grad[1]) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gy)[p * n + j] += xv * g[i * n + j];
        }
      }
    }
  });
}

Var linear(Var weight, Var x, Var bias) {
  const Tensor& w = weight.value();
  const Tensor& v = x.value();
  const Tensor& b = bias.value();
  require_rank(w, 2, "linear", "weight");
  const std::size_t m = w.dim(0), k = w.dim(1);
  if (v.size() != k || b.size() != m) {
    throw std::invalid_argument("linear: weight " + shape_string(w.shape()) + " with input " + shape_string(v.shape()) +
                                " and bias " + shape_string(b.shape()));
  }
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b[i];
    const double* wr = w.data().data() + i * k;
    for (std::size_t p = 0; p < k; ++p) acc += wr[p] * v[p];
    out[i] = acc;
  }
  return weight.graph->push("linear", {weight, x, bias}, std::move(out), [m, k](const BackwardContext& c) {
    const Tensor& w = *c.in[0];
    const Tensor& v = *c.in[1];
    const Tensor& g = c.grad_out;
    if (Tensor* gw = c.in_grad[0]) {
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* row = gw->data().data() + i * k;
        for (std::size_t p = 0; p < k; ++p) row[p] += gi * v[p];
      }
    }
    if (Tensor* gv = c.in_grad[1]) {
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* wr = w.data().data() + i * k;
        for (std::size_t p = 0; p < k; ++p) (*gv)[p] += gi * wr[p];
      }
    }
    if (Tensor* gb = c.in_grad[2]) gb->accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Convolutions

Var conv2d(Var input, Var kernels, std::size_t stride) {
  const Tensor& in = input.value();
  const Tensor& ker = kernels.value();
  require_rank(in, 3, "conv2d", "input");
  require_rank(ker, 4, "conv2d", "kernels");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t cout = ker.dim(0), kh = ker.dim(2), kw = ker.dim(3);
  if (ker.dim(1) != cin) {
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(ker.dim(1)) + " input channels, got " +
                                std::to_string(cin));
  }
  if (kh > h || kw > w) {
    throw std::invalid_argument("conv2d: kernel " + shape_string(ker.shape()) + " larger than input " +
                                shape_string(in.shape()));
  }
  const std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::size_t plane = oh * ow, taps = cin * kh * kw;
  // cols[(c, ky, kx)] holds the input values that tap meets at every output
  // position, so all inner loops below run over contiguous memory.
  std::vector<double> cols(taps * plane);
  {
    const double* ip = in.data().data();
    double* cp = cols.data();
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          for (std::size_t y = 0; y < oh; ++y) {
            const double* irow = ip + (c * h + y * stride + ky) * w + kx;
            for (std::size_t x = 0; x < ow; ++x) *cp++ = irow[x * stride];
          }
        }
      }
    }
  }
  Tensor out({cout, oh, ow});
  const double* kp = ker.data().data();
  double* op = out.data().data();
  // Each output accumulates its terms in (c, ky, kx) order starting from 0.
  for (std::size_t o = 0; o < cout; ++o) {
    double* omap = op + o * plane;
    for (std::size_t t = 0; t < taps; ++t) {
      const double kv = kp[o * taps + t];
      const double* col = cols.data() + t * plane;
      for (std::size_t i = 0; i < plane; ++i) omap[i] += kv * col[i];
    }
  }
  return input.graph->push(
      "conv2d", {input, kernels}, std::move(out),
      [cin, h, w, cout, kh, kw, oh, ow, stride, plane, taps, cols = std::move(cols)](const BackwardContext& c) {
        const double* kp = c.in[1]->data().data();
        const double* gp = c.grad_out.data().data();
        if (Tensor* gk = c.in_grad[1]) {
          double* gkp = gk->data().data();
          for (std::size_t o = 0; o < cout; ++o) {
            const double* gmap = gp + o * plane;
            for (std::size_t t = 0; t < taps; ++t) {
              const double* col = cols.data() + t * plane;
              double acc[4] = {0.0, 0.0, 0.0, 0.0};
              std::size_t i = 0;
              for (; i + 4 <= plane; i += 4) {
                acc[0] += gmap[i] * col[i];
                acc[1] += gmap[i + 1] * col[i + 1];
                acc[2] += gmap[i + 2] * col[i + 2];
                acc[3] += gmap[i + 3] * col[i + 3];
              }
              for (; i < plane; ++i) acc[0] += gmap[i] * col[i];
              gkp[o * taps + t] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
            }
          }
        }
        if (Tensor* gi = c.in_grad[0]) {
          std::vector<double> gcols(taps * plane, 0.0);
          for (std::size_t o = 0; o < cout; ++o) {
            const double* gmap = gp + o * plane;
            for (std::size_t t = 0; t < taps; ++t) {
              const double kv = kp[o * taps + t];
              double* gcol = gcols.data() + t * plane;
              for (std::size_t i = 0; i < plane; ++i) gcol[i] += kv * gmap[i];
            }
          }
          double* gip = gi->data().data();
          const double* gcp = gcols.data();
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                for (std::size_t y = 0; y < oh; ++y) {
                  double* irow = gip + (ci * h + y * stride + ky) * w + kx;
                  for (std::size_t x = 0; x < ow; ++x) irow[x * stride] += *gcp++;
                }
              }
            }
          }
        }
      });
}

Var add_channel_bias(Var x, Var bias) {
  const Tensor& in = x.value();
  const Tensor& b = bias.value();
  require_rank(in, 3, "add_channel_bias", "input");
  const std::size_t ch = in.dim(0), plane = in.dim(1) * in.dim(2);
  if (b.size() != ch) throw std::invalid_argument("add_channel_bias: bias length differs from channel count");
  Tensor out = in;
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += b[c];
  }
  return x.graph->push("add_channel_bias", {x, bias}, std::move(out), [ch, plane](const BackwardContext& c) {
    if (c.in_grad[0]) c.in_grad[0]->accumulate(c.grad_out);
    if (Tensor* gb = c.in_grad[1]) {
      for (std::size_t k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += c.grad_out[k * plane + i];
        (*gb)[k] += acc;
      }
    }
  });
}

Var conv1d_channels(Var features, Var attention) {
  const Tensor& f = features.value();
  const Tensor& a = attention.value();
  require_rank(f, 3, "conv1d_channels", "features");
  const std::size_t d = f.dim(0), fh = f.dim(1), fw = f.dim(2), plane = fh * fw;
  if (a.size() != d) {
    throw std::invalid_argument("conv1d_channels: attention length " + std::to_string(a.size()) +
                                " differs from channel count " + std::to_string(d));
  }
  Tensor out({1, fh, fw});
  for (std::size_t c = 0; c < d; ++c) {
    const double ac = a[c];
    for (std::size_t i = 0; i < plane; ++i) out[i] += ac * f[c * plane + i];
  }
  return features.graph->push("conv1d_channels", {features, attention}, std::move(out), [d, plane](const BackwardContext& c) {
    const Tensor& f = *c.in[0];
    const Tensor& a = *c.in[1];
    const Tensor& g = c.grad_out;
    if (Tensor* gf = c.in_grad[0]) {
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t i = 0; i < plane; ++i) (*gf)[k * plane + i] += a[k] * g[i];
      }
    }
    if (Tensor* ga = c.in_grad[1]) {
      for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[i] * f[k * plane + i];
        (*ga)[k] += acc;
      }
    }
  });
}

Var channel_scale(Var features, Var attention) {
  const Tensor& f = features.value();
  const Tensor& a = attention.value();
  require_rank(f, 3, "channel_scale", "features");
  const std::size_t d = f.dim(0), plane = f.dim(1) * f.dim(2);
  if (a.size() != d) throw std::invalid_argument("channel_scale: attention length differs from channel count");
  Tensor out(f.shape());
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = a[c] * f[c * plane + i];
  }
  return features.graph->push("channel_scale", {features, attention}, std::move(out), [d, plane](const BackwardContext& c) {
    const Tensor& f = *c.in[0];
    const Tensor& a = *c.in[1];
    const Tensor& g = c.grad_out;
    if (Tensor* gf = c.in_grad[0]) {
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t i = 0; i < plane; ++i) (*gf)[k * plane + i] += a[k] * g[k * plane + i];
      }
    }
    if (Tensor* ga = c.in_grad[1]) {
      for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[k * plane + i] * f[k * plane + i];
        (*ga)[k] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax family

Tensor softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Tensor out({logits.size()});
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
  return out;
}

Var softmax(Var logits) {
  Tensor out = softmax_values(logits.value().data()).reshaped(logits.shape());
  return logits.graph->push("softmax", {logits}, std::move(out), [](const BackwardContext& c) {
    const Tensor& p = c.out;
    const Tensor& g = c.grad_out;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
    auto gi = c.in_grad[0]->data();
    for (std::size_t i = 0; i < p.size(); ++i) gi[i] += p[i] * (g[i] - dot);
  });
}

Var log_softmax(Var logits) {
  const Tensor& x = logits.value();
  const double mx = *std::max_element(x.data().begin(), x.data().end());
  double total = 0.0;
  for (double v : x.data()) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return logits.graph->push("log_softmax", {logits}, std::move(out), [](const BackwardContext& c) {
    const Tensor& g = c.grad_out;
    double gsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gsum += g[i];
    auto gi = c.in_grad[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] - std::exp(c.out[i]) * gsum;
  });
}

// ---------------------------------------------------------------------------
// Structural

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph->push("sum", {a}, Tensor::scalar(total), [](const BackwardContext& c) {
    const double g = c.grad_out[0];
    for (double& v : c.in_grad[0]->data()) v += g;
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph->push("reshape", {a}, std::move(out), [](const BackwardContext& c) {
    auto gi = c.in_grad[0]->data();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += c.grad_out[i];
  });
}

Var flatten(Var a) { return reshape(a, {a.size()}); }

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<double> data;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
    sizes.push_back(d.size());
  }
  return parts.front().graph->push("concat", parts, Tensor::vector(std::move(data)), [sizes](const BackwardContext& c) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (Tensor* gi = c.in_grad[k]) {
        for (std::size_t i = 0; i < sizes[k]; ++i) (*gi)[i] += c.grad_out[off + i];
      }
      off += sizes[k];
    }
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& x = a.value();
  if (length == 0 || offset + length > x.size()) {
    throw std::invalid_argument("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                                ") outside tensor of size " + std::to_string(x.size()));
  }
  std::vector<double> data(x.data().begin() + offset, x.data().begin() + offset + length);
  return a.graph->push("slice", {a}, Tensor::vector(std::move(data)), [offset, length](const BackwardContext& c) {
    for (std::size_t i = 0; i < length; ++i) (*c.in_grad[0])[offset + i] += c.grad_out[i];
  });
}

Var pick(Var a, std::size_t index) { return slice(a, index, 1); }

Var row(Var matrix, std::size_t index) {
  const Tensor& m = matrix.value();
  require_rank(m, 2, "row", "input");
  if (index >= m.dim(0)) throw std::out_of_range("row: index " + std::to_string(index) + " out of range");
  const std::size_t cols = m.dim(1);
  std::vector<double> data(m.data().begin() + index * cols, m.data().begin() + (index + 1) * cols);
  return matrix.graph->push("row", {matrix}, Tensor::vector(std::move(data)), [index, cols](const BackwardContext& c) {
    for (std::size_t i = 0; i < cols; ++i) (*c.in_grad[0])[index * cols + i] += c.grad_out[i];
  });
}

}  // namespace dan
