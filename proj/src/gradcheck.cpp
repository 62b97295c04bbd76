#include "dan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dan::gradcheck {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

// Values bounded away from zero, for ops with a kink at the origin.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = uniform(rng, 0.1, 1.0);
    v = (rng() & 1) ? mag : -mag;
  }
  return t;
}

OpSpec unary_spec(ElementwiseKind kind, double lo, double hi) {
  return {std::string(to_string(kind)),
          [kind, lo, hi](Rng& rng) {
            Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
            if (kind == ElementwiseKind::relu) return std::vector<Tensor>{away_from_zero(s, rng)};
            return std::vector<Tensor>{random_tensor(s, rng, lo, hi)};
          },
          [kind](const std::vector<Var>& in) { return elementwise(kind, in[0], std::nullopt, 1.7); }};
}

OpSpec binary_spec(ElementwiseKind kind) {
  return {std::string(to_string(kind)),
          [](Rng& rng) {
            Shape s{dim(rng, 1, 4), dim(rng, 1, 4)};
            return std::vector<Tensor>{random_tensor(s, rng), random_tensor(s, rng)};
          },
          [kind](const std::vector<Var>& in) { return elementwise(kind, in[0], in[1]); }};
}

double probe(const OpSpec& spec, const std::vector<Tensor>& inputs, const Tensor& weights) {
  Graph g;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(g.constant(t));
  Var out = spec.apply(vars);
  const Tensor& v = out.value();
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += weights[i] * v[i];
  return total;
}

}  // namespace

std::vector<OpSpec> standard_ops() {
  std::vector<OpSpec> ops;
  ops.push_back(unary_spec(ElementwiseKind::sigmoid, -3, 3));
  ops.push_back(unary_spec(ElementwiseKind::tanh, -2, 2));
  ops.push_back(unary_spec(ElementwiseKind::relu, -1, 1));
  ops.push_back(unary_spec(ElementwiseKind::exp, -2, 2));
  ops.push_back(unary_spec(ElementwiseKind::log, 0.2, 3));
  ops.push_back(unary_spec(ElementwiseKind::square, -2, 2));
  ops.push_back(unary_spec(ElementwiseKind::scale, -2, 2));
  ops.push_back(binary_spec(ElementwiseKind::add));
  ops.push_back(binary_spec(ElementwiseKind::sub));
  ops.push_back(binary_spec(ElementwiseKind::mul));

  ops.push_back({"matmul",
                 [](Rng& rng) {
                   std::size_t m = dim(rng, 1, 4), k = dim(rng, 1, 4), n = dim(rng, 1, 4);
                   return std::vector<Tensor>{random_tensor({m, k}, rng), random_tensor({k, n}, rng)};
                 },
                 [](const std::vector<Var>& in) { return matmul(in[0], in[1]); }});
  ops.push_back({"linear",
                 [](Rng& rng) {
                   std::size_t m = dim(rng, 1, 5), k = dim(rng, 1, 5);
                   return std::vector<Tensor>{random_tensor({m, k}, rng), random_tensor({k}, rng),
                                              random_tensor({m}, rng)};
                 },
                 [](const std::vector<Var>& in) { return linear(in[0], in[1], in[2]); }});
  ops.push_back({"conv2d",
                 [](Rng& rng) {
                   std::size_t cin = dim(rng, 1, 3), cout = dim(rng, 1, 3), k = dim(rng, 1, 3);
                   std::size_t h = dim(rng, k, 6), w = dim(rng, k, 6);
                   return std::vector<Tensor>{random_tensor({cin, h, w}, rng), random_tensor({cout, cin, k, k}, rng)};
                 },
                 [](const std::vector<Var>& in) {
                   // stride is drawn from the kernel shape so it stays part of the sampled instance
                   std::size_t stride = 1 + in[1].value().dim(2) % 2;
                   return conv2d(in[0], in[1], stride);
                 }});
  ops.push_back({"add_channel_bias",
                 [](Rng& rng) {
                   std::size_t c = dim(rng, 1, 4);
                   return std::vector<Tensor>{random_tensor({c, dim(rng, 1, 3), dim(rng, 1, 3)}, rng),
                                              random_tensor({c}, rng)};
                 },
                 [](const std::vector<Var>& in) { return add_channel_bias(in[0], in[1]); }});
  ops.push_back({"conv1d_channels",
                 [](Rng& rng) {
                   std::size_t d = dim(rng, 1, 5);
                   return std::vector<Tensor>{random_tensor({d, dim(rng, 1, 4), dim(rng, 1, 4)}, rng),
                                              random_tensor({d}, rng)};
                 },
                 [](const std::vector<Var>& in) { return conv1d_channels(in[0], in[1]); }});
  ops.push_back({"channel_scale",
                 [](Rng& rng) {
                   std::size_t d = dim(rng, 1, 5);
                   return std::vector<Tensor>{random_tensor({d, dim(rng, 1, 4), dim(rng, 1, 4)}, rng),
                                              random_tensor({d}, rng)};
                 },
                 [](const std::vector<Var>& in) { return channel_scale(in[0], in[1]); }});
  ops.push_back({"softmax", [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 6)}, rng, -3, 3)}; },
                 [](const std::vector<Var>& in) { return softmax(in[0]); }});
  ops.push_back({"log_softmax",
                 [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 6)}, rng, -3, 3)}; },
                 [](const std::vector<Var>& in) { return log_softmax(in[0]); }});
  ops.push_back({"sum", [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 4), dim(rng, 1, 4)}, rng)}; },
                 [](const std::vector<Var>& in) { return sum(in[0]); }});
  ops.push_back({"reshape",
                 [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 4), dim(rng, 1, 4)}, rng)}; },
                 [](const std::vector<Var>& in) { return reshape(in[0], {in[0].value().dim(1), in[0].value().dim(0)}); }});
  ops.push_back({"concat",
                 [](Rng& rng) {
                   return std::vector<Tensor>{random_tensor({dim(rng, 1, 4)}, rng),
                                              random_tensor({dim(rng, 1, 3), dim(rng, 1, 3)}, rng)};
                 },
                 [](const std::vector<Var>& in) { return concat(in); }});
  ops.push_back({"slice", [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 2, 8)}, rng)}; },
                 [](const std::vector<Var>& in) {
                   std::size_t n = in[0].size();
                   return slice(in[0], n / 3, n - n / 3 - (n > 2 ? 1 : 0));
                 }});
  ops.push_back({"pick", [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 6)}, rng)}; },
                 [](const std::vector<Var>& in) { return pick(in[0], in[0].size() / 2); }});
  ops.push_back({"row",
                 [](Rng& rng) { return std::vector<Tensor>{random_tensor({dim(rng, 1, 5), dim(rng, 1, 4)}, rng)}; },
                 [](const std::vector<Var>& in) { return row(in[0], in[0].value().dim(0) - 1); }});
  return ops;
}

OpReport check_op(const OpSpec& spec, std::size_t cases, std::uint64_t seed, double tolerance, double step) {
  OpReport report;
  report.name = spec.name;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    std::vector<Tensor> inputs = spec.make_inputs(rng);

    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.variable(t));
    Var out = spec.apply(vars);
    Tensor weights = random_tensor(out.shape(), rng, 0.5, 1.5);
    Var loss = sum(mul(out, g.constant(weights)));
    g.backward(loss);

    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Tensor analytic = g.grad(vars[k]);
      std::vector<Tensor> perturbed = inputs;
      for (std::size_t i = 0; i < inputs[k].size(); ++i) {
        const double orig = inputs[k][i];
        perturbed[k][i] = orig + step;
        const double up = probe(spec, perturbed, weights);
        perturbed[k][i] = orig - step;
        const double down = probe(spec, perturbed, weights);
        perturbed[k][i] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double err = relative_error(analytic[i], numeric);
        report.max_rel_error = std::max(report.max_rel_error, err);
        ++report.checked_entries;
      }
    }
    ++report.cases;
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace dan::gradcheck
