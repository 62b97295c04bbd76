#include "dan/params.hpp"

#include <stdexcept>

namespace dan {

void ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& v : values_) {
    if (!v.all_finite()) return false;
  }
  return true;
}

BoundParams::BoundParams(Graph& graph, const ParamStore& store) : graph_(&graph), store_(&store) {
  vars_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) vars_.push_back(graph.variable(store.value(i)));
}

std::vector<Tensor> BoundParams::gradients() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const Var& v : vars_) out.push_back(graph_->grad(v));
  return out;
}

}  // namespace dan
