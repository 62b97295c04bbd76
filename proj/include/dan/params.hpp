#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dan/autodiff.hpp"

namespace dan {

// Named tensors in declaration order.
class ParamStore {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  const Tensor& operator[](std::string_view name) const { return values_[index_of(name)]; }
  Tensor& operator[](std::string_view name) { return values_[index_of(name)]; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Parameters placed on a graph as gradient-tracking leaves.
class BoundParams {
 public:
  BoundParams(Graph& graph, const ParamStore& store);

  Graph& graph() const { return *graph_; }
  Var operator[](std::string_view name) const { return vars_[store_->index_of(name)]; }
  Var at(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }

  // Accumulated leaf gradients, parallel to the store.
  std::vector<Tensor> gradients() const;

 private:
  Graph* graph_;
  const ParamStore* store_;
  std::vector<Var> vars_;
};

}  // namespace dan
