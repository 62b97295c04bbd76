#include "dan/rl/shared_model.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace dan::rl {

SharedModel::SharedModel(ParamStore params, AdamConfig adam) : params_(std::move(params)), adam_(adam) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_.emplace_back(params_.value(i).shape());
    v_.emplace_back(params_.value(i).shape());
    locks_.push_back(std::make_unique<std::mutex>());
  }
}

ParamStore SharedModel::snapshot() const {
  ParamStore out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::lock_guard<std::mutex> lock(*locks_[i]);
    out.add(params_.name(i), params_.value(i));
  }
  return out;
}

Tensor SharedModel::second_moment(std::size_t i) const {
  std::lock_guard<std::mutex> lock(*locks_[i]);
  return v_[i];
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::vector<Tensor>& grads, double clip_norm) {
  const double norm = global_norm(grads);
  if (norm > clip_norm && norm > 0.0) {
    const double factor = clip_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.data()) v *= factor;
    }
  }
  return norm;
}

UpdateStatus SharedModel::apply(std::vector<Tensor> grads, double clip_norm) {
  if (grads.size() != params_.size()) throw std::invalid_argument("gradient count differs from parameter count");
  const double norm = clip_global_norm(grads, clip_norm);
  if (!std::isfinite(norm)) {
    skipped_.fetch_add(1);
    return UpdateStatus::skipped_nonfinite;
  }
  const std::uint64_t t = steps_.fetch_add(1) + 1;
  const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t));
  const double step = adam_.learning_rate * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!grads[i].same_shape(params_.value(i))) {
      throw std::invalid_argument("gradient shape mismatch for " + params_.name(i));
    }
    std::lock_guard<std::mutex> lock(*locks_[i]);
    auto p = params_.value(i).data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = adam_.beta1 * m[k] + (1.0 - adam_.beta1) * g[k];
      v[k] = adam_.beta2 * v[k] + (1.0 - adam_.beta2) * g[k] * g[k];
      p[k] -= step * m[k] / (std::sqrt(v[k]) + adam_.epsilon);
    }
  }
  return UpdateStatus::applied;
}

UpdateStatus worker_update(SharedModel& shared, std::vector<Tensor> local_grads, double clip_norm) {
  const UpdateStatus status = shared.apply(std::move(local_grads), clip_norm);
  if (status == UpdateStatus::skipped_nonfinite) {
    std::cerr << "warning: skipped update with non-finite gradient (" << shared.skipped() << " so far)\n";
  }
  return status;
}

}  // namespace dan::rl
