#pragma once

// Parameters shared by asynchronous workers together with the state of
// the adaptive optimizer (Adam: first and squared-gradient moving
// averages). Each tensor is updated atomically under its own lock; a
// snapshot may mix tensors from different updates.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "dan/params.hpp"

namespace dan::rl {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class UpdateStatus { applied, skipped_nonfinite };

class SharedModel {
 public:
  SharedModel(ParamStore params, AdamConfig adam);

  ParamStore snapshot() const;
  std::uint64_t steps() const { return steps_.load(); }
  std::uint64_t skipped() const { return skipped_.load(); }
  const AdamConfig& adam() const { return adam_; }

  // Clips `grads` to global norm `clip_norm`, then applies one Adam step.
  UpdateStatus apply(std::vector<Tensor> grads, double clip_norm);

  // Squared-gradient accumulator of tensor i (for inspection).
  Tensor second_moment(std::size_t i) const;

 private:
  ParamStore params_;
  std::vector<Tensor> m_, v_;
  std::vector<std::unique_ptr<std::mutex>> locks_;
  AdamConfig adam_;
  std::atomic<std::uint64_t> steps_{0};
  std::atomic<std::uint64_t> skipped_{0};
};

double global_norm(const std::vector<Tensor>& grads);
// Scales in place so the global norm is at most clip_norm; returns the pre-clip norm.
double clip_global_norm(std::vector<Tensor>& grads, double clip_norm);

// One worker's update against the shared model.
UpdateStatus worker_update(SharedModel& shared, std::vector<Tensor> local_grads, double clip_norm);

}  // namespace dan::rl
