#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skeletor/rng.hpp"
#include "skeletor/tensor.hpp"

namespace skeletor {

// Glorot/Xavier uniform: U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(const Shape& shape, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

struct ParamSlot {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* grad = nullptr;
};

// One bias-corrected Adam update over every slot, in order. Moments are
// created on the first call. Throws ErrorKind::numerical naming the first
// parameter whose gradient is not finite; nothing is modified in that case.
void adam_step(AdamState& state, std::span<const ParamSlot> params);

}  // namespace skeletor
