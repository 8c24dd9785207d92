#pragma once

#include <cstdint>
#include <vector>

#include "ordemo/model.hpp"

namespace ordemo {

struct AdamWOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
  bool operator==(const AdamWOptions&) const = default;
};

template <typename T>
struct AdamWState {
  AdamWOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  // Zeroed accumulators mirroring the parameter shapes.
  static AdamWState zeros(const std::vector<Parameter<T>>& params, AdamWOptions options);
  bool operator==(const AdamWState&) const = default;
};

// Decoupled weight decay:
//   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
//   p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// A gradient with any non-finite entry aborts the step before anything is
// modified (RuntimeFailure).
template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, const Gradients<T>& grads, AdamWState<T>& state);

}  // namespace ordemo
