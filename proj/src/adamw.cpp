#include "ordemo/adamw.hpp"

#include <cmath>
#include <string>

#include "ordemo/error.hpp"

namespace ordemo {

void AdamWOptions::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ValidationError("AdamW betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("AdamW epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
}

template <typename T>
AdamWState<T> AdamWState<T>::zeros(const std::vector<Parameter<T>>& params, AdamWOptions options) {
  options.validate();
  AdamWState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, const Gradients<T>& grads, AdamWState<T>& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ValidationError("adamw: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape() ||
        state.first_moment[i].shape() != params[i].value.shape() ||
        state.second_moment[i].shape() != params[i].value.shape()) {
      throw ValidationError("adamw: shape mismatch at " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      throw RuntimeFailure("adamw: non-finite gradient in " + params[i].name + " at step " +
                           std::to_string(state.step + 1) + "; step aborted");
    }
  }

  const AdamWOptions& o = state.options;
  const std::uint64_t step = state.step + 1;
  const double correction1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  const T lr = static_cast<T>(o.learning_rate), eps = static_cast<T>(o.epsilon);
  const T decay = static_cast<T>(o.weight_decay);
  const T c1 = static_cast<T>(correction1), c2 = static_cast<T>(correction2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value.data();
    const auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T m_hat = m[j] / c1;
      const T v_hat = v[j] / c2;
      p[j] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + decay * p[j]);
    }
  }
  state.step = step;
}

template struct AdamWState<float>;
template struct AdamWState<double>;
template void adamw_step(std::vector<Parameter<float>>&, const Gradients<float>&,
                         AdamWState<float>&);
template void adamw_step(std::vector<Parameter<double>>&, const Gradients<double>&,
                         AdamWState<double>&);

}  // namespace ordemo
