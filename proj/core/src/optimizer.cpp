#include "cipher_icl/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cipher_icl {

std::vector<std::uint8_t> decay_mask(const std::vector<TensorSpec>& layout) {
  std::size_t total = 0;
  for (const auto& t : layout) total += t.size;
  std::vector<std::uint8_t> mask(total, 0);
  for (const auto& t : layout) {
    if (t.decay) std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size, 1);
  }
  return mask;
}

template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads,
                std::span<const std::uint8_t> decay, AdamWState<T>& state) {
  const std::size_t n = params.size();
  if (grads.size() != n || decay.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw std::invalid_argument("adamw_step: parameter/gradient/state size mismatch");
  }
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(h.beta1);
  const T b2 = static_cast<T>(h.beta2);
  const T lr = static_cast<T>(h.learning_rate);
  const T eps = static_cast<T>(h.epsilon);
  const T bias1 = static_cast<T>(1.0 - std::pow(h.beta1, t));
  const T bias2 = static_cast<T>(1.0 - std::pow(h.beta2, t));
  const T decay_factor = static_cast<T>(1.0 - h.learning_rate * h.weight_decay);
  T* m = state.first_moment.data();
  T* v = state.second_moment.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    if (decay[i]) params[i] *= decay_factor;
    const T m_hat = m[i] / bias1;
    const T v_hat = v[i] / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
void adamw_step(ModelParams<T>& params, std::span<const T> grads, AdamWState<T>& state) {
  const auto mask = decay_mask(params.layout());
  adamw_step<T>(params.data(), grads, mask, state);
}

template void adamw_step<float>(std::span<float>, std::span<const float>,
                                std::span<const std::uint8_t>, AdamWState<float>&);
template void adamw_step<double>(std::span<double>, std::span<const double>,
                                 std::span<const std::uint8_t>, AdamWState<double>&);
template void adamw_step<float>(ModelParams<float>&, std::span<const float>, AdamWState<float>&);
template void adamw_step<double>(ModelParams<double>&, std::span<const double>,
                                 AdamWState<double>&);

}  // namespace cipher_icl
