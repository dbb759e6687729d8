#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cipher_icl/model.hpp"

namespace cipher_icl {

struct AdamWHyperparams {
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamWHyperparams&, const AdamWHyperparams&) = default;
};

template <typename T>
struct AdamWState {
  AdamWHyperparams hyper;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::uint64_t step = 0;

  AdamWState() = default;
  AdamWState(std::size_t parameter_count, AdamWHyperparams h)
      : hyper(h), first_moment(parameter_count, T(0)), second_moment(parameter_count, T(0)) {}
};

// One AdamW update over a flat parameter vector. `decay_mask[i]` selects the
// coordinates that receive decoupled weight decay (w -= lr * wd * w before the
// Adam step). Throws std::invalid_argument on size mismatch.
template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads,
                std::span<const std::uint8_t> decay_mask, AdamWState<T>& state);

// Convenience overload deriving the decay mask from the model layout.
template <typename T>
void adamw_step(ModelParams<T>& params, std::span<const T> grads, AdamWState<T>& state);

std::vector<std::uint8_t> decay_mask(const std::vector<TensorSpec>& layout);

}  // namespace cipher_icl
