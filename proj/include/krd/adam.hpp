#pragma once

#include <cstdint>
#include <vector>

#include "krd/matrix.hpp"

namespace krd {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled: each step subtracts lr * weight_decay * param.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamOptions options;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  std::uint64_t step = 0;
};

// Zero moments shaped like params.
AdamState make_adam_state(const std::vector<DenseMatrix>& params, const AdamOptions& options);

// One bias-corrected Adam update in place. Throws ShapeError on mismatched
// shapes and DivergenceError on a non-finite gradient.
void adam_step(std::vector<DenseMatrix>& params, const std::vector<DenseMatrix>& grads,
               AdamState& state);

}  // namespace krd
