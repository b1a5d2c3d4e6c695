#include "krd/adam.hpp"

#include <cmath>

#include "krd/error.hpp"

namespace krd {

AdamState make_adam_state(const std::vector<DenseMatrix>& params, const AdamOptions& options) {
  AdamState st;
  st.options = options;
  for (const auto& p : params) {
    st.first_moment.emplace_back(p.rows(), p.cols());
    st.second_moment.emplace_back(p.rows(), p.cols());
  }
  return st;
}

void adam_step(std::vector<DenseMatrix>& params, const std::vector<DenseMatrix>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam_step: parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].same_shape(grads[k]) || !params[k].same_shape(state.first_moment[k]))
      throw ShapeError("adam_step: parameter shape mismatch");
    if (!grads[k].all_finite()) throw DivergenceError("adam_step: non-finite gradient");
  }

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values();
    auto g = grads[k].values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= o.learning_rate * (mhat / (std::sqrt(vhat) + o.epsilon) + o.weight_decay * p[i]);
    }
  }
}

}  // namespace krd
