#pragma once

#include <cmath>

#include "marc/matrix.hpp"

namespace marc {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long t = 0;
};

// One Adam step with bias correction. A NaN gradient aborts the step before
// touching the parameter or the moments.
inline void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("adam_step: grad shape " + grad.shape_str() + " vs param " + param.shape_str());
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (double g : grad.data)
    if (std::isnan(g)) throw std::runtime_error("adam_step: NaN gradient for parameter " + param.shape_str());
  if (state.t == 0) {
    state.m = Matrix(param.rows, param.cols);
    state.v = Matrix(param.rows, param.cols);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m.data[i] / c1;
    const double vhat = state.v.data[i] / c2;
    param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace marc
