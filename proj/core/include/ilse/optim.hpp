#pragma once

#include "ilse/param_store.hpp"

namespace ilse {

struct AdamOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam with decoupled weight decay:
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
// Increments the step counter and zeroes gradients.
void adam_step(ParamStore& params, const AdamOptions& options);

}  // namespace ilse
