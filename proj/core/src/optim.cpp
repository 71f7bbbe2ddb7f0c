#include "ilse/optim.hpp"

#include <cmath>

#include "ilse/errors.hpp"

namespace ilse {

void adam_step(ParamStore& params, const AdamOptions& o) {
  if (!(o.lr > 0.0)) throw InvalidArgument("adam_step: learning rate must be positive");
  if (o.weight_decay < 0.0) throw InvalidArgument("adam_step: weight decay must be non-negative");
  const std::uint64_t step = params.step() + 1;
  const double correction1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (auto& e : params.entries()) {
    auto theta = e.value.data();
    auto g = e.grad.data();
    auto m = e.first_moment.data();
    auto v = e.second_moment.data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= o.lr * (m_hat / (std::sqrt(v_hat) + o.eps) + o.weight_decay * theta[i]);
      g[i] = 0.0;
    }
  }
  params.set_step(step);
}

}  // namespace ilse
