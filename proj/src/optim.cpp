#include "skeletor/optim.hpp"

#include <cmath>

#include "skeletor/error.hpp"

namespace skeletor {

Tensor xavier_init(const Shape& shape, Rng& rng) {
  require(shape.size() == 2, ErrorKind::shape,
          "xavier_init expects a (fan_in, fan_out) shape, got " + shape_string(shape));
  const double fan_in = static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape[1]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void adam_step(AdamState& state, std::span<const ParamSlot> params) {
  for (const ParamSlot& p : params) {
    require(p.value && p.grad, ErrorKind::invalid_state, "adam slot without tensors");
    require(p.value->shape() == p.grad->shape(), ErrorKind::shape,
            "gradient shape mismatch for parameter '" + p.name + "'");
    require(p.grad->all_finite(), ErrorKind::numerical,
            "non-finite gradient for parameter '" + p.name + "'");
  }
  if (state.first_moment.empty()) {
    for (const ParamSlot& p : params) {
      state.first_moment.emplace_back(p.value->shape());
      state.second_moment.emplace_back(p.value->shape());
    }
  }
  require(state.first_moment.size() == params.size(), ErrorKind::invalid_state,
          "adam state was built for a different parameter list");

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto x = params[k].value->data();
    auto g = params[k].grad->data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    require(m.size() == x.size(), ErrorKind::invalid_state,
            "adam moment shape mismatch for '" + params[k].name + "'");
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      x[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace skeletor
