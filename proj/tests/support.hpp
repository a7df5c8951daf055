#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "skeletor/autodiff.hpp"
#include "skeletor/error.hpp"
#include "skeletor/rng.hpp"
#include "oracle.hpp"

namespace skeletor::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

using oracle::relative_error;

using ScalarGraph = std::function<Var(Tape&, const std::vector<Var>&)>;

// Largest relative error between reverse-mode gradients and central
// differences over every entry of every input.
inline double gradient_check(const ScalarGraph& graph, std::vector<Tensor> inputs,
                             double step = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  Var loss = graph(tape, vars);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  for (const Var& v : vars) analytic.push_back(tape.grad(v));

  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape t;
    std::vector<Var> vs;
    for (const Tensor& x : values) vs.push_back(t.constant(x));
    return graph(t, vs).value().item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + step;
      const double up = evaluate(inputs);
      inputs[k][i] = saved - step;
      const double down = evaluate(inputs);
      inputs[k][i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * step)));
    }
  return worst;
}

template <typename F>
void expect_error_kind(F&& f, ErrorKind kind) {
  try {
    f();
    ADD_FAILURE() << "expected Error(" << to_string(kind) << ")";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace skeletor::testing
