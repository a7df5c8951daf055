#include "skeletor/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "skeletor/error.hpp"

namespace skeletor {

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), requires_grad, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    SKELETOR_CHECK(in.tape() == this, ErrorKind::invalid_state,
            "operation mixes variables from different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::accumulator(std::size_t id) {
  Tensor& g = grads_[id];
  if (g.shape() != nodes_[id].value.shape() || g.size() != nodes_[id].value.size())
    g = Tensor(nodes_[id].value.shape());
  return g;
}

Tensor Tape::grad(Var v) const {
  const std::size_t id = v.id();
  if (id < grads_.size() && grads_[id].shape() == nodes_[id].value.shape() &&
      grads_[id].size() == nodes_[id].value.size())
    return grads_[id];
  return Tensor(nodes_.at(id).value.shape());
}

void Tape::backward(Var loss) {
  SKELETOR_CHECK(loss.tape() == this, ErrorKind::invalid_state, "loss is not on this tape");
  const Tensor& lv = nodes_.at(loss.id()).value;
  SKELETOR_CHECK(lv.size() == 1, ErrorKind::shape,
          "backward() needs a scalar loss, got shape " + shape_string(lv.shape()));
  grads_.assign(nodes_.size(), Tensor());
  accumulator(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward) continue;
    if (grads_[id].size() != node.value.size() || grads_[id].empty()) continue;
    node.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Kernels shared by the tape ops and the value-only helpers.

namespace {

struct MatmulPlan {
  bool batched = false;
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  Shape out;
};

MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
  MatmulPlan p;
  if (a.size() >= 2 && b.size() == 2) {
    p.k = a.back();
    SKELETOR_CHECK(p.k == b[0], ErrorKind::shape,
            "matmul inner dimensions disagree: " + shape_string(a) + " x " + shape_string(b));
    p.m = shape_size(a) / std::max<std::size_t>(p.k, 1);
    if (p.k == 0) p.m = shape_size(Shape(a.begin(), a.end() - 1));
    p.n = b[1];
    p.out = a;
    p.out.back() = p.n;
  } else if (a.size() == 3 && b.size() == 3) {
    SKELETOR_CHECK(a[0] == b[0] && a[2] == b[1], ErrorKind::shape,
            "batched matmul shapes disagree: " + shape_string(a) + " x " + shape_string(b));
    p.batched = true;
    p.batch = a[0];
    p.m = a[1];
    p.k = a[2];
    p.n = b[2];
    p.out = {p.batch, p.m, p.n};
  } else {
    fail(ErrorKind::shape,
         "unsupported matmul ranks: " + shape_string(a) + " x " + shape_string(b));
  }
  return p;
}

Tensor matmul_value(const Tensor& a, const Tensor& b, const MatmulPlan& p) {
  Tensor out(p.out);
  if (!p.batched) {
    gemm_accumulate(p.m, p.n, p.k, a.data().data(), false, b.data().data(), false,
                    out.data().data());
  } else {
    for (std::size_t s = 0; s < p.batch; ++s)
      gemm_accumulate(p.m, p.n, p.k, a.data().data() + s * p.m * p.k, false,
                      b.data().data() + s * p.k * p.n, false,
                      out.data().data() + s * p.m * p.n);
  }
  return out;
}

struct AxisPlan {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisPlan plan_axis(const Shape& shape, std::size_t axis) {
  SKELETOR_CHECK(axis < shape.size(), ErrorKind::shape,
          "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  SKELETOR_CHECK(shape[axis] > 0, ErrorKind::shape, "softmax over an empty axis");
  AxisPlan p;
  for (std::size_t i = 0; i < axis; ++i) p.outer *= shape[i];
  p.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) p.inner *= shape[i];
  return p;
}

Tensor softmax_value(const Tensor& x, const AxisPlan& p) {
  Tensor y(x.shape());
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t o = 0; o < p.outer; ++o)
    for (std::size_t j = 0; j < p.inner; ++j) {
      const std::size_t base = o * p.n * p.inner + j;
      double peak = xs[base];
      for (std::size_t i = 1; i < p.n; ++i) peak = std::max(peak, xs[base + i * p.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < p.n; ++i) {
        const double e = std::exp(xs[base + i * p.inner] - peak);
        ys[base + i * p.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < p.n; ++i) ys[base + i * p.inner] /= total;
    }
  return y;
}

struct NormCache {
  Tensor normalized;
  std::vector<double> inv_std;
};

void check_norm_params(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  SKELETOR_CHECK(x.rank() >= 1, ErrorKind::shape, "layer_norm needs rank >= 1");
  SKELETOR_CHECK(gain.size() == x.cols() && bias.size() == x.cols(), ErrorKind::shape,
          "layer_norm gain/bias must match last axis " + std::to_string(x.cols()));
}

Tensor layer_norm_value(const Tensor& x, const Tensor& gain, const Tensor& bias,
                        double epsilon, NormCache* cache) {
  const std::size_t n = x.cols(), rows = x.rows();
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xr[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(n);
    inv[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (xr[i] - mean) * inv[r];
      xhat[r * n + i] = h;
      y[r * n + i] = gain[i] * h + bias[i];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Value-only helpers

Tensor matmul(const Tensor& a, const Tensor& b) {
  return matmul_value(a, b, plan_matmul(a.shape(), b.shape()));
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  return softmax_value(a, plan_axis(a.shape(), axis));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon) {
  check_norm_params(x, gain, bias);
  return layer_norm_value(x, gain, bias, epsilon, nullptr);
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Tape ops

Var matmul(Var a, Var b) {
  Tape& tape = *a.tape();
  const MatmulPlan p = plan_matmul(a.shape(), b.shape());
  Tensor out = matmul_value(a.value(), b.value(), p);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b}, [p, ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const double* gd = g.data().data();
    for (std::size_t s = 0; s < p.batch; ++s) {
      const double* av = t.value(ia).data().data() + s * p.m * p.k;
      const double* bv = t.value(ib).data().data() + (p.batched ? s * p.k * p.n : 0);
      const double* gs = gd + s * p.m * p.n;
      if (t.requires_grad(ia))
        gemm_accumulate(p.m, p.k, p.n, gs, false, bv, true,
                        t.accumulator(ia).data().data() + s * p.m * p.k);
      if (t.requires_grad(ib))
        gemm_accumulate(p.k, p.n, p.m, av, true, gs, false,
                        t.accumulator(ib).data().data() + (p.batched ? s * p.k * p.n : 0));
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  SKELETOR_CHECK(x.rank() >= 2, ErrorKind::shape, "transpose needs rank >= 2");
  const std::size_t r = x.dim(x.rank() - 2), c = x.dim(x.rank() - 1);
  const std::size_t batch = x.size() / std::max<std::size_t>(r * c, 1);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out(shape);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out[s * r * c + j * r + i] = x[s * r * c + i * c + j];
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.accumulator(ia);
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          ga[s * r * c + i * c + j] += g[s * r * c + j * r + i];
  });
}

Var add(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  SKELETOR_CHECK(sb.size() <= sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - sb.size()),
          ErrorKind::shape, "add: " + shape_string(sb) + " does not broadcast onto " + shape_string(sa));
  const std::size_t n = b.value().size();
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t base = 0; base < out.size(); base += n)
    for (std::size_t i = 0; i < n; ++i) out[base + i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(ia)) add_into(t.accumulator(ia), g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.accumulator(ib);
      for (std::size_t base = 0; base < g.size(); base += n)
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[base + i];
    }
  });
}

Var sub(Var a, Var b) {
  SKELETOR_CHECK(a.shape() == b.shape(), ErrorKind::shape,
          "sub: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(ia)) add_into(t.accumulator(ia), g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var relu(Var a) {
  Tensor out = relu(a.value());
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& x = t.value(ia);
    Tensor& ga = t.accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var softmax(Var a, std::size_t axis) {
  const AxisPlan p = plan_axis(a.shape(), axis);
  Tensor out = softmax_value(a.value(), p);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.accumulator(ia);
    for (std::size_t o = 0; o < p.outer; ++o)
      for (std::size_t j = 0; j < p.inner; ++j) {
        const std::size_t base = o * p.n * p.inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < p.n; ++i)
          dot += g[base + i * p.inner] * y[base + i * p.inner];
        for (std::size_t i = 0; i < p.n; ++i) {
          const std::size_t q = base + i * p.inner;
          ga[q] += y[q] * (g[q] - dot);
        }
      }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
  check_norm_params(x.value(), gain.value(), bias.value());
  auto cache = std::make_shared<NormCache>();
  Tensor out = layer_norm_value(x.value(), gain.value(), bias.value(), epsilon, cache.get());
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape()->record(std::move(out), {x, gain, bias}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& xhat = cache->normalized;
    const Tensor& gv = t.value(ig);
    const std::size_t n = xhat.cols(), rows = xhat.rows();
    if (t.requires_grad(ig)) {
      Tensor& gg = t.accumulator(ig);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) gg[i] += g[r * n + i] * xhat[r * n + i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.accumulator(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[r * n + i];
    }
    if (t.requires_grad(ix)) {
      Tensor& gx = t.accumulator(ix);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_d = 0.0, mean_dh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = g[r * n + i] * gv[i];
          mean_d += d;
          mean_dh += d * xhat[r * n + i];
        }
        mean_d *= inv_n;
        mean_dh *= inv_n;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = g[r * n + i] * gv[i];
          gx[r * n + i] += cache->inv_std[r] * (d - mean_d - xhat[r * n + i] * mean_dh);
        }
      }
    }
  });
}

Var concat_last(std::span<const Var> parts) {
  SKELETOR_CHECK(!parts.empty(), ErrorKind::shape, "concat of zero tensors");
  Tape& tape = *parts[0].tape();
  const Shape& first = parts[0].shape();
  SKELETOR_CHECK(!first.empty(), ErrorKind::shape, "concat needs rank >= 1");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& v : parts) {
    const Shape& s = v.shape();
    SKELETOR_CHECK(s.size() == first.size() && std::equal(s.begin(), s.end() - 1, first.begin()),
            ErrorKind::shape, "concat: leading dimensions disagree");
    widths.push_back(s.back());
    total += s.back();
  }
  Shape shape = first;
  shape.back() = total;
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().data() + r * widths[k], widths[k],
                  out.data().data() + r * total + offset);
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  return tape.record(std::move(out), parts, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gk = t.accumulator(ids[k]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < widths[k]; ++i)
            gk[r * widths[k] + i] += g[r * total + off + i];
      }
      off += widths[k];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [=](Tape& t, std::size_t self) {
    add_into(t.accumulator(ia), t.upstream(self));
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {a}, [=](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    for (double& v : t.accumulator(ia).data()) v += g;
  });
}

Var mse(Var prediction, Var target) {
  return mse(prediction, target, Tensor(prediction.shape(), 1.0));
}

Var mse(Var prediction, Var target, const Tensor& weights) {
  SKELETOR_CHECK(prediction.shape() == target.shape(), ErrorKind::shape,
          "mse: prediction " + shape_string(prediction.shape()) + " vs target " +
              shape_string(target.shape()));
  SKELETOR_CHECK(weights.size() == prediction.value().size(), ErrorKind::shape,
          "mse: weight tensor does not match prediction");
  const Tensor& p = prediction.value();
  const Tensor& q = target.value();
  double total_w = 0.0, total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    total += weights[i] * d * d;
    total_w += weights[i];
  }
  SKELETOR_CHECK(total_w > 0.0, ErrorKind::config, "mse over an empty scope");
  const std::size_t ip = prediction.id(), iq = target.id();
  return prediction.tape()->record(
      Tensor::scalar(total / total_w), {prediction, target},
      [=](Tape& t, std::size_t self) {
        const double g = t.upstream(self)[0] * 2.0 / total_w;
        const Tensor& pv = t.value(ip);
        const Tensor& qv = t.value(iq);
        if (t.requires_grad(ip)) {
          Tensor& gp = t.accumulator(ip);
          for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += g * weights[i] * (pv[i] - qv[i]);
        }
        if (t.requires_grad(iq)) {
          Tensor& gq = t.accumulator(iq);
          for (std::size_t i = 0; i < pv.size(); ++i) gq[i] -= g * weights[i] * (pv[i] - qv[i]);
        }
      });
}

}  // namespace skeletor
