#include "meshssm/nd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"

namespace meshssm::nd {

using detail::make_op;
using detail::Node;

namespace {

void require_2d(const Tensor& t, const char* op) {
  if (t.dim() != 2)
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_string(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <class F>
Tensor unary(const char* op, const Tensor& a, F&& forward, std::function<void(Node&)> backward) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return make_op(op, a.shape(), std::move(out), {a}, std::move(backward));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  std::vector<double> out(n * m, 0.0);
  kernels::active().gemm_nn(a.data().data(), b.data().data(), out.data(), n, k, m);
  return make_op("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    const auto& K = kernels::active();
    if (double* ga = Node::grad_of(pa)) K.gemm_nt(self.grad.data(), pb->value.data(), ga, n, m, k);
    if (double* gb = Node::grad_of(pb)) K.gemm_tn(pa->value.data(), self.grad.data(), gb, n, k, m);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_2d(x, "linear");
  require_2d(w, "linear");
  const std::size_t n = x.rows(), in = x.cols(), out_w = w.cols();
  if (w.rows() != in)
    throw DimensionError("linear: input width " + std::to_string(in) + " does not match weight " +
                         shape_string(w.shape()));
  if (bias.size() != out_w)
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  std::vector<double> out(n * out_w);
  const auto bv = bias.data();
  for (std::size_t i = 0; i < n; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * out_w);
  kernels::active().gemm_nn(x.data().data(), w.data().data(), out.data(), n, in, out_w);
  return make_op("linear", {n, out_w}, std::move(out), {x, w, bias}, [n, in, out_w](Node& self) {
    const auto& K = kernels::active();
    const double* g = self.grad.data();
    if (double* gx = Node::grad_of(self.parents[0]))
      K.gemm_nt(g, self.parents[1]->value.data(), gx, n, out_w, in);
    if (double* gw = Node::grad_of(self.parents[1]))
      K.gemm_tn(self.parents[0]->value.data(), g, gw, n, in, out_w);
    if (double* gb = Node::grad_of(self.parents[2]))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_w; ++j) gb[j] += g[i * out_w + j];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (const auto& p : self.parents)
      if (double* g = Node::grad_of(p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = Node::grad_of(self.parents[1]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vb = self.parents[1]->value;
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * vb[i];
    if (double* g = Node::grad_of(self.parents[1]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * va[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double v) { return v * factor; }, [factor](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double v) { return v + value; }, [](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double v) { return v * v; }, [](Node& self) {
    const auto& x = self.parents[0]->value;
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += 2.0 * x[i] * self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double v) { return std::exp(v); }, [](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.value[i] * self.grad[i];
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (slope < 0.0) throw ValidationError("leaky_relu: slope must be non-negative");
  return unary("leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](Node& self) {
                 const auto& in = self.parents[0]->value;
                 if (double* g = Node::grad_of(self.parents[0]))
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     g[i] += (in[i] > 0.0 ? 1.0 : slope) * self.grad[i];
               });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](Node& self) {
                 const auto& in = self.parents[0]->value;
                 if (double* g = Node::grad_of(self.parents[0]))
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     if (in[i] >= lo && in[i] <= hi) g[i] += self.grad[i];
               });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_op("sum", {1}, {acc}, {a}, [](Node& self) {
    if (double* g = Node::grad_of(self.parents[0])) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double n = static_cast<double>(a.size());
  return make_op("mean", {1}, {acc / n}, {a}, [n](Node& self) {
    if (double* g = Node::grad_of(self.parents[0])) {
      const std::size_t count = self.parents[0]->value.size();
      for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[0] / n;
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mse");
  const auto av = a.data(), bv = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  const double n = static_cast<double>(av.size());
  return make_op("mse", {1}, {acc / n}, {a, b}, [n](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vb = self.parents[1]->value;
    const double s = 2.0 * self.grad[0] / n;
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < va.size(); ++i) g[i] += s * (va[i] - vb[i]);
    if (double* g = Node::grad_of(self.parents[1]))
      for (std::size_t i = 0; i < va.size(); ++i) g[i] -= s * (va[i] - vb[i]);
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  std::vector<double> values(a.data().begin(), a.data().end());
  return make_op("reshape", std::move(shape), std::move(values), {a}, [](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != n) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const auto v = parts[q].data();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.begin() + i * widths[q], widths[q], out.begin() + i * total + offset);
    offset += widths[q];
  }
  return make_op("concat_cols", {n, total}, std::move(out), parts, [n, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t q = 0; q < widths.size(); ++q) {
      if (double* g = Node::grad_of(self.parents[q]))
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < widths[q]; ++j) g[i * widths[q] + j] += self.grad[i * total + off + j];
      off += widths[q];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t d = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.cols() != d) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_op("concat_rows", {total, d}, std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    for (const auto& p : self.parents) {
      const std::size_t count = p->value.size();
      if (double* g = Node::grad_of(p))
        for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[off + i];
      off += count;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_2d(a, "slice_rows");
  if (count == 0 || begin + count > a.rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(a.shape()));
  const std::size_t d = a.cols();
  std::vector<double> out(a.data().begin() + begin * d, a.data().begin() + (begin + count) * d);
  return make_op("slice_rows", {count, d}, std::move(out), {a}, [begin, d](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d + i] += self.grad[i];
  });
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  require_2d(a, "repeat_rows");
  const std::size_t n = a.rows(), d = a.cols();
  std::vector<double> out(n * times * d);
  const auto v = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < times; ++r) std::copy_n(v.begin() + i * d, d, out.begin() + (i * times + r) * d);
  return make_op("repeat_rows", {n * times, d}, std::move(out), {a}, [n, d, times](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < times; ++r)
          for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[(i * times + r) * d + j];
  });
}

Tensor tile_rows(const Tensor& a, std::size_t times) {
  require_2d(a, "tile_rows");
  const std::size_t n = a.rows(), d = a.cols();
  std::vector<double> out;
  out.reserve(n * d * times);
  for (std::size_t r = 0; r < times; ++r) out.insert(out.end(), a.data().begin(), a.data().end());
  return make_op("tile_rows", {n * times, d}, std::move(out), {a}, [times](Node& self) {
    if (double* g = Node::grad_of(self.parents[0])) {
      const std::size_t count = self.parents[0]->value.size();
      for (std::size_t r = 0; r < times; ++r)
        for (std::size_t i = 0; i < count; ++i) g[i] += self.grad[r * count + i];
    }
  });
}

Tensor segment_max(const Tensor& x, std::size_t group_size) {
  require_2d(x, "segment_max");
  if (group_size == 0 || x.rows() % group_size != 0)
    throw DimensionError("segment_max: " + std::to_string(x.rows()) + " rows do not split into groups of " +
                         std::to_string(group_size));
  const std::size_t groups = x.rows() / group_size, d = x.cols();
  const auto v = x.data();
  std::vector<double> out(groups * d);
  std::vector<std::uint32_t> arg(groups * d);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = g * group_size;
      double best_v = v[best * d + j];
      for (std::size_t r = 1; r < group_size; ++r) {
        const std::size_t row = g * group_size + r;
        if (v[row * d + j] > best_v) {
          best_v = v[row * d + j];
          best = row;
        }
      }
      out[g * d + j] = best_v;
      arg[g * d + j] = static_cast<std::uint32_t>(best);
    }
  }
  return make_op("segment_max", {groups, d}, std::move(out), {x}, [arg = std::move(arg), d](Node& self) {
    if (double* g = Node::grad_of(self.parents[0]))
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i] * d + i % d] += self.grad[i];
  });
}

Tensor segment_mean(const Tensor& x, std::size_t group_size) {
  require_2d(x, "segment_mean");
  if (group_size == 0 || x.rows() % group_size != 0)
    throw DimensionError("segment_mean: " + std::to_string(x.rows()) + " rows do not split into groups of " +
                         std::to_string(group_size));
  const std::size_t groups = x.rows() / group_size, d = x.cols();
  const auto v = x.data();
  std::vector<double> out(groups * d, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t r = 0; r < group_size; ++r) {
      const std::size_t row = g * group_size + r;
      for (std::size_t j = 0; j < d; ++j) out[g * d + j] += v[row * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) out[g * d + j] /= static_cast<double>(group_size);
  }
  return make_op("segment_mean", {groups, d}, std::move(out), {x}, [groups, group_size, d](Node& self) {
    if (double* g = Node::grad_of(self.parents[0])) {
      const double inv = 1.0 / static_cast<double>(group_size);
      for (std::size_t s = 0; s < groups; ++s)
        for (std::size_t r = 0; r < group_size; ++r)
          for (std::size_t j = 0; j < d; ++j) g[(s * group_size + r) * d + j] += inv * self.grad[s * d + j];
    }
  });
}

Tensor reduce_max_over_set(const Tensor& x) {
  require_2d(x, "reduce_max_over_set");
  return reshape(segment_max(x, x.rows()), {x.cols()});
}

Tensor reduce_mean_over_set(const Tensor& x) {
  require_2d(x, "reduce_mean_over_set");
  return reshape(segment_mean(x, x.rows()), {x.cols()});
}

BatchNorm::BatchNorm(std::size_t features)
    : gamma(Tensor::full({features}, 1.0, true)),
      beta(Tensor::zeros({features}, true)),
      running_mean(features, 0.0),
      running_var(features, 1.0) {}

Tensor batch_norm(const Tensor& x, BatchNorm& bn, Mode mode) {
  require_2d(x, "batch_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (d != bn.features())
    throw DimensionError("batch_norm: " + std::to_string(d) + " columns, layer has " +
                         std::to_string(bn.features()) + " features");
  const auto v = x.data();
  const auto gamma = bn.gamma.data();
  const auto beta = bn.beta.data();
  std::vector<double> mu(d, 0.0), inv_std(d);

  if (mode == Mode::train) {
    if (n < 2) throw ValidationError("batch_norm: train mode needs at least 2 rows, got " + std::to_string(n));
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[j] += v[i * d + j];
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = v[i * d + j] - mu[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(biased + bn.eps);
      const double unbiased = var[j] / static_cast<double>(n - 1);
      bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mu[j];
      bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      mu[j] = bn.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
    }
  }

  std::vector<double> xhat(n * d), out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (v[i * d + j] - mu[j]) * inv_std[j];
      xhat[i * d + j] = h;
      out[i * d + j] = gamma[j] * h + beta[j];
    }

  const bool batch_stats = mode == Mode::train;
  return make_op("batch_norm", {n, d}, std::move(out), {x, bn.gamma, bn.beta},
                 [n, d, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                   const double* g = self.grad.data();
                   const auto& gamma_v = self.parents[1]->value;
                   std::vector<double> sum_g(d, 0.0), sum_gx(d, 0.0);
                   for (std::size_t i = 0; i < n; ++i)
                     for (std::size_t j = 0; j < d; ++j) {
                       sum_g[j] += g[i * d + j];
                       sum_gx[j] += g[i * d + j] * xhat[i * d + j];
                     }
                   if (double* gx = Node::grad_of(self.parents[0])) {
                     const double inv_n = 1.0 / static_cast<double>(n);
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < d; ++j) {
                         const double scale_j = gamma_v[j] * inv_std[j];
                         const double gi = g[i * d + j];
                         gx[i * d + j] += batch_stats
                                              ? scale_j * (gi - inv_n * sum_g[j] - xhat[i * d + j] * inv_n * sum_gx[j])
                                              : scale_j * gi;
                       }
                   }
                   if (double* gg = Node::grad_of(self.parents[1]))
                     for (std::size_t j = 0; j < d; ++j) gg[j] += sum_gx[j];
                   if (double* gb = Node::grad_of(self.parents[2]))
                     for (std::size_t j = 0; j < d; ++j) gb[j] += sum_g[j];
                 });
}

Tensor edge_linear(const Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k, const Tensor& w,
                   const Tensor& bias) {
  require_2d(x, "edge_linear");
  require_2d(w, "edge_linear");
  const std::size_t n = x.rows(), d = x.cols(), out_w = w.cols();
  if (k == 0 || neighbors.size() != n * k)
    throw DimensionError("edge_linear: neighbor index holds " + std::to_string(neighbors.size()) +
                         " entries, expected " + std::to_string(n) + "x" + std::to_string(k));
  if (w.rows() != 2 * d)
    throw DimensionError("edge_linear: weight " + shape_string(w.shape()) + " does not match input width " +
                         std::to_string(d));
  if (bias.size() != out_w) throw DimensionError("edge_linear: bias width mismatch");
  for (std::uint32_t j : neighbors)
    if (j >= n) throw DimensionError("edge_linear: neighbor index " + std::to_string(j) + " out of range");

  // concat(x_i, x_j − x_i)·w = x_i·(w_top − w_bottom) + x_j·w_bottom
  const auto wv = w.data();
  std::vector<double> w_self(d * out_w), w_nbr(wv.begin() + d * out_w, wv.end());
  for (std::size_t q = 0; q < d * out_w; ++q) w_self[q] = wv[q] - w_nbr[q];
  const auto& K = kernels::active();
  std::vector<double> proj_self(n * out_w, 0.0), proj_nbr(n * out_w, 0.0);
  K.gemm_nn(x.data().data(), w_self.data(), proj_self.data(), n, d, out_w);
  K.gemm_nn(x.data().data(), w_nbr.data(), proj_nbr.data(), n, d, out_w);

  const auto bv = bias.data();
  std::vector<double> out(n * k * out_w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = neighbors[i * k + r];
      double* row = out.data() + (i * k + r) * out_w;
      const double* ps = proj_self.data() + i * out_w;
      const double* pn = proj_nbr.data() + j * out_w;
      for (std::size_t c = 0; c < out_w; ++c) row[c] = ps[c] + pn[c] + bv[c];
    }

  std::vector<std::uint32_t> nbr(neighbors.begin(), neighbors.end());
  return make_op(
      "edge_linear", {n * k, out_w}, std::move(out), {x, w, bias},
      [n, d, k, out_w, nbr = std::move(nbr), w_self = std::move(w_self), w_nbr = std::move(w_nbr)](Node& self) {
        const auto& K = kernels::active();
        const double* g = self.grad.data();
        std::vector<double> g_self(n * out_w, 0.0), g_nbr(n * out_w, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < k; ++r) {
            const double* row = g + (i * k + r) * out_w;
            double* gs = g_self.data() + i * out_w;
            double* gn = g_nbr.data() + nbr[i * k + r] * out_w;
            for (std::size_t c = 0; c < out_w; ++c) {
              gs[c] += row[c];
              gn[c] += row[c];
            }
          }
        const auto& xv = self.parents[0]->value;
        if (double* gx = Node::grad_of(self.parents[0])) {
          K.gemm_nt(g_self.data(), w_self.data(), gx, n, out_w, d);
          K.gemm_nt(g_nbr.data(), w_nbr.data(), gx, n, out_w, d);
        }
        if (double* gw = Node::grad_of(self.parents[1])) {
          std::vector<double> dw_self(d * out_w, 0.0), dw_nbr(d * out_w, 0.0);
          K.gemm_tn(xv.data(), g_self.data(), dw_self.data(), n, d, out_w);
          K.gemm_tn(xv.data(), g_nbr.data(), dw_nbr.data(), n, d, out_w);
          // w_top feeds only the self projection; w_bottom feeds both with opposite signs.
          for (std::size_t q = 0; q < d * out_w; ++q) {
            gw[q] += dw_self[q];
            gw[d * out_w + q] += dw_nbr[q] - dw_self[q];
          }
        }
        if (double* gb = Node::grad_of(self.parents[2]))
          for (std::size_t i = 0; i < g_self.size(); ++i) gb[i % out_w] += g_self[i];
      });
}

Tensor edge_conv(const Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k, const Tensor& w,
                 const Tensor& bias, BatchNorm& bn, Mode mode, double slope) {
  require_2d(x, "edge_conv");
  require_2d(w, "edge_conv");
  const std::size_t n = x.rows(), d = x.cols(), out_w = w.cols();
  if (k == 0 || neighbors.size() != n * k)
    throw DimensionError("edge_conv: neighbor index holds " + std::to_string(neighbors.size()) +
                         " entries, expected " + std::to_string(n) + "x" + std::to_string(k));
  if (w.rows() != 2 * d)
    throw DimensionError("edge_conv: weight " + shape_string(w.shape()) + " does not match input width " +
                         std::to_string(d));
  if (bias.size() != out_w) throw DimensionError("edge_conv: bias width mismatch");
  if (bn.features() != out_w)
    throw DimensionError("edge_conv: batch norm has " + std::to_string(bn.features()) + " features, layer has " +
                         std::to_string(out_w));
  if (slope < 0.0) throw ValidationError("edge_conv: slope must be non-negative");
  for (std::uint32_t j : neighbors)
    if (j >= n) throw DimensionError("edge_conv: neighbor index " + std::to_string(j) + " out of range");
  const std::size_t rows = n * k;

  const auto wv = w.data();
  std::vector<double> w_self(d * out_w), w_nbr(wv.begin() + d * out_w, wv.end());
  for (std::size_t q = 0; q < d * out_w; ++q) w_self[q] = wv[q] - w_nbr[q];
  const auto& K = kernels::active();
  std::vector<double> proj_self(n * out_w, 0.0), proj_nbr(n * out_w, 0.0);
  K.gemm_nn(x.data().data(), w_self.data(), proj_self.data(), n, d, out_w);
  K.gemm_nn(x.data().data(), w_nbr.data(), proj_nbr.data(), n, d, out_w);
  const auto bv = bias.data();
  // Edge row (i, r) at column c, exactly as edge_linear writes it.
  auto edge_row = [&](std::size_t i, std::size_t r, double* row) {
    const double* ps = proj_self.data() + i * out_w;
    const double* pn = proj_nbr.data() + neighbors[i * k + r] * out_w;
    for (std::size_t c = 0; c < out_w; ++c) row[c] = ps[c] + pn[c] + bv[c];
  };

  std::vector<double> mu(out_w, 0.0), inv_std(out_w);
  std::vector<double> row(out_w);
  if (mode == Mode::train) {
    if (rows < 2) throw ValidationError("edge_conv: train mode needs at least 2 edge rows");
    std::vector<double> var(out_w, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < k; ++r) {
        edge_row(i, r, row.data());
        for (std::size_t c = 0; c < out_w; ++c) mu[c] += row[c];
      }
    for (auto& m : mu) m /= static_cast<double>(rows);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < k; ++r) {
        edge_row(i, r, row.data());
        for (std::size_t c = 0; c < out_w; ++c) {
          const double centered = row[c] - mu[c];
          var[c] += centered * centered;
        }
      }
    for (std::size_t c = 0; c < out_w; ++c) {
      inv_std[c] = 1.0 / std::sqrt(var[c] / static_cast<double>(rows) + bn.eps);
      const double unbiased = var[c] / static_cast<double>(rows - 1);
      bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mu[c];
      bn.running_var[c] = (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < out_w; ++c) {
      mu[c] = bn.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(bn.running_var[c] + bn.eps);
    }
  }

  const auto gamma = bn.gamma.data();
  const auto beta = bn.beta.data();
  std::vector<double> out(n * out_w), best_xhat(n * out_w), best_slope(n * out_w);
  std::vector<std::uint32_t> best_edge(n * out_w);
  std::vector<double> pre(out_w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      edge_row(i, r, row.data());
      for (std::size_t c = 0; c < out_w; ++c) {
        const double xhat = (row[c] - mu[c]) * inv_std[c];
        const double y = gamma[c] * xhat + beta[c];
        const double act = y > 0.0 ? y : slope * y;
        const std::size_t q = i * out_w + c;
        if (r == 0 || act > out[q]) {
          out[q] = act;
          best_edge[q] = static_cast<std::uint32_t>(r);
          best_xhat[q] = xhat;
          best_slope[q] = y > 0.0 ? 1.0 : slope;
        }
      }
    }
  }

  std::vector<std::uint32_t> nbr(neighbors.begin(), neighbors.end());
  std::vector<double> bias_v(bv.begin(), bv.end());
  const bool batch_stats = mode == Mode::train;
  return make_op(
      "edge_conv", {n, out_w}, std::move(out), {x, w, bias, bn.gamma, bn.beta},
      [n, d, k, out_w, rows, batch_stats, nbr = std::move(nbr), w_self = std::move(w_self), w_nbr = std::move(w_nbr),
       proj_self = std::move(proj_self), proj_nbr = std::move(proj_nbr), bias_v = std::move(bias_v), mu = std::move(mu),
       inv_std = std::move(inv_std), best_edge = std::move(best_edge), best_xhat = std::move(best_xhat),
       best_slope = std::move(best_slope)](Node& self) {
        const auto& K = kernels::active();
        const auto& gamma_v = self.parents[3]->value;
        // Gradient reaching the batch-norm output: nonzero only on each
        // point's winning edge per column.
        std::vector<double> dy(n * out_w);
        for (std::size_t q = 0; q < n * out_w; ++q) dy[q] = best_slope[q] * self.grad[q];
        std::vector<double> sum_g(out_w, 0.0), sum_gx(out_w, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < out_w; ++c) {
            sum_g[c] += dy[i * out_w + c];
            sum_gx[c] += dy[i * out_w + c] * best_xhat[i * out_w + c];
          }

        std::vector<double> g_self(n * out_w, 0.0), g_nbr(n * out_w, 0.0);
        const double inv_n = 1.0 / static_cast<double>(rows);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < k; ++r) {
            const std::size_t j = nbr[i * k + r];
            if (!batch_stats) {
              for (std::size_t c = 0; c < out_w; ++c) {
                if (best_edge[i * out_w + c] != r) continue;
                const double gi = gamma_v[c] * inv_std[c] * dy[i * out_w + c];
                g_self[i * out_w + c] += gi;
                g_nbr[j * out_w + c] += gi;
              }
              continue;
            }
            const double* ps = proj_self.data() + i * out_w;
            const double* pn = proj_nbr.data() + j * out_w;
            for (std::size_t c = 0; c < out_w; ++c) {
              const double h = ps[c] + pn[c] + bias_v[c];
              const double xhat = (h - mu[c]) * inv_std[c];
              const double gi = best_edge[i * out_w + c] == r ? dy[i * out_w + c] : 0.0;
              const double gh =
                  gamma_v[c] * inv_std[c] * (gi - inv_n * sum_g[c] - xhat * inv_n * sum_gx[c]);
              g_self[i * out_w + c] += gh;
              g_nbr[j * out_w + c] += gh;
            }
          }

        const auto& xv = self.parents[0]->value;
        if (double* gx = Node::grad_of(self.parents[0])) {
          K.gemm_nt(g_self.data(), w_self.data(), gx, n, out_w, d);
          K.gemm_nt(g_nbr.data(), w_nbr.data(), gx, n, out_w, d);
        }
        if (double* gw = Node::grad_of(self.parents[1])) {
          std::vector<double> dw_self(d * out_w, 0.0), dw_nbr(d * out_w, 0.0);
          K.gemm_tn(xv.data(), g_self.data(), dw_self.data(), n, d, out_w);
          K.gemm_tn(xv.data(), g_nbr.data(), dw_nbr.data(), n, d, out_w);
          for (std::size_t q = 0; q < d * out_w; ++q) {
            gw[q] += dw_self[q];
            gw[d * out_w + q] += dw_nbr[q] - dw_self[q];
          }
        }
        if (double* gb = Node::grad_of(self.parents[2]))
          for (std::size_t q = 0; q < g_self.size(); ++q) gb[q % out_w] += g_self[q];
        if (double* gg = Node::grad_of(self.parents[3]))
          for (std::size_t c = 0; c < out_w; ++c) gg[c] += sum_gx[c];
        if (double* gbeta = Node::grad_of(self.parents[4]))
          for (std::size_t c = 0; c < out_w; ++c) gbeta[c] += sum_g[c];
      });
}

}  // namespace meshssm::nd
